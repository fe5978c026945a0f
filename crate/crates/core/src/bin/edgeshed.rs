use clap::{Parser, Subcommand, ValueEnum};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use edgeshed::control::{
    ParameterBundle, build_condition_table, write_bundle_dump, write_command_log,
    write_condition_table,
};
use edgeshed::agent::write_decision_log;
use edgeshed::harness::closed_loop::{write_frequency_csv, write_switching_events};
use edgeshed::harness::groups::write_group_stats;
use edgeshed::harness::report::{estimate_summary, write_condition_results};
use edgeshed::harness::scenario::ParamNoise;
use edgeshed::harness::{
    Overrides, Scenario, build_ieee24, prepare_bundles, replay, run_closed_loop,
    run_condition_grid, run_ekf_mc, run_group_experiment, run_lse_mc,
};
use edgeshed::net::write_delivery_trace;
use edgeshed::provenance::Provenance;
use edgeshed::sfr::{NoiseModel, TrajectorySpec, read_trajectory_csv, sample_trajectory, write_trajectory_csv};
use edgeshed::{Error, Result};

#[derive(Parser)]
#[command(name = "edgeshed", version, about = "Outlet-level under-frequency load shedding simulator")]
struct Cli {
    /// Scenario TOML; the built-in IEEE 24-bus case when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Use the full-scale trial and fleet counts.
    #[arg(long, global = true)]
    full_scale: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derived constants, condition table and parameter bundles.
    Derive,
    /// Monte-Carlo experiments.
    Montecarlo {
        #[arg(value_enum)]
        experiment: Experiment,
    },
    /// Group-level switching from one noisy event.
    Groups,
    /// Full fleet driven against the frequency it shapes.
    Closedloop,
    /// Runs one agent over a recorded trajectory.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
        /// Bundle JSON (one bundle or an array; the first is used).
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Writes a noisy trajectory for the scenario's loss.
    Trajectory {
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        /// Gaussian noise std (Hz); the closed-loop noise when omitted.
        #[arg(long)]
        noise_std: Option<f64>,
        /// Seconds of pre-event samples.
        #[arg(long, default_value_t = 0.5)]
        pre: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    /// Condition-check probabilities.
    Table2,
    /// Least-squares estimates.
    Table3,
    /// Filter estimates.
    Table4,
    /// Filter estimates with 5% parameter errors.
    Table5,
}

/// Exit status 2 for bad input, 1 for failures while running.
enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let overrides = Overrides { seed: cli.seed, trials: cli.trials, ..Overrides::default() };
    let mut scn = match &cli.scenario {
        Some(p) => {
            let mut s = Scenario::load(p)?;
            s.apply(&overrides);
            s
        }
        None => build_ieee24(&overrides),
    };
    if cli.full_scale {
        scn.full_scale();
        if let Some(t) = cli.trials {
            scn.run.trials = t;
        }
    }
    scn.validate()?;
    Ok(scn)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let mut scn = load_scenario(cli).map_err(Failure::Usage)?;
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Usage(e.into()))?;
    let out = cli.out.as_path();
    let prov = Provenance::new(scn.sha256(), scn.run.seed);
    match &cli.command {
        Cmd::Derive => {
            let derived = scn.derived()?;
            let table = build_condition_table(&derived, scn.system.f_s_hz, scn.system.bin_width_hz)?;
            let mut w = create(out, "table1.csv")?;
            write_condition_table(&mut w, &table, Some(&prov))?;
            w.flush()?;
            let (_, _, bundles) = prepare_bundles(&scn)?;
            let mut w = create(out, "bundles.json")?;
            write_bundle_dump(&mut w, &bundles)?;
            w.flush()?;
            println!("omega_n={:.6}", derived.omega_n);
            println!("zeta={:.6}", derived.zeta);
            println!("omega_r={:.6}", derived.omega_r);
            println!("alpha={:.6}", derived.alpha);
            println!("phi={:.6}", derived.phi);
            println!("k_lse={:.6}", derived.k_lse);
            println!("t_nadir_s={:.4}", derived.t_nadir());
            println!(
                "delta_p_s_mw={:.3}",
                derived.threshold_power_loss_mw(scn.system.f_s_hz)?
            );
        }
        Cmd::Montecarlo { experiment } => match experiment {
            Experiment::Table2 => {
                let rows = run_condition_grid(&scn)?;
                let mut w = create(out, "table2.csv")?;
                write_condition_results(&mut w, &rows, Some(&prov))?;
                w.flush()?;
                for r in &rows {
                    println!(
                        "loss_mw={} noise_hz={} probability={:.6}",
                        r.loss_mw, r.noise_hz, r.probability
                    );
                }
            }
            Experiment::Table3 => {
                let r = run_lse_mc(&scn)?;
                let mut w = create(out, "table3.csv")?;
                r.lse_histogram.write_csv(&mut w, Some(&prov))?;
                w.flush()?;
                println!("{}", estimate_summary(&r, false));
            }
            Experiment::Table4 | Experiment::Table5 => {
                let name = if matches!(experiment, Experiment::Table5) {
                    scn.param_noise = Some(ParamNoise { fraction: 0.05 });
                    "table5.csv"
                } else {
                    scn.param_noise = None;
                    "table4.csv"
                };
                let prov = Provenance::new(scn.sha256(), scn.run.seed);
                let r = run_ekf_mc(&scn)?;
                let mut w = create(out, name)?;
                r.ekf_histogram.write_csv(&mut w, Some(&prov))?;
                w.flush()?;
                println!("{}", estimate_summary(&r, true));
            }
        },
        Cmd::Groups => {
            let r = run_group_experiment(&scn)?;
            let mut w = create(out, "groups.csv")?;
            write_group_stats(&mut w, &r.groups, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "groups_report.txt")?;
            r.report.write(&mut w, Some(&prov))?;
            w.flush()?;
            for l in r.report.lines() {
                println!("{l}");
            }
            println!("all_off_until={}", r.all_off_until);
            println!("all_on_from={}", r.all_on_from);
            println!("shed_after_commands_mw={:.3}", r.shed_after_commands_mw);
        }
        Cmd::Closedloop => {
            let r = run_closed_loop(&scn)?;
            let derived = scn.derived()?;
            let mut w = create(out, "fig22_with.csv")?;
            write_frequency_csv(&mut w, &r.with_shedding, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "fig22_without.csv")?;
            write_frequency_csv(&mut w, &r.without_shedding, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "decisions.csv")?;
            write_decision_log(&mut w, &r.decisions, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "commands.csv")?;
            write_command_log(&mut w, &r.commands, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "delivery_trace.csv")?;
            write_delivery_trace(&mut w, &r.trace, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "switching.csv")?;
            write_switching_events(&mut w, &derived, &r.events, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "closedloop_report.txt")?;
            r.report.write(&mut w, Some(&prov))?;
            w.flush()?;
            for l in r.report.lines() {
                println!("{l}");
            }
        }
        Cmd::Replay { trajectory, bundle } => {
            let samples = File::open(trajectory)
                .map_err(Error::from)
                .and_then(read_trajectory_csv)
                .map_err(Failure::Usage)?;
            let bundle = match bundle {
                Some(p) => Some(read_bundle(p).map_err(Failure::Usage)?),
                None if cli.scenario.is_some() => prepare_bundles(&scn)?.2.into_iter().next(),
                None => None,
            };
            let cfg = scn.agent_config(&scn.closed_loop.noise);
            let r = replay(&samples, bundle.as_ref(), cfg).map_err(|e| match e {
                Error::NoBundle => Failure::Usage(e),
                e => Failure::Runtime(e),
            })?;
            let mut w = create(out, "replay_decisions.csv")?;
            write_decision_log(&mut w, &r.decisions, Some(&prov))?;
            w.flush()?;
            let mut w = create(out, "replay_ekf.csv")?;
            prov.write_header(&mut w)?;
            writeln!(w, "t_s,delta_p_pu,onset_s")?;
            for p in &r.ekf_trace {
                writeln!(w, "{},{},{}", p.t_s, p.delta_p_pu, p.onset_s)?;
            }
            w.flush()?;
            let show = |name: &str, v: Option<f64>| match v {
                Some(v) => println!("{name}={v:.4}"),
                None => println!("{name}=none"),
            };
            show("detection_time_s", r.detection_time_s);
            show("lse_estimate_pu", r.lse_estimate_pu);
            show("final_estimate_pu", r.final_estimate_pu);
            show("switch_off_time_s", r.switch_off_time_s());
        }
        Cmd::Trajectory { duration, noise_std, pre } => {
            let derived = scn.derived()?;
            let noise = match noise_std {
                Some(s) => NoiseModel::Gaussian { std_hz: *s },
                None => scn.closed_loop.noise,
            };
            let mut spec = TrajectorySpec::new(duration + pre, noise, scn.run.seed);
            spec.start_s = scn.event.first_time() - pre;
            let samples = sample_trajectory(&derived, &scn.event.power_events(derived.s_base_mva), &spec)?;
            let mut w = create(out, "trajectory.csv")?;
            write_trajectory_csv(&mut w, &samples, Some(&prov))?;
            w.flush()?;
            println!("samples={}", samples.len());
        }
    }
    Ok(())
}

fn read_bundle(path: &Path) -> Result<ParameterBundle> {
    let text = fs::read_to_string(path)?;
    if let Ok(list) = serde_json::from_str::<Vec<ParameterBundle>>(&text) {
        return list.into_iter().next().ok_or(Error::NoBundle);
    }
    Ok(serde_json::from_str(&text)?)
}
