//! Monte-Carlo experiments over independent noisy measurement streams.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::report::Histogram;
use super::scenario::Scenario;
use crate::agent::{
    AgentConfig, ConditionChecker, EkfModel, ekf_init, ekf_step, ls_slope, lse_estimate,
};
use crate::control::{ShedConditionTable, build_condition_table};
use crate::error::Result;
use crate::rng::{SimRng, derive_seed, substream};
use crate::sfr::{DerivedParams, FrequencySample, NoiseModel, NoiseSampler, PowerEvent};

pub(crate) const SALT_CONDITION: u64 = 2;
pub(crate) const SALT_ESTIMATE: u64 = 3;
pub(crate) const SALT_PARAM_NOISE: u64 = 5;

/// Samples at integer multiples of the cadence, `k` in `first..=last`, with a
/// single loss at t = 0.
fn noisy_window(
    derived: &DerivedParams,
    loss_pu: f64,
    first: i64,
    last: i64,
    cadence: f64,
    noise: &NoiseSampler,
    rng: &mut SimRng,
) -> Vec<FrequencySample> {
    let ev = [PowerEvent { time: 0.0, delta_p: loss_pu }];
    (first..=last)
        .map(|k| {
            let t = k as f64 * cadence;
            FrequencySample { t, f: derived.frequency_hz(&ev, t) + noise.draw(rng), rocof: None }
        })
        .collect()
}

/// Condition check over a window anchored at the loss instant; the sliding
/// ROCOF includes samples from before the loss.
fn condition_on_window(
    samples: &[FrequencySample],
    zero_index: usize,
    table: &ShedConditionTable,
    cfg: &AgentConfig,
) -> ConditionChecker {
    let mut checker = ConditionChecker::new(cfg.condition_window, cfg.n_required);
    let w = cfg.rocof_window;
    for k in 1..=cfg.condition_window {
        let i = zero_index + k;
        let rocof = ls_slope(samples[i + 1 - w..=i].iter().map(|s| (s.t, s.f)));
        checker.observe(table, samples[i].f, Some(rocof));
    }
    checker
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionMcResult {
    pub loss_mw: f64,
    pub noise_hz: f64,
    pub trials: usize,
    pub shed_needed: usize,
    pub probability: f64,
    pub std_err: f64,
}

/// Probability that the condition check calls for shedding.
pub fn run_condition_mc(
    scn: &Scenario,
    loss_mw: f64,
    noise: NoiseModel,
    trials: usize,
    seed: u64,
) -> Result<ConditionMcResult> {
    let derived = scn.derived()?;
    let table = build_condition_table(&derived, scn.system.f_s_hz, scn.system.bin_width_hz)?;
    let cfg = scn.agent;
    let sampler = noise.sampler();
    let loss_pu = derived.mw_to_pu(loss_mw);
    let pre = cfg.rocof_window as i64 - 1;
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let s = noisy_window(
                &derived,
                loss_pu,
                -pre,
                cfg.condition_window as i64,
                cfg.cadence_s,
                &sampler,
                &mut rng,
            );
            condition_on_window(&s, pre as usize, &table, &cfg).shed_needed()
        })
        .collect();
    let shed_needed = hits.iter().filter(|&&h| h).count();
    let p = shed_needed as f64 / trials as f64;
    Ok(ConditionMcResult {
        loss_mw,
        noise_hz: match noise {
            NoiseModel::Uniform { half_width_hz } => half_width_hz,
            NoiseModel::Gaussian { std_hz } => std_hz,
            NoiseModel::None => 0.0,
        },
        trials,
        shed_needed,
        probability: p,
        std_err: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

/// The full condition grid of the scenario (losses × uniform noise levels).
pub fn run_condition_grid(scn: &Scenario) -> Result<Vec<ConditionMcResult>> {
    let mut out = Vec::new();
    let mut idx = 0u64;
    for &loss in &scn.montecarlo.condition_losses_mw {
        for &b in &scn.montecarlo.condition_noise_hz {
            let noise = if b > 0.0 { NoiseModel::Uniform { half_width_hz: b } } else { NoiseModel::None };
            let seed = derive_seed(derive_seed(scn.run.seed, SALT_CONDITION), idx);
            out.push(run_condition_mc(scn, loss, noise, scn.run.trials, seed)?);
            idx += 1;
        }
    }
    Ok(out)
}

/// Outcome of one estimation trial with the loss instant known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialEstimate {
    /// p.u. on the system base.
    pub lse_pu: f64,
    pub ekf_pu: f64,
    pub shed_needed: bool,
}

/// Least squares on the first samples after the loss, then the filter on the
/// following ones, plus the condition check on the same stream.
#[allow(clippy::too_many_arguments)]
pub fn estimate_known_onset(
    derived: &DerivedParams,
    model: &EkfModel,
    table: &ShedConditionTable,
    cfg: &AgentConfig,
    loss_pu: f64,
    loss_scale_pu: f64,
    noise: &NoiseSampler,
    rng: &mut SimRng,
) -> Result<TrialEstimate> {
    let pre = cfg.rocof_window as i64 - 1;
    let last = ((cfg.lse_window + cfg.ekf_iterations) as i64 - 1).max(cfg.condition_window as i64);
    let s = noisy_window(derived, loss_pu, -pre, last, cfg.cadence_s, noise, rng);
    let zero = pre as usize;
    let checker = condition_on_window(&s, zero, table, cfg);
    let lse_pu = lse_estimate(&s[zero..zero + cfg.lse_window], derived);
    let mut ekf = ekf_init(lse_pu, 0.0, loss_scale_pu, cfg.cadence_s, &cfg.ekf);
    let start = zero + cfg.lse_window;
    for sample in &s[start..start + cfg.ekf_iterations] {
        ekf_step(&mut ekf, sample, model)?;
    }
    Ok(TrialEstimate { lse_pu, ekf_pu: ekf.x[0], shed_needed: checker.shed_needed() })
}

/// Five independent relative errors, uniform on ±fraction.
pub fn draw_param_errors(rng: &mut SimRng, fraction: f64) -> [f64; 5] {
    let mut e = [0.0; 5];
    if fraction > 0.0 {
        for v in &mut e {
            *v = rng.random_range(-fraction..=fraction);
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMcResult {
    pub trials: usize,
    /// True loss in report units.
    pub truth: f64,
    pub lse_histogram: Histogram,
    pub ekf_histogram: Histogram,
    pub lse_within: f64,
    pub ekf_within: f64,
    pub lse_mean: f64,
    pub ekf_mean: f64,
    pub param_noise: f64,
}

fn estimate_mc(scn: &Scenario, trials: usize, seed: u64, param_fraction: f64) -> Result<EstimateMcResult> {
    let derived = scn.derived()?;
    let table = build_condition_table(&derived, scn.system.f_s_hz, scn.system.bin_width_hz)?;
    let cfg = scn.agent_config(&scn.noise);
    let sampler = scn.noise.sampler();
    let loss_pu = derived.mw_to_pu(scn.event.total_mw());
    let nominal = EkfModel::nominal(&derived);
    let dp_s = derived.threshold_power_loss(scn.system.f_s_hz)?;
    let results: Vec<TrialEstimate> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let model = if param_fraction > 0.0 {
                let mut prng = substream(derive_seed(seed, SALT_PARAM_NOISE), i as u64);
                nominal.perturbed(draw_param_errors(&mut prng, param_fraction))
            } else {
                nominal
            };
            estimate_known_onset(&derived, &model, &table, &cfg, loss_pu, dp_s, &sampler, &mut rng)
        })
        .collect::<Result<_>>()?;
    let truth = scn.to_report_units(loss_pu);
    let acc = scn.montecarlo.accuracy;
    let lse: Vec<f64> = results.iter().map(|r| scn.to_report_units(r.lse_pu)).collect();
    let ekf: Vec<f64> = results.iter().map(|r| scn.to_report_units(r.ekf_pu)).collect();
    let within = |v: &[f64]| v.iter().filter(|x| ((*x - truth) / truth).abs() < acc).count() as f64 / v.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut lse_histogram = Histogram::uniform(0.0, 2.0 * truth, scn.montecarlo.lse_bin);
    let mut ekf_histogram = Histogram::uniform(
        truth * (1.0 - 5.0 * acc),
        truth * (1.0 + 5.0 * acc),
        scn.montecarlo.ekf_bin,
    );
    lse.iter().for_each(|&v| lse_histogram.add(v));
    ekf.iter().for_each(|&v| ekf_histogram.add(v));
    Ok(EstimateMcResult {
        trials,
        truth,
        lse_within: within(&lse),
        ekf_within: within(&ekf),
        lse_mean: mean(&lse),
        ekf_mean: mean(&ekf),
        lse_histogram,
        ekf_histogram,
        param_noise: param_fraction,
    })
}

/// Least-squares estimates only (the filter runs on the same trials).
pub fn run_lse_mc(scn: &Scenario) -> Result<EstimateMcResult> {
    estimate_mc(scn, scn.run.trials, derive_seed(scn.run.seed, SALT_ESTIMATE), 0.0)
}

/// Filter estimates with the scenario's parameter noise, if any.
pub fn run_ekf_mc(scn: &Scenario) -> Result<EstimateMcResult> {
    let frac = scn.param_noise.map_or(0.0, |p| p.fraction);
    estimate_mc(scn, scn.run.trials, derive_seed(scn.run.seed, SALT_ESTIMATE), frac)
}
