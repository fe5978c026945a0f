use approx::assert_relative_eq;
use proptest::prelude::*;

use edgeshed::Error;
use edgeshed::harness::{Overrides, build_ieee24};
use edgeshed::sfr::{
    DerivedParams, NoiseModel, PowerEvent, SystemParams, TrajectorySpec, ode_oracle,
    read_trajectory_csv, sample_trajectory, write_trajectory_csv,
};

fn ieee24() -> DerivedParams {
    build_ieee24(&Overrides::default()).derived().unwrap()
}

prop_compose! {
    fn underdamped()(
        h in 2.0..12.0f64,
        d in 0.5..3.0f64,
        r in 0.03..0.1f64,
        km in 0.8..1.0f64,
        fh in 0.15..0.4f64,
        tr in 4.0..12.0f64,
    ) -> SystemParams {
        SystemParams {
            h, d, r, km, fh, tr,
            s_base_mva: 1000.0,
            f_nominal_hz: 50.0,
            p_load_total_mw: 1000.0,
        }
    }
}

/// Minimum of the closed form on a fine grid; independent of the nadir formula.
fn grid_minimum(d: &DerivedParams, dp: f64, t_end: f64) -> (f64, f64) {
    let n = (t_end / 1e-3) as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * 1e-3;
            (t, d.delta_f(dp, t))
        })
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// First time the single-step trajectory falls to `f_hz`, by bisection.
fn crossing(d: &DerivedParams, dp: f64, f_hz: f64) -> f64 {
    let f = |t: f64| d.f_nominal_hz * (1.0 + d.delta_f(dp, t));
    let (mut lo, mut hi) = (0.0, d.t_nadir());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > f_hz { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn closed_form_matches_integration(p in underdamped(), dp in 0.01..0.3f64) {
        prop_assume!(p.derive().is_ok());
        let d = p.derive().unwrap();
        let ode = ode_oracle(&p, &[PowerEvent { time: 0.0, delta_p: dp }], 20.0, 1e-3).unwrap();
        for pt in ode.iter().step_by(50) {
            prop_assert!((pt.delta_f - d.delta_f(dp, pt.t)).abs() < 1e-5);
        }
    }

    #[test]
    fn superposition_matches_integration(
        p in underdamped(),
        a in 0.01..0.2f64,
        b in -0.1..0.1f64,
        t1 in 0.1..5.0f64,
    ) {
        prop_assume!(p.derive().is_ok());
        let d = p.derive().unwrap();
        let events = [PowerEvent { time: 0.0, delta_p: a }, PowerEvent { time: t1, delta_p: b }];
        let ode = ode_oracle(&p, &events, 15.0, 1e-3).unwrap();
        for pt in ode.iter().step_by(37) {
            let expect = d.delta_f(a, pt.t) + if pt.t >= t1 { d.delta_f(b, pt.t - t1) } else { 0.0 };
            prop_assert!((pt.delta_f - expect).abs() < 1e-5, "t={} {} {}", pt.t, pt.delta_f, expect);
        }
    }

    #[test]
    fn nadir_time_and_depth(p in underdamped(), dp in 0.01..0.3f64) {
        prop_assume!(p.derive().is_ok());
        let d = p.derive().unwrap();
        let (t_min, df_min) = grid_minimum(&d, dp, 4.0 * d.t_nadir());
        prop_assert!((t_min - d.t_nadir()).abs() < 2e-3);
        // sampled minimum can only sit above the true one
        let gap = d.f_nominal_hz * (1.0 + df_min) - d.f_nadir_hz(dp);
        prop_assert!((-1e-12..1e-5).contains(&gap), "{gap}");
        prop_assert!(d.f_nadir_hz(dp) <= d.f_nominal_hz * (1.0 + d.delta_f(dp, 60.0)));
    }

    #[test]
    fn threshold_inverts_nadir(p in underdamped(), drop in 0.01..2.0f64) {
        prop_assume!(p.derive().is_ok());
        let d = p.derive().unwrap();
        let f_s = d.f_nominal_hz - drop;
        let dps = d.threshold_power_loss(f_s).unwrap();
        prop_assert!((d.f_nadir_hz(dps) - f_s).abs() < 1e-9);
    }

    #[test]
    fn rocof_is_derivative(p in underdamped(), dp in 0.01..0.3f64, t in 0.01..30.0f64) {
        prop_assume!(p.derive().is_ok());
        let d = p.derive().unwrap();
        let h = 1e-6;
        let fd = (d.delta_f(dp, t + h) - d.delta_f(dp, t - h)) / (2.0 * h);
        prop_assert!((fd - d.rocof(dp, t)).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn larger_loss_has_lower_rocof_at_equal_frequency(
        small in 0.05..0.2f64,
        extra in 0.01..0.2f64,
        depth in 0.05..0.95f64,
    ) {
        let d = ieee24();
        let large = small + extra;
        // a frequency both trajectories reach before their nadirs
        let f = d.f_nominal_hz - depth * (d.f_nominal_hz - d.f_nadir_hz(small));
        let ra = d.rocof_hz(large, crossing(&d, large, f));
        let rb = d.rocof_hz(small, crossing(&d, small, f));
        prop_assert!(ra < rb, "{ra} !< {rb}");
    }
}

#[test]
fn rocof_sweep_is_ordered_at_every_band_edge() {
    let d = ieee24();
    let losses_mw = [100.0, 200.0, 300.0, 351.9, 400.0, 500.0, 600.0];
    let f_min = d.f_nadir_hz(d.mw_to_pu(100.0));
    for k in 1..=9 {
        let f = 50.0 - k as f64 * 0.05;
        if f <= f_min {
            break;
        }
        let r: Vec<f64> = losses_mw
            .iter()
            .map(|&mw| {
                let dp = d.mw_to_pu(mw);
                d.rocof_hz(dp, crossing(&d, dp, f))
            })
            .collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "f={f}: {r:?}");
    }
}

#[test]
fn initial_rocof_is_loss_over_twice_inertia() {
    let p = build_ieee24(&Overrides::default()).params().unwrap();
    let d = p.derive().unwrap();
    let dp = d.mw_to_pu(500.0);
    assert_relative_eq!(d.rocof(dp, 0.0), -dp / (2.0 * p.h), max_relative = 1e-12);
    assert_relative_eq!(d.k_lse, -2.0 * p.h, max_relative = 1e-12);
}

#[test]
fn steady_state_deviation() {
    let p = build_ieee24(&Overrides::default()).params().unwrap();
    let d = p.derive().unwrap();
    let expect = -p.r / (p.d * p.r + p.km) * 0.1;
    assert_relative_eq!(d.delta_f(0.1, 200.0), expect, max_relative = 1e-9);
    assert_eq!(d.delta_f(0.0, 3.0), 0.0);
    assert_eq!(d.delta_f(0.1, -1.0), 0.0);
}

#[test]
fn calibrated_case_operating_point() {
    let d = ieee24();
    assert!((d.threshold_power_loss_mw(49.5).unwrap() - 351.90).abs() < 0.01);
    assert!((d.t_nadir() - 3.72).abs() < 0.005);
    assert_relative_eq!(d.f_nadir_hz(d.threshold_power_loss(49.5).unwrap()), 49.5, epsilon = 1e-10);
    // nominal objective needs no loss; above nominal is meaningless
    assert_eq!(d.threshold_power_loss(50.0).unwrap(), 0.0);
    assert!(matches!(d.threshold_power_loss(50.1), Err(Error::InvalidInput(_))));
}

#[test]
fn arctan_nadir_form_agrees_in_its_quadrant() {
    let p = build_ieee24(&Overrides::default()).params().unwrap();
    let d = p.derive().unwrap();
    assert!(d.zeta * d.omega_n * p.tr > 1.0);
    assert_relative_eq!(d.t_nadir_arctan(p.tr), d.t_nadir(), max_relative = 1e-12);
}

#[test]
fn overdamped_parameters_are_unsupported() {
    let mut p = build_ieee24(&Overrides::default()).params().unwrap();
    p.h = 50.0;
    p.tr = 0.1;
    assert!(matches!(p.derive(), Err(Error::Unsupported(_))));
    // the integrator still handles it
    let ode = ode_oracle(&p, &[PowerEvent { time: 0.0, delta_p: 0.1 }], 5.0, 1e-3).unwrap();
    assert!(ode.last().unwrap().delta_f < 0.0);
}

#[test]
fn trajectory_csv_round_trip() {
    let d = ieee24();
    let mut spec = TrajectorySpec::new(1.0, NoiseModel::Gaussian { std_hz: 0.01 }, 9);
    spec.analytic_rocof = true;
    let s = sample_trajectory(&d, &[PowerEvent { time: 0.0, delta_p: 0.2 }], &spec).unwrap();
    assert_eq!(s.len(), 63);
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &s, None).unwrap();
    assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), s);
}

#[test]
fn trajectory_csv_errors_carry_line() {
    let text = "# comment\nt_s,f_hz,rocof_hz_per_s\n0,50,\n0.016,abc,\n";
    match read_trajectory_csv(text.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let text = "t_s,f_hz\n0.1,50\n0.05,50\n";
    assert!(matches!(read_trajectory_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    assert!(matches!(read_trajectory_csv("a,b\n".as_bytes()), Err(Error::Parse { .. })));
}
