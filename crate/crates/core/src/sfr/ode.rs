use super::{PowerEvent, SystemParams};
use crate::error::{Result, invalid};

/// One output point of the numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdePoint {
    pub t: f64,
    /// Frequency deviation (p.u.).
    pub delta_f: f64,
}

/// Swing equation with a reheat governor realized as a two-state linear block.
///
/// States are the frequency deviation and the reheat lag output; the
/// mechanical power is `fh * u + z` with governor signal `u = -km/r * df`.
fn derivative(p: &SystemParams, load_step: f64, y: [f64; 2]) -> [f64; 2] {
    let [df, z] = y;
    let u = -p.km / p.r * df;
    let pm = p.fh * u + z;
    let ddf = (pm - load_step - p.d * df) / (2.0 * p.h);
    let dz = ((1.0 - p.fh) * u - z) / p.tr;
    [ddf, dz]
}

fn rk4(p: &SystemParams, load: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = derivative(p, load, y);
    let k2 = derivative(p, load, add(y, k1, h / 2.0));
    let k3 = derivative(p, load, add(y, k2, h / 2.0));
    let k4 = derivative(p, load, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Fixed-step RK4 integration from rest over `[0, t_end]`.
///
/// Steps are split at event instants so each step sees a constant load.
/// Works for any damping regime, including the overdamped ones the closed
/// form rejects.
pub fn ode_oracle(
    params: &SystemParams,
    events: &[PowerEvent],
    t_end: f64,
    dt: f64,
) -> Result<Vec<OdePoint>> {
    params.validate()?;
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(invalid(format!("step {dt} s must lie in (0, 1 ms]")));
    }
    if !(t_end >= 0.0) {
        return Err(invalid("t_end must be non-negative"));
    }
    let load_at = |t: f64| -> f64 {
        events.iter().filter(|e| e.time <= t).map(|e| e.delta_p).sum()
    };
    let n = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = [0.0, 0.0];
    out.push(OdePoint { t: 0.0, delta_f: 0.0 });
    for k in 0..n {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let mut t = t0;
        let mut cuts: Vec<f64> = events
            .iter()
            .map(|e| e.time)
            .filter(|&te| te > t0 && te < t1)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.push(t1);
        for cut in cuts {
            if cut > t {
                y = rk4(params, load_at(t), y, cut - t);
                t = cut;
            }
        }
        out.push(OdePoint { t: t1, delta_f: y[0] });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SystemParams {
        SystemParams {
            h: 5.0,
            d: 1.0,
            r: 0.05,
            km: 0.95,
            fh: 0.3,
            tr: 8.0,
            s_base_mva: 100.0,
            f_nominal_hz: 50.0,
            p_load_total_mw: 1000.0,
        }
    }

    #[test]
    fn flat_without_events() {
        let tr = ode_oracle(&toy(), &[], 5.0, 1e-3).unwrap();
        assert!(tr.iter().all(|p| p.delta_f == 0.0));
        assert_eq!(tr.len(), 5001);
    }

    #[test]
    fn matches_closed_form() {
        let p = toy();
        let d = p.derive().unwrap();
        let ev = [PowerEvent { time: 0.0, delta_p: 0.1 }];
        let tr = ode_oracle(&p, &ev, 30.0, 1e-3).unwrap();
        let worst = tr
            .iter()
            .map(|pt| (pt.delta_f - d.delta_f(0.1, pt.t)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn matches_superposition_between_steps() {
        let p = toy();
        let d = p.derive().unwrap();
        let ev = [
            PowerEvent { time: 0.0, delta_p: 0.2 },
            PowerEvent { time: 1.2345, delta_p: -0.07 },
        ];
        let tr = ode_oracle(&p, &ev, 30.0, 1e-3).unwrap();
        let worst = tr
            .iter()
            .map(|pt| (pt.delta_f - d.delta_f_multi(&ev, pt.t)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn rejects_coarse_step() {
        assert!(ode_oracle(&toy(), &[], 1.0, 0.01).is_err());
    }
}
