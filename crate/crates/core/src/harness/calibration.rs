//! Fits the equivalent inertia and droop of the case study to its published
//! operating point: nadir time, threshold loss and first ROCOF threshold.

use crate::control::build_condition_table;
use crate::error::{Error, Result};
use crate::sfr::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub t_nadir_s: f64,
    /// Threshold of the top band of the condition table (Hz/s).
    pub first_threshold_hz_per_s: f64,
    pub delta_p_s_mw: f64,
    pub f_s_hz: f64,
    pub bin_width_hz: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            t_nadir_s: 3.72,
            first_threshold_hz_per_s: -0.3236,
            delta_p_s_mw: 351.9,
            f_s_hz: 49.5,
            bin_width_hz: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub h: f64,
    pub r: f64,
    pub s_base_mva: f64,
    pub iterations: usize,
}

fn residual(base: &SystemParams, h: f64, r: f64, tg: &CalibrationTargets) -> Result<[f64; 2]> {
    let d = SystemParams { h, r, ..*base }.derive()?;
    let table = build_condition_table(&d, tg.f_s_hz, tg.bin_width_hz)?;
    Ok([
        d.t_nadir() - tg.t_nadir_s,
        table.rows[0].rocof_threshold_hz_per_s - tg.first_threshold_hz_per_s,
    ])
}

/// Damped Newton iteration on (h, r) from the given starting point; the
/// base power then follows from the threshold-loss target. Neither residual
/// depends on the base power.
pub fn calibrate(
    base: &SystemParams,
    start: (f64, f64),
    targets: &CalibrationTargets,
) -> Result<Calibration> {
    let (mut h, mut r) = start;
    for it in 0..100 {
        let f0 = residual(base, h, r, targets)?;
        if f0[0].abs() < 1e-11 && f0[1].abs() < 1e-11 {
            let d = SystemParams { h, r, ..*base }.derive()?;
            let dp_s = d.threshold_power_loss(targets.f_s_hz)?;
            return Ok(Calibration { h, r, s_base_mva: targets.delta_p_s_mw / dp_s, iterations: it });
        }
        let (eh, er) = (h * 1e-7, r * 1e-7);
        let fh = residual(base, h + eh, r, targets)?;
        let fr = residual(base, h, r + er, targets)?;
        let j = [
            [(fh[0] - f0[0]) / eh, (fr[0] - f0[0]) / er],
            [(fh[1] - f0[1]) / eh, (fr[1] - f0[1]) / er],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Numerical("singular calibration Jacobian".into()));
        }
        let dh = (j[1][1] * f0[0] - j[0][1] * f0[1]) / det;
        let dr = (-j[1][0] * f0[0] + j[0][0] * f0[1]) / det;
        let norm = f0[0].abs() + f0[1].abs();
        let mut step = 1.0;
        loop {
            let (nh, nr) = (h - step * dh, r - step * dr);
            if nh > 0.0 && nr > 0.0 {
                if let Ok(f1) = residual(base, nh, nr, targets) {
                    if f1[0].abs() + f1[1].abs() < norm || step < 1e-6 {
                        h = nh;
                        r = nr;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-9 {
                return Err(Error::Numerical("calibration line search failed".into()));
            }
        }
    }
    Err(Error::Numerical("calibration did not converge".into()))
}
