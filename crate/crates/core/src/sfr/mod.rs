//! Aggregate system frequency response after step power imbalances.
//!
//! Dynamics are kept in per-unit on `(s_base_mva, f_nominal_hz)`. Hz and MW
//! appear only in the `*_hz` / `*_mw` accessors.

mod ode;
mod trajectory;

pub use ode::{OdePoint, ode_oracle};
pub use trajectory::{
    FrequencySample, NoiseModel, NoiseSampler, SAMPLE_PERIOD_S, TrajectorySpec, read_trajectory_csv, sample_trajectory,
    write_trajectory_csv,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, invalid};
use crate::error::Error;

/// One synchronous generator as seen by the aggregate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorUnit {
    pub rating_mva: f64,
    pub inertia_h: f64,
    pub droop_r: f64,
}

fn check_units(units: &[GeneratorUnit], s_base: f64) -> Result<()> {
    if units.is_empty() {
        return Err(invalid("empty generator list"));
    }
    if !(s_base > 0.0) {
        return Err(invalid("system base must be positive"));
    }
    for u in units {
        if !(u.rating_mva > 0.0 && u.inertia_h > 0.0 && u.droop_r > 0.0) {
            return Err(invalid(format!("non-positive generator data: {u:?}")));
        }
    }
    Ok(())
}

/// Rating-weighted equivalent inertia on `s_base` (MVA).
pub fn aggregate_inertia(units: &[GeneratorUnit], s_base: f64) -> Result<f64> {
    check_units(units, s_base)?;
    Ok(units.iter().map(|u| u.inertia_h * u.rating_mva).sum::<f64>() / s_base)
}

/// Equivalent droop as the rating-weighted parallel combination of unit droops.
pub fn aggregate_droop(units: &[GeneratorUnit], s_base: f64) -> Result<f64> {
    check_units(units, s_base)?;
    let inv: f64 = units.iter().map(|u| u.rating_mva / s_base / u.droop_r).sum();
    Ok(1.0 / inv)
}

/// Physical constants of the aggregate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Equivalent inertia constant (s).
    pub h: f64,
    /// Load damping (p.u.).
    pub d: f64,
    /// Equivalent governor droop (p.u.).
    pub r: f64,
    /// Mechanical power gain factor.
    pub km: f64,
    /// High-pressure turbine fraction.
    pub fh: f64,
    /// Reheat time constant (s).
    pub tr: f64,
    pub s_base_mva: f64,
    pub f_nominal_hz: f64,
    pub p_load_total_mw: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("r", self.r),
            ("tr", self.tr),
            ("s_base_mva", self.s_base_mva),
            ("f_nominal_hz", self.f_nominal_hz),
            ("p_load_total_mw", self.p_load_total_mw),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(invalid(format!("d must be non-negative, got {}", self.d)));
        }
        if !(0.0..=1.0).contains(&self.fh) {
            return Err(invalid(format!("fh must lie in [0, 1], got {}", self.fh)));
        }
        if !(self.km > 0.0 && self.km.is_finite()) {
            return Err(invalid(format!("km must be positive, got {}", self.km)));
        }
        Ok(())
    }

    /// Modal constants of the closed-form response. Rejects non-oscillatory systems.
    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let SystemParams { h, d, r, km, fh, tr, .. } = *self;
        let stiffness = d * r + km;
        let omega_n = (stiffness / (2.0 * h * r * tr)).sqrt();
        let zeta = (2.0 * h * r + (d * r + km * fh) * tr) / (2.0 * stiffness) * omega_n;
        if zeta >= 1.0 {
            return Err(Error::Unsupported(format!(
                "damping ratio {zeta} >= 1; the closed form needs an oscillatory response"
            )));
        }
        let root = (1.0 - zeta * zeta).sqrt();
        let omega_r = omega_n * root;
        let alpha = ((1.0 - 2.0 * tr * zeta * omega_n + tr * tr * omega_n * omega_n)
            / (1.0 - zeta * zeta))
            .sqrt();
        let phi1 = (tr * omega_r).atan2(1.0 - zeta * omega_n * tr);
        let phi2 = root.atan2(-zeta);
        let phi = phi1 - phi2;
        let g1 = -r / stiffness;
        let k_lse = -stiffness / (alpha * omega_n * r * phi1.sin());
        Ok(DerivedParams {
            omega_n,
            zeta,
            omega_r,
            alpha,
            phi,
            phi1,
            k_lse,
            g1,
            f_nominal_hz: self.f_nominal_hz,
            s_base_mva: self.s_base_mva,
        })
    }
}

/// A step change in power balance. Positive `delta_p` is a loss of generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEvent {
    pub time: f64,
    /// p.u. on the system base.
    pub delta_p: f64,
}

impl PowerEvent {
    pub fn from_mw(time: f64, mw: f64, s_base_mva: f64) -> Self {
        Self { time, delta_p: mw / s_base_mva }
    }
}

/// Modal constants of the closed-form frequency response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub omega_n: f64,
    pub zeta: f64,
    pub omega_r: f64,
    pub alpha: f64,
    /// Phase of the oscillatory term in the deviation.
    pub phi: f64,
    /// Phase of the oscillatory term in the derivative.
    pub phi1: f64,
    /// Power loss (p.u.) per unit of initial ROCOF (p.u./s).
    pub k_lse: f64,
    /// Steady-state frequency gain per unit power loss (negative).
    pub g1: f64,
    pub f_nominal_hz: f64,
    pub s_base_mva: f64,
}

impl DerivedParams {
    /// Frequency deviation (p.u.) at `t` seconds after a step loss `delta_p` (p.u.).
    pub fn delta_f(&self, delta_p: f64, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let envelope = self.alpha * (-self.zeta * self.omega_n * t).exp();
        self.g1 * delta_p * (1.0 + envelope * (self.omega_r * t + self.phi).sin())
    }

    /// Superposed deviation of several steps, each active from its own time.
    pub fn delta_f_multi(&self, events: &[PowerEvent], t: f64) -> f64 {
        events
            .iter()
            .filter(|e| t >= e.time)
            .map(|e| self.delta_f(e.delta_p, t - e.time))
            .sum()
    }

    /// ROCOF (p.u./s) of a single step response.
    pub fn rocof(&self, delta_p: f64, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let envelope = self.alpha * self.omega_n * (-self.zeta * self.omega_n * t).exp();
        self.g1 * delta_p * envelope * (self.omega_r * t + self.phi1).sin()
    }

    pub fn rocof_hz(&self, delta_p: f64, t: f64) -> f64 {
        self.rocof(delta_p, t) * self.f_nominal_hz
    }

    pub fn rocof_multi(&self, events: &[PowerEvent], t: f64) -> f64 {
        events
            .iter()
            .filter(|e| t >= e.time)
            .map(|e| self.rocof(e.delta_p, t - e.time))
            .sum()
    }

    /// Absolute frequency (Hz) under a set of events.
    pub fn frequency_hz(&self, events: &[PowerEvent], t: f64) -> f64 {
        self.f_nominal_hz * (1.0 + self.delta_f_multi(events, t))
    }

    /// Time of the frequency minimum after a step, independent of its size.
    pub fn t_nadir(&self) -> f64 {
        (PI - self.phi1) / self.omega_r
    }

    /// Arctangent form of the nadir time. Agrees with [`Self::t_nadir`] only
    /// when `zeta * omega_n * tr > 1`, i.e. when `phi1` lies in the second quadrant.
    pub fn t_nadir_arctan(&self, tr: f64) -> f64 {
        (tr * self.omega_r / (self.zeta * self.omega_n * tr - 1.0)).atan() / self.omega_r
    }

    pub fn f_nadir_hz(&self, delta_p: f64) -> f64 {
        self.f_nominal_hz * (1.0 + self.delta_f(delta_p, self.t_nadir()))
    }

    /// Loss (p.u.) whose nadir lands exactly on `f_s_hz`.
    pub fn threshold_power_loss(&self, f_s_hz: f64) -> Result<f64> {
        if !(f_s_hz <= self.f_nominal_hz) {
            return Err(invalid(format!(
                "objective frequency {f_s_hz} Hz must not exceed nominal {} Hz",
                self.f_nominal_hz
            )));
        }
        let drop = (self.f_nominal_hz - f_s_hz) / self.f_nominal_hz;
        Ok(drop / -self.delta_f(1.0, self.t_nadir()))
    }

    pub fn threshold_power_loss_mw(&self, f_s_hz: f64) -> Result<f64> {
        Ok(self.pu_to_mw(self.threshold_power_loss(f_s_hz)?))
    }

    pub fn pu_to_mw(&self, pu: f64) -> f64 {
        pu * self.s_base_mva
    }

    pub fn mw_to_pu(&self, mw: f64) -> f64 {
        mw / self.s_base_mva
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

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
    fn aggregates() {
        let u = |s, h, r| GeneratorUnit { rating_mva: s, inertia_h: h, droop_r: r };
        let h = aggregate_inertia(&[u(100.0, 5.0, 0.05), u(300.0, 10.0, 0.05)], 400.0).unwrap();
        assert_relative_eq!(h, 8.75, epsilon = 1e-12);
        assert_relative_eq!(aggregate_inertia(&[u(200.0, 7.0, 0.05)], 200.0).unwrap(), 7.0);
        let r = aggregate_droop(&[u(100.0, 5.0, 0.05), u(100.0, 5.0, 0.05)], 200.0).unwrap();
        assert_relative_eq!(r, 0.05, epsilon = 1e-12);
        let r = aggregate_droop(&[u(100.0, 5.0, 0.04), u(100.0, 5.0, 0.08)], 200.0).unwrap();
        assert_relative_eq!(r, 0.16 / 3.0, epsilon = 1e-12);
        assert!(aggregate_inertia(&[], 100.0).is_err());
        assert!(aggregate_droop(&[u(100.0, 5.0, 0.0)], 100.0).is_err());
    }

    #[test]
    fn derived_identities() {
        let d = toy().derive().unwrap();
        assert_relative_eq!(d.omega_r, d.omega_n * (1.0 - d.zeta * d.zeta).sqrt());
        assert_eq!(d, toy().derive().unwrap());
        assert!(d.alpha > 0.0);
        // Response starts from zero deviation with slope -dp/(2H).
        assert!(d.delta_f(0.3, 0.0).abs() < 1e-15);
        assert_relative_eq!(d.rocof(0.3, 0.0), -0.3 / (2.0 * 5.0), epsilon = 1e-12);
        assert_relative_eq!(d.k_lse, -2.0 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn steady_state_and_zero_forcing() {
        let d = toy().derive().unwrap();
        assert_relative_eq!(d.delta_f(0.1, 200.0), -0.005, epsilon = 1e-9);
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(d.delta_f(0.0, t), 0.0);
            assert_eq!(d.rocof(0.0, t), 0.0);
        }
    }

    #[test]
    fn nadir_is_minimum() {
        let d = toy().derive().unwrap();
        let tn = d.t_nadir();
        assert!(d.rocof(1.0, tn).abs() < 1e-9);
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for k in 0..30_000 {
            let t = k as f64 * 1e-3;
            let v = d.delta_f(1.0, t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        assert!((best_t - tn).abs() <= 1e-3);
    }

    #[test]
    fn threshold_inverse() {
        let d = toy().derive().unwrap();
        let dp = d.threshold_power_loss(49.5).unwrap();
        assert!((d.f_nadir_hz(dp) - 49.5).abs() < 1e-9);
        assert_eq!(d.threshold_power_loss(50.0).unwrap(), 0.0);
        assert!(d.threshold_power_loss(50.1).is_err());
    }

    #[test]
    fn overdamped_rejected() {
        let mut p = toy();
        p.h = 50.0;
        p.tr = 0.1;
        assert!(matches!(p.derive(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cancellation() {
        let d = toy().derive().unwrap();
        let ev = [PowerEvent { time: 0.0, delta_p: 0.2 }, PowerEvent { time: 0.0, delta_p: -0.2 }];
        for t in [0.0, 0.5, 3.0, 40.0] {
            assert!(d.delta_f_multi(&ev, t).abs() < 1e-15);
        }
    }
}
