use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sfr::{DerivedParams, FrequencySample};

/// Ordinary least-squares slope of `f` against `t`.
pub fn ls_slope<I>(points: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
    I::IntoIter: Clone,
{
    let it = points.into_iter();
    let (mut n, mut st, mut sf) = (0.0, 0.0, 0.0);
    for (t, f) in it.clone() {
        n += 1.0;
        st += t;
        sf += f;
    }
    let (mt, mf) = (st / n, sf / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, f) in it {
        num += (t - mt) * (f - mf);
        den += (t - mt) * (t - mt);
    }
    num / den
}

/// Initial loss estimate (p.u.) from the slope of the first post-event samples.
pub fn lse_estimate(samples: &[FrequencySample], derived: &DerivedParams) -> f64 {
    let slope_hz = ls_slope(samples.iter().map(|s| (s.t, s.f)));
    derived.k_lse * slope_hz / derived.f_nominal_hz
}

/// Measurement model used by the filter: frequency as a function of the
/// loss size and its onset time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfModel {
    pub f_nominal_hz: f64,
    pub g1: f64,
    /// Amplitude of the decaying term at onset (`g1 * alpha`).
    pub g2_amplitude: f64,
    /// Envelope decay rate (`zeta * omega_n`, 1/s).
    pub decay: f64,
    pub omega_r: f64,
    pub phi: f64,
}

impl EkfModel {
    pub fn nominal(d: &DerivedParams) -> Self {
        Self {
            f_nominal_hz: d.f_nominal_hz,
            g1: d.g1,
            g2_amplitude: d.g1 * d.alpha,
            decay: d.zeta * d.omega_n,
            omega_r: d.omega_r,
            phi: d.phi,
        }
    }

    /// Multiplicative errors on (g1, g2, omega_n, omega_r, phi); each factor
    /// is applied to its own term only.
    pub fn perturbed(&self, rel: [f64; 5]) -> Self {
        Self {
            g1: self.g1 * (1.0 + rel[0]),
            g2_amplitude: self.g2_amplitude * (1.0 + rel[1]),
            decay: self.decay * (1.0 + rel[2]),
            omega_r: self.omega_r * (1.0 + rel[3]),
            phi: self.phi * (1.0 + rel[4]),
            ..*self
        }
    }

    /// Predicted frequency (Hz) and its gradient with respect to (loss, onset).
    pub fn observe(&self, x: [f64; 2], t: f64) -> (f64, [f64; 2]) {
        let [dp, onset] = x;
        let tau = t - onset;
        if tau <= 0.0 {
            return (self.f_nominal_hz, [0.0, 0.0]);
        }
        let g2 = self.g2_amplitude * (-self.decay * tau).exp();
        let (s, c) = (self.omega_r * tau + self.phi).sin_cos();
        let shape = self.g1 + g2 * s;
        let h = self.f_nominal_hz * (1.0 + dp * shape);
        let d_onset = self.f_nominal_hz * dp * g2 * (self.decay * s - self.omega_r * c);
        (h, [self.f_nominal_hz * shape, d_onset])
    }
}

/// Filter tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Process noise on the loss state (p.u.²).
    pub q_delta_p: f64,
    /// Process noise on the onset state (s²).
    pub q_onset: f64,
    /// Initial loss standard deviation relative to the larger of the
    /// starting estimate and the threshold loss.
    pub p0_delta_p_rel: f64,
    /// Initial onset standard deviation in sample periods.
    pub p0_onset_samples: f64,
    /// Measurement noise variance (Hz²).
    pub r_meas_hz2: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            q_delta_p: 1e-6,
            q_onset: 1e-8,
            p0_delta_p_rel: 0.2,
            p0_onset_samples: 6.0,
            r_meas_hz2: 1e-4,
        }
    }
}

/// Filter state over (loss p.u., onset s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfState {
    pub x: [f64; 2],
    pub p_cov: [[f64; 2]; 2],
    pub q_cov: [[f64; 2]; 2],
    pub r_meas: f64,
    pub k: usize,
}

/// Filter seeded from the least-squares estimate.
pub fn ekf_init(
    initial_loss_pu: f64,
    onset_guess_s: f64,
    loss_scale_pu: f64,
    cadence_s: f64,
    cfg: &EkfConfig,
) -> EkfState {
    let sd_p = cfg.p0_delta_p_rel * initial_loss_pu.abs().max(loss_scale_pu.abs());
    let sd_t = cfg.p0_onset_samples * cadence_s;
    EkfState {
        x: [initial_loss_pu, onset_guess_s],
        p_cov: [[sd_p * sd_p, 0.0], [0.0, sd_t * sd_t]],
        q_cov: [[cfg.q_delta_p, 0.0], [0.0, cfg.q_onset]],
        r_meas: cfg.r_meas_hz2,
        k: 0,
    }
}

/// One predict/update cycle with an identity state transition.
pub fn ekf_step(ekf: &mut EkfState, sample: &FrequencySample, model: &EkfModel) -> Result<()> {
    let mut p = ekf.p_cov;
    for (row, q) in p.iter_mut().zip(ekf.q_cov) {
        row[0] += q[0];
        row[1] += q[1];
    }
    let (h, jac) = model.observe(ekf.x, sample.t);
    let pj = [
        p[0][0] * jac[0] + p[0][1] * jac[1],
        p[1][0] * jac[0] + p[1][1] * jac[1],
    ];
    let s = jac[0] * pj[0] + jac[1] * pj[1] + ekf.r_meas;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Numerical(format!("innovation variance {s} at t={}", sample.t)));
    }
    let gain = [pj[0] / s, pj[1] / s];
    let innovation = sample.f - h;
    let x = [ekf.x[0] + gain[0] * innovation, ekf.x[1] + gain[1] * innovation];
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::Numerical(format!("non-finite state at t={}", sample.t)));
    }
    // Joseph form keeps the covariance positive semidefinite.
    let a = [
        [1.0 - gain[0] * jac[0], -gain[0] * jac[1]],
        [-gain[1] * jac[0], 1.0 - gain[1] * jac[1]],
    ];
    let mut ap = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ap[i][j] = a[i][0] * p[0][j] + a[i][1] * p[1][j];
        }
    }
    let mut next = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            next[i][j] = ap[i][0] * a[j][0] + ap[i][1] * a[j][1] + gain[i] * gain[j] * ekf.r_meas;
        }
    }
    let off = 0.5 * (next[0][1] + next[1][0]);
    next[0][1] = off;
    next[1][0] = off;
    ekf.x = x;
    ekf.p_cov = next;
    ekf.k += 1;
    Ok(())
}
