//! Feeds a recorded trajectory through a single agent.

use serde::Serialize;

use crate::agent::{AgentConfig, Cause, DecisionRecord, EkfTracePoint, OutletAgent};
use crate::control::ParameterBundle;
use crate::error::{Error, Result};
use crate::sfr::FrequencySample;

/// Allowed jitter on the sample period.
pub const CADENCE_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayResult {
    pub decisions: Vec<DecisionRecord>,
    pub ekf_trace: Vec<EkfTracePoint>,
    pub detection_time_s: Option<f64>,
    pub lse_estimate_pu: Option<f64>,
    pub final_estimate_pu: Option<f64>,
    pub onset_estimate_s: Option<f64>,
}

impl ReplayResult {
    fn time_of(&self, cause: Cause) -> Option<f64> {
        self.decisions.iter().find(|d| d.cause == cause).map(|d| d.t_s)
    }

    pub fn switch_off_time_s(&self) -> Option<f64> {
        self.decisions.iter().find(|d| d.cause.is_switch_off()).map(|d| d.t_s)
    }

    pub fn decision_time_s(&self) -> Option<f64> {
        self.time_of(Cause::Criterion1).or(self.time_of(Cause::StayOn))
    }
}

pub fn replay(
    samples: &[FrequencySample],
    bundle: Option<&ParameterBundle>,
    mut config: AgentConfig,
) -> Result<ReplayResult> {
    let bundle = bundle.ok_or(Error::NoBundle)?;
    for w in samples.windows(2) {
        let step = w[1].t - w[0].t;
        if (step - config.cadence_s).abs() > CADENCE_TOLERANCE_S {
            return Err(Error::InvalidInput(format!(
                "sample spacing {step} s at t={} does not match cadence {} s",
                w[1].t, config.cadence_s
            )));
        }
    }
    config.record_ekf_trace = true;
    let mut agent = OutletAgent::new(0, config)?.with_bundle(bundle.clone());
    for s in samples {
        agent.ingest(*s)?;
    }
    let log = agent.decision_log();
    let detection_time_s = log.iter().find(|d| d.cause == Cause::EventDetected).map(|d| d.t_s);
    let lse_estimate_pu =
        log.iter().find(|d| d.cause == Cause::LseEstimate).and_then(|d| d.delta_p_est_pu);
    let final_estimate_pu = log
        .iter()
        .find(|d| matches!(d.cause, Cause::Criterion1 | Cause::StayOn))
        .and_then(|d| d.delta_p_est_pu);
    Ok(ReplayResult {
        decisions: log.to_vec(),
        ekf_trace: agent.ekf_trace().to_vec(),
        detection_time_s,
        lse_estimate_pu,
        final_estimate_pu,
        onset_estimate_s: agent.ekf_trace().last().map(|p| p.onset_s),
    })
}
