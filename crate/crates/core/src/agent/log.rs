use serde::{Deserialize, Serialize};
use std::io::Write;

use super::Phase;
use crate::control::OutletId;
use crate::error::Result;
use crate::provenance::Provenance;

/// Why an agent logged an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    EventDetected,
    LseEstimate,
    /// Local estimate exceeds the block's accumulated power.
    Criterion1,
    /// Frequency fell below the block's switch-off frequency.
    Criterion2,
    /// Off-command from the control center.
    Criterion3,
    StayOn,
    CommandOn,
    EpisodeEnd,
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::EventDetected => "event_detected",
            Cause::LseEstimate => "lse_estimate",
            Cause::Criterion1 => "criterion1",
            Cause::Criterion2 => "criterion2",
            Cause::Criterion3 => "criterion3",
            Cause::StayOn => "stay_on",
            Cause::CommandOn => "command_on",
            Cause::EpisodeEnd => "episode_end",
        }
    }

    pub fn is_switch_off(self) -> bool {
        matches!(self, Cause::Criterion1 | Cause::Criterion2 | Cause::Criterion3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t_s: f64,
    pub outlet_id: OutletId,
    /// Phase after the entry.
    pub phase: Phase,
    pub cause: Cause,
    pub delta_p_est_pu: Option<f64>,
}

pub fn write_decision_log<W: Write>(
    mut out: W,
    log: &[DecisionRecord],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "outlet_id", "phase", "cause", "delta_p_est_pu"])?;
    for r in log {
        w.write_record([
            r.t_s.to_string(),
            r.outlet_id.to_string(),
            r.phase.as_str().to_string(),
            r.cause.as_str().to_string(),
            r.delta_p_est_pu.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
