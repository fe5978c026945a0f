use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{BlockId, LoadBlock, ShedConditionTable, build_condition_table};
use crate::error::{Result, invalid};
use crate::sfr::DerivedParams;

/// Everything an outlet needs to act without the cloud during an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBundle {
    pub derived: DerivedParams,
    pub delta_p_s_mw: f64,
    pub f_s_hz: f64,
    pub condition_table: ShedConditionTable,
    pub block_id: BlockId,
    pub accumulated_power_mw: f64,
    pub switch_off_freq_hz: f64,
    pub issued_at_s: f64,
}

impl ParameterBundle {
    pub fn delta_p_s_pu(&self) -> f64 {
        self.derived.mw_to_pu(self.delta_p_s_mw)
    }

    /// Regenerating the table from the embedded constants reproduces it.
    pub fn is_consistent(&self) -> bool {
        build_condition_table(&self.derived, self.f_s_hz, self.condition_table.bin_width_hz)
            .is_ok_and(|t| t == self.condition_table)
    }

    /// Issued before the system parameters last changed.
    pub fn is_stale(&self, params_changed_at_s: f64) -> bool {
        self.issued_at_s < params_changed_at_s
    }
}

/// One bundle per block, in rank order.
pub fn make_bundles(
    derived: &DerivedParams,
    blocks: &[LoadBlock],
    f_s_hz: f64,
    table: &ShedConditionTable,
    issued_at_s: f64,
) -> Result<Vec<ParameterBundle>> {
    let delta_p_s_mw = derived.threshold_power_loss_mw(f_s_hz)?;
    blocks
        .iter()
        .map(|b| {
            let f_b = b.switch_off_freq_hz.ok_or_else(|| {
                invalid(format!("block {} has no switch-off frequency", b.block_id))
            })?;
            Ok(ParameterBundle {
                derived: *derived,
                delta_p_s_mw,
                f_s_hz,
                condition_table: table.clone(),
                block_id: b.block_id,
                accumulated_power_mw: b.accumulated_power_mw,
                switch_off_freq_hz: f_b,
                issued_at_s,
            })
        })
        .collect()
}

/// Pretty JSON array for inspection.
pub fn write_bundle_dump<W: Write>(out: W, bundles: &[ParameterBundle]) -> Result<()> {
    serde_json::to_writer_pretty(out, bundles)?;
    Ok(())
}
