use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use super::{BlockId, LoadBlock, OutletId, SwitchState};
use crate::agent::min_shed_requirement;
use crate::error::Result;
use crate::provenance::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    On,
    Off,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::On => "on",
            Command::Off => "off",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub t_s: f64,
    pub outlet_id: OutletId,
    pub command: Command,
}

/// State an outlet in a block with accumulated power `accumulated_mw` should be in.
pub fn expected_state(shed_requirement_mw: f64, accumulated_mw: f64) -> SwitchState {
    if shed_requirement_mw > accumulated_mw { SwitchState::Off } else { SwitchState::On }
}

/// Commands for outlets whose observed state differs from the expected one.
/// Outlets without an observed state are left alone.
pub fn direct_shed_commands(
    estimated_loss_mw: f64,
    delta_p_s_mw: f64,
    blocks: &[LoadBlock],
    block_of: &BTreeMap<OutletId, BlockId>,
    observed: &BTreeMap<OutletId, SwitchState>,
) -> Vec<(OutletId, Command)> {
    let shed = min_shed_requirement(estimated_loss_mw, delta_p_s_mw);
    let accumulated: BTreeMap<BlockId, f64> =
        blocks.iter().map(|b| (b.block_id, b.accumulated_power_mw)).collect();
    observed
        .iter()
        .filter_map(|(&id, &state)| {
            let acc = *accumulated.get(block_of.get(&id)?)?;
            let want = expected_state(shed, acc);
            (want != state).then_some(match want {
                SwitchState::Off => (id, Command::Off),
                SwitchState::On => (id, Command::On),
            })
        })
        .collect()
}

pub fn write_command_log<W: Write>(
    mut out: W,
    log: &[CommandRecord],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "outlet_id", "command"])?;
    for c in log {
        w.write_record([c.t_s.to_string(), c.outlet_id.to_string(), c.command.as_str().into()])?;
    }
    w.flush()?;
    Ok(())
}
