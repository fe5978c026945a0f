//! Cloud-side logic: outlet registry, ranked load blocks, the pre-event
//! parameter bundle and backup direct commands.

mod blocks;
mod bundle;
mod commands;
mod registry;
mod table;

pub use blocks::{
    ById, ExplicitRanks, LoadBlock, RankingPolicy, UFLS_FLOOR_HZ, assign_switch_off_frequencies,
    blocks_from_powers, build_blocks, switch_off_frequency, ufls_warnings,
};
pub use bundle::{ParameterBundle, make_bundles, write_bundle_dump};
pub use commands::{
    Command, CommandRecord, direct_shed_commands, expected_state, write_command_log,
};
pub use registry::{OutletRecord, Registry, Telemetry, DEFAULT_STALE_HORIZON_S};
pub use table::{ConditionRow, ShedConditionTable, build_condition_table, write_condition_table};

use serde::{Deserialize, Serialize};

pub type OutletId = u32;
pub type BlockId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    On,
    Off,
}
