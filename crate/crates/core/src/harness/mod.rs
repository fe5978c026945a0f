//! Scenario files and the experiment drivers built on them.

pub mod calibration;
pub mod closed_loop;
pub mod fleet;
pub mod groups;
pub mod ieee24;
pub mod montecarlo;
pub mod replay;
pub mod report;
pub mod scenario;

pub use calibration::{Calibration, CalibrationTargets, calibrate};
pub use closed_loop::{ClosedLoopResult, FrequencyPoint, prepare_bundles, run_closed_loop};
pub use fleet::{Fleet, Outlet};
pub use groups::{GroupReport, GroupStat, run_group_experiment};
pub use montecarlo::{
    ConditionMcResult, EstimateMcResult, run_condition_grid, run_condition_mc, run_ekf_mc,
    run_lse_mc,
};
pub use replay::{ReplayResult, replay};
pub use report::{Histogram, TrialReport};
pub use scenario::{Overrides, Scenario, build_ieee24};
