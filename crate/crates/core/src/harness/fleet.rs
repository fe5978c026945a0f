use rand::Rng;
use serde::Serialize;

use super::scenario::Scenario;
use crate::control::{
    BlockId, ById, LoadBlock, OutletId, Registry, SwitchState, Telemetry,
    assign_switch_off_frequencies, build_blocks,
};
use crate::error::Result;
use crate::rng::{derive_seed, substream};

pub(crate) const SALT_FLEET: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outlet {
    pub outlet_id: OutletId,
    pub block_id: BlockId,
    /// Represented power: appliance draw times the fleet weight (W).
    pub power_w: f64,
    /// Ignores its own shedding decisions.
    pub non_responder: bool,
}

/// Outlets grouped into equally sized blocks; block `b` holds outlets
/// `b * n .. (b + 1) * n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub outlets: Vec<Outlet>,
    pub weight: f64,
}

impl Fleet {
    pub fn build(scn: &Scenario) -> Self {
        let f = &scn.fleet;
        let per_group = f.outlets / f.groups;
        let weight = f.weight();
        let mut rng = substream(derive_seed(scn.run.seed, SALT_FLEET), 0);
        let outlets = (0..f.outlets)
            .map(|i| {
                let draw = rng.random_range(f.watt_min..=f.watt_max);
                let non_responder = rng.random::<f64>() < f.non_responder_fraction;
                Outlet {
                    outlet_id: i as OutletId,
                    block_id: (i / per_group) as BlockId,
                    power_w: draw * weight,
                    non_responder,
                }
            })
            .collect();
        Self { outlets, weight }
    }

    /// Registry as seen after one round of telemetry at `t`.
    pub fn registry(&self, scn: &Scenario, t: f64) -> Result<Registry> {
        let mut reg = Registry::new(scn.network.stale_horizon_s);
        for o in &self.outlets {
            reg.ingest_measurement(&Telemetry {
                outlet_id: o.outlet_id,
                block_id: o.block_id,
                power_w: o.power_w,
                switch_state: SwitchState::On,
                time_s: t,
            })?;
        }
        Ok(reg)
    }

    /// Ranked blocks with switch-off frequencies, ranked by block id.
    pub fn blocks(&self, scn: &Scenario, t: f64) -> Result<Vec<LoadBlock>> {
        let reg = self.registry(scn, t)?;
        let mut blocks = build_blocks(&reg, t, &ById);
        let s = &scn.system;
        assign_switch_off_frequencies(&mut blocks, s.f_s_hz, s.f_nominal_hz, s.p_load_total_mw, s.d)?;
        Ok(blocks)
    }
}
