use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{BlockId, OutletId, SwitchState};
use crate::error::{Result, invalid};

/// Three missed one-minute reports.
pub const DEFAULT_STALE_HORIZON_S: f64 = 180.0;

/// A status report uploaded by an outlet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub outlet_id: OutletId,
    pub block_id: BlockId,
    pub power_w: f64,
    pub switch_state: SwitchState,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutletRecord {
    pub outlet_id: OutletId,
    pub block_id: BlockId,
    pub power_w: f64,
    pub last_report_s: f64,
    pub switch_state: SwitchState,
}

/// In-memory outlet registry owned by the control center.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    records: BTreeMap<OutletId, OutletRecord>,
    pub stale_horizon_s: f64,
}

impl Registry {
    pub fn new(stale_horizon_s: f64) -> Self {
        Self { records: BTreeMap::new(), stale_horizon_s }
    }

    pub fn ingest_measurement(&mut self, t: &Telemetry) -> Result<()> {
        if !(t.power_w >= 0.0 && t.power_w.is_finite()) {
            return Err(invalid(format!("outlet {} reported power {}", t.outlet_id, t.power_w)));
        }
        self.records.insert(
            t.outlet_id,
            OutletRecord {
                outlet_id: t.outlet_id,
                block_id: t.block_id,
                power_w: t.power_w,
                last_report_s: t.time_s,
                switch_state: t.switch_state,
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: OutletId) -> Option<&OutletRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &OutletRecord> {
        self.records.values()
    }

    pub fn is_stale(&self, rec: &OutletRecord, now: f64) -> bool {
        now - rec.last_report_s > self.stale_horizon_s
    }

    pub fn active(&self, now: f64) -> impl Iterator<Item = &OutletRecord> {
        self.records.values().filter(move |r| !self.is_stale(r, now))
    }

    /// Block power (MW) over non-stale outlets.
    pub fn block_powers_mw(&self, now: f64) -> BTreeMap<BlockId, f64> {
        let mut out = BTreeMap::new();
        for r in self.active(now) {
            *out.entry(r.block_id).or_insert(0.0) += r.power_w / 1e6;
        }
        out
    }

    pub fn block_of(&self) -> BTreeMap<OutletId, BlockId> {
        self.records.values().map(|r| (r.outlet_id, r.block_id)).collect()
    }

    pub fn observed_states(&self) -> BTreeMap<OutletId, SwitchState> {
        self.records.values().map(|r| (r.outlet_id, r.switch_state)).collect()
    }
}
