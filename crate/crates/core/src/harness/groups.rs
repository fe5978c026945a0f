//! Fleet-wide shedding from independent per-outlet estimates.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

use super::fleet::Fleet;
use super::montecarlo::{SALT_PARAM_NOISE, draw_param_errors, estimate_known_onset};
use super::report::TrialReport;
use super::scenario::Scenario;
use crate::agent::{EkfModel, min_shed_requirement};
use crate::control::{
    BlockId, Command, OutletId, SwitchState, build_condition_table, direct_shed_commands,
    expected_state,
};
use crate::error::Result;
use crate::provenance::Provenance;
use crate::rng::{derive_seed, substream};

pub(crate) const SALT_GROUPS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStat {
    pub block_id: BlockId,
    pub rank: u32,
    pub block_power_mw: f64,
    pub accumulated_power_mw: f64,
    pub outlets: usize,
    pub off: usize,
    pub off_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub report: TrialReport,
    pub groups: Vec<GroupStat>,
    /// Groups (rank order) entirely off, then the first entirely-on group
    /// after the last partly-off one.
    pub all_off_until: usize,
    pub all_on_from: usize,
    /// Total after the control center corrects every mismatch with direct commands.
    pub shed_after_commands_mw: f64,
    pub commands: usize,
}

impl GroupReport {
    /// Rank-ordered off fractions form all-off, mixed and all-on bands.
    pub fn has_band_structure(&self) -> bool {
        let n = self.groups.len();
        self.all_off_until > 0
            && self.all_on_from < n
            && self.groups[..self.all_off_until].iter().all(|g| g.off_fraction == 1.0)
            && self.groups[self.all_on_from..].iter().all(|g| g.off_fraction == 0.0)
    }
}

pub fn run_group_experiment(scn: &Scenario) -> Result<GroupReport> {
    let derived = scn.derived()?;
    let table = build_condition_table(&derived, scn.system.f_s_hz, scn.system.bin_width_hz)?;
    let cfg = scn.agent_config(&scn.noise);
    let sampler = scn.noise.sampler();
    let fleet = Fleet::build(scn);
    let blocks = fleet.blocks(scn, 0.0)?;
    let accumulated: BTreeMap<BlockId, f64> =
        blocks.iter().map(|b| (b.block_id, b.accumulated_power_mw)).collect();
    let true_loss_mw = scn.event.total_mw();
    let loss_pu = derived.mw_to_pu(true_loss_mw);
    let dp_s_pu = derived.threshold_power_loss(scn.system.f_s_hz)?;
    let dp_s_mw = derived.pu_to_mw(dp_s_pu);
    let nominal = EkfModel::nominal(&derived);
    let frac = scn.param_noise.map_or(0.0, |p| p.fraction);
    let seed = derive_seed(scn.run.seed, SALT_GROUPS);

    let off: Vec<bool> = fleet
        .outlets
        .par_iter()
        .map(|o| {
            let mut rng = substream(seed, o.outlet_id as u64);
            let model = if frac > 0.0 {
                let mut prng = substream(derive_seed(seed, SALT_PARAM_NOISE), o.outlet_id as u64);
                nominal.perturbed(draw_param_errors(&mut prng, frac))
            } else {
                nominal
            };
            let est = estimate_known_onset(
                &derived, &model, &table, &cfg, loss_pu, dp_s_pu, &sampler, &mut rng,
            )?;
            let shed = min_shed_requirement(derived.pu_to_mw(est.ekf_pu), dp_s_mw);
            let decide = est.shed_needed && shed > accumulated[&o.block_id];
            Ok(decide && !o.non_responder)
        })
        .collect::<Result<_>>()?;

    let mut per_block: BTreeMap<BlockId, (usize, usize)> = BTreeMap::new();
    let mut shed_total_mw = 0.0;
    for (o, &is_off) in fleet.outlets.iter().zip(&off) {
        let e = per_block.entry(o.block_id).or_default();
        e.0 += 1;
        if is_off {
            e.1 += 1;
            shed_total_mw += o.power_w / 1e6;
        }
    }
    let groups: Vec<GroupStat> = blocks
        .iter()
        .map(|b| {
            let (n, k) = per_block[&b.block_id];
            GroupStat {
                block_id: b.block_id,
                rank: b.importance_rank,
                block_power_mw: b.block_power_mw,
                accumulated_power_mw: b.accumulated_power_mw,
                outlets: n,
                off: k,
                off_fraction: k as f64 / n as f64,
            }
        })
        .collect();
    let all_off_until = groups.iter().position(|g| g.off_fraction < 1.0).unwrap_or(groups.len());
    let all_on_from = groups.iter().rposition(|g| g.off_fraction > 0.0).map_or(0, |i| i + 1);

    // backup path: the control center knows the true loss and every state
    let block_of: BTreeMap<OutletId, BlockId> =
        fleet.outlets.iter().map(|o| (o.outlet_id, o.block_id)).collect();
    let observed: BTreeMap<OutletId, SwitchState> = fleet
        .outlets
        .iter()
        .zip(&off)
        .map(|(o, &x)| (o.outlet_id, if x { SwitchState::Off } else { SwitchState::On }))
        .collect();
    let cmds = direct_shed_commands(true_loss_mw, dp_s_mw, &blocks, &block_of, &observed);
    let mut corrected = observed;
    for (id, c) in &cmds {
        corrected.insert(*id, if *c == Command::Off { SwitchState::Off } else { SwitchState::On });
    }
    let shed_after_commands_mw = fleet
        .outlets
        .iter()
        .filter(|o| corrected[&o.outlet_id] == SwitchState::Off)
        .map(|o| o.power_w / 1e6)
        .sum();
    debug_assert!(fleet.outlets.iter().all(|o| {
        corrected[&o.outlet_id]
            == expected_state(min_shed_requirement(true_loss_mw, dp_s_mw), accumulated[&o.block_id])
    }));

    let outlets_off = off.iter().filter(|&&x| x).count();
    Ok(GroupReport {
        report: TrialReport {
            outlets: fleet.outlets.len(),
            outlets_off,
            shed_total_mw,
            target_shed_mw: min_shed_requirement(true_loss_mw, dp_s_mw),
            off_by_cause: vec![("criterion1".into(), outlets_off)],
            ..TrialReport::default()
        },
        groups,
        all_off_until,
        all_on_from,
        shed_after_commands_mw,
        commands: cmds.len(),
    })
}

pub fn write_group_stats<W: Write>(
    mut out: W,
    groups: &[GroupStat],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "block_id", "block_power_mw", "accumulated_power_mw", "outlets", "off", "off_fraction"])?;
    for g in groups {
        w.write_record([
            g.rank.to_string(),
            g.block_id.to_string(),
            format!("{:.6}", g.block_power_mw),
            format!("{:.6}", g.accumulated_power_mw),
            g.outlets.to_string(),
            g.off.to_string(),
            format!("{:.4}", g.off_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}
