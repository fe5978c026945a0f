use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{BlockId, Registry};
use crate::error::{Result, invalid};

/// Start of conventional under-frequency relays (Hz).
pub const UFLS_FLOOR_HZ: f64 = 49.0;

/// A ranked group of controllable load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadBlock {
    pub block_id: BlockId,
    /// 1 = least important, shed first.
    pub importance_rank: u32,
    pub block_power_mw: f64,
    /// Power of this block plus every less important block.
    pub accumulated_power_mw: f64,
    /// Backup switch-off frequency, once assigned.
    pub switch_off_freq_hz: Option<f64>,
}

/// Total order over blocks, least important first.
pub trait RankingPolicy {
    fn compare(&self, a: BlockId, b: BlockId) -> Ordering;
}

impl<F: Fn(BlockId, BlockId) -> Ordering> RankingPolicy for F {
    fn compare(&self, a: BlockId, b: BlockId) -> Ordering {
        self(a, b)
    }
}

/// Ranks by block id.
#[derive(Debug, Clone, Copy, Default)]
pub struct ById;

impl RankingPolicy for ById {
    fn compare(&self, a: BlockId, b: BlockId) -> Ordering {
        a.cmp(&b)
    }
}

/// Explicit labels; unlabeled blocks go last, by id.
#[derive(Debug, Clone, Default)]
pub struct ExplicitRanks(pub BTreeMap<BlockId, u32>);

impl RankingPolicy for ExplicitRanks {
    fn compare(&self, a: BlockId, b: BlockId) -> Ordering {
        let key = |id: BlockId| (self.0.get(&id).copied().unwrap_or(u32::MAX), id);
        key(a).cmp(&key(b))
    }
}

pub fn blocks_from_powers(
    powers_mw: &BTreeMap<BlockId, f64>,
    policy: &dyn RankingPolicy,
) -> Vec<LoadBlock> {
    let mut ids: Vec<BlockId> = powers_mw.keys().copied().collect();
    ids.sort_by(|&a, &b| policy.compare(a, b));
    let mut acc = 0.0;
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            let p = powers_mw[id];
            acc += p;
            LoadBlock {
                block_id: *id,
                importance_rank: i as u32 + 1,
                block_power_mw: p,
                accumulated_power_mw: acc,
                switch_off_freq_hz: None,
            }
        })
        .collect()
}

/// Blocks from the non-stale registry contents at `now`.
pub fn build_blocks(registry: &Registry, now: f64, policy: &dyn RankingPolicy) -> Vec<LoadBlock> {
    blocks_from_powers(&registry.block_powers_mw(now), policy)
}

/// Backup switch-off frequency per block, in rank order.
///
/// `f_s - P_i / (D * (P_L - sum_{j<i} P_j)) * f_n`, capped at `f_s`.
pub fn switch_off_frequency(
    blocks: &[LoadBlock],
    f_s_hz: f64,
    f_n_hz: f64,
    p_load_total_mw: f64,
    d: f64,
) -> Result<Vec<f64>> {
    let mut shed_before = 0.0;
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let denom = d * (p_load_total_mw - shed_before);
        if !(denom > 0.0) {
            return Err(invalid(format!(
                "non-positive switch-off denominator at block {} ({denom})",
                b.block_id
            )));
        }
        let f = f_s_hz - b.block_power_mw / denom * f_n_hz;
        out.push(f.min(f_s_hz));
        shed_before += b.block_power_mw;
    }
    Ok(out)
}

pub fn assign_switch_off_frequencies(
    blocks: &mut [LoadBlock],
    f_s_hz: f64,
    f_n_hz: f64,
    p_load_total_mw: f64,
    d: f64,
) -> Result<()> {
    let freqs = switch_off_frequency(blocks, f_s_hz, f_n_hz, p_load_total_mw, d)?;
    for (b, f) in blocks.iter_mut().zip(freqs) {
        b.switch_off_freq_hz = Some(f);
    }
    Ok(())
}

/// Blocks whose switch-off frequency is below the relay floor.
pub fn ufls_warnings(blocks: &[LoadBlock], floor_hz: f64) -> Vec<String> {
    blocks
        .iter()
        .filter_map(|b| {
            let f = b.switch_off_freq_hz?;
            (f < floor_hz).then(|| {
                format!("block {} switch-off frequency {f:.4} Hz is below {floor_hz} Hz", b.block_id)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers(p: &[f64]) -> BTreeMap<BlockId, f64> {
        p.iter().enumerate().map(|(i, &v)| (i as BlockId, v)).collect()
    }

    #[test]
    fn accumulated_is_prefix_sum() {
        let b = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &ById);
        let acc: Vec<f64> = b.iter().map(|x| x.accumulated_power_mw).collect();
        assert_eq!(acc, vec![3.0, 5.0, 10.0]);
        let one = blocks_from_powers(&powers(&[4.0]), &ById);
        assert_eq!(one[0].accumulated_power_mw, 4.0);
    }

    #[test]
    fn explicit_ranks_reorder() {
        let ranks = ExplicitRanks([(2, 1), (0, 2)].into_iter().collect());
        let b = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &ranks);
        let ids: Vec<BlockId> = b.iter().map(|x| x.block_id).collect();
        assert_eq!(ids, vec![2, 0, 1]);
        assert_eq!(b[2].accumulated_power_mw, 10.0);
        let rev = |a: BlockId, c: BlockId| c.cmp(&a);
        let b = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &rev);
        assert_eq!(b[0].block_id, 2);
    }

    #[test]
    fn switch_off_rules() {
        let b = blocks_from_powers(&powers(&[0.0, 10.0, 10.0]), &ById);
        let f = switch_off_frequency(&b, 49.5, 50.0, 2850.0, 2.5).unwrap();
        assert_eq!(f[0], 49.5);
        assert!(f[2] < f[1] && f[1] < 49.5);
        let b = blocks_from_powers(&powers(&[100.0]), &ById);
        assert!(switch_off_frequency(&b, 49.5, 50.0, 2850.0, 0.0).is_err());
        let b = blocks_from_powers(&powers(&[3000.0, 1.0]), &ById);
        assert!(switch_off_frequency(&b, 49.5, 50.0, 2850.0, 2.5).is_err());
    }

    #[test]
    fn warns_below_floor() {
        let mut b = blocks_from_powers(&powers(&[100.0, 1.0]), &ById);
        assign_switch_off_frequencies(&mut b, 49.5, 50.0, 300.0, 2.5).unwrap();
        let w = ufls_warnings(&b, UFLS_FLOOR_HZ);
        assert_eq!(w.len(), 1);
    }
}
