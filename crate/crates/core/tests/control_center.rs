use std::collections::BTreeMap;

use proptest::prelude::*;

use edgeshed::agent::{AgentConfig, OutletAgent};
use edgeshed::control::{
    BlockId, ById, Command, ExplicitRanks, OutletId, SwitchState, UFLS_FLOOR_HZ,
    blocks_from_powers, build_condition_table, direct_shed_commands, expected_state,
    make_bundles, switch_off_frequency, ufls_warnings, write_bundle_dump, write_command_log,
    CommandRecord,
};
use edgeshed::harness::{Overrides, build_ieee24, prepare_bundles};
use edgeshed::sfr::{DerivedParams, FrequencySample, PowerEvent};

fn ieee24() -> DerivedParams {
    build_ieee24(&Overrides::default()).derived().unwrap()
}

fn powers(v: &[f64]) -> BTreeMap<BlockId, f64> {
    v.iter().enumerate().map(|(i, &p)| (i as BlockId, p)).collect()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn accumulated_power_is_prefix_sum(v in prop::collection::vec(0.0..50.0f64, 1..40)) {
        let blocks = blocks_from_powers(&powers(&v), &ById);
        prop_assert_eq!(blocks[0].accumulated_power_mw, blocks[0].block_power_mw);
        for w in blocks.windows(2) {
            prop_assert!((w[1].accumulated_power_mw - w[0].accumulated_power_mw - w[1].block_power_mw).abs() < 1e-9);
            prop_assert_eq!(w[1].importance_rank, w[0].importance_rank + 1);
        }
    }

    #[test]
    fn condition_table_tiles_band(rows in 1usize..20, width_cents in 1u32..10) {
        let d = ieee24();
        let width = width_cents as f64 / 100.0;
        let f_s = d.f_nominal_hz - rows as f64 * width;
        let t = build_condition_table(&d, f_s, width).unwrap();
        prop_assert_eq!(t.rows.len(), rows);
        prop_assert_eq!(t.rows[0].f_high_hz, d.f_nominal_hz);
        prop_assert_eq!(t.rows.last().unwrap().f_low_hz, f_s);
        prop_assert_eq!(t.rows.last().unwrap().rocof_threshold_hz_per_s, 0.0);
        for w in t.rows.windows(2) {
            prop_assert_eq!(w[0].f_low_hz, w[1].f_high_hz);
            prop_assert!(w[1].rocof_threshold_hz_per_s > w[0].rocof_threshold_hz_per_s);
        }
        // every frequency in the band maps to exactly one row
        for k in 0..200 {
            let f = f_s + (d.f_nominal_hz - f_s) * k as f64 / 200.0;
            let hits = t.rows.iter().filter(|r| f >= r.f_low_hz && f < r.f_high_hz).count();
            prop_assert_eq!(hits, 1);
            prop_assert!(t.row_for(f).is_some());
        }
        prop_assert!(t.row_for(d.f_nominal_hz).is_none());
        prop_assert!(t.row_for(f_s - 1e-9).is_none());
    }

    #[test]
    fn commands_reconcile_observed_with_expected(
        v in prop::collection::vec(0.1..20.0f64, 2..30),
        loss in 0.0..800.0f64,
        flips in prop::collection::vec(any::<bool>(), 60),
    ) {
        let blocks = blocks_from_powers(&powers(&v), &ById);
        let dps = 351.9;
        let shed = (loss - dps).max(0.0);
        let block_of: BTreeMap<OutletId, BlockId> =
            (0..60u32).map(|i| (i, i % v.len() as u32)).collect();
        let acc: BTreeMap<BlockId, f64> =
            blocks.iter().map(|b| (b.block_id, b.accumulated_power_mw)).collect();
        let mut observed: BTreeMap<OutletId, SwitchState> = block_of
            .iter()
            .map(|(&id, b)| {
                let want = expected_state(shed, acc[b]);
                let s = match (want, flips[id as usize]) {
                    (s, false) => s,
                    (SwitchState::On, true) => SwitchState::Off,
                    (SwitchState::Off, true) => SwitchState::On,
                };
                (id, s)
            })
            .collect();
        let cmds = direct_shed_commands(loss, dps, &blocks, &block_of, &observed);
        prop_assert_eq!(cmds.len(), flips.iter().filter(|&&f| f).count());
        for (id, c) in cmds {
            observed.insert(id, if c == Command::On { SwitchState::On } else { SwitchState::Off });
        }
        for (id, s) in &observed {
            prop_assert_eq!(*s, expected_state(shed, acc[&block_of[id]]));
        }
        // coordination is monotone in rank: an off block implies every lower block is off
        let mut seen_on = false;
        for b in &blocks {
            let st = expected_state(shed, b.accumulated_power_mw);
            prop_assert!(!(seen_on && st == SwitchState::Off));
            seen_on |= st == SwitchState::On;
        }
    }
}

#[test]
fn accumulated_power_examples() {
    let b = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &ById);
    let acc: Vec<f64> = b.iter().map(|x| x.accumulated_power_mw).collect();
    assert_eq!(acc, vec![3.0, 5.0, 10.0]);
    let single = blocks_from_powers(&powers(&[7.5]), &ById);
    assert_eq!(single[0].accumulated_power_mw, 7.5);
}

#[test]
fn explicit_ranks_reorder_blocks() {
    let ranks = ExplicitRanks([(0, 3), (1, 1), (2, 2)].into_iter().collect());
    let b = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &ranks);
    let ids: Vec<BlockId> = b.iter().map(|x| x.block_id).collect();
    assert_eq!(ids, vec![1, 2, 0]);
    assert_eq!(b[2].accumulated_power_mw, 10.0);
    let by_label = |a: BlockId, b: BlockId| b.cmp(&a);
    let rev = blocks_from_powers(&powers(&[3.0, 2.0, 5.0]), &by_label);
    assert_eq!(rev[0].block_id, 2);
}

#[test]
fn switch_off_frequency_examples() {
    let b = blocks_from_powers(&powers(&[0.0, 100.0, 100.0]), &ById);
    let f = switch_off_frequency(&b, 49.5, 50.0, 2850.0, 2.5).unwrap();
    assert_eq!(f[0], 49.5);
    assert!(f[2] < f[1] && f[1] < 49.5);
    // oracle: the formula evaluated directly
    let expect = 49.5 - 100.0 / (2.5 * (2850.0 - 100.0)) * 50.0;
    assert!((f[2] - expect).abs() < 1e-12);
    let huge = blocks_from_powers(&powers(&[3000.0, 1.0]), &ById);
    assert!(switch_off_frequency(&huge, 49.5, 50.0, 2850.0, 2.5).is_err());
}

#[test]
fn low_switch_off_frequency_warns() {
    let mut b = blocks_from_powers(&powers(&[100.0, 1.0]), &ById);
    b[0].switch_off_freq_hz = Some(48.0);
    b[1].switch_off_freq_hz = Some(49.4);
    let w = ufls_warnings(&b, UFLS_FLOOR_HZ);
    assert_eq!(w.len(), 1);
    assert!(w[0].contains("block 0"));
}

#[test]
fn direct_command_examples() {
    let blocks = blocks_from_powers(&powers(&[50.0, 100.0, 100.0]), &ById);
    let block_of: BTreeMap<OutletId, BlockId> = [(10, 0), (11, 1), (12, 2)].into_iter().collect();
    // 500 MW needs 148.1 MW shed: only block 0 (accumulated 50 MW) goes off
    let good: BTreeMap<OutletId, SwitchState> =
        [(10, SwitchState::Off), (11, SwitchState::On), (12, SwitchState::On)].into_iter().collect();
    assert!(direct_shed_commands(500.0, 351.9, &blocks, &block_of, &good).is_empty());
    let mut stuck = good.clone();
    stuck.insert(10, SwitchState::On);
    assert_eq!(
        direct_shed_commands(500.0, 351.9, &blocks, &block_of, &stuck),
        vec![(10, Command::Off)]
    );
    // unknown outlets are left alone
    let mut extra = good;
    extra.insert(99, SwitchState::On);
    assert!(direct_shed_commands(500.0, 351.9, &blocks, &block_of, &extra).is_empty());
}

#[test]
fn bundles_are_consistent_and_ordered() {
    let scn = build_ieee24(&Overrides { outlets: Some(10_000), ..Overrides::default() });
    let (_, blocks, bundles) = prepare_bundles(&scn).unwrap();
    assert_eq!(bundles.len(), blocks.len());
    assert!(bundles.iter().all(|b| b.is_consistent()));
    assert!(bundles.windows(2).all(|w| w[0].accumulated_power_mw < w[1].accumulated_power_mw));
    assert_eq!(bundles[0].block_id, blocks[0].block_id);
    assert!((bundles[0].delta_p_s_mw - 351.9).abs() < 0.01);
    let issued = scn.closed_loop.bundle_issue_s;
    assert!(!bundles[0].is_stale(issued));
    assert!(bundles[0].is_stale(issued + 1.0));
    let mut tampered = bundles[0].clone();
    tampered.condition_table.rows[0].rocof_threshold_hz_per_s += 0.01;
    assert!(!tampered.is_consistent());

    let mut json = Vec::new();
    write_bundle_dump(&mut json, &bundles[..2]).unwrap();
    let back: Vec<edgeshed::control::ParameterBundle> = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, bundles[..2].to_vec());
}

#[test]
fn rebroadcast_bundle_changes_nothing() {
    let d = ieee24();
    let b = blocks_from_powers(&powers(&[5.0]), &ById);
    let mut blocks = b;
    blocks[0].switch_off_freq_hz = Some(49.0);
    let table = build_condition_table(&d, 49.5, 0.05).unwrap();
    let bundle = make_bundles(&d, &blocks, 49.5, &table, 0.0).unwrap().remove(0);
    let ev = [PowerEvent { time: 0.0, delta_p: d.mw_to_pu(500.0) }];
    let run = |again: bool| {
        let mut a = OutletAgent::new(1, AgentConfig::default()).unwrap().with_bundle(bundle.clone());
        for k in -5..150 {
            let t = k as f64 * 0.016;
            if again && k == 20 {
                a.install_bundle(bundle.clone());
            }
            a.ingest(FrequencySample { t, f: d.frequency_hz(&ev, t), rocof: None }).unwrap();
        }
        a.decision_log().to_vec()
    };
    assert_eq!(run(false), run(true));
}

#[test]
fn command_log_format() {
    let log = [CommandRecord { t_s: 3.0, outlet_id: 4, command: Command::Off }];
    let mut buf = Vec::new();
    write_command_log(&mut buf, &log, None).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t_s,outlet_id,command\n3,4,off\n");
}
