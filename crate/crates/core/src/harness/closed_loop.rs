//! Fleet of outlet agents driven against the frequency they themselves shape.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use super::fleet::Fleet;
use super::report::{TrialReport, quantile};
use super::scenario::Scenario;
use crate::agent::{Action, Cause, DecisionRecord, OutletAgent, min_shed_requirement};
use crate::control::{
    BlockId, CommandRecord, LoadBlock, OutletId, ParameterBundle, SwitchState,
    Telemetry, build_condition_table, direct_shed_commands, make_bundles,
};
use crate::error::Result;
use crate::net::{Bus, Endpoint, Message, Payload, TraceRow};
use crate::provenance::Provenance;
use crate::rng::{SimRng, derive_seed, substream};
use crate::sfr::{DerivedParams, FrequencySample, PowerEvent};

pub(crate) const SALT_CLOSED_LOOP: u64 = 9;

/// Fleet, ranked blocks and one bundle per block, as the control center
/// prepares them before any event.
pub fn prepare_bundles(scn: &Scenario) -> Result<(Fleet, Vec<LoadBlock>, Vec<ParameterBundle>)> {
    let derived = scn.derived()?;
    let fleet = Fleet::build(scn);
    let issued = scn.closed_loop.bundle_issue_s;
    let blocks = fleet.blocks(scn, issued)?;
    let table = build_condition_table(&derived, scn.system.f_s_hz, scn.system.bin_width_hz)?;
    let bundles = make_bundles(&derived, &blocks, scn.system.f_s_hz, &table, issued)?;
    Ok((fleet, blocks, bundles))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub t_s: f64,
    pub f_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopResult {
    pub report: TrialReport,
    pub with_shedding: Vec<FrequencyPoint>,
    pub without_shedding: Vec<FrequencyPoint>,
    /// All agent decisions ordered by (time, outlet).
    pub decisions: Vec<DecisionRecord>,
    pub commands: Vec<CommandRecord>,
    pub trace: Vec<TraceRow>,
    /// Loss events followed by aggregated switching events.
    pub events: Vec<PowerEvent>,
    pub bundles_delivered: usize,
}

impl ClosedLoopResult {
    /// Local-estimate switch-offs only.
    pub fn criterion1_decisions(&self) -> Vec<DecisionRecord> {
        self.decisions.iter().filter(|d| d.cause == Cause::Criterion1).copied().collect()
    }
}

fn nadir(derived: &DerivedParams, events: &[PowerEvent], from: f64, to: f64) -> f64 {
    let n = ((to - from) / 1e-3).round() as usize;
    (0..=n)
        .map(|k| derived.frequency_hz(events, from + k as f64 * 1e-3))
        .fold(f64::INFINITY, f64::min)
}

struct Slot {
    agent: OutletAgent,
    rng: SimRng,
    power_w: f64,
    non_responder: bool,
    on: bool,
}

pub fn run_closed_loop(scn: &Scenario) -> Result<ClosedLoopResult> {
    let derived = scn.derived()?;
    let cl = &scn.closed_loop;
    let cfg = scn.agent_config(&cl.noise);
    let dt = cfg.cadence_s;
    let (fleet, blocks, bundles) = prepare_bundles(scn)?;
    let dp_s_mw = derived.threshold_power_loss_mw(scn.system.f_s_hz)?;
    let true_loss_mw = scn.event.total_mw();
    let t_loss = scn.event.first_time();
    let seed = derive_seed(scn.run.seed, SALT_CLOSED_LOOP);
    let noise = cl.noise.sampler();

    let mut slots: Vec<Slot> = fleet
        .outlets
        .iter()
        .map(|o| {
            Ok(Slot {
                agent: OutletAgent::new(o.outlet_id, cfg)?,
                rng: substream(seed, o.outlet_id as u64),
                power_w: o.power_w,
                non_responder: o.non_responder,
                on: true,
            })
        })
        .collect::<Result<_>>()?;
    let index_of: BTreeMap<OutletId, usize> =
        fleet.outlets.iter().enumerate().map(|(i, o)| (o.outlet_id, i)).collect();
    let block_of: BTreeMap<OutletId, BlockId> =
        fleet.outlets.iter().map(|o| (o.outlet_id, o.block_id)).collect();

    let mut bus = Bus::new(scn.network.delivery)?.with_clock(cl.bundle_issue_s);
    let mut by_block: BTreeMap<BlockId, Vec<Endpoint>> = BTreeMap::new();
    for o in &fleet.outlets {
        by_block.entry(o.block_id).or_default().push(Endpoint::Outlet(o.outlet_id));
    }
    for b in &bundles {
        let payload = Payload::Bundle(Arc::new(b.clone()));
        let recipients = by_block.remove(&b.block_id).unwrap_or_default();
        bus.schedule_broadcast(Endpoint::ControlCenter, recipients, payload, cl.bundle_issue_s)?;
    }
    // last periodic telemetry round before the event
    let mut registry = fleet.registry(scn, t_loss - 30.0)?;

    let mut events = scn.event.power_events(derived.s_base_mva);
    let loss_events = events.clone();
    let mut with_shedding = Vec::new();
    let mut commands = Vec::new();
    let mut bundles_delivered = 0usize;
    let mut link_cut = false;
    let mut commands_sent = false;
    let k_end = (cl.duration_s / dt).round() as i64;

    for k in -(cl.pre_event_samples as i64)..=k_end {
        let t = t_loss + k as f64 * dt;
        if !link_cut && t >= t_loss {
            if let Some(p) = scn.network.post_event_drop_probability {
                bus.set_drop_probability(p)?;
            }
            link_cut = true;
        }
        let mut telemetry_out = Vec::new();
        for d in bus.advance(t)? {
            match (d.msg.dst, d.msg.payload) {
                (Endpoint::Outlet(id), Payload::Bundle(b)) => {
                    slots[index_of[&id]].agent.install_bundle((*b).clone());
                    bundles_delivered += 1;
                }
                (Endpoint::Outlet(id), Payload::Command(c)) => {
                    let slot = &mut slots[index_of[&id]];
                    if let Some(action) = slot.agent.apply_command(d.time, c) {
                        if let Some(mw) = switch(slot, action, true) {
                            events.push(PowerEvent { time: d.time, delta_p: derived.mw_to_pu(mw) });
                            telemetry_out.push(index_of[&id]);
                        }
                    }
                }
                (Endpoint::ControlCenter, Payload::Telemetry(tel)) => {
                    registry.ingest_measurement(&tel)?;
                }
                _ => {}
            }
        }
        let f_true = derived.frequency_hz(&events, t);
        with_shedding.push(FrequencyPoint { t_s: t, f_hz: f_true });
        let actions: Vec<Option<Action>> = slots
            .par_iter_mut()
            .map(|s| {
                let f = f_true + noise.draw(&mut s.rng);
                s.agent.ingest(FrequencySample { t, f, rocof: None })
            })
            .collect::<Result<_>>()?;
        let mut step_mw = 0.0;
        for (i, a) in actions.into_iter().enumerate() {
            if let Some(action) = a {
                if let Some(mw) = switch(&mut slots[i], action, false) {
                    step_mw += mw;
                    telemetry_out.push(i);
                }
            }
        }
        if step_mw != 0.0 {
            events.push(PowerEvent { time: t, delta_p: derived.mw_to_pu(step_mw) });
        }
        for i in telemetry_out {
            let s = &slots[i];
            let msg = Message {
                src: Endpoint::Outlet(s.agent.outlet_id),
                dst: Endpoint::ControlCenter,
                payload: Payload::Telemetry(Telemetry {
                    outlet_id: s.agent.outlet_id,
                    block_id: block_of[&s.agent.outlet_id],
                    power_w: s.power_w,
                    switch_state: if s.on { SwitchState::On } else { SwitchState::Off },
                    time_s: t,
                }),
                send_time: t,
            };
            bus.schedule(msg)?;
        }
        if !commands_sent && t >= t_loss + cl.command_time_s {
            commands_sent = true;
            let cmds = direct_shed_commands(
                true_loss_mw,
                dp_s_mw,
                &blocks,
                &block_of,
                &registry.observed_states(),
            );
            for (id, c) in cmds {
                commands.push(CommandRecord { t_s: t, outlet_id: id, command: c });
                bus.schedule(Message {
                    src: Endpoint::ControlCenter,
                    dst: Endpoint::Outlet(id),
                    payload: Payload::Command(c),
                    send_time: t,
                })?;
            }
        }
    }

    let t_end = t_loss + k_end as f64 * dt;
    let without_shedding = with_shedding
        .iter()
        .map(|p| FrequencyPoint { t_s: p.t_s, f_hz: derived.frequency_hz(&loss_events, p.t_s) })
        .collect();
    let mut decisions: Vec<DecisionRecord> =
        slots.iter().flat_map(|s| s.agent.decision_log().iter().copied()).collect();
    decisions.sort_by(|a, b| a.t_s.total_cmp(&b.t_s).then(a.outlet_id.cmp(&b.outlet_id)));
    let latencies: Vec<f64> = slots
        .iter()
        .filter_map(|s| {
            s.agent
                .decision_log()
                .iter()
                .find(|d| d.cause == Cause::Criterion1)
                .map(|d| d.t_s - t_loss)
        })
        .collect();
    let mut off_by_cause: BTreeMap<&'static str, usize> = BTreeMap::new();
    for s in &slots {
        if let Some(first) = s.agent.first_switch_off() {
            *off_by_cause.entry(first.cause.as_str()).or_default() += 1;
        }
    }
    let shed_total_mw = slots.iter().filter(|s| !s.on).map(|s| s.power_w / 1e6).sum();
    let report = TrialReport {
        outlets: slots.len(),
        outlets_off: slots.iter().filter(|s| !s.on).count(),
        shed_total_mw,
        target_shed_mw: min_shed_requirement(true_loss_mw, dp_s_mw),
        nadir_hz: Some(nadir(&derived, &events, t_loss, t_end)),
        nadir_without_hz: Some(nadir(&derived, &loss_events, t_loss, t_end)),
        latency_median_s: quantile(&latencies, 0.5),
        latency_p05_s: quantile(&latencies, 0.05),
        latency_p95_s: quantile(&latencies, 0.95),
        off_by_cause: off_by_cause.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    Ok(ClosedLoopResult {
        report,
        with_shedding,
        without_shedding,
        decisions,
        commands,
        trace: bus.trace().to_vec(),
        events,
        bundles_delivered,
    })
}

/// Applies an agent action to the physical switch. Returns the change in
/// net load loss (MW): negative when load is dropped.
fn switch(slot: &mut Slot, action: Action, commanded: bool) -> Option<f64> {
    match action {
        Action::SwitchOff(_) if slot.on && (commanded || !slot.non_responder) => {
            slot.on = false;
            Some(-slot.power_w / 1e6)
        }
        Action::SwitchOn if !slot.on => {
            slot.on = true;
            Some(slot.power_w / 1e6)
        }
        _ => None,
    }
}

pub fn write_frequency_csv<W: Write>(
    mut out: W,
    points: &[FrequencyPoint],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "f_hz"])?;
    for p in points {
        w.write_record([format!("{:.3}", p.t_s), format!("{:.6}", p.f_hz)])?;
    }
    w.flush()?;
    Ok(())
}

/// Shed/restore events after the loss, as `t_s,delta_mw` (negative = load dropped).
pub fn write_switching_events<W: Write>(
    mut out: W,
    derived: &DerivedParams,
    events: &[PowerEvent],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "delta_mw"])?;
    for e in events {
        w.write_record([e.time.to_string(), derived.pu_to_mw(e.delta_p).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
