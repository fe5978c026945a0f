//! The smart-outlet state machine: detect a frequency event, check the
//! shedding condition, estimate the loss (least squares, then EKF) and
//! decide whether to switch off.

mod detect;
mod estimate;
mod log;

pub use detect::{ConditionChecker, check_condition, detect_event};
pub use estimate::{
    EkfConfig, EkfModel, EkfState, ekf_init, ekf_step, ls_slope, lse_estimate,
};
pub use log::{Cause, DecisionRecord, write_decision_log};

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::control::{Command, OutletId, ParameterBundle, SwitchState};
use crate::error::{Error, Result, invalid};
use crate::sfr::{FrequencySample, SAMPLE_PERIOD_S};

/// Loss still to be shed after the threshold loss is absorbed (MW).
pub fn min_shed_requirement(delta_p_mw: f64, delta_p_s_mw: f64) -> f64 {
    (delta_p_mw - delta_p_s_mw).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub detect_consecutive: usize,
    pub lse_window: usize,
    pub ekf_iterations: usize,
    /// Shedding is needed when condition hits exceed this count.
    pub n_required: usize,
    /// Samples in the sliding least-squares ROCOF.
    pub rocof_window: usize,
    /// Post-onset samples examined by the condition check.
    pub condition_window: usize,
    /// The episode ends after `recover_hold` samples within this band below nominal.
    pub recover_band_hz: f64,
    pub recover_hold: usize,
    pub cadence_s: f64,
    pub ekf: EkfConfig,
    /// Keep every filter iterate for export.
    pub record_ekf_trace: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            detect_consecutive: 5,
            lse_window: 10,
            ekf_iterations: 40,
            n_required: 15,
            rocof_window: 5,
            condition_window: 32,
            recover_band_hz: 0.03,
            recover_hold: 10,
            cadence_s: SAMPLE_PERIOD_S,
            ekf: EkfConfig::default(),
            record_ekf_trace: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.detect_consecutive,
            self.lse_window,
            self.ekf_iterations,
            self.n_required,
            self.condition_window,
            self.recover_hold,
        ];
        if counts.contains(&0) {
            return Err(invalid("agent counts must be at least 1"));
        }
        if self.rocof_window < 2 || self.lse_window < 2 {
            return Err(invalid("slope windows need at least 2 samples"));
        }
        if !(self.cadence_s > 0.0) {
            return Err(invalid("cadence must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    /// Collecting the least-squares window.
    EventDetected,
    /// Running the EKF.
    Estimating,
    /// Estimation finished, outlet stays on.
    ShedDecided,
    Off,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::EventDetected => "event_detected",
            Phase::Estimating => "estimating",
            Phase::ShedDecided => "shed_decided",
            Phase::Off => "off",
        }
    }

    /// Transitions allowed by the outlet flowchart.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        match (self, next) {
            (Off, ShedDecided) => true,
            (Off, _) => false,
            (_, Off) => true,
            (Idle, EventDetected) => true,
            (EventDetected, Estimating) => true,
            (Estimating, ShedDecided) => true,
            (EventDetected | Estimating | ShedDecided, Idle) => true,
            _ => false,
        }
    }
}

/// Effect of an input on the physical switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    SwitchOff(Cause),
    SwitchOn,
}

/// Filter iterate kept for export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfTracePoint {
    pub t_s: f64,
    pub delta_p_pu: f64,
    pub onset_s: f64,
}

#[derive(Debug, Clone, Default)]
struct Episode {
    detect_time: f64,
    checker: Option<ConditionChecker>,
    lse_buffer: Vec<FrequencySample>,
    lse_result: Option<f64>,
    ekf: Option<EkfState>,
    estimate_pu: Option<f64>,
    recover_count: usize,
}

/// One smart outlet.
#[derive(Debug, Clone)]
pub struct OutletAgent {
    pub outlet_id: OutletId,
    pub config: AgentConfig,
    bundle: Option<ParameterBundle>,
    phase: Phase,
    switch: SwitchState,
    history: VecDeque<FrequencySample>,
    /// ROCOF of each recent sample, aligned with the tail of `history`.
    recent_rocof: VecDeque<Option<f64>>,
    episode: Episode,
    log: Vec<DecisionRecord>,
    ekf_trace: Vec<EkfTracePoint>,
}

impl OutletAgent {
    pub fn new(outlet_id: OutletId, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            outlet_id,
            config,
            bundle: None,
            phase: Phase::Idle,
            switch: SwitchState::On,
            history: VecDeque::new(),
            recent_rocof: VecDeque::new(),
            episode: Episode::default(),
            log: Vec::new(),
            ekf_trace: Vec::new(),
        })
    }

    pub fn with_bundle(mut self, bundle: ParameterBundle) -> Self {
        self.install_bundle(bundle);
        self
    }

    /// Replaces the bundle. Reinstalling an identical bundle is a no-op.
    pub fn install_bundle(&mut self, bundle: ParameterBundle) {
        if self.bundle.as_ref() != Some(&bundle) {
            self.bundle = Some(bundle);
        }
    }

    pub fn bundle(&self) -> Option<&ParameterBundle> {
        self.bundle.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn switch_state(&self) -> SwitchState {
        self.switch
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn ekf_trace(&self) -> &[EkfTracePoint] {
        &self.ekf_trace
    }

    pub fn condition_hits(&self) -> usize {
        self.episode.checker.map_or(0, |c| c.hits)
    }

    pub fn shed_needed(&self) -> bool {
        self.episode.checker.is_some_and(|c| c.shed_needed())
    }

    pub fn lse_result(&self) -> Option<f64> {
        self.episode.lse_result
    }

    pub fn ekf(&self) -> Option<&EkfState> {
        self.episode.ekf.as_ref()
    }

    /// Final loss estimate of the current episode (p.u.).
    pub fn estimate_pu(&self) -> Option<f64> {
        self.episode.estimate_pu
    }

    pub fn event_time_estimate(&self) -> Option<f64> {
        self.episode.ekf.map(|e| e.x[1])
    }

    fn history_cap(&self) -> usize {
        (self.config.detect_consecutive + 1).max(self.config.rocof_window)
    }

    fn transition(&mut self, t: f64, next: Phase, cause: Cause, est: Option<f64>) {
        debug_assert!(
            self.phase.can_transition_to(next),
            "{:?} -> {next:?}",
            self.phase
        );
        self.phase = next;
        self.log.push(DecisionRecord {
            t_s: t,
            outlet_id: self.outlet_id,
            phase: next,
            cause,
            delta_p_est_pu: est,
        });
    }

    fn switch_off(&mut self, t: f64, cause: Cause) -> Action {
        let est = self.episode.estimate_pu.or(self.episode.lse_result);
        self.switch = SwitchState::Off;
        self.transition(t, Phase::Off, cause, est);
        Action::SwitchOff(cause)
    }

    /// Feeds one frequency sample through the pipeline.
    pub fn ingest(&mut self, sample: FrequencySample) -> Result<Option<Action>> {
        if let Some(last) = self.history.back() {
            if !(sample.t > last.t) {
                return Err(Error::OutOfOrder { t: sample.t, last: last.t });
            }
        }
        if !sample.f.is_finite() {
            return Err(invalid(format!("non-finite frequency at t={}", sample.t)));
        }
        self.history.push_back(sample);
        while self.history.len() > self.history_cap() {
            self.history.pop_front();
        }
        let w = self.config.rocof_window.min(self.history.len());
        let rocof = (w >= 2).then(|| {
            ls_slope(self.history.iter().skip(self.history.len() - w).map(|s| (s.t, s.f)))
        });
        self.recent_rocof.push_back(rocof);
        while self.recent_rocof.len() > self.history.len() {
            self.recent_rocof.pop_front();
        }

        let Some(bundle) = self.bundle.as_ref() else { return Ok(None) };
        if self.phase == Phase::Off {
            return Ok(None);
        }
        if sample.f < bundle.switch_off_freq_hz {
            return Ok(Some(self.switch_off(sample.t, Cause::Criterion2)));
        }
        let f_n = bundle.derived.f_nominal_hz;
        let mut just_detected = false;
        match self.phase {
            Phase::Idle => {
                if detect_event(self.history.iter(), self.config.detect_consecutive) {
                    self.start_episode(sample.t);
                    just_detected = true;
                }
            }
            Phase::EventDetected => {
                self.observe_condition(sample.f, rocof);
                self.episode.lse_buffer.push(sample);
                if self.episode.lse_buffer.len() == self.config.lse_window {
                    self.finish_lse(sample.t);
                }
            }
            Phase::Estimating => {
                self.observe_condition(sample.f, rocof);
                if let Some(action) = self.estimate_step(&sample)? {
                    return Ok(Some(action));
                }
            }
            Phase::ShedDecided => self.observe_condition(sample.f, rocof),
            Phase::Off => unreachable!(),
        }
        if !just_detected && self.phase != Phase::Idle {
            if sample.f >= f_n - self.config.recover_band_hz {
                self.episode.recover_count += 1;
            } else {
                self.episode.recover_count = 0;
            }
            if self.episode.recover_count >= self.config.recover_hold {
                let est = self.episode.estimate_pu;
                self.episode = Episode::default();
                self.transition(sample.t, Phase::Idle, Cause::EpisodeEnd, est);
            }
        }
        Ok(None)
    }

    fn observe_condition(&mut self, f: f64, rocof: Option<f64>) {
        if let (Some(checker), Some(b)) = (self.episode.checker.as_mut(), self.bundle.as_ref()) {
            checker.observe(&b.condition_table, f, rocof);
        }
    }

    fn start_episode(&mut self, t: f64) {
        let mut checker =
            ConditionChecker::new(self.config.condition_window, self.config.n_required);
        let table = &self.bundle.as_ref().expect("bundle checked").condition_table;
        // samples after the last pre-drop one are already inside the window
        let k = self.config.detect_consecutive;
        let n = self.history.len();
        for i in n - k..n {
            checker.observe(table, self.history[i].f, self.recent_rocof[i]);
        }
        self.episode = Episode { detect_time: t, checker: Some(checker), ..Episode::default() };
        self.transition(t, Phase::EventDetected, Cause::EventDetected, None);
    }

    fn finish_lse(&mut self, t: f64) {
        let b = self.bundle.as_ref().expect("bundle checked");
        let lse = lse_estimate(&self.episode.lse_buffer, &b.derived);
        let onset = self.episode.detect_time
            - self.config.detect_consecutive as f64 * self.config.cadence_s;
        let ekf = ekf_init(lse, onset, b.delta_p_s_pu(), self.config.cadence_s, &self.config.ekf);
        self.episode.lse_result = Some(lse);
        self.episode.ekf = Some(ekf);
        self.transition(t, Phase::Estimating, Cause::LseEstimate, Some(lse));
    }

    fn estimate_step(&mut self, sample: &FrequencySample) -> Result<Option<Action>> {
        let b = self.bundle.as_ref().expect("bundle checked");
        let model = EkfModel::nominal(&b.derived);
        if let Some(ekf) = self.episode.ekf.as_mut() {
            if ekf.k < self.config.ekf_iterations {
                ekf_step(ekf, sample, &model)?;
                if self.config.record_ekf_trace {
                    self.ekf_trace.push(EkfTracePoint {
                        t_s: sample.t,
                        delta_p_pu: ekf.x[0],
                        onset_s: ekf.x[1],
                    });
                }
                if ekf.k == self.config.ekf_iterations {
                    self.episode.estimate_pu = Some(ekf.x[0]);
                }
            }
        }
        let condition_done = self.episode.checker.is_none_or(|c| c.is_complete());
        if self.episode.estimate_pu.is_none() || !condition_done {
            return Ok(None);
        }
        Ok(Some(self.decide(sample.t)).flatten())
    }

    /// Applies the local criterion once estimation is finished.
    fn decide(&mut self, t: f64) -> Option<Action> {
        let b = self.bundle.as_ref().expect("bundle checked");
        let est = self.episode.estimate_pu.expect("estimate ready");
        let needed = self.shed_needed();
        let shed_mw = min_shed_requirement(b.derived.pu_to_mw(est), b.delta_p_s_mw);
        if needed && shed_mw > b.accumulated_power_mw {
            Some(self.switch_off(t, Cause::Criterion1))
        } else {
            self.transition(t, Phase::ShedDecided, Cause::StayOn, Some(est));
            None
        }
    }

    /// Obeys a direct command from the control center.
    pub fn apply_command(&mut self, t: f64, command: Command) -> Option<Action> {
        match command {
            Command::Off if self.phase != Phase::Off => Some(self.switch_off(t, Cause::Criterion3)),
            Command::On if self.phase == Phase::Off => {
                self.switch = SwitchState::On;
                let est = self.episode.estimate_pu;
                self.transition(t, Phase::ShedDecided, Cause::CommandOn, est);
                Some(Action::SwitchOn)
            }
            _ => None,
        }
    }

    /// Time of the first local switch-off, if any.
    pub fn first_switch_off(&self) -> Option<&DecisionRecord> {
        self.log.iter().find(|r| r.cause.is_switch_off())
    }
}
