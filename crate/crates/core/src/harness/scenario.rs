use serde::{Deserialize, Serialize};
use std::path::Path;

use super::ieee24;
use crate::agent::AgentConfig;
use crate::control::DEFAULT_STALE_HORIZON_S;
use crate::error::{Error, Result, invalid};
use crate::net::{DeliverySpec, Latency};
use crate::provenance::sha256_hex;
use crate::sfr::{
    DerivedParams, GeneratorUnit, NoiseModel, PowerEvent, SystemParams, aggregate_droop,
    aggregate_inertia,
};

/// Physical system. Either pin `h` and `r` or list `units` to aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<GeneratorUnit>,
    pub d: f64,
    pub km: f64,
    pub fh: f64,
    pub tr: f64,
    pub s_base_mva: f64,
    pub f_nominal_hz: f64,
    pub p_load_total_mw: f64,
    /// Protection objective: the frequency no event should push below.
    pub f_s_hz: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width_hz: f64,
    /// MW per unit when estimates are reported.
    #[serde(default = "default_report_base")]
    pub report_base_mva: f64,
}

fn default_bin_width() -> f64 {
    0.05
}

fn default_report_base() -> f64 {
    100.0
}

impl SystemSection {
    pub fn params(&self) -> Result<SystemParams> {
        let (h, r) = match (self.h, self.r) {
            (Some(h), Some(r)) => (h, r),
            _ if !self.units.is_empty() => (
                self.h.map_or_else(|| aggregate_inertia(&self.units, self.s_base_mva), Ok)?,
                self.r.map_or_else(|| aggregate_droop(&self.units, self.s_base_mva), Ok)?,
            ),
            _ => return Err(Error::Config("system needs h and r or a unit list".into())),
        };
        let p = SystemParams {
            h,
            d: self.d,
            r,
            km: self.km,
            fh: self.fh,
            tr: self.tr,
            s_base_mva: self.s_base_mva,
            f_nominal_hz: self.f_nominal_hz,
            p_load_total_mw: self.p_load_total_mw,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossEvent {
    pub time_s: f64,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    pub losses: Vec<LossEvent>,
}

impl EventSection {
    pub fn total_mw(&self) -> f64 {
        self.losses.iter().map(|l| l.mw).sum()
    }

    pub fn power_events(&self, s_base_mva: f64) -> Vec<PowerEvent> {
        let mut ev: Vec<PowerEvent> = self
            .losses
            .iter()
            .map(|l| PowerEvent::from_mw(l.time_s, l.mw, s_base_mva))
            .collect();
        ev.sort_by(|a, b| a.time.total_cmp(&b.time));
        ev
    }

    pub fn first_time(&self) -> f64 {
        self.losses.iter().map(|l| l.time_s).fold(f64::INFINITY, f64::min)
    }
}

/// Relative uniform error on the filter's model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamNoise {
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSection {
    /// Simulated outlets at desk scale.
    pub outlets: usize,
    /// Outlets represented at full scale; each simulated outlet stands for
    /// `full_scale_outlets / outlets` real ones.
    pub full_scale_outlets: usize,
    pub groups: usize,
    pub watt_min: f64,
    pub watt_max: f64,
    /// Fraction of outlets that ignore their own decisions.
    #[serde(default)]
    pub non_responder_fraction: f64,
}

impl FleetSection {
    pub fn validate(&self) -> Result<()> {
        if self.outlets == 0 || self.groups == 0 || self.outlets % self.groups != 0 {
            return Err(Error::Config(format!(
                "{} outlets cannot be split evenly into {} groups",
                self.outlets, self.groups
            )));
        }
        if self.full_scale_outlets < self.outlets {
            return Err(Error::Config("full-scale fleet smaller than desk fleet".into()));
        }
        if !(0.0 < self.watt_min && self.watt_min <= self.watt_max) {
            return Err(Error::Config("bad wattage range".into()));
        }
        if !(0.0..=1.0).contains(&self.non_responder_fraction) {
            return Err(Error::Config("non-responder fraction outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.full_scale_outlets as f64 / self.outlets as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub delivery: DeliverySpec,
    /// Link loss applied from the first loss event onward.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_event_drop_probability: Option<f64>,
    #[serde(default = "default_stale")]
    pub stale_horizon_s: f64,
}

fn default_stale() -> f64 {
    DEFAULT_STALE_HORIZON_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub full_scale_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub condition_losses_mw: Vec<f64>,
    /// Half-widths of the uniform noise levels (Hz).
    pub condition_noise_hz: Vec<f64>,
    /// Bin width of the least-squares histogram (report units).
    pub lse_bin: f64,
    /// Bin width of the filter histogram (report units).
    pub ekf_bin: f64,
    /// Relative error counted as accurate.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopSection {
    pub noise: NoiseModel,
    /// Samples simulated before the first loss.
    pub pre_event_samples: usize,
    pub duration_s: f64,
    pub bundle_issue_s: f64,
    pub command_time_s: f64,
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSection,
    pub event: EventSection,
    /// Measurement noise for the estimation experiments.
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_noise: Option<ParamNoise>,
    pub fleet: FleetSection,
    pub network: NetworkSection,
    pub run: RunSection,
    pub montecarlo: MonteCarloSection,
    pub closed_loop: ClosedLoopSection,
    #[serde(default)]
    pub agent: AgentConfig,
}

/// Floor on the filter's measurement variance so noiseless runs stay well posed (Hz²).
pub const MIN_MEASUREMENT_VARIANCE: f64 = 1e-10;

/// Knobs commonly changed on top of the shipped case.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub f_s_hz: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub outlets: Option<usize>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|sp| text[..sp.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse { line, message: e.message().to_string() }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hash of the canonical serialization, stamped on every output.
    pub fn sha256(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.system.params()?;
        if !(self.system.f_s_hz <= self.system.f_nominal_hz) {
            return Err(Error::Config("f_s_hz above nominal frequency".into()));
        }
        if self.event.losses.is_empty() {
            return Err(Error::Config("no loss event".into()));
        }
        self.noise.validate()?;
        self.closed_loop.noise.validate()?;
        self.fleet.validate()?;
        self.network.delivery.validate()?;
        self.agent.validate()?;
        if let Some(p) = self.param_noise {
            if !(0.0..1.0).contains(&p.fraction) {
                return Err(invalid(format!("parameter noise {} outside [0, 1)", p.fraction)));
            }
        }
        if self.run.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        self.system.params()
    }

    pub fn derived(&self) -> Result<DerivedParams> {
        self.params()?.derive()
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(f) = o.f_s_hz {
            self.system.f_s_hz = f;
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(t) = o.trials {
            self.run.trials = t;
        }
        if let Some(n) = o.outlets {
            self.fleet.outlets = n;
        }
    }

    /// Agent settings for a stream with the given measurement noise.
    pub fn agent_config(&self, noise: &NoiseModel) -> AgentConfig {
        let mut cfg = self.agent;
        cfg.ekf.r_meas_hz2 = noise.variance().max(MIN_MEASUREMENT_VARIANCE);
        cfg
    }

    /// Switches Monte-Carlo trials and fleet size to the full-scale values.
    pub fn full_scale(&mut self) {
        self.run.trials = self.run.full_scale_trials;
        self.fleet.outlets = self.fleet.full_scale_outlets;
    }

    /// Converts p.u. on the system base to report units.
    pub fn to_report_units(&self, pu: f64) -> f64 {
        pu * self.system.s_base_mva / self.system.report_base_mva
    }
}

/// Inertia and droop fitted so that the threshold loss is 351.90 MW at a
/// 49.5 Hz objective with the nadir at 3.72 s. See `examples/calibrate.rs`.
pub const IEEE24_H: f64 = 11.064727757510118;
pub const IEEE24_R: f64 = 0.036517464016313006;
pub const IEEE24_S_BASE_MVA: f64 = 2289.570623660481;

/// The shipped 24-bus case with a 500 MW HVDC loss at t = 0.
pub fn build_ieee24(overrides: &Overrides) -> Scenario {
    let p = ieee24::case_params(IEEE24_H, IEEE24_R, IEEE24_S_BASE_MVA);
    let mut s = Scenario {
        name: "ieee24".into(),
        system: SystemSection {
            h: Some(p.h),
            r: Some(p.r),
            units: Vec::new(),
            d: p.d,
            km: p.km,
            fh: p.fh,
            tr: p.tr,
            s_base_mva: p.s_base_mva,
            f_nominal_hz: p.f_nominal_hz,
            p_load_total_mw: p.p_load_total_mw,
            f_s_hz: 49.5,
            bin_width_hz: 0.05,
            report_base_mva: 100.0,
        },
        event: EventSection { losses: vec![LossEvent { time_s: 0.0, mw: 500.0 }] },
        noise: NoiseModel::Gaussian { std_hz: 0.0115 },
        param_noise: None,
        fleet: FleetSection {
            outlets: 100_000,
            full_scale_outlets: 1_000_000,
            groups: 1000,
            watt_min: 10.0,
            watt_max: 1800.0,
            non_responder_fraction: 0.0,
        },
        network: NetworkSection {
            delivery: DeliverySpec {
                latency: Latency::Uniform { lo: 0.05, hi: 0.2 },
                drop_probability: 0.0,
                seed: 17,
                fifo: true,
            },
            post_event_drop_probability: None,
            stale_horizon_s: DEFAULT_STALE_HORIZON_S,
        },
        run: RunSection { seed: 20_200_801, trials: 10_000, full_scale_trials: 1_000_000 },
        montecarlo: MonteCarloSection {
            condition_losses_mw: vec![380.0, 320.0],
            condition_noise_hz: vec![0.0, 0.005, 0.01],
            lse_bin: 1.0,
            ekf_bin: 0.2,
            accuracy: 0.04,
        },
        closed_loop: ClosedLoopSection {
            noise: NoiseModel::Gaussian { std_hz: 0.0071 },
            pre_event_samples: 6,
            duration_s: 15.0,
            bundle_issue_s: -900.0,
            command_time_s: 3.0,
        },
        agent: AgentConfig::default(),
    };
    s.apply(overrides);
    s
}
