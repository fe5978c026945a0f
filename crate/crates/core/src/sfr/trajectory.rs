use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{DerivedParams, PowerEvent};
use crate::error::{Error, Result, invalid};
use crate::provenance::Provenance;
use crate::rng::substream;

/// Sample cadence of the outlet frequency meter (s).
pub const SAMPLE_PERIOD_S: f64 = 0.016;

/// One frequency measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySample {
    pub t: f64,
    /// Hz.
    pub f: f64,
    /// Hz/s; only filled from the noiseless curve when requested.
    pub rocof: Option<f64>,
}

/// Additive measurement noise in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    None,
    Uniform { half_width_hz: f64 },
    Gaussian { std_hz: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Uniform { half_width_hz: b } if b >= 0.0 && b.is_finite() => Ok(()),
            NoiseModel::Gaussian { std_hz: s } if s >= 0.0 && s.is_finite() => Ok(()),
            other => Err(invalid(format!("bad noise model {other:?}"))),
        }
    }

    /// Variance in Hz².
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Uniform { half_width_hz: b } => b * b / 3.0,
            NoiseModel::Gaussian { std_hz: s } => s * s,
        }
    }

    /// Prepared sampler; avoids rebuilding the distribution per draw.
    pub fn sampler(&self) -> NoiseSampler {
        match *self {
            NoiseModel::Uniform { half_width_hz: b } if b > 0.0 => {
                NoiseSampler::Uniform(Uniform::new_inclusive(-b, b).expect("finite bound"))
            }
            NoiseModel::Gaussian { std_hz: s } if s > 0.0 => {
                NoiseSampler::Gaussian(Normal::new(0.0, s).expect("finite std"))
            }
            _ => NoiseSampler::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Zero,
    Uniform(Uniform<f64>),
    Gaussian(Normal<f64>),
}

impl NoiseSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Zero => 0.0,
            NoiseSampler::Uniform(u) => u.sample(rng),
            NoiseSampler::Gaussian(n) => n.sample(rng),
        }
    }
}

/// What to sample and how.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub start_s: f64,
    pub duration_s: f64,
    pub cadence_s: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Fill `rocof` from the noiseless analytic derivative.
    pub analytic_rocof: bool,
}

impl TrajectorySpec {
    pub fn new(duration_s: f64, noise: NoiseModel, seed: u64) -> Self {
        Self {
            start_s: 0.0,
            duration_s,
            cadence_s: SAMPLE_PERIOD_S,
            noise,
            seed,
            analytic_rocof: false,
        }
    }

    /// Sample times; computed from the index so they never drift.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (self.duration_s / self.cadence_s + 1e-9).floor() as usize + 1;
        (0..n).map(move |k| self.start_s + k as f64 * self.cadence_s)
    }
}

/// Noisy frequency samples of the superposed step responses.
pub fn sample_trajectory(
    derived: &DerivedParams,
    events: &[PowerEvent],
    spec: &TrajectorySpec,
) -> Result<Vec<FrequencySample>> {
    if !(spec.duration_s > 0.0) || !(spec.cadence_s > 0.0) {
        return Err(invalid("duration and cadence must be positive"));
    }
    spec.noise.validate()?;
    let mut rng = substream(spec.seed, 0);
    let noise = spec.noise.sampler();
    Ok(spec
        .times()
        .map(|t| FrequencySample {
            t,
            f: derived.frequency_hz(events, t) + noise.draw(&mut rng),
            rocof: spec
                .analytic_rocof
                .then(|| derived.rocof_multi(events, t) * derived.f_nominal_hz),
        })
        .collect())
}

pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    samples: &[FrequencySample],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "f_hz", "rocof_hz_per_s"])?;
    for s in samples {
        let rocof = s.rocof.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([s.t.to_string(), s.f.to_string(), rocof])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the trajectory format. `#` lines are skipped; errors carry the line.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<FrequencySample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header_line = |rdr: &csv::Reader<R>| rdr.position().line() as usize;
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: e.position().map(|p| p.line() as usize).unwrap_or(1),
        message: e.to_string(),
    })?;
    let expected = ["t_s", "f_hz", "rocof_hz_per_s"];
    if headers.len() < 2 || headers.get(0) != Some("t_s") || headers.get(1) != Some("f_hz") {
        return Err(Error::Parse {
            line: header_line(&rdr).max(1),
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() as usize;
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(line),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(line);
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad {name} value {raw:?}"),
            })
        };
        let t = field(0, "t_s")?;
        let f = field(1, "f_hz")?;
        let rocof = match record.get(2) {
            Some(s) if !s.is_empty() => Some(field(2, "rocof_hz_per_s")?),
            _ => None,
        };
        if let Some(prev) = out.last().map(|s: &FrequencySample| s.t) {
            if !(t > prev) {
                return Err(Error::Parse {
                    line,
                    message: format!("time {t} does not increase past {prev}"),
                });
            }
        }
        out.push(FrequencySample { t, f, rocof });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfr::SystemParams;

    fn derived() -> DerivedParams {
        SystemParams {
            h: 5.0,
            d: 1.0,
            r: 0.05,
            km: 0.95,
            fh: 0.3,
            tr: 8.0,
            s_base_mva: 100.0,
            f_nominal_hz: 50.0,
            p_load_total_mw: 1000.0,
        }
        .derive()
        .unwrap()
    }

    #[test]
    fn noiseless_on_curve() {
        let d = derived();
        let ev = [PowerEvent { time: 0.0, delta_p: 0.1 }];
        let s = sample_trajectory(&d, &ev, &TrajectorySpec::new(2.0, NoiseModel::None, 1)).unwrap();
        assert_eq!(s.len(), 126);
        for x in &s {
            assert_eq!(x.f, d.frequency_hz(&ev, x.t));
        }
        assert!((s[1].t - 0.016).abs() < 1e-15);
    }

    #[test]
    fn uniform_support_respected() {
        let d = derived();
        let spec = TrajectorySpec::new(
            1600.0,
            NoiseModel::Uniform { half_width_hz: 0.01 },
            7,
        );
        let s = sample_trajectory(&d, &[], &spec).unwrap();
        assert!(s.len() >= 100_000);
        let dev: Vec<f64> = s.iter().map(|x| x.f - 50.0).collect();
        assert!(dev.iter().all(|e| e.abs() <= 0.01));
        let var = dev.iter().map(|e| e * e).sum::<f64>() / dev.len() as f64;
        assert!((var.sqrt() - 0.01 / 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let d = derived();
        let ev = [PowerEvent { time: 0.0, delta_p: 0.1 }];
        let mut spec = TrajectorySpec::new(0.5, NoiseModel::Gaussian { std_hz: 0.01 }, 3);
        spec.analytic_rocof = true;
        let s = sample_trajectory(&d, &ev, &spec).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &s, Some(&Provenance::new("abc", 3))).unwrap();
        let back = read_trajectory_csv(&buf[..]).unwrap();
        assert_eq!(back, s);

        let bad = "t_s,f_hz,rocof_hz_per_s\n0,50,\n0.016,oops,\n";
        match read_trajectory_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let backwards = "t_s,f_hz\n0.1,50\n0.05,50\n";
        assert!(matches!(
            read_trajectory_csv(backwards.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
