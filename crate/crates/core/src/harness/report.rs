//! Histograms, summary reports and their CSV forms.

use serde::Serialize;
use std::io::Write;

use super::montecarlo::{ConditionMcResult, EstimateMcResult};
use crate::error::Result;
use crate::provenance::Provenance;

/// Fixed-width histogram with under- and overflow counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, width: f64) -> Self {
        let n = ((hi - lo) / width).round().max(1.0) as usize;
        Self { lo, width, counts: vec![0; n], below: 0, above: 0 }
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width
    }

    pub fn add(&mut self, v: f64) {
        let x = (v - self.lo) / self.width;
        if x < 0.0 {
            self.below += 1;
        } else if x >= self.counts.len() as f64 || !x.is_finite() {
            self.above += 1;
        } else {
            let mut i = x.floor() as usize;
            // keep bin membership consistent with the printed edges
            if v < self.edge(i) {
                i -= 1;
            } else if i + 1 < self.counts.len() && v >= self.edge(i + 1) {
                i += 1;
            }
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    /// Share of the bin whose lower edge is closest to `lo_edge`.
    pub fn share_from(&self, lo_edge: f64) -> f64 {
        let i = ((lo_edge - self.lo) / self.width).round() as usize;
        self.counts[i] as f64 / self.total() as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> Result<()> {
        if let Some(p) = provenance {
            p.write_header(&mut out)?;
        }
        let total = self.total() as f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count", "share_pct"])?;
        let mut row = |lo: String, hi: String, c: u64| {
            w.write_record([lo, hi, c.to_string(), format!("{:.4}", 100.0 * c as f64 / total)])
        };
        row("-inf".into(), format!("{:.2}", self.lo), self.below)?;
        for (i, &c) in self.counts.iter().enumerate() {
            row(format!("{:.2}", self.edge(i)), format!("{:.2}", self.edge(i + 1)), c)?;
        }
        row(format!("{:.2}", self.edge(self.counts.len())), "inf".into(), self.above)?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_condition_results<W: Write>(
    mut out: W,
    rows: &[ConditionMcResult],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["loss_mw", "noise_hz", "trials", "shed_needed", "probability", "std_err"])?;
    for r in rows {
        w.write_record([
            r.loss_mw.to_string(),
            r.noise_hz.to_string(),
            r.trials.to_string(),
            r.shed_needed.to_string(),
            format!("{:.6}", r.probability),
            format!("{:.6}", r.std_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn estimate_summary(r: &EstimateMcResult, ekf: bool) -> String {
    if ekf {
        format!(
            "trials={} truth={:.3} param_noise={} within_4pct={:.4} mean={:.4} lse_within_4pct={:.4}",
            r.trials, r.truth, r.param_noise, r.ekf_within, r.ekf_mean, r.lse_within
        )
    } else {
        format!(
            "trials={} truth={:.3} mean={:.4} within_4pct={:.4}",
            r.trials, r.truth, r.lse_mean, r.lse_within
        )
    }
}

/// Outcome of a fleet or closed-loop run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrialReport {
    pub outlets: usize,
    pub outlets_off: usize,
    /// MW, counting each simulated outlet at its represented weight.
    pub shed_total_mw: f64,
    pub target_shed_mw: f64,
    pub nadir_hz: Option<f64>,
    pub nadir_without_hz: Option<f64>,
    pub latency_median_s: Option<f64>,
    pub latency_p05_s: Option<f64>,
    pub latency_p95_s: Option<f64>,
    pub off_by_cause: Vec<(String, usize)>,
}

impl TrialReport {
    pub fn lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("outlets={}", self.outlets),
            format!("outlets_off={}", self.outlets_off),
            format!("shed_total_mw={:.3}", self.shed_total_mw),
            format!("target_shed_mw={:.3}", self.target_shed_mw),
        ];
        let opt = |name: &str, x: Option<f64>, prec: usize| {
            x.map(|x| format!("{name}={x:.prec$}"))
        };
        v.extend(opt("nadir_hz", self.nadir_hz, 4));
        v.extend(opt("nadir_without_hz", self.nadir_without_hz, 4));
        v.extend(opt("latency_median_s", self.latency_median_s, 3));
        v.extend(opt("latency_p05_s", self.latency_p05_s, 3));
        v.extend(opt("latency_p95_s", self.latency_p95_s, 3));
        for (cause, n) in &self.off_by_cause {
            v.push(format!("off_{cause}={n}"));
        }
        v
    }

    pub fn write<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> Result<()> {
        if let Some(p) = provenance {
            p.write_header(&mut out)?;
        }
        for l in self.lines() {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

/// Quantile by nearest rank on a sorted copy.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if q == 0.5 && n % 2 == 0 {
        return Some(0.5 * (v[n / 2 - 1] + v[n / 2]));
    }
    let i = ((q * (n - 1) as f64).round() as usize).min(n - 1);
    Some(v[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_sum() {
        let mut h = Histogram::uniform(0.0, 10.0, 1.0);
        for v in [-1.0, 0.0, 0.999, 4.0, 9.999, 10.0, 20.0] {
            h.add(v);
        }
        assert_eq!(h.total(), 7);
        assert_eq!(h.below, 1);
        assert_eq!(h.above, 2);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[4], 1);
        let mut h = Histogram::uniform(4.0, 6.0, 0.2);
        h.add(4.8);
        assert_eq!(h.counts[4], 1);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), Some(2.0));
        assert_eq!(quantile(&[4.0, 1.0, 2.0, 3.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
