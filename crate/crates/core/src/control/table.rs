use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Result, invalid};
use crate::provenance::Provenance;
use crate::sfr::DerivedParams;

/// ROCOF threshold over one frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub rocof_threshold_hz_per_s: f64,
}

/// Frequency-dependent ROCOF thresholds, top band first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShedConditionTable {
    pub rows: Vec<ConditionRow>,
    pub f_nominal_hz: f64,
    pub bin_width_hz: f64,
}

impl ShedConditionTable {
    pub fn row_for(&self, f_hz: f64) -> Option<&ConditionRow> {
        let guess = ((self.f_nominal_hz - f_hz) / self.bin_width_hz).floor();
        if !guess.is_finite() || guess < -1.0 {
            return None;
        }
        let g = guess as i64;
        (g - 1..=g + 1)
            .filter(|&i| i >= 0 && (i as usize) < self.rows.len())
            .map(|i| &self.rows[i as usize])
            .find(|r| f_hz >= r.f_low_hz && f_hz < r.f_high_hz)
    }

    /// True when the sample lies in a band and its ROCOF is below the band's threshold.
    pub fn is_satisfied(&self, f_hz: f64, rocof_hz_per_s: f64) -> bool {
        self.row_for(f_hz)
            .is_some_and(|r| rocof_hz_per_s < r.rocof_threshold_hz_per_s)
    }

    pub fn f_s_hz(&self) -> f64 {
        self.rows.last().map(|r| r.f_low_hz).unwrap_or(self.f_nominal_hz)
    }
}

/// Thresholds follow the ROCOF of the threshold-loss trajectory, evaluated
/// where that trajectory crosses each band's lower edge. The band ending at
/// `f_s` is reached exactly at the nadir, so its threshold is zero.
pub fn build_condition_table(
    derived: &DerivedParams,
    f_s_hz: f64,
    bin_width_hz: f64,
) -> Result<ShedConditionTable> {
    let f_n = derived.f_nominal_hz;
    if !(f_s_hz < f_n) {
        return Err(invalid(format!("objective frequency {f_s_hz} Hz must be below {f_n} Hz")));
    }
    if !(bin_width_hz > 0.0) {
        return Err(invalid("bin width must be positive"));
    }
    let span = f_n - f_s_hz;
    let n = (span / bin_width_hz).round();
    if n < 1.0 || (n * bin_width_hz - span).abs() > 1e-9 {
        return Err(invalid(format!("bin width {bin_width_hz} Hz does not divide {span} Hz")));
    }
    let n = n as usize;
    let dp_s = derived.threshold_power_loss(f_s_hz)?;
    let t_nadir = derived.t_nadir();
    let freq = |t: f64| f_n * (1.0 + derived.delta_f(dp_s, t));
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let f_high = f_n - i as f64 * bin_width_hz;
        let f_low = if i + 1 == n { f_s_hz } else { f_n - (i + 1) as f64 * bin_width_hz };
        let threshold = if i + 1 == n {
            0.0
        } else {
            // frequency falls monotonically on [0, t_nadir]
            let (mut lo, mut hi) = (0.0, t_nadir);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if freq(mid) > f_low {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            derived.rocof_hz(dp_s, 0.5 * (lo + hi))
        };
        rows.push(ConditionRow { f_low_hz: f_low, f_high_hz: f_high, rocof_threshold_hz_per_s: threshold });
    }
    Ok(ShedConditionTable { rows, f_nominal_hz: f_n, bin_width_hz })
}

pub fn write_condition_table<W: Write>(
    mut out: W,
    table: &ShedConditionTable,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f_low_hz", "f_high_hz", "rocof_threshold_hz_per_s"])?;
    for r in &table.rows {
        w.write_record([
            format!("{:.2}", r.f_low_hz),
            format!("{:.2}", r.f_high_hz),
            format!("{:.4}", r.rocof_threshold_hz_per_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
