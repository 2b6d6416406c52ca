//! Run records, trainability statistics per network size, and kernel density
//! estimates of accuracy distributions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cvqnn::NetworkShape;
use crate::model::NetworkKind;

/// Accuracy at or below which a run counts as failed (chance is 0.25 for
/// four balanced classes).
pub const FAILED_BAND: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "state", content = "message")]
pub enum RunStatus {
    Completed,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub kind: NetworkKind,
    pub shape: NetworkShape,
    /// Layer widths of a classical network; empty for hybrid networks.
    #[serde(default)]
    pub widths: Vec<usize>,
    pub param_count: usize,
    pub seed: u64,
    pub a_max: Option<f64>,
    pub status: RunStatus,
    pub best_val_accuracy: f64,
    /// 1-based; 0 when no epoch finished.
    pub best_epoch: usize,
    pub final_val_accuracy: f64,
    /// Path of the per-epoch history relative to the run directory.
    pub history: String,
    pub wall_time_s: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub kind: NetworkKind,
    pub param_count: usize,
    pub runs: usize,
    pub well_trained: usize,
    /// Mean and sample standard deviation of the well-trained accuracies.
    pub well_trained_mean: Option<f64>,
    pub well_trained_std: Option<f64>,
    pub poorly_trained_fraction: f64,
    pub failed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub threshold: f64,
    pub failed_band: f64,
    pub total_runs: usize,
    pub sizes: Vec<SizeSummary>,
    /// SHA-256 over the sorted run ids, one per line.
    pub checksum: String,
}

/// Hex SHA-256 of the sorted run ids joined by newlines.
pub fn run_checksum<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut joined = String::new();
    for id in ids {
        joined.push_str(id);
        joined.push('\n');
    }
    sha256_hex(joined.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn mean_and_sample_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Group records by (kind, parameter count). A run is well-trained above
/// `threshold`, poorly trained at or below it, and failed at or below
/// [`FAILED_BAND`]. Runs that stopped with an error count with the best
/// accuracy they reached.
pub fn summarize(records: &[RunRecord], threshold: f64) -> SweepSummary {
    let mut keys: Vec<(NetworkKind, usize)> =
        records.iter().map(|r| (r.kind, r.param_count)).collect();
    keys.sort_by_key(|(k, p)| (*k == NetworkKind::Classical, *p));
    keys.dedup();
    let sizes = keys
        .into_iter()
        .map(|(kind, param_count)| {
            let acc: Vec<f64> = records
                .iter()
                .filter(|r| r.kind == kind && r.param_count == param_count)
                .map(|r| r.best_val_accuracy)
                .collect();
            let n = acc.len() as f64;
            let good: Vec<f64> = acc.iter().copied().filter(|a| *a > threshold).collect();
            let stats = mean_and_sample_std(&good);
            SizeSummary {
                kind,
                param_count,
                runs: acc.len(),
                well_trained: good.len(),
                well_trained_mean: stats.map(|s| s.0),
                well_trained_std: stats.map(|s| s.1),
                poorly_trained_fraction: acc.iter().filter(|a| **a <= threshold).count() as f64 / n,
                failed_fraction: acc.iter().filter(|a| **a <= FAILED_BAND).count() as f64 / n,
            }
        })
        .collect();
    SweepSummary {
        threshold,
        failed_band: FAILED_BAND,
        total_runs: records.len(),
        sizes,
        checksum: run_checksum(records.iter().map(|r| r.run_id.as_str())),
    }
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

impl Kde {
    /// `None` for fewer than two samples or zero spread.
    pub fn fit(samples: &[f64]) -> Option<Self> {
        let (_, std) = mean_and_sample_std(samples)?;
        if samples.len() < 2 {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
        let bandwidth = 0.9 * spread * (samples.len() as f64).powf(-0.2);
        (bandwidth > 0.0).then(|| Self {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        let norm = 1.0
            / (self.samples.len() as f64 * self.bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        self.samples
            .iter()
            .map(|s| (-0.5 * ((x - s) / self.bandwidth).powi(2)).exp())
            .sum::<f64>()
            * norm
    }

    /// Evaluation grid of `points` values covering the samples plus five
    /// bandwidths on each side.
    pub fn support(&self, points: usize) -> Vec<f64> {
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * self.bandwidth;
        let hi = self
            .samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            + 5.0 * self.bandwidth;
        let n = points.max(2);
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Composite Simpson integral of equally spaced samples (an odd count of at
/// least three points; a trailing even point is handled by the trapezoid rule).
pub fn simpson(ys: &[f64], dx: f64) -> f64 {
    match ys.len() {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (ys[0] + ys[1]),
        n => {
            let m = if n % 2 == 1 { n } else { n - 1 };
            let mut s = ys[0] + ys[m - 1];
            for (i, y) in ys[1..m - 1].iter().enumerate() {
                s += if i % 2 == 0 { 4.0 * y } else { 2.0 * y };
            }
            let mut total = s * dx / 3.0;
            if m < n {
                total += 0.5 * dx * (ys[n - 2] + ys[n - 1]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, kind: NetworkKind, params: usize, acc: f64) -> RunRecord {
        RunRecord {
            run_id: id.into(),
            kind,
            shape: NetworkShape::new(8, 2, 1, 4, 7).unwrap(),
            widths: vec![],
            param_count: params,
            seed: 0,
            a_max: None,
            status: RunStatus::Completed,
            best_val_accuracy: acc,
            best_epoch: 1,
            final_val_accuracy: acc,
            history: "history.csv".into(),
            wall_time_s: 0.0,
            config_hash: String::new(),
        }
    }

    #[test]
    fn summary_fractions() {
        let runs = vec![
            record("a", NetworkKind::Hybrid, 118, 0.85),
            record("b", NetworkKind::Hybrid, 118, 0.80),
            record("c", NetworkKind::Hybrid, 118, 0.25),
            record("d", NetworkKind::Classical, 124, 0.5),
        ];
        let s = summarize(&runs, 0.72);
        assert_eq!(s.total_runs, 4);
        let h = &s.sizes[0];
        assert_eq!(
            (h.kind, h.runs, h.well_trained),
            (NetworkKind::Hybrid, 3, 2)
        );
        assert!((h.well_trained_mean.unwrap() - 0.825).abs() < 1e-12);
        assert!((h.well_trained_std.unwrap() - 0.05f64.hypot(0.0) / 2f64.sqrt()).abs() < 1e-12);
        assert!((h.poorly_trained_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!((h.failed_fraction - 1.0 / 3.0).abs() < 1e-12);
        let c = &s.sizes[1];
        assert_eq!(c.well_trained_mean, None);
        assert_eq!((c.poorly_trained_fraction, c.failed_fraction), (1.0, 0.0));
        assert_eq!(summarize(&[], 0.7).sizes.len(), 0);
    }

    #[test]
    fn checksum_ignores_order() {
        assert_eq!(run_checksum(["b", "a"]), run_checksum(["a", "b"]));
        assert_ne!(run_checksum(["a"]), run_checksum(["a", "a"]));
        assert_eq!(run_checksum([]).len(), 64);
    }

    #[test]
    fn kde_integrates_to_one() {
        let samples = [0.81, 0.84, 0.85, 0.86, 0.79, 0.25, 0.83];
        let kde = Kde::fit(&samples).unwrap();
        let xs = kde.support(2001);
        let ys: Vec<f64> = xs.iter().map(|x| kde.density(*x)).collect();
        assert!((simpson(&ys, xs[1] - xs[0]) - 1.0).abs() < 1e-3);
        assert!(Kde::fit(&[0.5]).is_none());
        assert!(Kde::fit(&[0.5, 0.5]).is_none());
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        assert!((simpson(&ys, 0.1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
