//! Relative-error statistics, the full regression metric suite, GVF-binned
//! reporting, and pooled vs per-seed aggregation.
//!
//! Percentiles use linear interpolation between order statistics; the median
//! is the mean of the two central order statistics for even n. Percentile and
//! coverage statistics are computed on |RE|; signed REs are retained for
//! plotting.

use crate::error::{Error, Result};
use crate::splits::Parity;

/// Truth/prediction pairs with per-sample GVF and seed id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorVector {
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub gvf: Vec<f64>,
    pub seed: Vec<u64>,
}

impl ErrorVector {
    pub fn new(y: Vec<f64>, y_hat: Vec<f64>, gvf: Vec<f64>, seed: Vec<u64>) -> Result<Self> {
        let n = y.len();
        if y_hat.len() != n || gvf.len() != n || seed.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} entries in every column"),
                actual: format!("{}/{}/{}", y_hat.len(), gvf.len(), seed.len()),
            });
        }
        let zero_indices: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 0.0)
            .map(|(i, _)| i)
            .collect();
        if !zero_indices.is_empty() {
            return Err(Error::Validation(format!(
                "y contains zeros at indices {zero_indices:?}; relative errors undefined"
            )));
        }
        Ok(ErrorVector { y, y_hat, gvf, seed })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.y_hat.iter().zip(&self.y).map(|(p, t)| p - t).collect()
    }

    pub fn extend(&mut self, other: &ErrorVector) {
        self.y.extend_from_slice(&other.y);
        self.y_hat.extend_from_slice(&other.y_hat);
        self.gvf.extend_from_slice(&other.gvf);
        self.seed.extend_from_slice(&other.seed);
    }

    fn filter_by<F: Fn(usize) -> bool>(&self, keep: F) -> ErrorVector {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        ErrorVector {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            y_hat: idx.iter().map(|&i| self.y_hat[i]).collect(),
            gvf: idx.iter().map(|&i| self.gvf[i]).collect(),
            seed: idx.iter().map(|&i| self.seed[i]).collect(),
        }
    }
}

/// Signed relative errors in percent.
pub fn relative_errors(ev: &ErrorVector) -> Vec<f64> {
    ev.y_hat
        .iter()
        .zip(&ev.y)
        .map(|(p, t)| (p - t) / t * 100.0)
        .collect()
}

/// Linear-interpolation percentile of unsorted data, q in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    percentile_sorted(&sorted, q)
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// The regression metric suite. Metrics whose normalizer is degenerate on the
/// evaluated subset are reported as `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub rnrmse: Option<f64>,
    pub avgnrmse: Option<f64>,
    pub mae: f64,
    pub medae: f64,
    /// Percent.
    pub mape: f64,
    /// Percent.
    pub medape: f64,
    pub r_squared: Option<f64>,
}

/// Full per-subset report: |RE| percentiles and coverage plus the metric
/// suite.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub max_abs_re: f64,
    pub p99_abs_re: f64,
    pub p95_abs_re: f64,
    pub p50_abs_re: f64,
    /// Fraction of |RE| <= 10%, in percent.
    pub coverage_10: f64,
    /// Fraction of |RE| <= 5%, in percent.
    pub coverage_5: f64,
    pub metrics: Metrics,
}

pub fn compute_metrics(ev: &ErrorVector) -> Result<Metrics> {
    let n = ev.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 samples for the metric suite, got {n}"
        )));
    }
    let nf = n as f64;
    let e = ev.errors();
    let sse: f64 = e.iter().map(|v| v * v).sum();
    let rmse = (sse / nf).sqrt();
    let y_mean = ev.y.iter().sum::<f64>() / nf;
    let y_min = ev.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ev.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rnrmse = (y_max > y_min).then(|| rmse / (y_max - y_min));
    let avgnrmse = (y_mean != 0.0).then(|| rmse / y_mean);
    let mae = e.iter().map(|v| v.abs()).sum::<f64>() / nf;
    let abs_e: Vec<f64> = e.iter().map(|v| v.abs()).collect();
    let medae = percentile(&abs_e, 50.0);
    let ape: Vec<f64> = e
        .iter()
        .zip(&ev.y)
        .map(|(e, y)| (e / y).abs() * 100.0)
        .collect();
    let mape = ape.iter().sum::<f64>() / nf;
    let medape = percentile(&ape, 50.0);
    let ss_tot: f64 = ev.y.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r_squared = (ss_tot > 0.0).then(|| 1.0 - sse / ss_tot);
    Ok(Metrics {
        rmse,
        rnrmse,
        avgnrmse,
        mae,
        medae,
        mape,
        medape,
        r_squared,
    })
}

pub fn compute_report(ev: &ErrorVector) -> Result<EvalReport> {
    let metrics = compute_metrics(ev)?;
    let abs_re: Vec<f64> = relative_errors(ev).iter().map(|v| v.abs()).collect();
    let n = abs_re.len();
    let mut sorted = abs_re.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let coverage = |limit: f64| {
        abs_re.iter().filter(|&&v| v <= limit).count() as f64 / n as f64 * 100.0
    };
    Ok(EvalReport {
        n,
        max_abs_re: sorted[n - 1],
        p99_abs_re: percentile_sorted(&sorted, 99.0),
        p95_abs_re: percentile_sorted(&sorted, 95.0),
        p50_abs_re: percentile_sorted(&sorted, 50.0),
        coverage_10: coverage(10.0),
        coverage_5: coverage(5.0),
        metrics,
    })
}

/// GVF bin edges as fractions; the canonical ranges are 0-15, 15-35, 35-50,
/// 50-70, 70-80, and 80-95 percent.
pub const DEFAULT_GVF_BIN_EDGES: [f64; 7] = [0.0, 0.15, 0.35, 0.50, 0.70, 0.80, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct GvfBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// `None` when the bin holds fewer than 2 samples.
    pub report: Option<EvalReport>,
    /// True for the synthetic overflow bin collecting out-of-range GVFs.
    pub overflow: bool,
}

/// Per-bin reports; membership is gvf in [lo, hi). Samples outside every bin
/// land in a flagged overflow bin.
pub fn gvf_binned_report(ev: &ErrorVector, edges: &[f64]) -> Result<Vec<GvfBin>> {
    if edges.len() < 2 {
        return Err(Error::Parameter("need at least two bin edges".into()));
    }
    let mut bins = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let sub = ev.filter_by(|i| ev.gvf[i] >= lo && ev.gvf[i] < hi);
        bins.push(GvfBin {
            lo,
            hi,
            n: sub.len(),
            report: if sub.len() >= 2 {
                Some(compute_report(&sub)?)
            } else {
                None
            },
            overflow: false,
        });
    }
    let lo_edge = edges[0];
    let hi_edge = *edges.last().unwrap();
    let overflow = ev.filter_by(|i| ev.gvf[i] < lo_edge || ev.gvf[i] >= hi_edge);
    if !overflow.is_empty() {
        bins.push(GvfBin {
            lo: hi_edge,
            hi: f64::INFINITY,
            n: overflow.len(),
            report: if overflow.len() >= 2 {
                Some(compute_report(&overflow)?)
            } else {
                None
            },
            overflow: true,
        });
    }
    Ok(bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    /// Concatenate all errors across seeds, then compute statistics.
    Pooled,
    /// Compute each metric per seed, then report mean and stdev across seeds.
    PerSeedMeanStd,
}

/// One seed's test-set errors, tagged with the split it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedErrors {
    pub seed: u64,
    pub parity: Parity,
    pub errors: ErrorVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggregateReport {
    Pooled(EvalReport),
    PerSeed {
        n_seeds: usize,
        max_abs_re: MeanStd,
        p99_abs_re: MeanStd,
        p95_abs_re: MeanStd,
        p50_abs_re: MeanStd,
        coverage_10: MeanStd,
        coverage_5: MeanStd,
        rmse: MeanStd,
        rnrmse: Option<MeanStd>,
        avgnrmse: Option<MeanStd>,
        mae: MeanStd,
        medae: MeanStd,
        mape: MeanStd,
        medape: MeanStd,
        r_squared: Option<MeanStd>,
    },
}

pub fn aggregate_over_seeds(runs: &[SeedErrors], mode: AggregationMode) -> Result<AggregateReport> {
    if runs.is_empty() {
        return Err(Error::Parameter("no seed runs to aggregate".into()));
    }
    if runs.iter().any(|r| r.parity != runs[0].parity) {
        return Err(Error::Parameter(
            "cannot aggregate runs from different splits".into(),
        ));
    }
    match mode {
        AggregationMode::Pooled => {
            let mut all = runs[0].errors.clone();
            for r in &runs[1..] {
                all.extend(&r.errors);
            }
            Ok(AggregateReport::Pooled(compute_report(&all)?))
        }
        AggregationMode::PerSeedMeanStd => {
            let reports: Vec<EvalReport> = runs
                .iter()
                .map(|r| compute_report(&r.errors))
                .collect::<Result<_>>()?;
            let collect = |f: &dyn Fn(&EvalReport) -> f64| {
                mean_std(&reports.iter().map(f).collect::<Vec<f64>>())
            };
            let collect_opt = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
                let vals: Vec<f64> = reports.iter().filter_map(f).collect();
                (vals.len() == reports.len()).then(|| mean_std(&vals))
            };
            Ok(AggregateReport::PerSeed {
                n_seeds: runs.len(),
                max_abs_re: collect(&|r| r.max_abs_re),
                p99_abs_re: collect(&|r| r.p99_abs_re),
                p95_abs_re: collect(&|r| r.p95_abs_re),
                p50_abs_re: collect(&|r| r.p50_abs_re),
                coverage_10: collect(&|r| r.coverage_10),
                coverage_5: collect(&|r| r.coverage_5),
                rmse: collect(&|r| r.metrics.rmse),
                rnrmse: collect_opt(&|r| r.metrics.rnrmse),
                avgnrmse: collect_opt(&|r| r.metrics.avgnrmse),
                mae: collect(&|r| r.metrics.mae),
                medae: collect(&|r| r.metrics.medae),
                mape: collect(&|r| r.metrics.mape),
                medape: collect(&|r| r.metrics.medape),
                r_squared: collect_opt(&|r| r.metrics.r_squared),
            })
        }
    }
}

/// Mean +- 1 stdev across seeds of the fraction of |RE| within each threshold.
pub fn coverage_curve(runs: &[SeedErrors], thresholds: &[f64]) -> Vec<(f64, MeanStd)> {
    thresholds
        .iter()
        .map(|&thr| {
            let per_seed: Vec<f64> = runs
                .iter()
                .map(|r| {
                    let abs_re: Vec<f64> =
                        relative_errors(&r.errors).iter().map(|v| v.abs()).collect();
                    abs_re.iter().filter(|&&v| v <= thr).count() as f64
                        / abs_re.len() as f64
                        * 100.0
                })
                .collect();
            (thr, mean_std(&per_seed))
        })
        .collect()
}
