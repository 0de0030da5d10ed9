//! End-to-end orchestration: process the dataset at a target rate, assign
//! chronological groups, split by parity, build windows, scale, train across
//! seeds, and evaluate against the no-model baseline.

use crate::dsp::{process_series, ResampleSpec};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_over_seeds, compute_report, coverage_curve, gvf_binned_report, AggregateReport,
    AggregationMode, ErrorVector, EvalReport, GvfBin, MeanStd, DEFAULT_GVF_BIN_EDGES,
};
use crate::nn::{count_complexity, ComplexityReport, ModelKind, ModelSpec};
use crate::splits::{
    apply_scaler, build_mean_windows, build_windows, fit_scaler, make_split, Parity, SplitPlan,
    SplitWindows, WindowConfig, WindowedSample,
};
use crate::trainer::{
    preset_hyperparameters, preset_window_len, seed_sweep, tune_hyperparameters, GridScore,
    PreparedSplit, SweepOutcome, TrainConfig,
};
use crate::types::{Experiment, APPARENT_MF_MAIN};
use sha2::{Digest, Sha256};

/// All recognized rate labels, in report order.
pub const RATE_LABELS: [&str; 10] = [
    "0.25s", "0.5s", "1s", "2s", "3s", "4s", "5s", "6s", "original", "60s",
];

pub fn rate_from_str(s: &str) -> Result<ResampleSpec> {
    match s {
        "original" => Ok(ResampleSpec::Original),
        "60s" => Ok(ResampleSpec::PerExperimentMean),
        _ => {
            let num = s.strip_suffix('s').ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown rate {s:?}; expected one of {RATE_LABELS:?}"
                ))
            })?;
            let interval_s: f64 = num
                .parse()
                .map_err(|_| Error::Parameter(format!("unknown rate {s:?}")))?;
            if !crate::dsp::DOWNSAMPLE_INTERVALS_S.contains(&interval_s) {
                return Err(Error::Parameter(format!(
                    "interval {interval_s} s is not one of {:?}",
                    crate::dsp::DOWNSAMPLE_INTERVALS_S
                )));
            }
            Ok(ResampleSpec::Interval { interval_s })
        }
    }
}

pub fn rate_label(spec: &ResampleSpec) -> String {
    match spec {
        ResampleSpec::Original => "original".into(),
        ResampleSpec::PerExperimentMean => "60s".into(),
        ResampleSpec::Interval { interval_s } => format!("{interval_s}s"),
    }
}

/// Master window length at a rate: the maximum over all models, so every model
/// sees identical (t, y_t) targets.
pub fn master_window_len(spec: &ResampleSpec) -> usize {
    match spec {
        ResampleSpec::PerExperimentMean => 2,
        _ => 5,
    }
}

fn process_experiment(exp: &Experiment, spec: &ResampleSpec) -> Result<Experiment> {
    Ok(Experiment {
        group_id: exp.group_id,
        op: exp.op.clone(),
        duration_s: exp.duration_s,
        channels: process_series(&exp.channels, spec)?,
        truth: process_series(&exp.truth, spec)?,
    })
}

/// Processes every experiment at the target rate and assigns chronological
/// group ids starting at 1. Experiments that fail processing, end up shorter
/// than `min_samples`, or contain non-finite readings are excluded with a
/// logged reason; excluded experiments keep their ids.
pub fn process_dataset(
    ds: &[Experiment],
    spec: &ResampleSpec,
    min_samples: usize,
) -> (Vec<Experiment>, Vec<(u32, String)>) {
    let mut kept = Vec::with_capacity(ds.len());
    let mut excluded = Vec::new();
    for (idx, exp) in ds.iter().enumerate() {
        let id = (idx + 1) as u32;
        match process_experiment(exp, spec) {
            Ok(mut p) => {
                p.group_id = id;
                if p.num_samples() < min_samples {
                    excluded.push((
                        id,
                        format!("too few samples: {} < {min_samples}", p.num_samples()),
                    ));
                } else if !p.channels.all_finite() || !p.truth.all_finite() {
                    excluded.push((id, "non-finite reading".into()));
                } else {
                    kept.push(p);
                }
            }
            Err(e) => excluded.push((id, e.to_string())),
        }
    }
    (kept, excluded)
}

/// No-model predictions: the apparent combined mass flow at each test target.
pub fn baseline_errors(raw_test_windows: &[WindowedSample]) -> Result<ErrorVector> {
    let y: Vec<f64> = raw_test_windows.iter().map(|w| w.y).collect();
    let y_hat: Vec<f64> = raw_test_windows
        .iter()
        .map(|w| w.x[APPARENT_MF_MAIN * w.n_w + (w.n_w - 1)])
        .collect();
    let gvf: Vec<f64> = raw_test_windows.iter().map(|w| w.gvf).collect();
    ErrorVector::new(y, y_hat, gvf, vec![0; raw_test_windows.len()])
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub rate: ResampleSpec,
    pub kind: ModelKind,
    pub parity: Parity,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    pub val_fraction: f64,
    /// Grid-search hyperparameters with rolling-origin CV instead of presets.
    pub tune: bool,
    pub cv_k: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl PipelineOptions {
    pub fn new(rate: ResampleSpec, kind: ModelKind, parity: Parity, seeds: Vec<u64>) -> Self {
        PipelineOptions {
            rate,
            kind,
            parity,
            seeds,
            split_seed: 1,
            val_fraction: 1.0 / 3.0,
            tune: false,
            cv_k: 5,
            batch_size: 2,
            max_epochs: 60,
            patience: 10,
        }
    }
}

/// Everything produced by one (rate, model, parity, seeds) run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub plan: SplitPlan,
    pub excluded: Vec<(u32, String)>,
    pub model_spec: ModelSpec,
    pub train_cfg: TrainConfig,
    pub grid_scores: Option<Vec<GridScore>>,
    pub sweep: SweepOutcome,
    pub baseline_errors: ErrorVector,
    pub baseline: EvalReport,
    pub pooled: AggregateReport,
    pub per_seed: AggregateReport,
    pub gvf_bins: Vec<GvfBin>,
    pub coverage: Vec<(f64, MeanStd)>,
    pub complexity: ComplexityReport,
}

fn build_split_windows(
    kept: &[Experiment],
    plan: &SplitPlan,
    rate: &ResampleSpec,
    master: usize,
) -> Result<SplitWindows> {
    let cfg = WindowConfig::new(master);
    match rate {
        ResampleSpec::PerExperimentMean => build_mean_windows(kept, plan, &cfg),
        _ => build_windows(kept, plan, &cfg),
    }
}

/// Splits, scales, and packages windows for training. The scaler is fitted on
/// the training windows only; raw test targets and GVFs are carried alongside
/// for evaluation in kg/h.
pub fn prepare_split(windows: &SplitWindows, parity: Parity) -> Result<PreparedSplit> {
    let scaler = fit_scaler(&windows.train)?;
    Ok(PreparedSplit {
        parity,
        train: apply_scaler(&scaler, &windows.train),
        val: apply_scaler(&scaler, &windows.val),
        test: apply_scaler(&scaler, &windows.test),
        test_raw_y: windows.test.iter().map(|w| w.y).collect(),
        test_gvf: windows.test.iter().map(|w| w.gvf).collect(),
        scaler,
    })
}

pub fn run(ds: &[Experiment], opts: &PipelineOptions) -> Result<RunOutput> {
    let per_mean = matches!(opts.rate, ResampleSpec::PerExperimentMean);
    let master = master_window_len(&opts.rate);
    let min_samples = if per_mean { 1 } else { master };
    let (kept, excluded) = process_dataset(ds, &opts.rate, min_samples);
    let plan = make_split(&kept, opts.parity, opts.val_fraction, opts.split_seed)?;
    let windows = build_split_windows(&kept, &plan, &opts.rate, master)?;

    let window_len = preset_window_len(per_mean, opts.kind);
    let model_spec = match opts.kind {
        ModelKind::Mlp => ModelSpec::mlp(0),
        ModelKind::Mlpw => ModelSpec::mlpw(window_len, 0),
        ModelKind::Cnn => ModelSpec::cnn(window_len, 0),
    };
    let (lr, wd) = preset_hyperparameters(per_mean, opts.kind, opts.parity);
    let base_cfg = TrainConfig {
        learning_rate: lr,
        weight_decay: wd,
        batch_size: opts.batch_size,
        max_epochs: opts.max_epochs,
        patience: opts.patience,
        seed: 0,
        shuffle: true,
    };
    let (train_cfg, grid_scores) = if opts.tune {
        let grid: Vec<(f64, f64)> = [1e-3, 1e-4]
            .iter()
            .flat_map(|&lr| [1e-3, 1e-4, 1e-5].iter().map(move |&wd| (lr, wd)))
            .collect();
        let (cfg, scores) = tune_hyperparameters(
            &model_spec,
            &windows.train,
            &plan.train_groups,
            &grid,
            opts.cv_k,
            &base_cfg,
        )?;
        (cfg, Some(scores))
    } else {
        (base_cfg, None)
    };

    let prepared = prepare_split(&windows, opts.parity)?;
    let sweep = seed_sweep(&model_spec, &prepared, &train_cfg, &opts.seeds)?;
    if sweep.runs.is_empty() {
        return Err(Error::Numeric(format!(
            "all {} seeds failed; first failure: {}",
            opts.seeds.len(),
            sweep.failures[0].1
        )));
    }

    let baseline_ev = baseline_errors(&windows.test)?;
    let baseline = compute_report(&baseline_ev)?;

    let seed_errs: Vec<_> = sweep.runs.iter().map(|r| r.errors.clone()).collect();
    let pooled = aggregate_over_seeds(&seed_errs, AggregationMode::Pooled)?;
    let per_seed = aggregate_over_seeds(&seed_errs, AggregationMode::PerSeedMeanStd)?;
    let mut all = seed_errs[0].errors.clone();
    for r in &seed_errs[1..] {
        all.extend(&r.errors);
    }
    let gvf_bins = gvf_binned_report(&all, &DEFAULT_GVF_BIN_EDGES)?;
    let thresholds: Vec<f64> = (1..=30).map(|t| t as f64).collect();
    let coverage = coverage_curve(&seed_errs, &thresholds);
    let complexity = count_complexity(&model_spec)?;

    Ok(RunOutput {
        plan,
        excluded,
        model_spec,
        train_cfg,
        grid_scores,
        sweep,
        baseline_errors: baseline_ev,
        baseline,
        pooled,
        per_seed,
        gvf_bins,
        coverage,
        complexity,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reproducibility manifest: hashes and settings sufficient to bit-reproduce
/// the run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub dataset_sha256: String,
    pub rate: String,
    pub model: String,
    pub parity: String,
    pub split_seed: u64,
    pub val_fraction: f64,
    pub window_len: usize,
    pub master_window_len: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seeds: Vec<u64>,
    pub split_manifest: String,
}

impl RunManifest {
    pub fn from_run(dataset_bytes: &[u8], opts: &PipelineOptions, out: &RunOutput) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_sha256: sha256_hex(dataset_bytes),
            rate: rate_label(&opts.rate),
            model: opts.kind.as_str().to_string(),
            parity: opts.parity.as_str().to_string(),
            split_seed: opts.split_seed,
            val_fraction: opts.val_fraction,
            window_len: out.model_spec.window_len,
            master_window_len: master_window_len(&opts.rate),
            learning_rate: out.train_cfg.learning_rate,
            weight_decay: out.train_cfg.weight_decay,
            batch_size: out.train_cfg.batch_size,
            max_epochs: out.train_cfg.max_epochs,
            patience: out.train_cfg.patience,
            seeds: opts.seeds.clone(),
            split_manifest: out.plan.to_manifest(),
        }
    }

    pub fn to_text(&self) -> String {
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = format!(
            "version={}\ndataset_sha256={}\nrate={}\nmodel={}\nparity={}\nsplit_seed={}\nval_fraction={}\nwindow_len={}\nmaster_window_len={}\nlearning_rate={}\nweight_decay={}\nbatch_size={}\nmax_epochs={}\npatience={}\nseeds={}\n",
            self.version,
            self.dataset_sha256,
            self.rate,
            self.model,
            self.parity,
            self.split_seed,
            self.val_fraction,
            self.window_len,
            self.master_window_len,
            self.learning_rate,
            self.weight_decay,
            self.batch_size,
            self.max_epochs,
            self.patience,
            seeds
        );
        out.push_str("[split]\n");
        out.push_str(&self.split_manifest);
        out
    }
}
