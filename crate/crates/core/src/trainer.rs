//! Training protocol: MSE loss, AdamW with decoupled weight decay (weights
//! only, never biases), mini-batches of 2 in seeded-shuffled order, up to 60
//! epochs with early stopping (patience 10) monitored on the hold-out
//! validation set, best-validation parameters restored. Plus rolling-origin
//! hyperparameter tuning and the multi-seed sweep.

use crate::error::{Error, Result};
use crate::eval::{compute_report, ErrorVector, EvalReport, SeedErrors};
use crate::nn::{init_model, Model, ModelKind, ModelSpec};
use crate::splits::{apply_scaler, cv_folds, fit_scaler, Parity, Scaler, WindowedSample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 2,
            max_epochs: 60,
            patience: 10,
            seed: 0,
            shuffle: true,
        }
    }
}

/// AdamW over the flattened parameter vector. Weight decay is decoupled and
/// multiplied by the learning rate; biases are exempt.
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    wd: f64,
}

impl AdamW {
    pub fn new(n_params: usize, lr: f64, wd: f64) -> Self {
        AdamW {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            lr,
            wd,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], decay_mask: &[bool]) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            if decay_mask[i] {
                params[i] -= self.lr * self.wd * params[i];
            }
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: String,
}

impl TrainLog {
    pub fn best_val_mse(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_mse
    }

    /// Append-only text form: epoch, train_mse, val_mse per record.
    pub fn to_text(&self) -> String {
        let mut out = String::from("epoch\ttrain_mse\tval_mse\n");
        for r in &self.epochs {
            out.push_str(&format!("{}\t{}\t{}\n", r.epoch, r.train_mse, r.val_mse));
        }
        out.push_str(&format!(
            "# best_epoch={} stop_reason={}\n",
            self.best_epoch, self.stop_reason
        ));
        out
    }
}

fn mean_loss(model: &Model, windows: &[WindowedSample]) -> Result<f64> {
    let mut sse = 0.0;
    for w in windows {
        let e = model.forward(&w.x)? - w.y;
        sse += e * e;
    }
    Ok(sse / windows.len() as f64)
}

/// Trains one model. `train` and `val` must already be scaled and narrowed to
/// the spec's window length. The config seed controls both initialization and
/// batch shuffling; returns the parameters from the best validation epoch.
pub fn train(
    spec: &ModelSpec,
    train_set: &[WindowedSample],
    val_set: &[WindowedSample],
    cfg: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Parameter(format!(
            "empty split: {} train / {} val windows",
            train_set.len(),
            val_set.len()
        )));
    }
    let spec = ModelSpec {
        seed: cfg.seed,
        ..*spec
    };
    let mut model = init_model(&spec)?;
    let (mut flat, decay_mask) = model.params.flatten();
    let mut opt = AdamW::new(flat.len(), cfg.learning_rate, cfg.weight_decay);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best_val = f64::INFINITY;
    let mut best_flat = flat.clone();
    let mut best_epoch = 0usize;
    let mut epochs_without_improvement = 0usize;
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stop_reason: String::new(),
    };

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut train_sse = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&[f64], f64)> = chunk
                .iter()
                .map(|&i| (train_set[i].x.as_slice(), train_set[i].y))
                .collect();
            let (loss, grads) = model.backward(&batch).map_err(|e| {
                Error::Numeric(format!("epoch {epoch}, batch {batch_idx}: {e}"))
            })?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            train_sse += loss * chunk.len() as f64;
            let (gflat, _) = grads.flatten();
            opt.step(&mut flat, &gflat, &decay_mask);
            model.params.assign_from_flat(&flat);
        }
        let train_mse = train_sse / train_set.len() as f64;
        let val_mse = mean_loss(&model, val_set)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best_flat = flat.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                log.stop_reason = format!("early_stop(patience={})", cfg.patience);
                break;
            }
        }
    }
    if log.stop_reason.is_empty() {
        log.stop_reason = format!("max_epochs({})", cfg.max_epochs);
    }
    log.best_epoch = best_epoch;
    model.params.assign_from_flat(&best_flat);
    Ok((model, log))
}

/// One evaluated hyperparameter grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub mean_fold_mse: f64,
    pub fold_mses: Vec<f64>,
}

/// Rolling-origin CV over the training groups: every grid point is scored by
/// the mean fold-evaluation MSE; ties break toward larger weight decay, then
/// smaller learning rate. Scalers are fitted per fold on the fit groups only.
pub fn tune_hyperparameters(
    spec: &ModelSpec,
    train_windows: &[WindowedSample],
    train_groups: &[u32],
    grid: &[(f64, f64)],
    k: usize,
    base_cfg: &TrainConfig,
) -> Result<(TrainConfig, Vec<GridScore>)> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    let folds = cv_folds(train_groups, k)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &(lr, wd) in grid {
        let mut fold_mses = Vec::with_capacity(folds.len());
        for (fit_groups, eval_groups) in &folds {
            let fit: Vec<WindowedSample> = train_windows
                .iter()
                .filter(|w| fit_groups.contains(&w.group_id))
                .map(|w| w.narrow(spec.window_len))
                .collect();
            let eval: Vec<WindowedSample> = train_windows
                .iter()
                .filter(|w| eval_groups.contains(&w.group_id))
                .map(|w| w.narrow(spec.window_len))
                .collect();
            if fit.is_empty() || eval.is_empty() {
                return Err(Error::Split(
                    "fold with no fit or eval windows".into(),
                ));
            }
            let scaler = fit_scaler(&fit)?;
            let fit_scaled = apply_scaler(&scaler, &fit);
            let eval_scaled = apply_scaler(&scaler, &eval);
            let cfg = TrainConfig {
                learning_rate: lr,
                weight_decay: wd,
                ..*base_cfg
            };
            let (_, log) = train(spec, &fit_scaled, &eval_scaled, &cfg)?;
            fold_mses.push(log.best_val_mse());
        }
        let mean = fold_mses.iter().sum::<f64>() / fold_mses.len() as f64;
        scores.push(GridScore {
            learning_rate: lr,
            weight_decay: wd,
            mean_fold_mse: mean,
            fold_mses,
        });
    }
    let winner = scores
        .iter()
        .min_by(|a, b| {
            a.mean_fold_mse
                .partial_cmp(&b.mean_fold_mse)
                .unwrap()
                .then(b.weight_decay.partial_cmp(&a.weight_decay).unwrap())
                .then(a.learning_rate.partial_cmp(&b.learning_rate).unwrap())
        })
        .unwrap();
    let cfg = TrainConfig {
        learning_rate: winner.learning_rate,
        weight_decay: winner.weight_decay,
        ..*base_cfg
    };
    Ok((cfg, scores))
}

/// Scaled train/val/test windows for one split, at the master window length,
/// plus the raw truth and GVF needed to evaluate in kg/h.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub parity: Parity,
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub test_raw_y: Vec<f64>,
    pub test_gvf: Vec<f64>,
    pub scaler: Scaler,
}

/// One trained seed with its test-set errors.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub model: Model,
    pub log: TrainLog,
    pub errors: SeedErrors,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub runs: Vec<SeedRun>,
    pub failures: Vec<(u64, String)>,
}

/// Evaluates a trained model on the prepared test windows, inverse-scaling
/// predictions back to kg/h.
pub fn evaluate_on_test(
    model: &Model,
    data: &PreparedSplit,
    seed: u64,
) -> Result<(SeedErrors, EvalReport)> {
    let n_w = model.spec.window_len;
    let mut y_hat = Vec::with_capacity(data.test.len());
    for w in &data.test {
        let pred_scaled = model.forward(&w.narrow(n_w).x)?;
        y_hat.push(data.scaler.inverse_target(pred_scaled));
    }
    let errors = ErrorVector::new(
        data.test_raw_y.clone(),
        y_hat,
        data.test_gvf.clone(),
        vec![seed; data.test.len()],
    )?;
    let report = compute_report(&errors)?;
    Ok((
        SeedErrors {
            seed,
            parity: data.parity,
            errors,
        },
        report,
    ))
}

/// Trains one model per seed (seed controls init and shuffling only; splits
/// and hyperparameters are fixed) and evaluates each on the test set.
/// Individual seed failures are recorded and the sweep continues. Results are
/// ordered by seed.
pub fn seed_sweep(
    spec: &ModelSpec,
    data: &PreparedSplit,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<SweepOutcome> {
    if seeds.is_empty() {
        return Err(Error::Parameter("no seeds given".into()));
    }
    let train_view: Vec<WindowedSample> =
        data.train.iter().map(|w| w.narrow(spec.window_len)).collect();
    let val_view: Vec<WindowedSample> =
        data.val.iter().map(|w| w.narrow(spec.window_len)).collect();

    let results: Vec<(u64, Result<SeedRun>)> = seeds
        .par_iter()
        .map(|&seed| {
            let run_cfg = TrainConfig { seed, ..*cfg };
            let run = train(spec, &train_view, &val_view, &run_cfg).and_then(|(model, log)| {
                let (errors, report) = evaluate_on_test(&model, data, seed)?;
                Ok(SeedRun {
                    seed,
                    model,
                    log,
                    errors,
                    report,
                })
            });
            (seed, run)
        })
        .collect();

    let mut outcome = SweepOutcome {
        runs: Vec::new(),
        failures: Vec::new(),
    };
    for (seed, res) in results {
        match res {
            Ok(run) => outcome.runs.push(run),
            Err(e) => outcome.failures.push((seed, e.to_string())),
        }
    }
    outcome.runs.sort_by_key(|r| r.seed);
    Ok(outcome)
}

/// Final hyperparameter presets per (rate family, model, parity); the "mean"
/// family is the whole-experiment average, everything else uses the 4 s row.
pub fn preset_hyperparameters(
    per_experiment_mean: bool,
    kind: ModelKind,
    parity: Parity,
) -> (f64, f64) {
    use ModelKind::*;
    use Parity::*;
    match (per_experiment_mean, kind, parity) {
        (false, Mlp, _) => (1e-3, 1e-4),
        (false, Mlpw, Even) => (1e-4, 1e-4),
        (false, Mlpw, Odd) => (1e-4, 1e-5),
        (false, Cnn, Even) => (1e-4, 1e-4),
        (false, Cnn, Odd) => (1e-4, 1e-3),
        (true, Mlp, Even) => (1e-3, 1e-3),
        (true, Mlp, Odd) => (1e-3, 1e-5),
        (true, Mlpw, _) => (1e-3, 1e-3),
        (true, Cnn, _) => (1e-3, 1e-5),
    }
}

/// Window lengths for the sequence models: 5 on short-time-averaged data,
/// 2 on whole-experiment means.
pub fn preset_window_len(per_experiment_mean: bool, kind: ModelKind) -> usize {
    match (kind, per_experiment_mean) {
        (ModelKind::Mlp, _) => 1,
        (_, false) => 5,
        (_, true) => 2,
    }
}
