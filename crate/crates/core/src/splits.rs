//! Group-aware dataset handling: chronological group assignment, even/odd
//! splits with a hold-out validation third, min-max scaling fitted on the
//! training split only, leakage-free window construction, and rolling-origin
//! cross-validation folds.

use crate::error::{Error, Result};
use crate::types::{Experiment, NUM_FEATURES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_len: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(window_len: usize) -> Self {
        WindowConfig {
            window_len,
            stride: 1,
        }
    }
}

/// One (X_t, y_t) training pair. `x` holds the D x N_w window flattened
/// feature-major: feature `d`, window column `j` lives at `d * n_w + j`;
/// the last column is time t.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub x: Vec<f64>,
    pub n_w: usize,
    pub y: f64,
    pub group_id: u32,
    pub gvf: f64,
    /// Target sample index within the source experiment.
    pub t_index: usize,
}

impl WindowedSample {
    /// View keeping only the last `n_w_view` columns; target unchanged.
    /// With `n_w_view == 1` this is the plain-MLP view of the same (t, y_t).
    pub fn narrow(&self, n_w_view: usize) -> WindowedSample {
        assert!(n_w_view >= 1 && n_w_view <= self.n_w);
        let mut x = Vec::with_capacity(NUM_FEATURES * n_w_view);
        for d in 0..NUM_FEATURES {
            let row = &self.x[d * self.n_w..(d + 1) * self.n_w];
            x.extend_from_slice(&row[self.n_w - n_w_view..]);
        }
        WindowedSample {
            x,
            n_w: n_w_view,
            y: self.y,
            group_id: self.group_id,
            gvf: self.gvf,
            t_index: self.t_index,
        }
    }
}

/// Assigns chronological group ids (starting at 1) and excludes experiments
/// that are too short for the largest window or contain non-finite readings.
/// Returns the surviving experiments plus an exclusion log.
pub fn assign_groups(
    ds: Vec<Experiment>,
    min_samples: usize,
) -> (Vec<Experiment>, Vec<(u32, String)>) {
    let mut kept = Vec::with_capacity(ds.len());
    let mut excluded = Vec::new();
    for (idx, mut exp) in ds.into_iter().enumerate() {
        let id = (idx + 1) as u32;
        exp.group_id = id;
        if exp.num_samples() < min_samples {
            excluded.push((
                id,
                format!(
                    "too few samples: {} < {min_samples}",
                    exp.num_samples()
                ),
            ));
        } else if !exp.channels.all_finite() || !exp.truth.all_finite() {
            excluded.push((id, "non-finite reading".into()));
        } else {
            kept.push(exp);
        }
    }
    (kept, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn matches(&self, group_id: u32) -> bool {
        match self {
            Parity::Even => group_id % 2 == 0,
            Parity::Odd => group_id % 2 == 1,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(Error::Parameter(format!("unknown parity {other:?}"))),
        }
    }
}

/// Train on one parity of group ids; the opposite parity is partitioned into
/// a hold-out validation third and a test two-thirds.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub parity: Parity,
    pub train_groups: Vec<u32>,
    pub val_groups: Vec<u32>,
    pub test_groups: Vec<u32>,
    pub seed: u64,
}

pub fn make_split(
    ds: &[Experiment],
    parity: Parity,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    let train_groups: Vec<u32> = ds
        .iter()
        .map(|e| e.group_id)
        .filter(|&g| parity.matches(g))
        .collect();
    let mut others: Vec<u32> = ds
        .iter()
        .map(|e| e.group_id)
        .filter(|&g| !parity.matches(g))
        .collect();
    if train_groups.len() < 3 || others.len() < 3 {
        return Err(Error::Split(format!(
            "need >= 3 groups of each parity, have {} train / {} other",
            train_groups.len(),
            others.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    others.shuffle(&mut rng);
    let n_val = ((others.len() as f64 * val_fraction).round() as usize).max(1);
    let mut val_groups: Vec<u32> = others[..n_val].to_vec();
    let mut test_groups: Vec<u32> = others[n_val..].to_vec();
    val_groups.sort_unstable();
    test_groups.sort_unstable();
    Ok(SplitPlan {
        parity,
        train_groups,
        val_groups,
        test_groups,
        seed,
    })
}

impl SplitPlan {
    /// Small text manifest for reproducibility audits.
    pub fn to_manifest(&self) -> String {
        fn ids(v: &[u32]) -> String {
            v.iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        format!(
            "parity={}\nseed={}\ntrain={}\nval={}\ntest={}\n",
            self.parity.as_str(),
            self.seed,
            ids(&self.train_groups),
            ids(&self.val_groups),
            ids(&self.test_groups)
        )
    }
}

/// Min-max scaler fitted on training windows only. Values outside the
/// training range extrapolate beyond [0, 1]; nothing is clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub feat_min: Vec<f64>,
    pub feat_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
    /// Features with max == min on the training split map to 0.
    pub degenerate: Vec<bool>,
}

pub fn fit_scaler(train_windows: &[WindowedSample]) -> Result<Scaler> {
    if train_windows.is_empty() {
        return Err(Error::Parameter("cannot fit a scaler on no windows".into()));
    }
    let mut feat_min = vec![f64::INFINITY; NUM_FEATURES];
    let mut feat_max = vec![f64::NEG_INFINITY; NUM_FEATURES];
    let mut target_min = f64::INFINITY;
    let mut target_max = f64::NEG_INFINITY;
    for w in train_windows {
        for d in 0..NUM_FEATURES {
            for j in 0..w.n_w {
                let v = w.x[d * w.n_w + j];
                feat_min[d] = feat_min[d].min(v);
                feat_max[d] = feat_max[d].max(v);
            }
        }
        target_min = target_min.min(w.y);
        target_max = target_max.max(w.y);
    }
    let degenerate = feat_min
        .iter()
        .zip(&feat_max)
        .map(|(lo, hi)| hi <= lo)
        .collect();
    Ok(Scaler {
        feat_min,
        feat_max,
        target_min,
        target_max,
        degenerate,
    })
}

impl Scaler {
    fn scale_feature(&self, d: usize, v: f64) -> f64 {
        if self.degenerate[d] {
            0.0
        } else {
            (v - self.feat_min[d]) / (self.feat_max[d] - self.feat_min[d])
        }
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        if self.target_max <= self.target_min {
            0.0
        } else {
            (y - self.target_min) / (self.target_max - self.target_min)
        }
    }

    pub fn inverse_target(&self, y_scaled: f64) -> f64 {
        if self.target_max <= self.target_min {
            self.target_min
        } else {
            y_scaled * (self.target_max - self.target_min) + self.target_min
        }
    }
}

pub fn apply_scaler(scaler: &Scaler, windows: &[WindowedSample]) -> Vec<WindowedSample> {
    windows
        .iter()
        .map(|w| {
            let mut x = Vec::with_capacity(w.x.len());
            for d in 0..NUM_FEATURES {
                for j in 0..w.n_w {
                    x.push(scaler.scale_feature(d, w.x[d * w.n_w + j]));
                }
            }
            WindowedSample {
                x,
                n_w: w.n_w,
                y: scaler.scale_target(w.y),
                group_id: w.group_id,
                gvf: w.gvf,
                t_index: w.t_index,
            }
        })
        .collect()
}

/// Train/validation/test window sets for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitWindows {
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
}

fn windows_of_experiment(exp: &Experiment, cfg: &WindowConfig) -> Vec<WindowedSample> {
    let n = exp.num_samples();
    let n_w = cfg.window_len;
    let mut out = Vec::new();
    if n < n_w {
        return out;
    }
    let mut t = n_w - 1;
    while t < n {
        let mut x = Vec::with_capacity(NUM_FEATURES * n_w);
        for d in 0..NUM_FEATURES {
            x.extend_from_slice(&exp.channels.data[d][t + 1 - n_w..=t]);
        }
        out.push(WindowedSample {
            x,
            n_w,
            y: exp.truth.data[0][t],
            group_id: exp.group_id,
            gvf: exp.op.gvf,
            t_index: t,
        });
        t += cfg.stride;
    }
    out
}

/// Builds windows per split role. Windows never span two experiments; every
/// row of a window carries one group id.
pub fn build_windows(
    ds: &[Experiment],
    plan: &SplitPlan,
    cfg: &WindowConfig,
) -> Result<SplitWindows> {
    let mut sets = SplitWindows {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for exp in ds {
        if exp.num_samples() < cfg.window_len {
            return Err(Error::Split(format!(
                "group {} has {} samples, fewer than window length {}",
                exp.group_id,
                exp.num_samples(),
                cfg.window_len
            )));
        }
        let windows = windows_of_experiment(exp, cfg);
        let g = exp.group_id;
        if plan.train_groups.contains(&g) {
            sets.train.extend(windows);
        } else if plan.val_groups.contains(&g) {
            sets.val.extend(windows);
        } else if plan.test_groups.contains(&g) {
            sets.test.extend(windows);
        }
    }
    Ok(sets)
}

/// Window construction for whole-experiment means: each experiment is a single
/// sample, so windows run across consecutive experiment means *within one
/// subset* (train, validation, or test). The emitted group id, target, and GVF
/// come from the window's last experiment; no train window ever contains a
/// validation or test experiment.
pub fn build_mean_windows(
    ds: &[Experiment],
    plan: &SplitPlan,
    cfg: &WindowConfig,
) -> Result<SplitWindows> {
    for exp in ds {
        if exp.num_samples() != 1 {
            return Err(Error::Split(format!(
                "group {}: expected one mean sample per experiment, got {}",
                exp.group_id,
                exp.num_samples()
            )));
        }
    }
    let subset_windows = |groups: &[u32]| -> Vec<WindowedSample> {
        let members: Vec<&Experiment> = ds
            .iter()
            .filter(|e| groups.contains(&e.group_id))
            .collect();
        let n_w = cfg.window_len;
        let mut out = Vec::new();
        if members.len() < n_w {
            return out;
        }
        for t in (n_w - 1)..members.len() {
            let slice = &members[t + 1 - n_w..=t];
            let mut x = Vec::with_capacity(NUM_FEATURES * n_w);
            for d in 0..NUM_FEATURES {
                for exp in slice {
                    x.push(exp.channels.data[d][0]);
                }
            }
            let last = slice[n_w - 1];
            out.push(WindowedSample {
                x,
                n_w,
                y: last.truth.data[0][0],
                group_id: last.group_id,
                gvf: last.op.gvf,
                t_index: t,
            });
        }
        out
    };
    Ok(SplitWindows {
        train: subset_windows(&plan.train_groups),
        val: subset_windows(&plan.val_groups),
        test: subset_windows(&plan.test_groups),
    })
}

/// Expanding-origin CV over contiguous chronological blocks: the training
/// groups are cut into k+1 blocks; fold i fits on blocks 1..=i and evaluates
/// on block i+1, so evaluation groups are always strictly later.
pub fn cv_folds(train_groups: &[u32], k: usize) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    if train_groups.len() < k + 1 {
        return Err(Error::Split(format!(
            "need at least {} training groups for {k}-fold rolling CV, have {}",
            k + 1,
            train_groups.len()
        )));
    }
    let mut sorted = train_groups.to_vec();
    sorted.sort_unstable();
    let n_blocks = k + 1;
    let base = sorted.len() / n_blocks;
    let rem = sorted.len() % n_blocks;
    let mut blocks: Vec<Vec<u32>> = Vec::with_capacity(n_blocks);
    let mut start = 0;
    for b in 0..n_blocks {
        let size = base + usize::from(b < rem);
        blocks.push(sorted[start..start + size].to_vec());
        start += size;
    }
    let mut folds = Vec::with_capacity(k);
    for i in 1..=k {
        let fit: Vec<u32> = blocks[..i].iter().flatten().copied().collect();
        folds.push((fit, blocks[i].clone()));
    }
    Ok(folds)
}
