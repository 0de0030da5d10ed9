//! From-scratch differentiable models: a plain MLP, a windowed MLP fed a
//! flattened D x N_w input, and a small 1D-CNN (two convolutions, global
//! average pooling over time, two dense layers). Forward passes, reverse-mode
//! gradients of the MSE loss, parameter/MAC counting, and latency measurement.

use crate::error::{Error, Result};
use crate::types::NUM_FEATURES;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CNN_CONV1_CH: usize = 16;
pub const CNN_CONV2_CH: usize = 8;
pub const CNN_FC_HIDDEN: usize = 16;
pub const CNN_KERNEL: usize = 3;

pub const MLP_HIDDEN: usize = 8;
pub const MLPW_HIDDEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Mlpw,
    Cnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Mlpw => "mlpw",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "mlpw" => Ok(ModelKind::Mlpw),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::Parameter(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Architecture description; parameter counts and MACs are pure functions of
/// this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_features: usize,
    pub window_len: usize,
    /// Hidden width for the dense models; the CNN head is fixed.
    pub hidden: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn mlp(seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_features: NUM_FEATURES,
            window_len: 1,
            hidden: MLP_HIDDEN,
            seed,
        }
    }

    pub fn mlpw(window_len: usize, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Mlpw,
            input_features: NUM_FEATURES,
            window_len,
            hidden: MLPW_HIDDEN,
            seed,
        }
    }

    pub fn cnn(window_len: usize, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Cnn,
            input_features: NUM_FEATURES,
            window_len,
            hidden: CNN_FC_HIDDEN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Mlp => {
                if self.window_len != 1 {
                    return Err(Error::Parameter(format!(
                        "mlp requires window_len 1, got {}",
                        self.window_len
                    )));
                }
            }
            ModelKind::Mlpw | ModelKind::Cnn => {
                if self.window_len < 2 {
                    return Err(Error::Parameter(format!(
                        "{} requires window_len >= 2, got {}",
                        self.kind.as_str(),
                        self.window_len
                    )));
                }
            }
        }
        if self.input_features == 0 || self.hidden == 0 {
            return Err(Error::Parameter("zero-sized layer".into()));
        }
        Ok(())
    }

    /// Flattened input length per example.
    pub fn input_len(&self) -> usize {
        self.input_features * self.window_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer; weights stored row-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub act: Activation,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize, act: Activation) -> Self {
        DenseLayer {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
            act,
        }
    }

    fn init(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, act: Activation) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        DenseLayer {
            w,
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
            act,
        }
    }

    /// Pre-activations z = W x + b.
    fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|j| {
                let row = &self.w[j * self.in_dim..(j + 1) * self.in_dim];
                self.b[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// 1D convolution, kernels out_ch x in_ch x K, zero padding (K-1)/2 so the
/// output length equals the input length. ReLU activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
}

impl Conv1dLayer {
    fn zeros(in_ch: usize, out_ch: usize, k: usize) -> Self {
        Conv1dLayer {
            w: vec![0.0; in_ch * out_ch * k],
            b: vec![0.0; out_ch],
            in_ch,
            out_ch,
            k,
        }
    }

    fn init(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k: usize) -> Self {
        let fan_in = in_ch * k;
        let bound = (6.0 / fan_in as f64).sqrt();
        let w = (0..in_ch * out_ch * k)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Conv1dLayer {
            w,
            b: vec![0.0; out_ch],
            in_ch,
            out_ch,
            k,
        }
    }

    fn weight(&self, o: usize, c: usize, k: usize) -> f64 {
        self.w[(o * self.in_ch + c) * self.k + k]
    }

    fn pad(&self) -> usize {
        (self.k - 1) / 2
    }

    /// Pre-activations, input and output both `ch x len` row-major.
    fn affine(&self, x: &[f64], len: usize) -> Vec<f64> {
        let pad = self.pad();
        let mut z = vec![0.0; self.out_ch * len];
        for o in 0..self.out_ch {
            for i in 0..len {
                let mut acc = self.b[o];
                for c in 0..self.in_ch {
                    for kk in 0..self.k {
                        let j = i as isize + kk as isize - pad as isize;
                        if j >= 0 && (j as usize) < len {
                            acc += self.weight(o, c, kk) * x[c * len + j as usize];
                        }
                    }
                }
                z[o * len + i] = acc;
            }
        }
        z
    }

    fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Trained (or freshly initialized) parameters for one model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    /// MLP / MLPw: flattened input through dense layers.
    Dense { layers: Vec<DenseLayer> },
    Cnn {
        conv1: Conv1dLayer,
        conv2: Conv1dLayer,
        fc1: DenseLayer,
        fc2: DenseLayer,
    },
}

/// Spec plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

/// Kaiming-uniform weights (fan-in scaled), zero biases; deterministic per
/// spec seed.
pub fn init_model(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let params = match spec.kind {
        ModelKind::Mlp | ModelKind::Mlpw => ModelParams::Dense {
            layers: vec![
                DenseLayer::init(&mut rng, spec.input_len(), spec.hidden, Activation::Relu),
                DenseLayer::init(&mut rng, spec.hidden, 1, Activation::Identity),
            ],
        },
        ModelKind::Cnn => ModelParams::Cnn {
            conv1: Conv1dLayer::init(&mut rng, spec.input_features, CNN_CONV1_CH, CNN_KERNEL),
            conv2: Conv1dLayer::init(&mut rng, CNN_CONV1_CH, CNN_CONV2_CH, CNN_KERNEL),
            fc1: DenseLayer::init(&mut rng, CNN_CONV2_CH, CNN_FC_HIDDEN, Activation::Relu),
            fc2: DenseLayer::init(&mut rng, CNN_FC_HIDDEN, 1, Activation::Identity),
        },
    };
    Ok(Model {
        spec: *spec,
        params,
    })
}

impl Model {
    /// Same-shaped parameter container filled with zeros (gradient buffer).
    pub fn zeros_like(&self) -> ModelParams {
        match &self.params {
            ModelParams::Dense { layers } => ModelParams::Dense {
                layers: layers
                    .iter()
                    .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim, l.act))
                    .collect(),
            },
            ModelParams::Cnn {
                conv1,
                conv2,
                fc1,
                fc2,
            } => ModelParams::Cnn {
                conv1: Conv1dLayer::zeros(conv1.in_ch, conv1.out_ch, conv1.k),
                conv2: Conv1dLayer::zeros(conv2.in_ch, conv2.out_ch, conv2.k),
                fc1: DenseLayer::zeros(fc1.in_dim, fc1.out_dim, fc1.act),
                fc2: DenseLayer::zeros(fc2.in_dim, fc2.out_dim, fc2.act),
            },
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let expected = self.spec.input_len();
        if x.len() != expected {
            return Err(Error::Shape {
                expected: format!(
                    "{} x {} = {expected} input values",
                    self.spec.input_features, self.spec.window_len
                ),
                actual: format!("{}", x.len()),
            });
        }
        Ok(())
    }

    /// Scalar prediction in the scaled domain. `x` is the D x N_w window
    /// flattened feature-major (the MLPw reshape; the CNN reads it as D rows).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Dense { layers } => {
                let mut a = x.to_vec();
                for layer in layers {
                    a = layer
                        .affine(&a)
                        .into_iter()
                        .map(|z| layer.act.apply(z))
                        .collect();
                }
                a[0]
            }
            ModelParams::Cnn {
                conv1,
                conv2,
                fc1,
                fc2,
            } => {
                let n = self.spec.window_len;
                let z1 = conv1.affine(x, n);
                let h1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
                let z2 = conv2.affine(&h1, n);
                let h2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
                // global average pool over time
                let g: Vec<f64> = (0..conv2.out_ch)
                    .map(|c| h2[c * n..(c + 1) * n].iter().sum::<f64>() / n as f64)
                    .collect();
                let a1: Vec<f64> = fc1
                    .affine(&g)
                    .into_iter()
                    .map(|z| fc1.act.apply(z))
                    .collect();
                fc2.affine(&a1)[0]
            }
        }
    }

    /// Mean-squared-error loss over a batch of (x, y) pairs.
    pub fn batch_loss(&self, batch: &[(&[f64], f64)]) -> Result<f64> {
        let mut loss = 0.0;
        for (x, y) in batch {
            let e = self.forward(x)? - y;
            loss += e * e;
        }
        Ok(loss / batch.len() as f64)
    }

    /// Gradient of the batch MSE with respect to every parameter. Returns
    /// (loss, gradients).
    pub fn backward(&self, batch: &[(&[f64], f64)]) -> Result<(f64, ModelParams)> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let mut grads = self.zeros_like();
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            let err = self.accumulate_example(x, *y, inv_b, &mut grads);
            loss += err * err * inv_b;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        Ok((loss, grads))
    }

    /// Runs one example forward, accumulates dMSE/dparams into `grads`,
    /// returns the residual (y_hat - y).
    fn accumulate_example(&self, x: &[f64], y: f64, inv_b: f64, grads: &mut ModelParams) -> f64 {
        match (&self.params, grads) {
            (ModelParams::Dense { layers }, ModelParams::Dense { layers: glayers }) => {
                // forward with caches
                let mut activations: Vec<Vec<f64>> = vec![x.to_vec()];
                let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
                for layer in layers {
                    let z = layer.affine(activations.last().unwrap());
                    activations.push(z.iter().map(|&v| layer.act.apply(v)).collect());
                    pre.push(z);
                }
                let y_hat = activations.last().unwrap()[0];
                let residual = y_hat - y;
                // reverse pass: dL/dy_hat = 2 * residual / B
                let mut delta = vec![2.0 * residual * inv_b];
                for (ell, layer) in layers.iter().enumerate().rev() {
                    let g = &mut glayers[ell];
                    let input = &activations[ell];
                    let dz: Vec<f64> = delta
                        .iter()
                        .zip(&pre[ell])
                        .map(|(d, &z)| d * layer.act.derivative(z))
                        .collect();
                    for j in 0..layer.out_dim {
                        g.b[j] += dz[j];
                        for i in 0..layer.in_dim {
                            g.w[j * layer.in_dim + i] += dz[j] * input[i];
                        }
                    }
                    if ell > 0 {
                        delta = (0..layer.in_dim)
                            .map(|i| {
                                (0..layer.out_dim)
                                    .map(|j| layer.w[j * layer.in_dim + i] * dz[j])
                                    .sum()
                            })
                            .collect();
                    }
                }
                residual
            }
            (
                ModelParams::Cnn {
                    conv1,
                    conv2,
                    fc1,
                    fc2,
                },
                ModelParams::Cnn {
                    conv1: gconv1,
                    conv2: gconv2,
                    fc1: gfc1,
                    fc2: gfc2,
                },
            ) => {
                let n = self.spec.window_len;
                let z1 = conv1.affine(x, n);
                let h1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
                let z2 = conv2.affine(&h1, n);
                let h2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
                let g: Vec<f64> = (0..conv2.out_ch)
                    .map(|c| h2[c * n..(c + 1) * n].iter().sum::<f64>() / n as f64)
                    .collect();
                let zf1 = fc1.affine(&g);
                let a1: Vec<f64> = zf1.iter().map(|&z| fc1.act.apply(z)).collect();
                let y_hat = fc2.affine(&a1)[0];
                let residual = y_hat - y;

                let dy = 2.0 * residual * inv_b;
                // fc2 (identity output)
                gfc2.b[0] += dy;
                for i in 0..fc2.in_dim {
                    gfc2.w[i] += dy * a1[i];
                }
                let da1: Vec<f64> = (0..fc2.in_dim).map(|i| fc2.w[i] * dy).collect();
                // fc1
                let dzf1: Vec<f64> = da1
                    .iter()
                    .zip(&zf1)
                    .map(|(d, &z)| d * fc1.act.derivative(z))
                    .collect();
                for j in 0..fc1.out_dim {
                    gfc1.b[j] += dzf1[j];
                    for i in 0..fc1.in_dim {
                        gfc1.w[j * fc1.in_dim + i] += dzf1[j] * g[i];
                    }
                }
                let dg: Vec<f64> = (0..fc1.in_dim)
                    .map(|i| {
                        (0..fc1.out_dim)
                            .map(|j| fc1.w[j * fc1.in_dim + i] * dzf1[j])
                            .sum()
                    })
                    .collect();
                // GAP spreads the gradient uniformly over time
                let mut dz2 = vec![0.0; conv2.out_ch * n];
                for c in 0..conv2.out_ch {
                    for i in 0..n {
                        let idx = c * n + i;
                        if z2[idx] > 0.0 {
                            dz2[idx] = dg[c] / n as f64;
                        }
                    }
                }
                let dh1 = conv_backward(conv2, &h1, &dz2, n, gconv2);
                let mut dz1 = vec![0.0; conv1.out_ch * n];
                for idx in 0..dz1.len() {
                    if z1[idx] > 0.0 {
                        dz1[idx] = dh1[idx];
                    }
                }
                conv_backward(conv1, x, &dz1, n, gconv1);
                residual
            }
            _ => unreachable!("gradient buffer shape mismatch"),
        }
    }
}

/// Accumulates kernel/bias gradients for one conv layer and returns the
/// gradient with respect to its input.
fn conv_backward(
    layer: &Conv1dLayer,
    input: &[f64],
    dz: &[f64],
    len: usize,
    grads: &mut Conv1dLayer,
) -> Vec<f64> {
    let pad = layer.pad();
    let mut dinput = vec![0.0; layer.in_ch * len];
    for o in 0..layer.out_ch {
        for i in 0..len {
            let d = dz[o * len + i];
            if d == 0.0 {
                continue;
            }
            grads.b[o] += d;
            for c in 0..layer.in_ch {
                for kk in 0..layer.k {
                    let j = i as isize + kk as isize - pad as isize;
                    if j >= 0 && (j as usize) < len {
                        let j = j as usize;
                        grads.w[(o * layer.in_ch + c) * layer.k + kk] += d * input[c * len + j];
                        dinput[c * len + j] += d * layer.weight(o, c, kk);
                    }
                }
            }
        }
    }
    dinput
}

/// Parameter count and multiply-accumulate count per forward pass.
/// One multiply-accumulate is counted as 2 operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityReport {
    pub parameter_count: usize,
    pub macs_per_example: usize,
}

pub fn count_complexity(spec: &ModelSpec) -> Result<ComplexityReport> {
    spec.validate()?;
    let dense = |in_dim: usize, out_dim: usize| (in_dim * out_dim + out_dim, in_dim * out_dim);
    let (params, mults) = match spec.kind {
        ModelKind::Mlp | ModelKind::Mlpw => {
            let (p1, m1) = dense(spec.input_len(), spec.hidden);
            let (p2, m2) = dense(spec.hidden, 1);
            (p1 + p2, m1 + m2)
        }
        ModelKind::Cnn => {
            let n = spec.window_len;
            let conv = |in_ch: usize, out_ch: usize| {
                (
                    in_ch * out_ch * CNN_KERNEL + out_ch,
                    out_ch * in_ch * CNN_KERNEL * n,
                )
            };
            let (p1, m1) = conv(spec.input_features, CNN_CONV1_CH);
            let (p2, m2) = conv(CNN_CONV1_CH, CNN_CONV2_CH);
            let (p3, m3) = dense(CNN_CONV2_CH, CNN_FC_HIDDEN);
            let (p4, m4) = dense(CNN_FC_HIDDEN, 1);
            (p1 + p2 + p3 + p4, m1 + m2 + m3 + m4)
        }
    };
    Ok(ComplexityReport {
        parameter_count: params,
        macs_per_example: 2 * mults,
    })
}

/// Single-example forward latency in microseconds, batch size 1.
pub fn measure_latency(model: &Model, n_trials: usize) -> Result<(f64, f64)> {
    let x = vec![0.5; model.spec.input_len()];
    // warm-up
    for _ in 0..100 {
        std::hint::black_box(model.forward(&x)?);
    }
    let mut samples = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let start = std::time::Instant::now();
        std::hint::black_box(model.forward(&x)?);
        samples.push(start.elapsed().as_nanos() as f64 / 1000.0);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / samples.len() as f64;
    Ok((mean, var.sqrt()))
}

// ---- flat parameter access (optimizer, checkpoints, gradient checks) ----

impl ModelParams {
    /// Flattens all parameters; `decay_mask[i]` is true for weights (which
    /// receive weight decay) and false for biases.
    pub fn flatten(&self) -> (Vec<f64>, Vec<bool>) {
        let mut flat = Vec::new();
        let mut mask = Vec::new();
        let mut push = |w: &[f64], b: &[f64]| {
            flat.extend_from_slice(w);
            mask.extend(std::iter::repeat(true).take(w.len()));
            flat.extend_from_slice(b);
            mask.extend(std::iter::repeat(false).take(b.len()));
        };
        match self {
            ModelParams::Dense { layers } => {
                for l in layers {
                    push(&l.w, &l.b);
                }
            }
            ModelParams::Cnn {
                conv1,
                conv2,
                fc1,
                fc2,
            } => {
                push(&conv1.w, &conv1.b);
                push(&conv2.w, &conv2.b);
                push(&fc1.w, &fc1.b);
                push(&fc2.w, &fc2.b);
            }
        }
        (flat, mask)
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        let mut take = |w: &mut Vec<f64>, b: &mut Vec<f64>| {
            let wl = w.len();
            w.copy_from_slice(&flat[offset..offset + wl]);
            offset += wl;
            let bl = b.len();
            b.copy_from_slice(&flat[offset..offset + bl]);
            offset += bl;
        };
        match self {
            ModelParams::Dense { layers } => {
                for l in layers {
                    take(&mut l.w, &mut l.b);
                }
            }
            ModelParams::Cnn {
                conv1,
                conv2,
                fc1,
                fc2,
            } => {
                take(&mut conv1.w, &mut conv1.b);
                take(&mut conv2.w, &mut conv2.b);
                take(&mut fc1.w, &mut fc1.b);
                take(&mut fc2.w, &mut fc2.b);
            }
        }
        debug_assert_eq!(offset, flat.len());
    }

    pub fn num_params(&self) -> usize {
        match self {
            ModelParams::Dense { layers } => layers.iter().map(|l| l.num_params()).sum(),
            ModelParams::Cnn {
                conv1,
                conv2,
                fc1,
                fc2,
            } => {
                conv1.num_params() + conv2.num_params() + fc1.num_params() + fc2.num_params()
            }
        }
    }
}

// ---- checkpoints ----

const CHECKPOINT_MAGIC: &str = "cmfmodel";
const CHECKPOINT_VERSION: u32 = 1;

pub fn serialize_model(model: &Model) -> String {
    let (flat, _) = model.params.flatten();
    let mut out = format!(
        "{CHECKPOINT_MAGIC}\t{CHECKPOINT_VERSION}\nkind\t{}\nwindow_len\t{}\nhidden\t{}\nseed\t{}\nparams\t{}\n",
        model.spec.kind.as_str(),
        model.spec.window_len,
        model.spec.hidden,
        model.spec.seed,
        flat.len()
    );
    for v in &flat {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn deserialize_model(text: &str) -> Result<Model> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        record: 0,
        message: "empty checkpoint".into(),
    })?;
    if header != format!("{CHECKPOINT_MAGIC}\t{CHECKPOINT_VERSION}") {
        return Err(Error::Parse {
            record: 0,
            message: format!("bad checkpoint header {header:?}"),
        });
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or(Error::Parse {
            record: 0,
            message: format!("missing field {name}"),
        })?;
        let (key, value) = line.split_once('\t').ok_or(Error::Parse {
            record: 0,
            message: format!("malformed field line {line:?}"),
        })?;
        if key != name {
            return Err(Error::Parse {
                record: 0,
                message: format!("expected field {name}, got {key}"),
            });
        }
        Ok(value.to_string())
    };
    let kind: ModelKind = field("kind")?.parse()?;
    let window_len: usize = field("window_len")?
        .parse()
        .map_err(|_| Error::Parse {
            record: 0,
            message: "bad window_len".into(),
        })?;
    let hidden: usize = field("hidden")?.parse().map_err(|_| Error::Parse {
        record: 0,
        message: "bad hidden".into(),
    })?;
    let seed: u64 = field("seed")?.parse().map_err(|_| Error::Parse {
        record: 0,
        message: "bad seed".into(),
    })?;
    let n_params: usize = field("params")?.parse().map_err(|_| Error::Parse {
        record: 0,
        message: "bad params count".into(),
    })?;
    let spec = ModelSpec {
        kind,
        input_features: NUM_FEATURES,
        window_len,
        hidden,
        seed,
    };
    let mut model = init_model(&spec)?;
    let flat: Vec<f64> = lines
        .map(|l| {
            l.parse::<f64>().map_err(|_| Error::Parse {
                record: 0,
                message: format!("bad parameter value {l:?}"),
            })
        })
        .collect::<Result<_>>()?;
    if flat.len() != n_params || flat.len() != model.params.num_params() {
        return Err(Error::Parse {
            record: 0,
            message: format!(
                "expected {n_params} parameters, got {}",
                flat.len()
            ),
        });
    }
    model.params.assign_from_flat(&flat);
    Ok(model)
}
