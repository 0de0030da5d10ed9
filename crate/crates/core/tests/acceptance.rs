//! Acceptance gate: one test per criterion, each ending with a single
//! PASS line (a panic marks the criterion FAIL).

use cmf_correct::dsp::design_lowpass;
use cmf_correct::eval::{
    compute_report, AggregateReport, ErrorVector,
};
use cmf_correct::nn::{count_complexity, init_model, ModelKind, ModelSpec};
use cmf_correct::pipeline::{rate_from_str, run, PipelineOptions, RunOutput};
use cmf_correct::report::write_run_artifacts;
use cmf_correct::splits::{
    build_windows, cv_folds, fit_scaler, make_split, Parity, SplitPlan, WindowConfig,
};
use cmf_correct::synth::{generate_dataset, RigConfig};
use cmf_correct::trainer::{train, PreparedSplit, TrainConfig};
use cmf_correct::types::{Experiment, OperatingPoint, SampledSeries, NUM_FEATURES};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

// ---------------------------------------------------------------------------
// Criterion 1: complexity exactness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_complexity_exactness() {
    let cases = [
        (ModelSpec::mlp(0), 57, 96),
        (ModelSpec::mlpw(5, 0), 433, 832),
        (ModelSpec::cnn(5, 0), 809, 6528),
    ];
    for (spec, params, macs) in cases {
        let c = count_complexity(&spec).unwrap();
        assert_eq!(
            (c.parameter_count, c.macs_per_example),
            (params, macs),
            "{:?}",
            spec.kind
        );
        // counted weights must equal the live parameter vector
        let model = init_model(&spec).unwrap();
        assert_eq!(model.params.num_params(), params);
    }
    println!("ACCEPTANCE 1 (complexity exactness): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 2: gradient correctness
// ---------------------------------------------------------------------------

fn max_grad_rel_err(spec: &ModelSpec, instance_seed: u64) -> f64 {
    let spec = ModelSpec {
        seed: instance_seed,
        ..*spec
    };
    let mut model = init_model(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed ^ 0xfeed);
    let n_in = spec.input_len();
    let xs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch: Vec<(&[f64], f64)> = xs.iter().map(|x| x.as_slice()).zip(ys).collect();

    let (_, grads) = model.backward(&batch).unwrap();
    let (analytic, _) = grads.flatten();
    let (mut flat, _) = model.params.flatten();
    let mut central = |i: usize, h: f64, model: &mut cmf_correct::nn::Model| {
        let orig = flat[i];
        flat[i] = orig + h;
        model.params.assign_from_flat(&flat);
        let up = model.batch_loss(&batch).unwrap();
        flat[i] = orig - h;
        model.params.assign_from_flat(&flat);
        let down = model.batch_loss(&batch).unwrap();
        flat[i] = orig;
        model.params.assign_from_flat(&flat);
        (up - down) / (2.0 * h)
    };
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let rel = |numeric: f64| {
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            (analytic[i] - numeric).abs() / denom
        };
        let mut err = rel(central(i, 1e-5, &mut model));
        if err >= 1e-4 {
            // an h-wide step that straddles a ReLU kink invalidates the
            // finite difference; a 10x smaller step resolves it
            err = err.min(rel(central(i, 1e-6, &mut model)));
        }
        worst = worst.max(err);
    }
    worst
}

#[test]
fn acceptance_2_gradient_correctness() {
    // full-model checks cover every layer type: Dense (MLP/MLPw), Conv1D and
    // GAP (CNN); 100 random instances per architecture
    for spec in [ModelSpec::mlp(0), ModelSpec::mlpw(5, 0), ModelSpec::cnn(5, 0)] {
        let worst = (0..100)
            .map(|k| max_grad_rel_err(&spec, 1000 + k))
            .fold(0.0f64, f64::max);
        assert!(
            worst < 1e-4,
            "{:?}: max relative gradient error {worst}",
            spec.kind
        );
    }
    println!("ACCEPTANCE 2 (gradient correctness): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 3: metric oracle equivalence
// ---------------------------------------------------------------------------

mod oracle {
    /// Brute-force reimplementations, written independently of the library.
    pub fn percentile(vals: &[f64], q: f64) -> f64 {
        let mut s = vals.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if s.len() == 1 {
            return s[0];
        }
        let rank = q / 100.0 * (s.len() as f64 - 1.0);
        let below = rank.floor() as usize;
        let above = rank.ceil() as usize;
        if below == above {
            s[below]
        } else {
            s[below] * (above as f64 - rank) + s[above] * (rank - below as f64)
        }
    }

    pub fn median(vals: &[f64]) -> f64 {
        let mut s = vals.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }

    pub fn rmse(y: &[f64], yh: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            acc += (yh[i] - y[i]) * (yh[i] - y[i]);
        }
        (acc / y.len() as f64).sqrt()
    }

    pub fn mae(y: &[f64], yh: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            acc += (yh[i] - y[i]).abs();
        }
        acc / y.len() as f64
    }

    pub fn mape(y: &[f64], yh: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            acc += ((yh[i] - y[i]) / y[i]).abs();
        }
        acc / y.len() as f64 * 100.0
    }

    pub fn r_squared(y: &[f64], yh: &[f64]) -> f64 {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut sse = 0.0;
        let mut sst = 0.0;
        for i in 0..y.len() {
            sse += (yh[i] - y[i]) * (yh[i] - y[i]);
            sst += (y[i] - mean) * (y[i] - mean);
        }
        1.0 - sse / sst
    }
}

#[test]
fn acceptance_3_metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    for case in 0..1000 {
        let n = rng.gen_range(2..40);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..100.0)).collect();
        let yh: Vec<f64> = y
            .iter()
            .map(|v| v + rng.gen_range(-30.0..30.0))
            .collect();
        let ev =
            ErrorVector::new(y.clone(), yh.clone(), vec![0.1; n], vec![0; n]).unwrap();
        let rep = compute_report(&ev).unwrap();
        let m = &rep.metrics;

        assert!(close(m.rmse, oracle::rmse(&y, &yh)), "case {case} rmse");
        let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        if y_max > y_min {
            assert!(close(m.rnrmse.unwrap(), oracle::rmse(&y, &yh) / (y_max - y_min)));
        }
        assert!(close(m.avgnrmse.unwrap(), oracle::rmse(&y, &yh) / y_mean));
        assert!(close(m.mae, oracle::mae(&y, &yh)), "case {case} mae");
        let abs_e: Vec<f64> = y.iter().zip(&yh).map(|(a, b)| (b - a).abs()).collect();
        assert!(close(m.medae, oracle::median(&abs_e)), "case {case} medae");
        assert!(close(m.mape, oracle::mape(&y, &yh)), "case {case} mape");
        let abs_re: Vec<f64> = y
            .iter()
            .zip(&yh)
            .map(|(a, b)| ((b - a) / a).abs() * 100.0)
            .collect();
        assert!(close(m.medape, oracle::median(&abs_re)), "case {case} medape");
        assert!(close(m.r_squared.unwrap(), oracle::r_squared(&y, &yh)));

        // |RE| percentiles and coverage
        for (got, q) in [(rep.p99_abs_re, 99.0), (rep.p95_abs_re, 95.0), (rep.p50_abs_re, 50.0)]
        {
            assert!(close(got, oracle::percentile(&abs_re, q)), "case {case} p{q}");
        }
        let max_re = abs_re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(close(rep.max_abs_re, max_re));
        let cov = |limit: f64| {
            abs_re.iter().filter(|&&v| v <= limit).count() as f64 / n as f64 * 100.0
        };
        assert!(close(rep.coverage_10, cov(10.0)));
        assert!(close(rep.coverage_5, cov(5.0)));
    }
    println!("ACCEPTANCE 3 (metric oracle equivalence): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 4: filter spec
// ---------------------------------------------------------------------------

fn amplitude(taps: &[f64], freq_hz: f64, rate_hz: f64) -> f64 {
    let w = std::f64::consts::TAU * freq_hz / rate_hz;
    let mut re = 0.0;
    let mut im = 0.0;
    for (n, t) in taps.iter().enumerate() {
        re += t * (w * n as f64).cos();
        im -= t * (w * n as f64).sin();
    }
    (re * re + im * im).sqrt()
}

#[test]
fn acceptance_4_filter_spec() {
    let source = 14.3;
    let target = source / 4.0;
    let f = design_lowpass(129, 0.8, target, source).unwrap();
    assert_eq!(f.taps.len(), 129);
    for i in 0..64 {
        assert_eq!(f.taps[i], f.taps[128 - i], "tap {i} asymmetric");
    }
    assert!((f.taps.iter().sum::<f64>() - 1.0).abs() < 1e-9, "DC gain");

    let cutoff = 0.8 * target / 2.0;
    // -6 dB crossing located by bisection on the tap DFT
    let (mut lo, mut hi) = (0.5 * cutoff, 1.5 * cutoff);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if amplitude(&f.taps, mid, source) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = 0.5 * (lo + hi);
    assert!(
        (crossing - cutoff).abs() <= 0.02 * cutoff,
        "-6 dB at {crossing} Hz, cutoff {cutoff} Hz"
    );

    let stop_edge = 1.3 * cutoff;
    let floor = 10f64.powf(-50.0 / 20.0);
    for k in 0..=400 {
        let freq = stop_edge + (source / 2.0 - stop_edge) * k as f64 / 400.0;
        let a = amplitude(&f.taps, freq, source);
        assert!(a <= floor, "stopband violation: {a} at {freq} Hz");
    }
    println!("ACCEPTANCE 4 (filter spec): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 5: leakage suite
// ---------------------------------------------------------------------------

fn mk_exp(group_id: u32, n: usize, value: f64) -> Experiment {
    let op = OperatingPoint {
        water_cut: 0.5,
        viscosity: 1.0,
        oil_mass_flow: 100.0,
        total_mass_flow: 2000.0,
        gvf: 0.3,
        pressure_base: 2.0,
        temperature_base: 25.0,
    };
    let channels =
        SampledSeries::new(14.3, vec![vec![value; n]; NUM_FEATURES]).unwrap();
    let truth = SampledSeries::new(14.3, vec![vec![2000.0; n]]).unwrap();
    Experiment {
        group_id,
        op,
        duration_s: n as f64 / 14.3,
        channels,
        truth,
    }
}

fn check_plan(plan: &SplitPlan, n_groups: u32) {
    let all: Vec<u32> = (1..=n_groups).collect();
    for &g in &plan.train_groups {
        assert!(plan.parity.matches(g));
    }
    let mut opposite: Vec<u32> = plan
        .val_groups
        .iter()
        .chain(&plan.test_groups)
        .cloned()
        .collect();
    opposite.sort_unstable();
    let expected: Vec<u32> = all
        .iter()
        .cloned()
        .filter(|&g| !plan.parity.matches(g))
        .collect();
    assert_eq!(opposite, expected, "val+test must cover the opposite parity");
    for g in &plan.val_groups {
        assert!(!plan.test_groups.contains(g), "val/test overlap");
        assert!(!plan.train_groups.contains(g), "train/val overlap");
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn split_and_window_leakage(n_groups in 6u32..24, seed in any::<u64>(), odd in any::<bool>()) {
        let ds: Vec<Experiment> = (1..=n_groups).map(|g| mk_exp(g, 12, g as f64)).collect();
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let plan = make_split(&ds, parity, 1.0 / 3.0, seed).unwrap();
        check_plan(&plan, n_groups);

        let windows = build_windows(&ds, &plan, &WindowConfig::new(3)).unwrap();
        // windows never cross experiment boundaries: every value in a window
        // equals its experiment's constant channel value
        for (set, groups) in [
            (&windows.train, &plan.train_groups),
            (&windows.val, &plan.val_groups),
            (&windows.test, &plan.test_groups),
        ] {
            for w in set.iter() {
                prop_assert!(groups.contains(&w.group_id));
                prop_assert!(w.x.iter().all(|&v| v == w.group_id as f64));
            }
        }
        // no test/val group id appears in any training window
        for w in &windows.train {
            prop_assert!(!plan.val_groups.contains(&w.group_id));
            prop_assert!(!plan.test_groups.contains(&w.group_id));
        }
        // per experiment: N - N_w + 1 windows
        prop_assert_eq!(
            windows.train.len(),
            plan.train_groups.len() * (12 - 3 + 1)
        );

        // scaler bounds come from the training windows alone
        let scaler = fit_scaler(&windows.train).unwrap();
        let train_ids: Vec<f64> = plan.train_groups.iter().map(|&g| g as f64).collect();
        let lo = train_ids.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = train_ids.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for d in 0..NUM_FEATURES {
            prop_assert_eq!(scaler.feat_min[d], lo);
            prop_assert_eq!(scaler.feat_max[d], hi);
        }
    }

    #[test]
    fn cv_folds_strictly_forward(n_groups in 6u32..30, k in 2usize..6) {
        prop_assume!(n_groups as usize >= k + 1);
        let groups: Vec<u32> = (1..=n_groups).collect();
        let folds = cv_folds(&groups, k).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut eval_union: Vec<u32> = Vec::new();
        for (fit, eval) in &folds {
            let max_fit = fit.iter().max().unwrap();
            let min_eval = eval.iter().min().unwrap();
            prop_assert!(max_fit < min_eval, "eval groups must follow fit groups");
            for g in eval {
                prop_assert!(!eval_union.contains(g), "eval blocks must be disjoint");
                eval_union.push(*g);
            }
        }
    }
}

#[test]
fn acceptance_5_leakage_suite() {
    // training must never read test targets: poison them and train anyway
    let ds: Vec<Experiment> = (1..=10u32).map(|g| mk_exp(g, 12, g as f64)).collect();
    let plan = make_split(&ds, Parity::Even, 1.0 / 3.0, 7).unwrap();
    let windows = build_windows(&ds, &plan, &WindowConfig::new(3)).unwrap();
    let scaler = fit_scaler(&windows.train).unwrap();
    let prepared = PreparedSplit {
        parity: Parity::Even,
        train: cmf_correct::splits::apply_scaler(&scaler, &windows.train),
        val: cmf_correct::splits::apply_scaler(&scaler, &windows.val),
        test: windows.test.clone(),
        test_raw_y: vec![f64::NAN; windows.test.len()],
        test_gvf: vec![f64::NAN; windows.test.len()],
        scaler,
    };
    let cfg = TrainConfig {
        max_epochs: 5,
        seed: 1,
        ..TrainConfig::default()
    };
    let (model, _) =
        train(&ModelSpec::mlpw(3, 0), &prepared.train, &prepared.val, &cfg).unwrap();
    let (flat, _) = model.params.flatten();
    assert!(
        flat.iter().all(|v| v.is_finite()),
        "training touched poisoned test targets"
    );
    println!("ACCEPTANCE 5 (leakage suite): PASS");
}

// ---------------------------------------------------------------------------
// Criteria 6 + 7: qualitative reproduction on the synthetic benchmark
// ---------------------------------------------------------------------------

struct Bench {
    four_s: Vec<(ModelKind, Parity, RunOutput)>,
    sixty_cnn: Vec<(Parity, RunOutput)>,
}

static BENCH: OnceLock<Bench> = OnceLock::new();

fn bench() -> &'static Bench {
    BENCH.get_or_init(|| {
        let ds = generate_dataset(&RigConfig::default()).unwrap();
        let seeds: Vec<u64> = (1..=10).collect();
        let mut four_s = Vec::new();
        for parity in [Parity::Even, Parity::Odd] {
            for kind in [ModelKind::Mlp, ModelKind::Mlpw, ModelKind::Cnn] {
                let opts = PipelineOptions::new(
                    rate_from_str("4s").unwrap(),
                    kind,
                    parity,
                    seeds.clone(),
                );
                four_s.push((kind, parity, run(&ds, &opts).unwrap()));
            }
        }
        let mut sixty_cnn = Vec::new();
        for parity in [Parity::Even, Parity::Odd] {
            let opts = PipelineOptions::new(
                rate_from_str("60s").unwrap(),
                ModelKind::Cnn,
                parity,
                seeds.clone(),
            );
            sixty_cnn.push((parity, run(&ds, &opts).unwrap()));
        }
        Bench { four_s, sixty_cnn }
    })
}

fn median(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    }
}

fn median_seed_p95(outputs: &[&RunOutput]) -> f64 {
    median(
        outputs
            .iter()
            .flat_map(|o| o.sweep.runs.iter().map(|r| r.report.p95_abs_re))
            .collect(),
    )
}

#[test]
fn acceptance_6_qualitative_ordering() {
    let b = bench();
    let of_kind = |kind: ModelKind| -> Vec<&RunOutput> {
        b.four_s
            .iter()
            .filter(|(k, _, _)| *k == kind)
            .map(|(_, _, o)| o)
            .collect()
    };
    let mlp = median_seed_p95(&of_kind(ModelKind::Mlp));
    let mlpw = median_seed_p95(&of_kind(ModelKind::Mlpw));
    let cnn = median_seed_p95(&of_kind(ModelKind::Cnn));
    assert!(
        cnn <= mlpw && mlpw <= mlp,
        "median-over-seeds p95|RE| at 4s: cnn {cnn:.3}, mlpw {mlpw:.3}, mlp {mlp:.3}"
    );

    let cnn60_outputs: Vec<&RunOutput> = b.sixty_cnn.iter().map(|(_, o)| o).collect();
    let cnn60 = median_seed_p95(&cnn60_outputs);
    assert!(
        cnn < cnn60,
        "4s CNN p95 {cnn:.3} should beat 60s CNN p95 {cnn60:.3}"
    );
    println!(
        "ACCEPTANCE 6 (qualitative ordering; p95|RE|: cnn {cnn:.2} <= mlpw {mlpw:.2} <= mlp {mlp:.2}, 60s cnn {cnn60:.2}): PASS"
    );
}

#[test]
fn acceptance_7_baseline_improvement() {
    let b = bench();
    for (kind, parity, out) in &b.four_s {
        if *kind != ModelKind::Cnn {
            continue;
        }
        let model_p95 = match &out.pooled {
            AggregateReport::Pooled(r) => r.p95_abs_re,
            _ => unreachable!(),
        };
        let baseline_p95 = out.baseline.p95_abs_re;
        assert!(
            model_p95 < 0.5 * baseline_p95,
            "{parity:?}: CNN pooled p95 {model_p95:.3} vs baseline {baseline_p95:.3}"
        );
    }
    println!("ACCEPTANCE 7 (baseline improvement): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 8: determinism
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_determinism() {
    let ds = generate_dataset(&RigConfig {
        n_baselines: 6,
        gvf_steps_per_baseline: 4,
        seed: 9,
        ..RigConfig::default()
    })
    .unwrap();
    let dataset_bytes = cmf_correct::dataset_io::serialize_dataset(&ds).unwrap();
    let opts = PipelineOptions::new(
        rate_from_str("4s").unwrap(),
        ModelKind::Mlpw,
        Parity::Odd,
        vec![1, 2, 3],
    );
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for dir in &dirs {
        std::fs::create_dir_all(dir).unwrap();
        let out = run(&ds, &opts).unwrap();
        write_run_artifacts(dir, dataset_bytes.as_bytes(), &opts, &out, true).unwrap();
    }
    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 10, "expected a full artifact set, got {names:?}");
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between identical runs");
    }
    println!("ACCEPTANCE 8 (determinism): PASS");
}
