//! Command-line front end: `generate` a synthetic dataset, `run` the full
//! correction pipeline for one (rate, model, parity) combination or the whole
//! grid, and `report` cross-run comparisons.

use clap::{Parser, Subcommand};
use cmf_correct::config::{parse_kv, parse_rig_config, serialize_rig_config};
use cmf_correct::dataset_io::{load_dataset, save_dataset};
use cmf_correct::error::{Error, Result};
use cmf_correct::eval::SeedErrors;
use cmf_correct::nn::{
    count_complexity, ModelKind, ModelSpec,
};
use cmf_correct::pipeline::{
    rate_from_str, run as run_pipeline, sha256_hex, PipelineOptions,
    RATE_LABELS,
};
use cmf_correct::report::{
    complexity_table, gvf_table, parse_errors_table, percentile_table, plot_data,
    seed_summary_table, write_run_artifacts,
};
use cmf_correct::synth::{generate_dataset, RigConfig};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "cmf-correct", version, about = "Coriolis multiphase mass-flow correction pipeline")]
struct Cli {
    /// Worker threads for seed-level parallelism (default: CMF_CORRECT_JOBS
    /// env var, then all cores). Report content is independent of this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic three-phase rig dataset.
    Generate {
        /// Rig configuration file (key=value; defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset path (TSV).
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full pipeline: preprocess, split, train across seeds, evaluate.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// One of 0.25s, 0.5s, 1s, 2s, 3s, 4s, 5s, 6s, original, 60s.
        #[arg(long, required_unless_present = "all")]
        rate: Option<String>,
        /// One of mlp, mlpw, cnn.
        #[arg(long, required_unless_present = "all")]
        model: Option<String>,
        /// One of even, odd.
        #[arg(long, required_unless_present = "all")]
        parity: Option<String>,
        /// Seed list: "1..30" (inclusive), "1,2,5", or a single integer.
        #[arg(long, default_value = "1..30")]
        seeds: String,
        /// Output directory; each combination gets a subdirectory.
        #[arg(long)]
        out: PathBuf,
        /// Sweep all models x interval/mean rates x parities.
        #[arg(long)]
        all: bool,
        /// Grid-search hyperparameters with rolling-origin CV instead of the
        /// built-in presets.
        #[arg(long)]
        tune: bool,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        #[arg(long, default_value_t = 60)]
        max_epochs: usize,
        /// Skip the (machine-dependent) latency measurement.
        #[arg(long)]
        no_latency: bool,
    },
    /// Merge completed run directories into comparison tables and plot data.
    Report {
        /// Output directory for the merged tables.
        #[arg(long)]
        out: PathBuf,
        /// Completed run directories (each holding manifest.txt, errors.tsv).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn real_main(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.or_else(|| {
        std::env::var("CMF_CORRECT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Parameter("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Generate { config, out, seed } => cmd_generate(config, out, seed),
        Cmd::Run {
            dataset,
            rate,
            model,
            parity,
            seeds,
            out,
            all,
            tune,
            split_seed,
            max_epochs,
            no_latency,
        } => cmd_run(
            dataset, rate, model, parity, &seeds, out, all, tune, split_seed, max_epochs,
            no_latency,
        ),
        Cmd::Report { out, runs } => cmd_report(out, runs),
    }
}

fn cmd_generate(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::config("config", format!("cannot read {}: {e}", path.display()))
            })?;
            parse_rig_config(&text)?
        }
        None => RigConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = generate_dataset(&cfg)?;
    save_dataset(&ds, &out)?;
    let bytes = fs::read(&out)?;
    let manifest = format!(
        "dataset_sha256={}\nn_experiments={}\n[config]\n{}",
        sha256_hex(&bytes),
        ds.len(),
        serialize_rig_config(&cfg)
    );
    fs::write(out.with_extension("manifest.txt"), manifest)?;
    println!(
        "wrote {} experiments to {}",
        ds.len(),
        out.display()
    );
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Parameter(format!("cannot parse seed list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    dataset: PathBuf,
    rate: Option<String>,
    model: Option<String>,
    parity: Option<String>,
    seeds: &str,
    out: PathBuf,
    all: bool,
    tune: bool,
    split_seed: u64,
    max_epochs: usize,
    no_latency: bool,
) -> Result<()> {
    let seeds = parse_seeds(seeds)?;
    let bytes = fs::read(&dataset)
        .map_err(|e| Error::config("dataset", format!("cannot read {}: {e}", dataset.display())))?;
    let ds = load_dataset(&dataset)?;

    let combos: Vec<(String, String, String)> = if all {
        // the full sweep: interval + mean rates (the untouched original rate
        // is available per-combination but too costly for a default sweep)
        let mut v = Vec::new();
        for r in RATE_LABELS.iter().filter(|r| **r != "original") {
            for m in ["mlp", "mlpw", "cnn"] {
                for p in ["even", "odd"] {
                    v.push((r.to_string(), m.to_string(), p.to_string()));
                }
            }
        }
        v
    } else {
        vec![(rate.unwrap(), model.unwrap(), parity.unwrap())]
    };

    for (rate_s, model_s, parity_s) in combos {
        let label = format!("{rate_s}_{model_s}_{parity_s}");
        let dir = out.join(&label);
        fs::create_dir_all(&dir)?;
        let mut opts = PipelineOptions::new(
            rate_from_str(&rate_s)?,
            model_s.parse()?,
            parity_s.parse()?,
            seeds.clone(),
        );
        opts.tune = tune;
        opts.split_seed = split_seed;
        opts.max_epochs = max_epochs;
        match run_pipeline(&ds, &opts) {
            Ok(output) => {
                write_run_artifacts(&dir, &bytes, &opts, &output, no_latency)?;
                println!("{label}: ok ({} seeds)", output.sweep.runs.len());
            }
            Err(e) => {
                // keep partial artifacts, mark the directory as failed
                fs::write(dir.join("FAILED"), format!("{e}\n"))?;
                return Err(e);
            }
        }
    }
    Ok(())
}

struct LoadedRun {
    label: String,
    dataset_sha256: String,
    model: ModelKind,
    window_len: usize,
    runs: Vec<SeedErrors>,
}

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest_text = fs::read_to_string(dir.join("manifest.txt")).map_err(|e| {
        Error::Validation(format!("{} is not a completed run: {e}", dir.display()))
    })?;
    if dir.join("FAILED").exists() {
        return Err(Error::Validation(format!(
            "{} is marked FAILED",
            dir.display()
        )));
    }
    let mut dataset_sha256 = String::new();
    let mut rate = String::new();
    let mut model = String::new();
    let mut parity = String::new();
    let mut window_len = 0usize;
    for (section, key, value, _) in parse_kv(&manifest_text)? {
        if !section.is_empty() {
            continue;
        }
        match key.as_str() {
            "dataset_sha256" => dataset_sha256 = value,
            "rate" => rate = value,
            "model" => model = value,
            "parity" => parity = value,
            "window_len" => {
                window_len = value.parse().map_err(|_| {
                    Error::Validation(format!("bad window_len in {}", dir.display()))
                })?
            }
            _ => {}
        }
    }
    let errors_text = fs::read_to_string(dir.join("errors.tsv"))?;
    Ok(LoadedRun {
        label: format!("{rate}_{model}_{parity}"),
        dataset_sha256,
        model: model.parse()?,
        window_len,
        runs: parse_errors_table(&errors_text)?,
    })
}

fn cmd_report(out: PathBuf, run_dirs: Vec<PathBuf>) -> Result<()> {
    use cmf_correct::eval::{
        aggregate_over_seeds, coverage_curve, gvf_binned_report, AggregationMode, ErrorVector,
        DEFAULT_GVF_BIN_EDGES,
    };
    let loaded: Vec<LoadedRun> = run_dirs.iter().map(|d| load_run(d)).collect::<Result<_>>()?;
    if loaded
        .iter()
        .any(|r| r.dataset_sha256 != loaded[0].dataset_sha256)
    {
        return Err(Error::Validation(
            "runs were produced from different datasets; refusing to merge".into(),
        ));
    }
    fs::create_dir_all(&out)?;

    let mut comparison_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut pooled_aggs = Vec::new();
    let mut per_seed_aggs = Vec::new();
    for r in &loaded {
        pooled_aggs.push(aggregate_over_seeds(&r.runs, AggregationMode::Pooled)?);
        per_seed_aggs.push(aggregate_over_seeds(&r.runs, AggregationMode::PerSeedMeanStd)?);
    }
    for (r, (p, s)) in loaded.iter().zip(pooled_aggs.iter().zip(&per_seed_aggs)) {
        comparison_rows.push((r.label.clone(), p));
        comparison_rows.push((r.label.clone(), s));
        summary_rows.push((r.label.clone(), s));
    }
    fs::write(out.join("comparison.tsv"), percentile_table(&comparison_rows))?;
    fs::write(out.join("seed_summary.tsv"), seed_summary_table(&summary_rows))?;

    let mut gvf_text = String::new();
    let mut pooled_errors: Vec<(String, ErrorVector)> = Vec::new();
    let mut curves = Vec::new();
    for r in &loaded {
        let mut all = r.runs[0].errors.clone();
        for run in &r.runs[1..] {
            all.extend(&run.errors);
        }
        gvf_text.push_str(&format!("# {}\n", r.label));
        gvf_text.push_str(&gvf_table(&gvf_binned_report(&all, &DEFAULT_GVF_BIN_EDGES)?));
        let thresholds: Vec<f64> = (1..=30).map(|t| t as f64).collect();
        curves.push((r.label.clone(), coverage_curve(&r.runs, &thresholds)));
        pooled_errors.push((r.label.clone(), all));
    }
    fs::write(out.join("gvf_binned.tsv"), gvf_text)?;

    let mut complexity_rows = Vec::new();
    for r in &loaded {
        let spec = match r.model {
            ModelKind::Mlp => ModelSpec::mlp(0),
            ModelKind::Mlpw => ModelSpec::mlpw(r.window_len, 0),
            ModelKind::Cnn => ModelSpec::cnn(r.window_len, 0),
        };
        complexity_rows.push((r.label.clone(), count_complexity(&spec)?));
    }
    fs::write(
        out.join("complexity.tsv"),
        complexity_table(
            &complexity_rows
                .iter()
                .map(|(l, c)| (l.clone(), c))
                .collect::<Vec<_>>(),
        ),
    )?;

    fs::write(
        out.join("plot_data.tsv"),
        plot_data(
            &pooled_errors
                .iter()
                .map(|(l, e)| (l.clone(), e))
                .collect::<Vec<_>>(),
            &curves
                .iter()
                .map(|(l, c)| (l.clone(), c.as_slice()))
                .collect::<Vec<_>>(),
        ),
    )?;
    println!("merged {} runs into {}", loaded.len(), out.display());
    Ok(())
}
