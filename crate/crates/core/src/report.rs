//! Plain-text report tables: |RE| percentile/coverage summaries, GVF-binned
//! tables, per-seed metric summaries, complexity counts, and plot-data files.
//! All emitters are deterministic; latency (machine-dependent) gets its own
//! table so the rest of a run's output is byte-reproducible.

use crate::error::{Error, Result};
use crate::eval::{AggregateReport, ErrorVector, EvalReport, GvfBin, MeanStd, SeedErrors};
use crate::nn::{measure_latency, serialize_model, ComplexityReport};
use crate::pipeline::{PipelineOptions, RunManifest, RunOutput};
use crate::splits::Parity;
use std::fs;
use std::path::Path;

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_else(|| "-".into())
}

fn ms(v: &MeanStd) -> String {
    format!("{:.4}+-{:.4}", v.mean, v.std)
}

fn opt_ms(v: &Option<MeanStd>) -> String {
    v.as_ref().map(ms).unwrap_or_else(|| "-".into())
}

/// |RE| percentile and coverage table (one row per labelled aggregate).
/// Pooled rows show plain numbers; per-seed rows show mean+-std.
pub fn percentile_table(rows: &[(String, &AggregateReport)]) -> String {
    let mut out =
        String::from("label\taggregation\tn\tmax\tp99\tp95\tp50\tcov_le_10\tcov_le_5\n");
    for (label, agg) in rows {
        match agg {
            AggregateReport::Pooled(r) => {
                out.push_str(&format!(
                    "{label}\tpooled\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.n,
                    f4(r.max_abs_re),
                    f4(r.p99_abs_re),
                    f4(r.p95_abs_re),
                    f4(r.p50_abs_re),
                    f4(r.coverage_10),
                    f4(r.coverage_5)
                ));
            }
            AggregateReport::PerSeed {
                n_seeds,
                max_abs_re,
                p99_abs_re,
                p95_abs_re,
                p50_abs_re,
                coverage_10,
                coverage_5,
                ..
            } => {
                out.push_str(&format!(
                    "{label}\tper_seed({n_seeds})\t-\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    ms(max_abs_re),
                    ms(p99_abs_re),
                    ms(p95_abs_re),
                    ms(p50_abs_re),
                    ms(coverage_10),
                    ms(coverage_5)
                ));
            }
        }
    }
    out
}

/// Per-GVF-range table; n counts samples x seeds.
pub fn gvf_table(bins: &[GvfBin]) -> String {
    let mut out = String::from("gvf_range_pct\tn\tmax\tp99\tp95\tp50\tmape\tmedape\tr2\n");
    for b in bins {
        let range = if b.overflow {
            format!(">={:.0} (overflow)", b.lo * 100.0)
        } else {
            format!("{:.0}-{:.0}", b.lo * 100.0, b.hi * 100.0)
        };
        match &b.report {
            Some(r) => out.push_str(&format!(
                "{range}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                b.n,
                f4(r.max_abs_re),
                f4(r.p99_abs_re),
                f4(r.p95_abs_re),
                f4(r.p50_abs_re),
                f4(r.metrics.mape),
                f4(r.metrics.medape),
                opt4(r.metrics.r_squared)
            )),
            None => out.push_str(&format!("{range}\t{}\t-\t-\t-\t-\t-\t-\t-\n", b.n)),
        }
    }
    out
}

/// Full metric suite, one row per labelled report (e.g. model vs baseline).
pub fn metric_table(rows: &[(String, &EvalReport)]) -> String {
    let mut out = String::from(
        "label\tn\trmse\trnrmse\tavgnrmse\tmae\tmedae\tmape\tmedape\tr2\n",
    );
    for (label, r) in rows {
        out.push_str(&format!(
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.n,
            f4(r.metrics.rmse),
            opt4(r.metrics.rnrmse),
            opt4(r.metrics.avgnrmse),
            f4(r.metrics.mae),
            f4(r.metrics.medae),
            f4(r.metrics.mape),
            f4(r.metrics.medape),
            opt4(r.metrics.r_squared)
        ));
    }
    out
}

/// Per-seed mean+-std metric summary rows.
pub fn seed_summary_table(rows: &[(String, &AggregateReport)]) -> String {
    let mut out = String::from(
        "label\tn_seeds\trmse\trnrmse\tavgnrmse\tmae\tmedae\tmape\tmedape\tr2\n",
    );
    for (label, agg) in rows {
        if let AggregateReport::PerSeed {
            n_seeds,
            rmse,
            rnrmse,
            avgnrmse,
            mae,
            medae,
            mape,
            medape,
            r_squared,
            ..
        } = agg
        {
            out.push_str(&format!(
                "{label}\t{n_seeds}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                ms(rmse),
                opt_ms(rnrmse),
                opt_ms(avgnrmse),
                ms(mae),
                ms(medae),
                ms(mape),
                ms(medape),
                opt_ms(r_squared)
            ));
        }
    }
    out
}

/// Parameter and MAC counts per model.
pub fn complexity_table(rows: &[(String, &ComplexityReport)]) -> String {
    let mut out = String::from("model\tparameters\tmacs_per_example\n");
    for (label, c) in rows {
        out.push_str(&format!(
            "{label}\t{}\t{}\n",
            c.parameter_count, c.macs_per_example
        ));
    }
    out
}

/// Latency is machine-dependent; kept out of the deterministic reports.
pub fn latency_table(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::from("model\tmean_us\tstd_us\n");
    for (label, mean, std) in rows {
        out.push_str(&format!("{label}\t{mean:.2}\t{std:.2}\n"));
    }
    out
}

/// Per-sample error records; the exact float values round-trip.
pub fn errors_table(runs: &[SeedErrors]) -> String {
    let mut out = String::from("seed\tparity\tgvf\ty\ty_hat\tre_pct\n");
    for run in runs {
        let ev = &run.errors;
        for i in 0..ev.len() {
            let re = (ev.y_hat[i] - ev.y[i]) / ev.y[i] * 100.0;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                run.seed,
                run.parity.as_str(),
                ev.gvf[i],
                ev.y[i],
                ev.y_hat[i],
                re
            ));
        }
    }
    out
}

/// Inverse of `errors_table`: reconstructs per-seed error vectors.
pub fn parse_errors_table(text: &str) -> Result<Vec<SeedErrors>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with("seed\t") {
        return Err(Error::Parse {
            record: 0,
            message: format!("unexpected errors-table header {header:?}"),
        });
    }
    let mut runs: Vec<SeedErrors> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let record = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                record,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                record,
                message: format!("bad number {s:?}"),
            })
        };
        let seed: u64 = fields[0].parse().map_err(|_| Error::Parse {
            record,
            message: format!("bad seed {:?}", fields[0]),
        })?;
        let parity: Parity = fields[1].parse()?;
        let (gvf, y, y_hat) = (parse(fields[2])?, parse(fields[3])?, parse(fields[4])?);
        if runs.last().map(|r| r.seed) != Some(seed) {
            runs.push(SeedErrors {
                seed,
                parity,
                errors: ErrorVector::default(),
            });
        }
        let run = runs.last_mut().unwrap();
        run.errors.y.push(y);
        run.errors.y_hat.push(y_hat);
        run.errors.gvf.push(gvf);
        run.errors.seed.push(seed);
    }
    Ok(runs)
}

/// Plot-data file: signed RE against mass flow and GVF (one series per
/// labelled run) plus coverage curves with +-1 std bands.
pub fn plot_data(series: &[(String, &ErrorVector)], curves: &[(String, &[(f64, MeanStd)])]) -> String {
    let mut out = String::from("# section re_samples\n# columns: series\ty\tgvf\tre_pct\tseed\n");
    for (label, ev) in series {
        for i in 0..ev.len() {
            let re = (ev.y_hat[i] - ev.y[i]) / ev.y[i] * 100.0;
            out.push_str(&format!(
                "{label}\t{}\t{}\t{}\t{}\n",
                ev.y[i], ev.gvf[i], re, ev.seed[i]
            ));
        }
    }
    out.push_str("# section coverage\n# columns: series\tthreshold_pct\tmean\tstd\n");
    for (label, curve) in curves {
        for (thr, v) in curve.iter() {
            out.push_str(&format!("{label}\t{thr}\t{}\t{}\n", v.mean, v.std));
        }
    }
    out
}

/// Writes every artifact of one completed run into `dir`. Everything except
/// `latency.tsv` is byte-deterministic for a fixed dataset and manifest.
pub fn write_run_artifacts(
    dir: &Path,
    dataset_bytes: &[u8],
    opts: &PipelineOptions,
    out: &RunOutput,
    no_latency: bool,
) -> Result<()> {
    let manifest = RunManifest::from_run(dataset_bytes, opts, out);
    fs::write(dir.join("manifest.txt"), manifest.to_text())?;

    let mut excl = String::from("group_id\treason\n");
    for (id, reason) in &out.excluded {
        excl.push_str(&format!("{id}\t{reason}\n"));
    }
    fs::write(dir.join("exclusions.tsv"), excl)?;

    let label = format!("{}_{}_{}", manifest.rate, manifest.model, manifest.parity);
    let baseline_pooled = AggregateReport::Pooled(out.baseline.clone());
    fs::write(
        dir.join("percentiles.tsv"),
        percentile_table(&[
            (label.clone(), &out.pooled),
            (label.clone(), &out.per_seed),
            (format!("baseline_{}", manifest.rate), &baseline_pooled),
        ]),
    )?;
    fs::write(
        dir.join("metrics.tsv"),
        match &out.pooled {
            AggregateReport::Pooled(r) => metric_table(&[
                (label.clone(), r),
                (format!("baseline_{}", manifest.rate), &out.baseline),
            ]),
            _ => unreachable!(),
        },
    )?;
    fs::write(
        dir.join("seed_summary.tsv"),
        seed_summary_table(&[(label.clone(), &out.per_seed)]),
    )?;
    fs::write(dir.join("gvf_binned.tsv"), gvf_table(&out.gvf_bins))?;
    fs::write(
        dir.join("complexity.tsv"),
        complexity_table(&[(manifest.model.clone(), &out.complexity)]),
    )?;

    let seed_errs: Vec<SeedErrors> = out.sweep.runs.iter().map(|r| r.errors.clone()).collect();
    fs::write(dir.join("errors.tsv"), errors_table(&seed_errs))?;

    let mut all_errors = seed_errs[0].errors.clone();
    for r in &seed_errs[1..] {
        all_errors.extend(&r.errors);
    }
    fs::write(
        dir.join("plot_data.tsv"),
        plot_data(
            &[(label.clone(), &all_errors)],
            &[(label.clone(), out.coverage.as_slice())],
        ),
    )?;

    for run in &out.sweep.runs {
        fs::write(
            dir.join(format!("training_log_seed{}.tsv", run.seed)),
            run.log.to_text(),
        )?;
        fs::write(
            dir.join(format!("checkpoint_seed{}.txt", run.seed)),
            serialize_model(&run.model),
        )?;
    }
    if !out.sweep.failures.is_empty() {
        let mut text = String::from("seed\terror\n");
        for (seed, msg) in &out.sweep.failures {
            text.push_str(&format!("{seed}\t{msg}\n"));
        }
        fs::write(dir.join("seed_failures.tsv"), text)?;
    }
    if let Some(scores) = &out.grid_scores {
        let mut text = String::from("learning_rate\tweight_decay\tmean_fold_mse\n");
        for s in scores {
            text.push_str(&format!(
                "{}\t{}\t{}\n",
                s.learning_rate, s.weight_decay, s.mean_fold_mse
            ));
        }
        fs::write(dir.join("grid_scores.tsv"), text)?;
    }
    if !no_latency {
        let (mean, std) = measure_latency(&out.sweep.runs[0].model, 200)?;
        fs::write(
            dir.join("latency.tsv"),
            latency_table(&[(manifest.model.clone(), mean, std)]),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{aggregate_over_seeds, AggregationMode};

    fn sample_runs() -> Vec<SeedErrors> {
        let mk = |seed: u64, y_hat: Vec<f64>| SeedErrors {
            seed,
            parity: Parity::Even,
            errors: ErrorVector::new(
                vec![100.0, 200.0, 300.0],
                y_hat,
                vec![0.1, 0.4, 0.8],
                vec![seed; 3],
            )
            .unwrap(),
        };
        vec![
            mk(1, vec![110.0, 190.0, 330.0]),
            mk(2, vec![95.0, 220.0, 290.0]),
        ]
    }

    #[test]
    fn errors_table_round_trip() {
        let runs = sample_runs();
        let text = errors_table(&runs);
        let parsed = parse_errors_table(&text).unwrap();
        assert_eq!(parsed, runs);
    }

    #[test]
    fn tables_have_one_row_per_entry() {
        let runs = sample_runs();
        let pooled = aggregate_over_seeds(&runs, AggregationMode::Pooled).unwrap();
        let per_seed = aggregate_over_seeds(&runs, AggregationMode::PerSeedMeanStd).unwrap();
        let t = percentile_table(&[
            ("cnn-4s".into(), &pooled),
            ("cnn-4s".into(), &per_seed),
        ]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("pooled"));
        assert!(t.contains("per_seed(2)"));
        let s = seed_summary_table(&[("cnn-4s".into(), &per_seed)]);
        assert_eq!(s.lines().count(), 2);
        assert!(s.contains("+-"));
    }

    #[test]
    fn gvf_table_marks_empty_and_overflow() {
        let runs = sample_runs();
        let mut all = runs[0].errors.clone();
        all.extend(&runs[1].errors);
        let bins =
            crate::eval::gvf_binned_report(&all, &crate::eval::DEFAULT_GVF_BIN_EDGES).unwrap();
        let t = gvf_table(&bins);
        assert!(t.contains("0-15"));
        assert!(t.contains("80-95"));
        // 15-35 bin is empty: dashes, no panic
        assert!(t.lines().any(|l| l.starts_with("15-35\t0\t-")));
    }

    #[test]
    fn malformed_errors_table_rejected() {
        assert!(parse_errors_table("nope\n1\teven\n").is_err());
        let err = parse_errors_table("seed\tparity\tgvf\ty\ty_hat\tre_pct\n1\teven\tx\n")
            .unwrap_err();
        assert!(err.to_string().contains("record 1"), "{err}");
    }
}
