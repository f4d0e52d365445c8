//! The four subcommand implementations. Each returns `CliResult<()>`; the
//! binary maps errors to the documented exit codes.

use crate::args::{EvalArgs, GenDataArgs, GradcheckArgs, TrainArgs};
use crate::config::{resolve, Overrides, Resolved};
use crate::manifest::{compute_run_id, now_unix_seconds, sha256_hex, RunManifest, RunOutputs};
use crate::{map_train_error, CliError, CliResult};
use cbn_core::data::{partition_classes, synth_clusters, Dataset};
use cbn_core::train::{build_model, evaluate, Trainer};
use cbn_core::{run_suite, save_checkpoint, CheckReport, RunRecord};
use serde::Serialize;
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// Generate the synthetic long-tailed container plus a CSV preview, and
/// print the realized per-class training counts.
pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    if args.k < 2 {
        return Err(CliError::config(format!(
            "need at least two classes, got k = {}",
            args.k
        )));
    }
    if args.d < 1 {
        return Err(CliError::config("feature dimension must be positive"));
    }
    if !(args.rho.is_finite() && args.rho >= 1.0) {
        return Err(CliError::config(format!(
            "imbalance ratio must be a finite value of at least 1, got {}",
            args.rho
        )));
    }
    if args.nmax < 1 {
        return Err(CliError::config("head-class count must be at least 1"));
    }
    if !(args.separation.is_finite() && args.separation > 0.0) {
        return Err(CliError::config(format!(
            "separation must be a finite positive value, got {}",
            args.separation
        )));
    }

    let counts = cbn_core::data::longtail_counts(args.k, args.nmax, args.rho);
    let dataset = synth_clusters(args.k, args.d, &counts, args.separation, args.seed);
    dataset
        .write_binary(&args.out)
        .map_err(|e| CliError::other(format!("writing {}: {e}", args.out.display())))?;

    let preview_path = args.out.with_extension("preview.csv");
    fs::write(&preview_path, dataset.csv_preview(args.preview_rows))
        .map_err(|e| CliError::other(format!("writing {}: {e}", preview_path.display())))?;

    let realized = dataset.train_counts();
    let joined: Vec<String> = realized.iter().map(|c| c.to_string()).collect();
    println!("train counts: {}", joined.join(" "));
    println!(
        "wrote {} ({} train / {} test points) and {}",
        args.out.display(),
        dataset.train_y.len(),
        dataset.test_y.len(),
        preview_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SummaryMetrics {
    top1: Option<f64>,
    many: Option<f64>,
    medium: Option<f64>,
    few: Option<f64>,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    run_id: &'a str,
    manifest: &'a str,
    epochs: usize,
    final_metrics: SummaryMetrics,
    final_cls_loss: Option<f64>,
    final_sim_loss: Option<f64>,
    starvation_events: u64,
    final_checkpoint: &'a str,
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Run a full training job: merge configuration, write the manifest, stream
/// per-epoch metrics to CSV, checkpoint on the configured interval, and
/// finish with a JSON summary.
pub fn train(args: &TrainArgs) -> CliResult<()> {
    let file_layer = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::input(format!("reading config {}: {e}", path.display()))
            })?;
            Overrides::parse_file(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => Overrides::default(),
    };
    let flag_layer = Overrides::from_flags(args).map_err(CliError::config)?;
    let merged = flag_layer.over(file_layer);
    let env_seed = std::env::var("CNL_SEED").ok();
    let Resolved {
        config,
        checkpoint_interval,
    } = resolve(merged, env_seed.as_deref()).map_err(CliError::config)?;

    let dataset_bytes = fs::read(&args.data)
        .map_err(|e| CliError::input(format!("reading dataset {}: {e}", args.data.display())))?;
    let dataset = Dataset::read_binary(&args.data)
        .map_err(|e| CliError::input(format!("dataset {}: {e}", args.data.display())))?;

    // Routing needs at most one group per class; without the routed path the
    // partition is inert, so it is clamped instead of rejected.
    let groups = if config.sbn {
        if config.m > dataset.k {
            return Err(CliError::config(format!(
                "cannot route {} classes into {} groups; lower m or disable sbn",
                dataset.k, config.m
            )));
        }
        config.m
    } else {
        config.m.min(dataset.k)
    };
    let partition = partition_classes(dataset.k, groups)
        .map_err(|e| CliError::config(e.to_string()))?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::other(format!("creating {}: {e}", args.out_dir.display())))?;

    let artifact_version = env!("CARGO_PKG_VERSION");
    let dataset_sha256 = sha256_hex(&dataset_bytes);
    let run_id = compute_run_id(&config, &dataset_sha256, artifact_version);
    let metrics_name = "metrics.csv";
    let summary_name = "summary.json";
    let final_ckpt_name = format!("{run_id}-final.ckpt");
    let manifest = RunManifest {
        run_id: run_id.clone(),
        artifact_version: artifact_version.to_string(),
        revision: env!("CBN_REVISION").to_string(),
        seed: config.seed,
        dataset_path: args.data.display().to_string(),
        dataset_sha256,
        config: config.clone(),
        checkpoint_interval,
        outputs: RunOutputs {
            metrics_csv: metrics_name.to_string(),
            summary_json: summary_name.to_string(),
            final_checkpoint: final_ckpt_name.clone(),
        },
        created_unix_seconds: now_unix_seconds(),
    };
    let manifest_path = args.out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;

    let mut model =
        build_model(&config, dataset.d, dataset.k).map_err(|e| CliError::config(e.to_string()))?;
    let mut trainer = Trainer::new(&dataset, partition, config.clone())
        .map_err(|e| CliError::config(e.to_string()))?;
    for w in trainer.warnings() {
        eprintln!("warning: {w}");
    }
    let total = trainer.total_epochs();

    let csv_path = args.out_dir.join(metrics_name);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(&csv_path)
        .map_err(|e| CliError::other(format!("writing {}: {e}", csv_path.display())))?;
    writer
        .write_record([
            "run_id",
            "epoch",
            "cls_loss",
            "sim_loss",
            "top1",
            "many",
            "medium",
            "few",
            "lr",
            "starvation_events",
        ])
        .map_err(|e| CliError::other(e.to_string()))?;

    let mut last: Option<RunRecord> = None;
    let mut epochs_done = 0usize;
    loop {
        let record = match trainer.next_epoch(&mut model) {
            Ok(Some(record)) => record,
            Ok(None) => break,
            Err(e) => return Err(map_train_error(e)),
        };
        writer
            .write_record([
                run_id.clone(),
                record.epoch.to_string(),
                fmt_f64(record.cls_loss),
                fmt_f64(record.sim_loss),
                fmt_f64(record.top1),
                fmt_opt(record.many),
                fmt_opt(record.medium),
                fmt_opt(record.few),
                fmt_f64(record.lr),
                record.starvation_events.to_string(),
            ])
            .map_err(|e| CliError::other(e.to_string()))?;
        writer.flush().map_err(|e| CliError::other(e.to_string()))?;
        println!(
            "epoch {:>3}/{total} cls {:.4} sim {:.4} top1 {:.2} lr {:.5}",
            record.epoch, record.cls_loss, record.sim_loss, record.top1, record.lr
        );
        epochs_done += 1;
        if checkpoint_interval > 0 && record.epoch % checkpoint_interval == 0 {
            let path = args
                .out_dir
                .join(format!("{run_id}-epoch{:04}.ckpt", record.epoch));
            save_checkpoint(&model, &path).map_err(|e| CliError::other(e.to_string()))?;
        }
        last = Some(record);
    }

    let final_path = args.out_dir.join(&final_ckpt_name);
    save_checkpoint(&model, &final_path).map_err(|e| CliError::other(e.to_string()))?;

    let summary = RunSummary {
        run_id: &run_id,
        manifest: "manifest.json",
        epochs: epochs_done,
        final_metrics: SummaryMetrics {
            top1: last.as_ref().map(|r| r.top1),
            many: last.as_ref().and_then(|r| r.many),
            medium: last.as_ref().and_then(|r| r.medium),
            few: last.as_ref().and_then(|r| r.few),
        },
        final_cls_loss: last.as_ref().map(|r| r.cls_loss),
        final_sim_loss: last.as_ref().map(|r| r.sim_loss),
        starvation_events: model.starvation_events(),
        final_checkpoint: &final_ckpt_name,
    };
    write_json(&args.out_dir.join(summary_name), &summary)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::other(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::other(format!("writing {}: {e}", path.display())))
}

/// Evaluate a checkpoint on a dataset's test split and emit the metrics as
/// JSON (standard output, plus `--out` when given).
pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let mut model = cbn_core::load_checkpoint(&args.checkpoint).map_err(|e| {
        CliError::input(format!("checkpoint {}: {e}", args.checkpoint.display()))
    })?;
    let dataset = Dataset::read_binary(&args.data)
        .map_err(|e| CliError::input(format!("dataset {}: {e}", args.data.display())))?;
    let metrics = evaluate(
        &mut model,
        &dataset.test_x,
        &dataset.test_y,
        &dataset.train_counts(),
    )
    .map_err(|e| CliError::other(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&metrics)
        .map_err(|e| CliError::other(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    std::io::stdout()
        .flush()
        .map_err(|e| CliError::other(e.to_string()))?;
    if let Some(out) = &args.out {
        fs::write(out, &text)
            .map_err(|e| CliError::other(format!("writing {}: {e}", out.display())))?;
    }
    Ok(())
}

/// Run the finite-difference suite and print one row per check. Exit code 0
/// only when every check passes.
pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(CliError::config(format!(
            "tolerance must be a finite positive value, got {}",
            args.tol
        )));
    }
    if args.instances == 0 {
        return Err(CliError::config("need at least one instance per check"));
    }
    let rel = args.tol;
    let abs = args.tol / 100.0;
    let reports = run_suite(args.seed, args.instances, rel, abs)
        .map_err(|e| CliError::other(e.to_string()))?;
    print_report_table(&reports, rel, abs);
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("gradient checks: all {} passed", reports.len());
        Ok(())
    } else {
        println!(
            "gradient checks: {failed} of {} FAILED",
            reports.len()
        );
        Err(CliError {
            code: 1,
            message: format!("{failed} gradient checks failed"),
        })
    }
}

fn print_report_table(reports: &[CheckReport], rel: f64, abs: f64) {
    println!("tolerance per coordinate: max({rel:e} relative, {abs:e} absolute)");
    println!(
        "{:<34} {:>7} {:>12} {:>14} {:>7}",
        "check", "coords", "max |diff|", "worst/allowed", "result"
    );
    for r in reports {
        println!(
            "{:<34} {:>7} {:>12.3e} {:>14.4} {:>7}",
            r.name,
            r.coords,
            r.max_abs_err,
            r.worst_ratio,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
}
