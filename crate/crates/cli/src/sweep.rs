//! Multi-size sweeps: runs in a worker pool, records through one writer, and
//! the trainability summary.

use std::io::Write as _;
use std::path::Path;
use std::sync::mpsc;

use anyhow::{Context, Result};
use rayon::prelude::*;

use hpnn_core::datagen::fit_linear_baseline;
use hpnn_core::report::{summarize, RunRecord, SweepSummary};

use crate::config::ExperimentConfig;
use crate::output::{write_json, Table};
use crate::run::{execute, existing, prepare};

pub const SWEEP_DIR: &str = "sweep";
pub const SUMMARY: &str = "summary.json";

pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub skipped: usize,
    pub errors: Vec<String>,
}

/// Run every grid point not already complete under `out/runs`, then write
/// `out/sweep/{summary.json,runs.csv}`. Completion order is logged to
/// `out/sweep/progress.jsonl`; the summary files depend only on the records.
pub fn sweep(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<SweepOutcome> {
    let runs_dir = out.join("runs");
    let sweep_dir = out.join(SWEEP_DIR);
    std::fs::create_dir_all(&sweep_dir)
        .with_context(|| format!("creating {}", sweep_dir.display()))?;
    let base = config.run_config();
    let data = base.dataset()?;
    let threshold = fit_linear_baseline(&data, config.data.seed)?.val_accuracy;

    let mut prepared = Vec::new();
    for run in config.grid.expand(config) {
        prepared.push(prepare(&run)?);
    }
    let mut done = Vec::new();
    let mut todo = Vec::new();
    for p in prepared {
        match existing(&runs_dir, &p) {
            Some(record) => done.push(record),
            None => todo.push(p),
        }
    }
    let skipped = done.len();

    let (tx, rx) = mpsc::channel::<RunRecord>();
    let log_path = sweep_dir.join("progress.jsonl");
    let writer = std::thread::spawn(move || -> Result<()> {
        let mut log = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .with_context(|| format!("opening {}", log_path.display()))?;
        for record in rx {
            writeln!(log, "{}", serde_json::to_string(&record)?)?;
            eprintln!(
                "{} {:?} best {:.3} ({:.1}s)",
                record.run_id, record.status, record.best_val_accuracy, record.wall_time_s
            );
        }
        Ok(())
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        todo.par_iter()
            .map_with(tx, |tx, p| {
                let record =
                    execute(p, &data, &runs_dir).with_context(|| format!("run {}", p.id))?;
                let _ = tx.send(record.clone());
                Ok(record)
            })
            .collect()
    });
    writer.join().expect("writer thread")?;

    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(record) => done.push(record),
            Err(e) => errors.push(format!("{e:#}")),
        }
    }
    done.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let summary = summarize(&done, threshold);
    write_json(&sweep_dir.join(SUMMARY), &summary)?;
    write_runs_csv(&sweep_dir.join("runs.csv"), &done)?;
    Ok(SweepOutcome {
        summary,
        skipped,
        errors,
    })
}

fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut table = Table::new(
        "runs",
        &[
            "run_id",
            "kind",
            "param_count",
            "modes",
            "layers",
            "cutoff",
            "seed",
            "status",
            "best_val_accuracy",
            "best_epoch",
        ],
    );
    for r in records {
        let status = match &r.status {
            hpnn_core::report::RunStatus::Completed => "completed",
            hpnn_core::report::RunStatus::Failed(_) => "failed",
        };
        table.row([
            r.run_id.clone(),
            r.kind.to_string(),
            r.param_count.to_string(),
            r.shape.modes.to_string(),
            r.shape.layers.to_string(),
            r.shape.cutoff.to_string(),
            r.seed.to_string(),
            status.to_string(),
            r.best_val_accuracy.to_string(),
            r.best_epoch.to_string(),
        ]);
    }
    table.write(path)
}
