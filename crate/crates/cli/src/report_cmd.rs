//! Tables and distribution data from the run records under a sweep directory.

use std::path::Path;

use anyhow::{bail, Context, Result};

use hpnn_core::model::NetworkKind;
use hpnn_core::report::{summarize, Kde, RunRecord, SweepSummary};

use crate::output::{opt, read_json, write_json, write_text, Table};
use crate::run::RECORD;
use crate::svg::{self, Violin};
use crate::sweep::{SUMMARY, SWEEP_DIR};

pub const KDE_POINTS: usize = 201;

/// All complete run records under `dir/runs`, sorted by run id.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = dir.join("runs");
    let mut records = Vec::new();
    if runs.is_dir() {
        for entry in
            std::fs::read_dir(&runs).with_context(|| format!("listing {}", runs.display()))?
        {
            let path = entry?.path().join(RECORD);
            if path.exists() {
                records.push(read_json::<RunRecord>(&path)?);
            }
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(records)
}

/// Threshold from the sweep summary unless given.
pub fn report(dir: &Path, threshold: Option<f64>, out_dir: &Path) -> Result<SweepSummary> {
    let threshold = match threshold {
        Some(t) => t,
        None => {
            let path = dir.join(SWEEP_DIR).join(SUMMARY);
            if !path.exists() {
                bail!("no {} found; pass --threshold", path.display());
            }
            read_json::<SweepSummary>(&path)?.threshold
        }
    };
    let records = load_records(dir)?;
    let summary = summarize(&records, threshold);

    let mut acc = Table::new(
        "accuracies",
        &["kind", "param_count", "run_id", "best_val_accuracy"],
    );
    for r in &records {
        acc.row([
            r.kind.to_string(),
            r.param_count.to_string(),
            r.run_id.clone(),
            r.best_val_accuracy.to_string(),
        ]);
    }
    acc.write(&out_dir.join("accuracies.csv"))?;

    let mut dist = Table::new(
        "distribution",
        &["kind", "param_count", "type", "accuracy", "density"],
    );
    let mut violins = Vec::new();
    for size in &summary.sizes {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.kind == size.kind && r.param_count == size.param_count)
            .map(|r| r.best_val_accuracy)
            .collect();
        let tag = |kind: NetworkKind| kind.to_string();
        let density = match Kde::fit(&values) {
            Some(kde) => kde
                .support(KDE_POINTS)
                .into_iter()
                .map(|x| (x, kde.density(x)))
                .collect(),
            None => Vec::new(),
        };
        if density.is_empty() {
            for v in &values {
                dist.row([
                    tag(size.kind),
                    size.param_count.to_string(),
                    "point".into(),
                    v.to_string(),
                    String::new(),
                ]);
            }
        }
        for (x, d) in &density {
            dist.row([
                tag(size.kind),
                size.param_count.to_string(),
                "kde".into(),
                x.to_string(),
                d.to_string(),
            ]);
        }
        violins.push(Violin {
            label: format!(
                "{} {}",
                if size.kind == NetworkKind::Hybrid {
                    "H"
                } else {
                    "C"
                },
                size.param_count
            ),
            density,
            points: values,
        });
    }
    dist.write(&out_dir.join("distributions.csv"))?;

    let mut table = Table::new(
        "summary",
        &[
            "kind",
            "param_count",
            "runs",
            "well_trained",
            "well_trained_mean",
            "well_trained_std",
            "poorly_trained_fraction",
            "failed_fraction",
            "threshold",
        ],
    );
    for s in &summary.sizes {
        table.row([
            s.kind.to_string(),
            s.param_count.to_string(),
            s.runs.to_string(),
            s.well_trained.to_string(),
            opt(s.well_trained_mean),
            opt(s.well_trained_std),
            s.poorly_trained_fraction.to_string(),
            s.failed_fraction.to_string(),
            threshold.to_string(),
        ]);
    }
    table.write(&out_dir.join("summary.csv"))?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    write_text(
        &out_dir.join("violins.svg"),
        &svg::violins(
            "Best validation accuracy per network size",
            &violins,
            threshold,
        ),
    )?;
    Ok(summary)
}
