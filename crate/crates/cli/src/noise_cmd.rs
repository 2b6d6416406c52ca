//! ENOB sweeps on a trained run.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use hpnn_core::checkpoint::Checkpoint;
use hpnn_core::noise::{enob_sweep, whole_network_sweep, NoiseCurve, NoiseGroup};

use crate::config::{NoiseConfig, RunConfig};
use crate::output::{opt, write_json, write_text, Table};
use crate::run::{BEST, CONFIG};
use crate::svg;

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub curve: String,
    pub noiseless: f64,
    pub near_ideal_enob: Option<f64>,
    pub trend: f64,
}

/// Curves for the best model of the run in `run_dir`, evaluated on the
/// validation split; files go to `out_dir`.
pub fn noise(run_dir: &Path, config: &NoiseConfig, out_dir: &Path) -> Result<Vec<CurveSummary>> {
    let best = run_dir.join(BEST);
    if !best.exists() {
        bail!("checkpoint not found: {}", best.display());
    }
    let model = Checkpoint::load(&best)
        .with_context(|| format!("loading {}", best.display()))?
        .network()?;
    let run = RunConfig::load(&run_dir.join(CONFIG))?;
    let data = run.dataset()?;
    let (features, labels) = (data.val_features(), data.val_labels());

    let names: Vec<String> = if config.curves.is_empty() {
        std::iter::once("all".to_string())
            .chain(
                NoiseGroup::covering(&model)
                    .into_iter()
                    .filter(|g| !matches!(g, NoiseGroup::Phase | NoiseGroup::Amplitude))
                    .map(|g| g.name().to_string()),
            )
            .collect()
    } else {
        config.curves.clone()
    };
    let mut curves: Vec<(String, NoiseCurve)> = Vec::new();
    for name in &names {
        eprintln!("noise curve {name}");
        let curve = if name == "all" {
            whole_network_sweep(
                &model,
                features,
                labels,
                &config.grid,
                config.realizations,
                config.seed,
            )?
        } else {
            let group: NoiseGroup = name.parse()?;
            enob_sweep(
                &model,
                features,
                labels,
                &[group],
                &config.grid,
                config.realizations,
                config.seed,
            )?
        };
        curves.push((name.clone(), curve));
    }

    let mut raw = Table::new("noise-raw", &["curve", "enob", "realization", "accuracy"]);
    let mut agg = Table::new("noise-curve", &["curve", "enob", "mean", "std"]);
    let mut summaries = Vec::new();
    for (name, curve) in &curves {
        raw.row([
            name.clone(),
            "inf".into(),
            "0".into(),
            curve.noiseless.to_string(),
        ]);
        agg.row([
            name.clone(),
            "inf".into(),
            curve.noiseless.to_string(),
            "0".into(),
        ]);
        for p in &curve.points {
            for (r, a) in p.accuracies.iter().enumerate() {
                raw.row([
                    name.clone(),
                    p.enob.to_string(),
                    r.to_string(),
                    a.to_string(),
                ]);
            }
            agg.row([
                name.clone(),
                p.enob.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
            ]);
        }
        summaries.push(CurveSummary {
            curve: name.clone(),
            noiseless: curve.noiseless,
            near_ideal_enob: curve.near_ideal_enob(config.near_ideal_fraction),
            trend: curve.trend(),
        });
    }
    raw.write(&out_dir.join("noise_raw.csv"))?;
    agg.write(&out_dir.join("noise_curves.csv"))?;
    let mut table = Table::new(
        "noise-summary",
        &["curve", "noiseless", "near_ideal_enob", "trend"],
    );
    for s in &summaries {
        table.row([
            s.curve.clone(),
            s.noiseless.to_string(),
            opt(s.near_ideal_enob),
            s.trend.to_string(),
        ]);
    }
    table.write(&out_dir.join("noise_summary.csv"))?;
    write_json(&out_dir.join("noise_summary.json"), &summaries)?;
    if config.svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = curves
            .iter()
            .map(|(name, c)| {
                (
                    name.clone(),
                    c.points.iter().map(|p| (p.enob, p.mean)).collect(),
                )
            })
            .collect();
        write_text(
            &out_dir.join("noise.svg"),
            &svg::line_chart(
                "Accuracy under parameter noise",
                "ENOB (bits)",
                "validation accuracy",
                &series,
            ),
        )?;
    }
    Ok(summaries)
}
