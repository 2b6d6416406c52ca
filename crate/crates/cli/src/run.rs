//! One training run and its directory:
//!
//! ```text
//! runs/<kind>-<hash12>-s<seed>/
//!   config.toml      run config with a_max pinned
//!   history.csv      one row per epoch
//!   checkpoint.json  final parameters and optimizer state
//!   best.json        parameters after the best epoch
//!   record.json      written last; its presence marks the run complete
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use hpnn_core::checkpoint::{AnyNetwork, Checkpoint};
use hpnn_core::classical::build_classical_twin;
use hpnn_core::datagen::Dataset;
use hpnn_core::hybrid::HybridNetwork;
use hpnn_core::model::{Model, NetworkKind};
use hpnn_core::report::{RunRecord, RunStatus};
use hpnn_core::rng::{stream_rng, Stream};
use hpnn_core::training::{train_with, EpochRecord};

use crate::config::{ResolvedNetwork, RunConfig};
use crate::output::{read_json, write_json, write_text, Table};

pub const RECORD: &str = "record.json";
pub const HISTORY: &str = "history.csv";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const BEST: &str = "best.json";
pub const CONFIG: &str = "config.toml";

pub fn run_id(kind: NetworkKind, hash: &str, seed: u64) -> String {
    format!("{kind}-{}-s{seed}", &hash[..12])
}

pub fn build_network(net: &ResolvedNetwork, seed: u64) -> Result<AnyNetwork> {
    let mut rng = stream_rng(seed, Stream::Init);
    Ok(match net.kind {
        NetworkKind::Hybrid => AnyNetwork::Hybrid(HybridNetwork::new(
            net.shape,
            net.a_max.expect("hybrid a_max"),
            &mut rng,
        )?),
        NetworkKind::Classical => {
            AnyNetwork::Classical(build_classical_twin(&net.shape, &mut rng)?)
        }
    })
}

pub struct Prepared {
    pub config: RunConfig,
    pub network: ResolvedNetwork,
    pub hash: String,
    pub id: String,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let network = config.resolve()?;
    let config = config.pinned(&network);
    let hash = config.hash(&network)?;
    let id = run_id(network.kind, &hash, config.train.seed);
    Ok(Prepared {
        config,
        network,
        hash,
        id,
    })
}

/// A completed record with the same config hash, if the run already exists.
pub fn existing(runs_dir: &Path, prepared: &Prepared) -> Option<RunRecord> {
    let record: RunRecord = read_json(&runs_dir.join(&prepared.id).join(RECORD)).ok()?;
    (record.config_hash == prepared.hash).then_some(record)
}

/// Train and write the run directory. Numerical failures end the run with a
/// failed record carrying the best accuracy reached so far; only I/O and
/// configuration problems are returned as errors.
pub fn execute(prepared: &Prepared, data: &Dataset, runs_dir: &Path) -> Result<RunRecord> {
    let dir = runs_dir.join(&prepared.id);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join(CONFIG), &toml::to_string(&prepared.config)?)?;
    let start = Instant::now();
    let model = build_network(&prepared.network, prepared.config.train.seed)?;
    let param_count = model.num_params();
    let mut history: Vec<EpochRecord> = Vec::new();
    let outcome = train_with(model, data.split(), &prepared.config.train, |e| {
        history.push(*e)
    });
    let wall_time_s = start.elapsed().as_secs_f64();
    write_history(&dir.join(HISTORY), &history)?;

    let (status, best_val_accuracy, best_epoch) = match outcome {
        Ok(out) => {
            Checkpoint::new(&out.final_model, history.len(), Some(out.optimizer))
                .save(&dir.join(CHECKPOINT))?;
            Checkpoint::new(&out.best_model, out.best_epoch, None).save(&dir.join(BEST))?;
            (RunStatus::Completed, out.best_val_accuracy, out.best_epoch)
        }
        Err(e) => {
            let best = history.iter().fold(None::<&EpochRecord>, |b, r| match b {
                Some(b) if b.val_accuracy >= r.val_accuracy => Some(b),
                _ => Some(r),
            });
            (
                RunStatus::Failed(e.to_string()),
                best.map_or(0.0, |r| r.val_accuracy),
                best.map_or(0, |r| r.epoch),
            )
        }
    };
    let net = &prepared.network;
    let record = RunRecord {
        run_id: prepared.id.clone(),
        kind: net.kind,
        shape: net.shape,
        widths: net.widths.clone(),
        param_count,
        seed: prepared.config.train.seed,
        a_max: net.a_max,
        status,
        best_val_accuracy,
        best_epoch,
        final_val_accuracy: history.last().map_or(0.0, |r| r.val_accuracy),
        history: HISTORY.into(),
        wall_time_s,
        config_hash: prepared.hash.clone(),
    };
    write_json(&dir.join(RECORD), &record)?;
    Ok(record)
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut table = Table::new(
        "history",
        &[
            "epoch",
            "train_loss",
            "train_accuracy",
            "val_accuracy",
            "updates",
        ],
    );
    for r in history {
        table.row([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            r.val_accuracy.to_string(),
            r.updates.to_string(),
        ]);
    }
    table.write(path)
}

/// A run directory given either as a path or as a run id under `runs_dir`.
pub fn locate(run: &str, runs_dir: &Path) -> PathBuf {
    let direct = PathBuf::from(run);
    if direct.join(CONFIG).exists() {
        direct
    } else {
        runs_dir.join(run)
    }
}
