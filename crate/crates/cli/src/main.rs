mod config;
mod noise_cmd;
mod output;
mod report_cmd;
mod run;
mod svg;
mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use hpnn_core::cvqnn::{calibrate_amax, NetworkShape};
use hpnn_core::datagen::{fit_linear_baseline, generate};
use hpnn_core::hybrid::HybridNetwork;
use hpnn_core::rng::{stream_rng, Stream};
use hpnn_core::training::{fraction_within, gradcheck, Batch};

use config::{ExperimentConfig, DEFAULT_NORM_FLOOR};
use output::{write_json, write_text, Table};

#[derive(Parser)]
#[command(
    name = "hpnn",
    version,
    about = "Hybrid quantum-classical photonic neural network experiments"
)]
struct Cli {
    /// TOML experiment file; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, env = "HPNN_OUT", default_value = "hpnn-out")]
    out: PathBuf,
    /// Overrides the seed the command uses (see each command).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel runs in a sweep; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the Fock cutoff.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset from `[data]` (seed: data seed) into <out>/data.
    GenData,
    /// Train one network from `[network]` and `[train]` (seed: training seed).
    Train,
    /// Train every point of `[grid]` (cutoff: restrict to one cutoff) and summarize.
    Sweep,
    /// ENOB sweeps on a trained run (seed: noise seed).
    Noise {
        /// Run directory, or a run id under <out>/runs.
        run: String,
    },
    /// Tables, densities and plots from the records under a sweep directory.
    Report {
        /// Defaults to the output root.
        dir: Option<PathBuf>,
        /// Well-trained threshold; defaults to the one stored by `sweep`.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Tabulate the amplitude bound per cutoff into <out>/amax.txt.
    CalibrateAmax {
        #[arg(long, default_value_t = DEFAULT_NORM_FLOOR)]
        norm_floor: f64,
        /// Smallest and largest cutoff when --cutoff is not given.
        #[arg(long, default_value_t = 3)]
        from: usize,
        #[arg(long, default_value_t = 10)]
        to: usize,
    },
    /// Fit the linear baseline on the dataset (seed: data seed).
    Baseline,
    /// Compare the hybrid gradient with central differences (seed: init seed).
    Gradcheck {
        #[arg(long, default_value_t = 2)]
        modes: usize,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = ExperimentConfig::load(cli.config.as_deref())?;
    let out = cli.out.clone();
    match cli.command {
        Command::GenData => {
            if let Some(seed) = cli.seed {
                config.data.seed = seed;
            }
            gen_data(&config, &out)
        }
        Command::Train => {
            if let Some(seed) = cli.seed {
                config.train.seed = seed;
            }
            if let Some(cutoff) = cli.cutoff {
                config.network.cutoff = cutoff;
            }
            train(&config, &out)
        }
        Command::Sweep => {
            if let Some(cutoff) = cli.cutoff {
                config.grid.cutoffs = vec![cutoff];
            }
            let jobs = cli
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = sweep::sweep(&config, &out, jobs)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            eprintln!("{} runs reused", outcome.skipped);
            for e in &outcome.errors {
                eprintln!("error: {e}");
            }
            Ok(())
        }
        Command::Noise { run } => {
            if let Some(seed) = cli.seed {
                config.noise.seed = seed;
            }
            let dir = run::locate(&run, &out.join("runs"));
            let summaries = noise_cmd::noise(&dir, &config.noise, &dir.join("noise"))?;
            println!("{}", serde_json::to_string_pretty(&summaries)?);
            Ok(())
        }
        Command::Report { dir, threshold } => {
            let dir = dir.unwrap_or(out);
            let summary = report_cmd::report(&dir, threshold, &dir.join("report"))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::CalibrateAmax {
            norm_floor,
            from,
            to,
        } => {
            let cutoffs: Vec<usize> = match cli.cutoff {
                Some(c) => vec![c],
                None => (from..=to).collect(),
            };
            let text = amax_table(&cutoffs, norm_floor)?;
            write_text(&out.join("amax.txt"), &text)?;
            print!("{text}");
            Ok(())
        }
        Command::Baseline => {
            if let Some(seed) = cli.seed {
                config.data.seed = seed;
            }
            baseline(&config, &out)
        }
        Command::Gradcheck {
            modes,
            layers,
            batch,
            step,
            tolerance,
        } => {
            let check = GradcheckArgs {
                modes,
                layers,
                cutoff: cli.cutoff.unwrap_or(7),
                batch,
                step,
                tolerance,
                seed: cli.seed.unwrap_or(0),
            };
            run_gradcheck(&config, &check, &out)
        }
    }
}

fn gen_data(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = generate(&config.data)?;
    let dir = out.join("data");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join("dataset.csv");
    let file =
        std::fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
    data.write_csv(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", csv.display()))?;
    write_json(&dir.join("dataset.json"), &config.data)?;
    println!("{}", csv.display());
    Ok(())
}

fn train(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let prepared = run::prepare(&config.run_config())?;
    let data = prepared.config.dataset()?;
    let record = run::execute(&prepared, &data, &out.join("runs"))?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

/// Text table `cutoff a_max worst_norm` under a versioned comment line.
pub fn amax_table(cutoffs: &[usize], norm_floor: f64) -> Result<String> {
    let mut text = format!("# hpnn amax v1 norm_floor={norm_floor}\ncutoff a_max worst_norm\n");
    for &cutoff in cutoffs {
        let cal = calibrate_amax(cutoff, norm_floor)?;
        text.push_str(&format!(
            "{} {:.2} {:.6}\n",
            cal.cutoff, cal.a_max, cal.worst_norm
        ));
    }
    Ok(text)
}

#[derive(Serialize)]
struct BaselineReport {
    seed: u64,
    train_accuracy: f64,
    val_accuracy: f64,
    converged: bool,
    passes: usize,
}

fn baseline(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let run = config.run_config();
    let data = run.dataset()?;
    let fit = fit_linear_baseline(&data, config.data.seed)?;
    let report = BaselineReport {
        seed: config.data.seed,
        train_accuracy: fit.train_accuracy,
        val_accuracy: fit.val_accuracy,
        converged: fit.converged,
        passes: fit.passes,
    };
    write_json(&out.join("baseline.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

struct GradcheckArgs {
    modes: usize,
    layers: usize,
    cutoff: usize,
    batch: usize,
    step: f64,
    tolerance: f64,
    seed: u64,
}

/// Random hybrid network on the first training samples; fails when fewer
/// than 99% of coordinates agree.
fn run_gradcheck(config: &ExperimentConfig, args: &GradcheckArgs, out: &Path) -> Result<()> {
    let data = config.run_config().dataset()?;
    let shape = NetworkShape::new(
        data.num_features(),
        args.modes,
        args.layers,
        config.data.classes,
        args.cutoff,
    )?;
    let a_max = calibrate_amax(args.cutoff, DEFAULT_NORM_FLOOR)?.a_max;
    let model = HybridNetwork::new(shape, a_max, &mut stream_rng(args.seed, Stream::Init))?;
    let n = args.batch.min(data.train_features().len());
    let features: Vec<&[f64]> = data.train_features()[..n]
        .iter()
        .map(Vec::as_slice)
        .collect();
    let batch = Batch {
        features: &features,
        labels: &data.train_labels()[..n],
    };
    let reports = gradcheck(&model, batch, config.train.l1_amplitude_weight, args.step)?;
    let mut table = Table::new(
        "gradcheck",
        &["index", "analytic", "finite_difference", "relative_error"],
    );
    for r in &reports {
        table.row([
            r.index.to_string(),
            r.analytic.to_string(),
            r.finite_difference.to_string(),
            r.relative_error.to_string(),
        ]);
    }
    table.write(&out.join("gradcheck.csv"))?;
    let fraction = fraction_within(&reports, args.tolerance);
    let worst = reports.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    println!(
        "{} parameters, {:.2}% within {}, worst relative error {worst:.3e}",
        reports.len(),
        100.0 * fraction,
        args.tolerance
    );
    if fraction < 0.99 {
        bail!("gradient check failed");
    }
    Ok(())
}
