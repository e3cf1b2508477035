use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nfbeam::net::{gradient_check, save_checkpoint, write_history_csv, Beamformer, NetworkConfig};
use nfbeam::scenario::{load_dataset, save_dataset, DatasetRecipe, TrainingSample};
use nfbeam_bench::config::{resolve_output, ExperimentConfig};
use nfbeam_bench::output::format_overhead;
use nfbeam_bench::sweep::{base_geometry, train_for};
use nfbeam_bench::{emit_outputs, overhead_report, run_sweep, BenchError, BenchResult, ModelStore};

#[derive(Parser)]
#[command(name = "bench", version, about = "Near-field beam-training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write sweep.csv, manifest.json and a plot.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the learned beamformer for the base geometry.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference check of every gradient of the toy network.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Generate or inspect dataset files.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
}

#[derive(Subcommand)]
enum DatasetAction {
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<output>/dataset.bin`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Inspect {
        path: PathBuf,
    },
}

fn run(cfg_path: &PathBuf) -> BenchResult<()> {
    let cfg = ExperimentConfig::load(cfg_path)?;
    let dir = resolve_output(&cfg.output);
    let mut store = ModelStore::default();
    let result = run_sweep(&cfg, &mut store)?;
    let out = emit_outputs(&result, &cfg, &dir)?;
    println!("wrote {}, {}, {}", out.csv.display(), out.manifest.display(), out.plot.display());
    print!("{}", format_overhead(&overhead_report(&result)));
    Ok(())
}

fn train(cfg_path: &PathBuf) -> BenchResult<()> {
    let cfg = ExperimentConfig::load(cfg_path)?;
    let dir = resolve_output(&cfg.output);
    fs::create_dir_all(&dir)?;
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| dir.join("model.ckpt"));
    let failure = dir.join("diverged.ckpt");
    let (trainer, cost) = train_for(&cfg, base_geometry(&cfg)?, cfg.fspl, cfg.epochs, Some(&failure))?;
    save_checkpoint(&trainer, &ckpt)?;
    let mut csv = Vec::new();
    write_history_csv(&trainer.history, &mut csv)?;
    fs::write(dir.join("history.csv"), csv)?;
    let last = trainer.history.last().expect("at least one epoch");
    println!(
        "trained N = {} for {} epochs ({} batches each); final train loss {:.4}, validation loss {}",
        cost.n_antennas,
        cost.epochs,
        cost.batches_per_epoch,
        last.train_loss,
        last.val_loss.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
    );
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

fn gradcheck(step: f64, tol: f64) -> BenchResult<()> {
    let model = Beamformer::new(NetworkConfig::toy(1))?;
    let recipe = DatasetRecipe::new(nfbeam::array::ArrayGeometry::new(8, 50e9)?, 3, 2, 1);
    let split = recipe.build()?;
    let batch: Vec<&TrainingSample> = split.train.iter().chain(&split.test).collect();
    let report = gradient_check(&model, &batch, step)?;
    println!(
        "checked {} parameters, max relative error {:.3e} (tolerance {:.0e})",
        report.n_checked, report.max_rel_err, tol
    );
    if !report.passed(tol) {
        return Err(nfbeam::Error::Numeric(format!(
            "gradient mismatch at array {} element {}",
            report.worst.0, report.worst.1
        ))
        .into());
    }
    Ok(())
}

fn dataset(action: &DatasetAction) -> BenchResult<()> {
    match action {
        DatasetAction::Gen { config, out } => {
            let cfg = ExperimentConfig::load(config)?;
            let mut recipe = DatasetRecipe::new(base_geometry(&cfg)?, cfg.users, cfg.frames, cfg.seed);
            recipe.fspl_mode = cfg.fspl;
            recipe.reference_range_m = cfg.reference_range_m;
            let split = recipe.build()?;
            let path = match out {
                Some(p) => p.clone(),
                None => {
                    let dir = resolve_output(&cfg.output);
                    fs::create_dir_all(&dir)?;
                    dir.join("dataset.bin")
                }
            };
            save_dataset(&split, &path)?;
            println!("{} train / {} test samples -> {}", split.train.len(), split.test.len(), path.display());
        }
        DatasetAction::Inspect { path } => {
            let split = load_dataset(path)?;
            let m = &split.meta;
            println!("antennas      {}", m.geometry.n_antennas());
            println!("carrier       {} GHz", m.geometry.carrier_hz() / 1e9);
            println!("spacing       {} m", m.geometry.spacing_m());
            println!("path loss     {}", m.fspl_mode.as_str());
            println!("users/frames  {} / {}", m.users, m.frames);
            println!("seed          {}", m.generation_seed);
            println!("split         {} train / {} test (ratio {})", split.train.len(), split.test.len(), split.ratio);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), BenchError> = match &cli.command {
        Command::Run { config } => run(config),
        Command::Train { config } => train(config),
        Command::Gradcheck { step, tol } => gradcheck(*step, *tol),
        Command::Dataset { action } => dataset(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
