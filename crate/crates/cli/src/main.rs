//! `momagg` - reconstruct an image from one compressed measurement while the
//! forward-model parameter is only known up to a candidate set, and compare
//! aggregation strategies against the known-parameter upper bound.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 training divergence.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momagg::error::Error;
use momagg::harness::{self, ExperimentConfig, Seeds, Task};

#[derive(Parser)]
#[command(name = "momagg", version, about = "Image reconstruction under forward-model uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian compressive sensing: y = Phi x with Phi uncertain.
    Cs(CsArgs),
    /// In-line holography: intensity at the sensor with the distance uncertain.
    Holo(HoloArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Data source: mnist, phantom-blobs, phantom-rings, phantom-text, image.
    #[arg(long, default_value = "phantom-blobs")]
    dataset: String,
    /// IDX image file for --dataset mnist.
    #[arg(long)]
    idx_path: Option<String>,
    /// Grayscale PNG/PGM for --dataset image.
    #[arg(long)]
    image: Option<String>,
    /// Sample index within the dataset.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    /// Number of candidate forward-model parameters (the precise one included).
    #[arg(long, default_value_t = 10)]
    n_candidates: usize,
    /// Strategy to run; repeatable. Defaults to all five.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Training iterations (default: 2000 for cs, 5000 for holo).
    #[arg(long)]
    iterations: Option<usize>,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed_data: u64,
    #[arg(long, default_value_t = 2)]
    seed_candidates: u64,
    #[arg(long, default_value_t = 3)]
    seed_generator: u64,
    /// Output directory for summary.json, convergence.csv, and PNGs.
    #[arg(long, default_value = "runs/out")]
    out: String,
    /// Hidden channel count of the decoder.
    #[arg(long)]
    base_channels: Option<usize>,
    /// Upsampling blocks of the decoder.
    #[arg(long)]
    num_blocks: Option<usize>,
    /// JSON config file; its values override the flags.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct CsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Measurement count m (must stay below the pixel count n).
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Phantom/image side length for the signal.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct HoloArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Wavelength in micrometers.
    #[arg(long, default_value_t = 0.520)]
    lambda_um: f64,
    /// Precise propagation distance in micrometers.
    #[arg(long, default_value_t = 5000.0)]
    z_um: f64,
    /// Sensor pixel pitch in micrometers.
    #[arg(long, default_value_t = 2.0)]
    pitch_um: f64,
    /// Grid side length (power of two).
    #[arg(long)]
    grid: Option<usize>,
}

fn build_config(task: Task, common: &CommonArgs, cs: Option<&CsArgs>, holo: Option<&HoloArgs>) -> ExperimentConfig {
    let strategies = if common.strategies.is_empty() {
        vec!["ma".into(), "uniform".into(), "alternating".into(), "oracle".into(), "random".into()]
    } else {
        common.strategies.clone()
    };
    ExperimentConfig {
        task,
        dataset: common.dataset.clone(),
        idx_path: common.idx_path.clone(),
        image_path: common.image.clone(),
        sample: common.sample,
        m: cs.map(|a| a.m),
        lambda_um: holo.map(|a| a.lambda_um),
        z_um: holo.map(|a| a.z_um),
        pitch_um: holo.map(|a| a.pitch_um),
        grid: holo.and_then(|a| a.grid),
        size: cs.and_then(|a| a.size),
        n_candidates: common.n_candidates,
        strategies,
        iterations: common.iterations,
        lr: common.lr,
        seeds: Seeds {
            data: common.seed_data,
            candidates: common.seed_candidates,
            generator: common.seed_generator,
        },
        out: common.out.clone(),
        base_channels: common.base_channels,
        num_blocks: common.num_blocks,
    }
}

fn execute(common: &CommonArgs, config: ExperimentConfig) -> Result<(), Error> {
    let config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => config.validated()?,
    };
    let cmp = harness::run_comparison(&config)?;
    harness::write_outputs(&cmp, &config.out)?;
    print!("{}", harness::format_table(&cmp));
    println!("outputs written to {}", config.out);
    for row in &cmp.rows {
        if row.failed > 0 {
            return Err(Error::Divergence {
                iteration: 0,
                detail: format!("{} run(s) of strategy {} diverged", row.failed, row.strategy),
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cs(args) => {
            let cfg = build_config(Task::Cs, &args.common, Some(args), None);
            execute(&args.common, cfg)
        }
        Command::Holo(args) => {
            let cfg = build_config(Task::Holography, &args.common, None, Some(args));
            execute(&args.common, cfg)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Divergence { .. }) => {
            eprintln!("error: {}", e);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
