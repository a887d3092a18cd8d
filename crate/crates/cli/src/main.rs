use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use shellxy_cli::pipelines::{
    run_core_energy, run_defects, run_mesh, run_minimize, run_renormalized, run_scaling,
    run_validate,
};
use shellxy_cli::{ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "shellxy",
    version,
    about = "Discrete XY model on triangulated closed surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured mesh family.
    Mesh(Common),
    /// Check the mesh hypotheses on every level.
    Validate(Common),
    /// Minimize the discrete energy from the configured starts.
    Minimize(Common),
    /// Detect defects in the field stored in the output directory.
    Defects(Common),
    /// Energy against |log eps| over the refinement levels.
    Scaling(Common),
    /// Core energy of a single index-one defect.
    CoreEnergy(Common),
    /// Renormalized energy of the minimizer.
    Renorm(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config `output` entry, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the iterates every this many iterations.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Mesh(c)
    | Command::Validate(c)
    | Command::Minimize(c)
    | Command::Defects(c)
    | Command::Scaling(c)
    | Command::CoreEnergy(c)
    | Command::Renorm(c)) = &cli.command;
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(jobs) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("thread pool")?;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        checkpoint_every: c.checkpoint_every.filter(|&n| n > 0),
    };
    let summary = match cli.command {
        Command::Mesh(_) => format!("{} levels written", run_mesh(&cfg, &out)?.result.len()),
        Command::Validate(_) => {
            let r = run_validate(&cfg, &out)?;
            format!("H1-H3 pass: {}", r.result.h1_to_h3_pass)
        }
        Command::Minimize(_) => {
            let r = run_minimize(&cfg, &out, &opts)?;
            format!(
                "energy {:.12} converged {} total charge {}",
                r.result.energy, r.result.converged, r.result.total_charge
            )
        }
        Command::Defects(_) => {
            let d = run_defects(&cfg, &out)?;
            format!(
                "{} defects, total charge {}",
                d.defects.len(),
                d.total_charge
            )
        }
        Command::Scaling(_) => {
            let r = run_scaling(&cfg, &out, &opts)?;
            match r.result.fit {
                Some(f) => format!("slope {:.6} (expected {:.6})", f.slope, f.expected_slope),
                None => "fewer than two converged levels, no fit".to_owned(),
            }
        }
        Command::CoreEnergy(_) => {
            let r = run_core_energy(&cfg, &out)?;
            format!(
                "differences {:?} decreasing {}",
                r.result.table.differences, r.result.cauchy_decreasing
            )
        }
        Command::Renorm(_) => {
            let r = run_renormalized(&cfg, &out, &opts)?;
            format!(
                "intrinsic {:?} decreasing {}",
                r.result.estimate.intrinsic_partial, r.result.cauchy_decreasing
            )
        }
    };
    println!("{summary}");
    println!("artifacts in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
