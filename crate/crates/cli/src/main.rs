use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use epmesh::sim::SimError;
use epmesh::verify::{verify, Size};
use epmesh::{demo_config, load_config, run_simulation, RunSummary, SimConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "epmesh", version, about = "Hamiltonian particle-mesh solver for EP-Diff and SW-alpha")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    Tiny,
    Small,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write particle CSVs at snapshot steps.
        #[arg(long)]
        dump_particles: bool,
        /// Also write x-velocity snapshots.
        #[arg(long)]
        dump_components: bool,
    },
    /// Run the numerical oracle suite.
    Verify {
        #[arg(long, value_enum, default_value = "tiny")]
        size: SizeArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Colliding-lines EP-Diff experiment on a (128/scale)^2 grid.
    DemoEpdiff {
        #[arg(long, default_value_t = 1)]
        scale: usize,
        #[arg(long, default_value = "demo-out")]
        out: PathBuf,
        #[arg(long)]
        dump_components: bool,
    },
}

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Config(_) => EXIT_CONFIG,
        SimError::Solver(_) => EXIT_SOLVER,
        SimError::Output(_) => EXIT_IO,
    }
}

fn report(summary: &RunSummary) {
    let h0 = summary.initial_energy();
    let drift = summary.energy_drift();
    let rel = if h0 != 0.0 { drift / h0.abs() } else { drift };
    println!("steps            {}", summary.steps);
    println!("H(0)             {h0:.10e}");
    println!("H(end)           {:.10e}", summary.final_energy());
    println!("max |H - H(0)|   {drift:.3e} (relative {rel:.3e})");
    println!("max fp sweeps    {}", summary.recorder.max_fp_iterations);
    println!("max CG per solve {}", summary.recorder.max_cg_per_solve);
    println!("output           {}", summary.out_dir.display());
}

fn simulate(cfg: &SimConfig, out: PathBuf) -> ExitCode {
    match run_simulation(cfg, &out) {
        Ok(summary) => {
            report(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            dump_particles,
            dump_components,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            cfg.output.dump_particles |= dump_particles;
            cfg.output.dump_components |= dump_components;
            let out = out.unwrap_or_else(|| cfg.output.dir.clone());
            simulate(&cfg, out)
        }
        Command::Verify { size, seed } => {
            let size = match size {
                SizeArg::Tiny => Size::Tiny,
                SizeArg::Small => Size::Small,
            };
            match verify(size, seed) {
                Ok(checks) => {
                    for c in &checks {
                        println!("{c}");
                    }
                    if checks.iter().all(|c| c.informational || c.passed()) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_VERIFY)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_SOLVER)
                }
            }
        }
        Command::DemoEpdiff {
            scale,
            out,
            dump_components,
        } => {
            let mut cfg = match demo_config(scale, out.clone()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            cfg.output.dump_components = dump_components;
            simulate(&cfg, out)
        }
    }
}
