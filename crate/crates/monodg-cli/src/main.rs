//! Command-line front end for the polytopal DG monodomain solver.

mod artifacts;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "monodg", version, about = "Polytopal DG solver for the monodomain equation")]
struct Cli {
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation described by a TOML config.
    Run(RunArgs),
    /// Run a convergence, velocity, or stability sweep.
    Study(StudyArgs),
    /// Integrate the space-clamped conductance model for one cell.
    Cell0d(Cell0dArgs),
    /// Generate a Voronoi mesh and write it to a file.
    MeshGen(MeshGenArgs),
    /// Validate a mesh file and print its quality report.
    MeshCheck(MeshCheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Simulation config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $MONODG_OUT/<config-stem> or ./out/<config-stem>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's mesh seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate and print the resolved config without running.
    #[arg(long)]
    dry_run: bool,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Study config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $MONODG_OUT/<config-stem> or ./out/<config-stem>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the config without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct Cell0dArgs {
    /// Bath potassium concentration in mM.
    #[arg(long, default_value_t = 8.0)]
    k_bath: f64,
    /// Final time in ms.
    #[arg(long, default_value_t = 500.0)]
    t_end: f64,
    /// Step size in ms.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Initial membrane potential in mV.
    #[arg(long, default_value_t = -67.0)]
    u0: f64,
    /// Keep every k-th sample in the trace.
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// Output directory (default: $MONODG_OUT/cell0d_k<k_bath>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeshGenArgs {
    /// Bounding box as x0,y0,x1,y1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 1.0, 1.0])]
    domain: Vec<f64>,
    /// Number of Voronoi seed points.
    #[arg(long)]
    elements: usize,
    /// Lloyd relaxation sweeps.
    #[arg(long, default_value_t = 100)]
    lloyd: usize,
    /// Seed for the point process.
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    /// Keep only cells inside the ellipse inscribed in the domain.
    #[arg(long)]
    ellipse: bool,
    /// Destination mesh file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeshCheckArgs {
    /// Mesh file to inspect.
    #[arg(long)]
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // A second init in the same process is fine to ignore; tests reuse it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Run(a) => commands::run(&a.config, a.out, a.seed, a.dry_run, a.dump_config),
        Command::Study(a) => commands::study(&a.config, a.out, a.dry_run),
        Command::Cell0d(a) => {
            commands::cell0d(a.k_bath, a.t_end, a.dt, a.u0, a.record_every, a.out)
        }
        Command::MeshGen(a) => {
            if a.domain.len() != 4 {
                Err(commands::CliError::Validation(vec![format!(
                    "--domain takes x0,y0,x1,y1 (got {} values)",
                    a.domain.len()
                )]))
            } else {
                let domain = [a.domain[0], a.domain[1], a.domain[2], a.domain[3]];
                commands::mesh_gen(domain, a.elements, a.lloyd, a.seed, a.ellipse, &a.out)
            }
        }
        Command::MeshCheck(a) => commands::mesh_check(&a.path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
