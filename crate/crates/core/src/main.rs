use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toral_lab::cli::{run, Command, RunConfig, RunError, THREADS_ENV};

#[derive(Parser)]
#[command(name = "toral-lab", version, about = "Experiments on integer toral automorphisms and their perturbations")]
struct Args {
    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory for report.json, config.json and traces.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify an integer matrix given as a JSON array of rows.
    Classify {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Solve the conjugacy equation for a map file ({"L", "R"} or {"L", "H0"}).
    Solve {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = "usc")]
        components: String,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        #[arg(long)]
        strict_grid: bool,
    },
    /// Decay fits and Sobolev growth checks for a GridField binary.
    AnalyzeRegularity {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        noise_floor: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_order: u32,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        k_bound: Option<f64>,
    },
    /// Lattice scan of min Σ|n·v_i|·‖n‖^exponent over an invariant subspace.
    DiophScan {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "unstable")]
        subspace: String,
        #[arg(long)]
        radius: u64,
        #[arg(long)]
        exponent: Option<f64>,
        /// Write the record-setting lattice points to scan.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Correlation decay fit for Hölder test functions.
    Mixing {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long = "nmax", default_value_t = 10)]
        n_max: usize,
        #[arg(long)]
        radius: Option<u32>,
    },
    /// Derivative growth table for a leaf map, or the two-rate model with --lambda.
    JetsGrowth {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long = "mmax")]
        m_max: usize,
        #[arg(long = "nmax")]
        n_max: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = toral_lab::jets::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Summarize the reports in a directory and its immediate subdirectories.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Re-execute a run from a config.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn build(args: Args) -> Result<RunConfig, RunError> {
    let command = match args.command {
        Cmd::Classify { matrix } => Command::Classify { matrix },
        Cmd::Solve { map, grid, tol, components, max_iterations, strict_grid } => {
            Command::Solve { map, grid, tol, components, max_iterations, strict_grid }
        }
        Cmd::AnalyzeRegularity { field, noise_floor, max_order, beta, k_bound } => {
            Command::AnalyzeRegularity { field, noise_floor, max_order, beta, k_bound }
        }
        Cmd::DiophScan { matrix, subspace, radius, exponent, trace } => {
            Command::DiophScan { matrix, subspace, radius, exponent, trace }
        }
        Cmd::Mixing { matrix, alpha, trials, n_max, radius } => Command::Mixing { matrix, alpha, trials, n_max, radius },
        Cmd::JetsGrowth { sigma, lambda, eps, m_max, n_max, delta, samples } => {
            Command::JetsGrowth { sigma, lambda, eps, m_max, n_max, delta, samples }
        }
        Cmd::Report { dir } => Command::Report { dir },
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| RunError::config(format!("{}: {e}", config.display())))?;
            let mut c = RunConfig::from_json(&text)?;
            // Flags given on the command line override the file.
            if args.threads.is_some() {
                c.threads = args.threads;
            }
            if args.out.is_some() {
                c.out = args.out;
            }
            return Ok(c);
        }
    };
    Ok(RunConfig { command, out: args.out, threads: args.threads, seed: args.seed })
}

fn main() -> ExitCode {
    let result = build(Args::parse()).and_then(|c| run(&c));
    match result {
        Ok(report) => {
            // A closed stdout (e.g. piped into head) is not a failure of the run.
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&report).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
