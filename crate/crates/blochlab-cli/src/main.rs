use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blochlab_cli::{run_command, RunConfig, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "blochlab",
    version,
    about = "Spectral characteristics of Bloch functions and a certified variance bound"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the interval certification of the unit-ball variance bound.
    Certify {
        /// Radius as an exact rational, e.g. 2/5
        #[arg(long, default_value = "2/5")]
        r: String,
        /// Working precision in bits (53 = native; larger uses the widened backend).
        /// BLOCHLAB_PRECISION overrides the default.
        #[arg(long)]
        precision: Option<u32>,
        /// Initial cell count for the extremal-family scans
        #[arg(long)]
        grid: Option<u32>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the asymptotic variance of a function.
    Variance {
        #[arg(long)]
        function: String,
        /// circle | strip
        #[arg(long, default_value = "circle")]
        method: String,
        /// Deepest circle radius (circle method)
        #[arg(long)]
        r: Option<String>,
        /// Strip depth (strip method)
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        /// .json for the full record, .csv for the per-step table
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integral means value at tau along a radius schedule.
    Spectrum {
        #[arg(long)]
        function: String,
        /// tau as "re" or "re,im"
        #[arg(long, default_value = "1")]
        tau: String,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the n-adic interval martingale of a function (disk functions
    /// are first carried to the half-plane by exponential conjugation).
    Martingale {
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        /// Common evaluation height h0 (default 1e-6 * n^-depth)
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transform-layer diagnostics for a function and grid base.
    Transform {
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bound for the hyperbolic ball-average supremum alpha(R).
    Alpha {
        /// Hyperbolic ball radius (default eta(0.4))
        #[arg(long = "R")]
        ball_radius: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn to_config(cmd: Command) -> RunConfig {
    match cmd {
        Command::Certify { r, precision, grid, threads, out } => RunConfig {
            command: "certify".into(),
            r: Some(r),
            precision,
            grid,
            threads,
            out,
            ..RunConfig::default()
        },
        Command::Variance { function, method, r, h, threads, out } => RunConfig {
            command: "variance".into(),
            function: Some(function),
            method: Some(method),
            r,
            h,
            threads,
            out,
            ..RunConfig::default()
        },
        Command::Spectrum { function, tau, r, threads, out } => RunConfig {
            command: "spectrum".into(),
            function: Some(function),
            tau: Some(tau),
            r,
            threads,
            out,
            ..RunConfig::default()
        },
        Command::Martingale { function, n, depth, h, threads, out } => RunConfig {
            command: "martingale".into(),
            function: Some(function),
            n: Some(n),
            depth: Some(depth),
            h,
            threads,
            out,
            ..RunConfig::default()
        },
        Command::Transform { function, n, tol, threads, out } => RunConfig {
            command: "transform".into(),
            function: Some(function),
            n: Some(n),
            tol,
            threads,
            out,
            ..RunConfig::default()
        },
        Command::Alpha { ball_radius, budget, seed, threads, out } => RunConfig {
            command: "alpha".into(),
            ball_radius,
            budget,
            seed: Some(seed),
            threads,
            out,
            ..RunConfig::default()
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&to_config(cli.command)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
