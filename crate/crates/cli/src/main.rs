use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use selfnorm::mdp::BandMethod;
use selfnorm_cli::{run_file, Overrides, Subcommand, EXIT_OK, OUTPUT_DIR_ENV};

/// Experiments on self-normalized degenerate U-statistics.
#[derive(Parser)]
#[command(name = "selfnorm", version, about)]
enum Cli {
    /// Moderate-deviation tail curve P(W_n >= x^2) over a deviation grid.
    Rate(Common),
    /// W_n / log log n along geometric checkpoints, one path per seed.
    Lil(Common),
    /// Truncation levels b and z for each kernel component.
    Zcalc(Common),
    /// Exponential-inequality audits from [[audit.*]] blocks.
    Audit(Common),
    /// Degeneracy, cross-orthogonality and dominance checks for a kernel.
    KernelCheck(Common),
    /// Whatever subcommand the config names.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config; defaults to $SELFNORM_OUTPUT_DIR, then ./selfnorm-out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long)]
    x_n: Option<f64>,
    /// Comma-separated deviations.
    #[arg(long, value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    /// Comma-separated path seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// `normal` or `exact`.
    #[arg(long, value_parser = parse_band)]
    band: Option<BandMethod>,
    #[arg(long)]
    budget: Option<usize>,
}

fn parse_band(s: &str) -> Result<BandMethod, String> {
    match s {
        "normal" => Ok(BandMethod::Normal),
        "exact" => Ok(BandMethod::Exact),
        other => Err(format!("unknown band `{other}` (expected normal or exact)")),
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            output_dir: self.output_dir.clone(),
            n: self.n,
            n_max: self.n_max,
            x_n: self.x_n,
            x_grid: self.x_grid.clone(),
            theta: self.theta,
            reps: self.reps,
            seeds: self.seeds.clone(),
            band: self.band,
            budget: self.budget,
        }
    }
}

fn main() -> ExitCode {
    let (subcommand, common) = match Cli::parse() {
        Cli::Rate(c) => (Some(Subcommand::Rate), c),
        Cli::Lil(c) => (Some(Subcommand::Lil), c),
        Cli::Zcalc(c) => (Some(Subcommand::Zcalc), c),
        Cli::Audit(c) => (Some(Subcommand::Audit), c),
        Cli::KernelCheck(c) => (Some(Subcommand::KernelCheck), c),
        Cli::Run(c) => (None, c),
    };
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match run_file(subcommand, &common.config, &common.overrides(), env_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
