//! The `molkern` binary: molecular property regression with marginalized
//! graph kernels.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molkern_cli::commands::{self, active::ActiveArgs, demo_lj::DemoArgs};
use molkern_cli::config::RunConfig;
use molkern_cli::CliError;

#[derive(Parser)]
#[command(
    name = "molkern",
    version,
    about = "Molecular atomization-energy regression with marginalized graph kernels",
    after_help = "Dataset ids: a concatenated xyz file numbers its frames 0, 1, ...; a \
                  directory of .xyz files uses the file stems. Wherever a command takes an \
                  id list, pass either a newline-delimited file or random:N:seed."
)]
struct Cli {
    /// Config file of `section.key = value` lines
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set hyperparams.s=100
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Where output files go (default: current directory)
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// RNG seed for every seeded choice this run makes
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for Gram computations (0 = machine default)
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Permit train/test (or pool/eval) id lists to share molecules
    #[arg(long, global = true)]
    allow_overlap: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the kernel between two molecules
    Kernel {
        id_a: String,
        id_b: String,
        /// Also write similarity.csv, the per-atom-pair decomposition
        #[arg(long)]
        similarity_matrix: bool,
    },
    /// Fit a GP on train ids and score it on test ids
    FitPredict {
        /// Train ids: file or random:N:seed
        #[arg(long, value_name = "SPEC")]
        train: String,
        /// Test ids: file or random:N:seed
        #[arg(long, value_name = "SPEC")]
        test: String,
    },
    /// Grow a training set by acquisition from a candidate pool
    Active {
        /// Pool ids the loop may acquire from
        #[arg(long, value_name = "SPEC")]
        pool: String,
        /// Held-out ids for metrics; defaults to the whole pool
        #[arg(long, value_name = "SPEC")]
        eval: Option<String>,
        /// Size of the random initial training set
        #[arg(long, value_name = "N")]
        seed_count: usize,
        /// random | uncertainty | true-error
        #[arg(long)]
        strategy: String,
        /// How many molecules to acquire
        #[arg(long, value_name = "N")]
        budget: usize,
    },
    /// Sweep kernel hyperparameters over a grid (resumable)
    Scan {
        #[arg(long, value_name = "SPEC")]
        train: String,
        #[arg(long, value_name = "SPEC")]
        test: String,
        /// defaults | uniform:N | uniform:a,b,c,d,e | axis=v1,v2;...
        #[arg(long, value_name = "GRID")]
        grid: String,
        /// Also write per-axis conditional statistics
        #[arg(long)]
        stats: bool,
    },
    /// Learn the 1-D Lennard-Jones potential (no dataset needed)
    DemoLj {
        #[arg(long, value_name = "N")]
        budget: Option<usize>,
        #[arg(long, value_name = "N")]
        pool_size: Option<usize>,
        #[arg(long, value_name = "N")]
        seed_count: Option<usize>,
        /// random | uncertainty | true-error
        #[arg(long)]
        strategy: Option<String>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for spec in &cli.overrides {
        config.apply_override(spec)?;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.rng_seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = build_config(cli)?;
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| CliError::Pool(e.to_string()))?;
    }
    std::fs::create_dir_all(&config.out_dir).map_err(|source| CliError::Io {
        path: config.out_dir.clone(),
        source,
    })?;

    match &cli.command {
        Command::Kernel {
            id_a,
            id_b,
            similarity_matrix,
        } => commands::kernel::run(&config, id_a, id_b, *similarity_matrix),
        Command::FitPredict { train, test } => {
            commands::fit_predict::run(&config, train, test, cli.allow_overlap)
        }
        Command::Active {
            pool,
            eval,
            seed_count,
            strategy,
            budget,
        } => commands::active::run(
            &config,
            &ActiveArgs {
                pool_spec: pool,
                eval_spec: eval.as_deref(),
                seed_count: *seed_count,
                strategy,
                budget: *budget,
                allow_overlap: cli.allow_overlap,
            },
        ),
        Command::Scan {
            train,
            test,
            grid,
            stats,
        } => commands::scan::run(&config, train, test, grid, *stats),
        Command::DemoLj {
            budget,
            pool_size,
            seed_count,
            strategy,
        } => commands::demo_lj::run(
            &config,
            &DemoArgs {
                budget: *budget,
                pool_size: *pool_size,
                seed_count: *seed_count,
                strategy: strategy.as_deref(),
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
