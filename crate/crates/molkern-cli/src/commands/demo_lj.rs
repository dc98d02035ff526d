//! `molkern demo-lj`: the self-contained 1-D active-learning demo.
//!
//! Learns the Lennard-Jones potential from its analytic truth with a
//! squared-exponential kernel on the interatomic distance — the graph
//! kernel is bypassed by design, this demo is about watching acquisition
//! drive the worst-case error down.

use molkern::{lj, run_lj_demo, LjDemoParams};

use crate::commands::{stage, write_file};
use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::CliError;

pub struct DemoArgs<'a> {
    pub budget: Option<usize>,
    pub pool_size: Option<usize>,
    pub seed_count: Option<usize>,
    pub strategy: Option<&'a str>,
}

pub fn run(config: &RunConfig, args: &DemoArgs) -> Result<(), CliError> {
    let mut params = LjDemoParams {
        rng_seed: config.rng_seed,
        rel_jitter: config.rel_jitter,
        ..LjDemoParams::default()
    };
    if let Some(budget) = args.budget {
        params.budget = budget;
    }
    if let Some(pool_size) = args.pool_size {
        params.pool_size = pool_size;
    }
    if let Some(seed_count) = args.seed_count {
        params.seed_count = seed_count;
    }
    if let Some(name) = args.strategy {
        params.kind = super::active::parse_strategy(name)?;
    }

    let result = stage("running demo", run_lj_demo(&params))?;
    write_file(&config.out_dir.join("lj_convergence.csv"), &result.to_csv())?;

    let final_error = result.final_max_error();
    println!(
        "{} samples acquired, max |error| = {:.6} ({:.3}% of well depth)",
        params.budget,
        final_error,
        100.0 * final_error / lj::LJ_WELL_DEPTH
    );

    let mut manifest = Manifest::new("demo-lj", config);
    manifest
        .arg("budget", params.budget)
        .arg("pool_size", params.pool_size)
        .arg("seed_count", params.seed_count)
        .arg("strategy", params.kind.name());
    manifest.write(&config.out_dir)?;
    Ok(())
}
