//! `molkern active`: pool-based active learning with a seeded random
//! seed set.
//!
//! With `--eval`, metrics are reported on an explicit held-out set that
//! the loop is barred from acquiring. Without it, the loop both acquires
//! from and evaluates on the full pool — the transductive protocol, where
//! late-iteration metrics include already-acquired points.

use std::collections::HashMap;

use molkern::{
    gram_matrix, run_active_learning, AcquisitionKind, AcquisitionStrategy, AlSetup,
    BondLengthTable, SliceTargets, STREAM_SPLIT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::commands::{
    check_disjoint, fmt_f64, fmt_opt, graphs_for, require_targets, require_xyz, stage, targets_for,
    write_file,
};
use crate::config::RunConfig;
use crate::data::{resolve_id_spec, Dataset};
use crate::manifest::Manifest;
use crate::CliError;

pub fn parse_strategy(name: &str) -> Result<AcquisitionKind, CliError> {
    match name {
        "random" => Ok(AcquisitionKind::Random),
        "uncertainty" => Ok(AcquisitionKind::Uncertainty),
        "true-error" => Ok(AcquisitionKind::TrueError),
        other => Err(CliError::BadStrategy(other.to_string())),
    }
}

pub struct ActiveArgs<'a> {
    pub pool_spec: &'a str,
    pub eval_spec: Option<&'a str>,
    pub seed_count: usize,
    pub strategy: &'a str,
    pub budget: usize,
    pub allow_overlap: bool,
}

pub fn run(config: &RunConfig, args: &ActiveArgs) -> Result<(), CliError> {
    let xyz = require_xyz(config, "active")?;
    let targets_path = require_targets(config, "active")?;
    let dataset = Dataset::load(&xyz, Some(&targets_path))?;
    let kind = parse_strategy(args.strategy)?;

    let pool = resolve_id_spec(args.pool_spec, &dataset)?;
    let eval = args
        .eval_spec
        .map(|spec| resolve_id_spec(spec, &dataset))
        .transpose()?;
    if let Some(eval) = &eval {
        if !args.allow_overlap {
            check_disjoint(&pool, eval, &dataset)?;
        }
    }
    if args.seed_count == 0 || args.seed_count > pool.len() {
        return Err(CliError::Stage {
            stage: "validating arguments",
            message: format!(
                "seed count must be between 1 and the pool size ({}), got {}",
                pool.len(),
                args.seed_count
            ),
        });
    }
    if args.seed_count + args.budget > pool.len() {
        return Err(CliError::Stage {
            stage: "validating arguments",
            message: format!(
                "seed count {} + budget {} exceeds the pool size {}",
                args.seed_count,
                args.budget,
                pool.len()
            ),
        });
    }

    // The Gram covers the pool plus any held-out ids; positions within it
    // are what the learning loop sees.
    let mut union = pool.clone();
    let mut position: HashMap<usize, usize> = pool
        .iter()
        .enumerate()
        .map(|(at, &ds_index)| (ds_index, at))
        .collect();
    let (eval_at, candidates_at): (Vec<usize>, Option<Vec<usize>>) = match &eval {
        None => ((0..pool.len()).collect(), None),
        Some(eval) => {
            for &ds_index in eval {
                position.entry(ds_index).or_insert_with(|| {
                    union.push(ds_index);
                    union.len() - 1
                });
            }
            (
                eval.iter().map(|i| position[i]).collect(),
                Some((0..pool.len()).collect()),
            )
        }
    };

    let union_y = targets_for(&dataset, &union)?;
    let table = BondLengthTable::standard();
    let graphs = graphs_for("building graphs", &dataset, &union, &table, config)?;
    let gram = stage(
        "computing pool Gram",
        gram_matrix(&graphs, &config.hyperparams, &config.solver),
    )?;

    let mut seed_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut seed_at =
        rand::seq::index::sample(&mut seed_rng, pool.len(), args.seed_count).into_vec();
    seed_at.sort_unstable();

    let history = stage(
        "running acquisition loop",
        run_active_learning(
            &gram,
            &SliceTargets(&union_y),
            &AlSetup {
                seed_ids: &seed_at,
                eval_ids: &eval_at,
                candidate_ids: candidates_at.as_deref(),
                strategy: AcquisitionStrategy {
                    kind,
                    rng_seed: config.rng_seed ^ STREAM_SPLIT,
                },
                budget: args.budget,
                rel_jitter: config.rel_jitter,
            },
        ),
    )?;

    let mut csv = String::from("iter,chosen_id,score,mae,rmse,jitter\n");
    for row in &history.rows {
        let chosen = row
            .chosen
            .map(|at| dataset.ids[union[at]].clone())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.iteration,
            chosen,
            fmt_opt(row.score),
            fmt_f64(row.mae),
            fmt_f64(row.rmse),
            fmt_f64(row.jitter),
        ));
    }
    write_file(&config.out_dir.join("history.csv"), &csv)?;

    let mut train_ids = String::new();
    for &at in &history.train_ids {
        train_ids.push_str(&dataset.ids[union[at]]);
        train_ids.push('\n');
    }
    write_file(&config.out_dir.join("train_ids.txt"), &train_ids)?;

    let last = history.rows.last().expect("history always has a seed row");
    println!(
        "{} iterations, final training set {} molecules",
        history.rows.len() - 1,
        history.train_ids.len()
    );
    println!("final mae = {:.6} kcal/mol", last.mae);
    println!("final rmse = {:.6} kcal/mol", last.rmse);

    let mut manifest = Manifest::new("active", config);
    manifest
        .id_spec("pool_ids", args.pool_spec)?
        .input("xyz", &xyz)?
        .input("targets", &targets_path)?;
    if let Some(spec) = args.eval_spec {
        manifest.id_spec("eval_ids", spec)?;
    }
    manifest
        .arg("seed_count", args.seed_count)
        .arg("strategy", kind.name())
        .arg("budget", args.budget)
        .arg("allow_overlap", args.allow_overlap);
    manifest.write(&config.out_dir)?;
    Ok(())
}
