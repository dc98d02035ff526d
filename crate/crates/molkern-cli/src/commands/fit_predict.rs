//! `molkern fit-predict`: train a GP on one id set, predict another, and
//! report accuracy and calibration metrics.

use molkern::{
    coverage_curve, cross_gram_matrix, error_uncertainty_correlation, gram_matrix, kernel_diagonal,
    log_marginal_likelihood, mae, rmse, BondLengthTable, TestGram,
};

use crate::commands::{
    check_disjoint, fmt_f64, fmt_opt, graphs_for, require_targets, require_xyz, stage, targets_for,
    write_file,
};
use crate::config::RunConfig;
use crate::data::{resolve_id_spec, Dataset};
use crate::manifest::Manifest;
use crate::CliError;

/// Confidence levels the summary reports coverage at.
pub const COVERAGE_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 0.9];

pub fn run(
    config: &RunConfig,
    train_spec: &str,
    test_spec: &str,
    allow_overlap: bool,
) -> Result<(), CliError> {
    let xyz = require_xyz(config, "fit-predict")?;
    let targets_path = require_targets(config, "fit-predict")?;
    let dataset = Dataset::load(&xyz, Some(&targets_path))?;
    let train = resolve_id_spec(train_spec, &dataset)?;
    let test = resolve_id_spec(test_spec, &dataset)?;
    if !allow_overlap {
        check_disjoint(&train, &test, &dataset)?;
    }
    let train_y = targets_for(&dataset, &train)?;
    let test_y = targets_for(&dataset, &test)?;

    let table = BondLengthTable::standard();
    let train_graphs = graphs_for("building train graphs", &dataset, &train, &table, config)?;
    let test_graphs = graphs_for("building test graphs", &dataset, &test, &table, config)?;

    let hp = &config.hyperparams;
    let gram = stage(
        "computing training Gram",
        gram_matrix(&train_graphs, hp, &config.solver),
    )?;
    let cross = stage(
        "computing cross Gram",
        cross_gram_matrix(&train_graphs, &test_graphs, hp, &config.solver),
    )?;
    let diag = stage(
        "computing test diagonal",
        kernel_diagonal(&test_graphs, hp, &config.solver),
    )?;

    let model = stage("fitting", molkern::fit(&gram, &train_y, config.rel_jitter))?;
    let pred = stage(
        "predicting",
        molkern::predict(&model, &cross, Some(TestGram::Diagonal(&diag))),
    )?;
    let stds = pred.std.as_deref().expect("diagonal test gram yields stds");

    let mae = stage("scoring", mae(&pred.mean, &test_y))?;
    let rmse = stage("scoring", rmse(&pred.mean, &test_y))?;
    let lml = log_marginal_likelihood(&model);
    let abs_errors: Vec<f64> = pred
        .mean
        .iter()
        .zip(&test_y)
        .map(|(p, t)| (p - t).abs())
        .collect();
    let correlation = if test_y.len() >= 2 {
        stage("scoring", error_uncertainty_correlation(&abs_errors, stds))?
    } else {
        None
    };
    let coverage = stage(
        "scoring",
        coverage_curve(&pred.mean, stds, &test_y, &COVERAGE_LEVELS),
    )?;

    let mut predictions = String::from("id,target,prediction,std,abs_error\n");
    for (k, &i) in test.iter().enumerate() {
        predictions.push_str(&format!(
            "{},{},{},{},{}\n",
            dataset.ids[i],
            fmt_f64(test_y[k]),
            fmt_f64(pred.mean[k]),
            fmt_f64(stds[k]),
            fmt_f64(abs_errors[k]),
        ));
    }
    write_file(&config.out_dir.join("predictions.csv"), &predictions)?;

    let mut summary = String::from("mae,rmse,lml,correlation");
    for level in COVERAGE_LEVELS {
        summary.push_str(&format!(",coverage_{}", (level * 100.0).round() as u32));
    }
    summary.push_str(",jitter,variance_clamps\n");
    summary.push_str(&format!(
        "{},{},{},{}",
        fmt_f64(mae),
        fmt_f64(rmse),
        fmt_f64(lml),
        fmt_opt(correlation),
    ));
    for (_, observed) in &coverage {
        summary.push(',');
        summary.push_str(&fmt_f64(*observed));
    }
    summary.push_str(&format!(
        ",{},{}\n",
        fmt_f64(model.jitter_used),
        pred.variance_clamps
    ));
    write_file(&config.out_dir.join("summary.csv"), &summary)?;

    println!("train {} / test {}", train.len(), test.len());
    println!("mae = {mae:.6} kcal/mol");
    println!("rmse = {rmse:.6} kcal/mol");
    println!("lml = {lml:.6}");
    match correlation {
        Some(c) => println!("error-uncertainty correlation = {c:.6}"),
        None => println!("error-uncertainty correlation undefined"),
    }
    for (level, observed) in &coverage {
        println!("coverage at {level:.2} = {observed:.4}");
    }

    let mut manifest = Manifest::new("fit-predict", config);
    manifest
        .input("xyz", &xyz)?
        .input("targets", &targets_path)?
        .id_spec("train_ids", train_spec)?
        .id_spec("test_ids", test_spec)?
        .arg("allow_overlap", allow_overlap);
    manifest.write(&config.out_dir)?;
    Ok(())
}
