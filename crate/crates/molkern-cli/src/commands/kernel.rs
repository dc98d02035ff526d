//! `molkern kernel`: the scalar kernel between two molecules, optionally
//! with the per-atom-pair similarity decomposition.

use molkern::{solve_mgk, vertex_pair_similarities, BondLengthTable};

use crate::commands::{fmt_f64, graphs_for, require_xyz, stage, write_file};
use crate::config::RunConfig;
use crate::data::Dataset;
use crate::manifest::Manifest;
use crate::CliError;

pub fn run(config: &RunConfig, id_a: &str, id_b: &str, emit_matrix: bool) -> Result<(), CliError> {
    let xyz = require_xyz(config, "kernel")?;
    // Targets are irrelevant to a kernel evaluation, so they are not even
    // loaded: a broken targets file must not block this command.
    let dataset = Dataset::load(&xyz, None)?;
    let ia = dataset.require(id_a)?;
    let ib = dataset.require(id_b)?;

    let table = BondLengthTable::standard();
    let graphs = graphs_for("building graphs", &dataset, &[ia, ib], &table, config)?;
    let value = stage(
        "evaluating kernel",
        solve_mgk(&graphs[0], &graphs[1], &config.hyperparams, &config.solver),
    )?;
    println!("kernel({id_a}, {id_b}) = {value:?}");

    if emit_matrix {
        let sim = stage(
            "decomposing kernel",
            vertex_pair_similarities(&graphs[0], &graphs[1], &config.hyperparams, &config.solver),
        )?;
        let (mol_a, mol_b) = (&dataset.molecules[ia], &dataset.molecules[ib]);
        let mut csv = String::from("kappa");
        for j in 0..sim.cols() {
            csv.push(',');
            csv.push_str(&format!("{id_b}:{j}:{}", mol_b.elements[j].symbol()));
        }
        csv.push('\n');
        for i in 0..sim.rows() {
            csv.push_str(&format!("{id_a}:{i}:{}", mol_a.elements[i].symbol()));
            for j in 0..sim.cols() {
                csv.push(',');
                csv.push_str(&fmt_f64(sim.values[(i, j)]));
            }
            csv.push('\n');
        }
        write_file(&config.out_dir.join("similarity.csv"), &csv)?;
        log::info!(
            "wrote {} ({}x{} atom pairs)",
            config.out_dir.join("similarity.csv").display(),
            sim.rows(),
            sim.cols()
        );
    }

    let mut manifest = Manifest::new("kernel", config);
    manifest
        .arg("id_a", id_a)
        .arg("id_b", id_b)
        .arg("similarity_matrix", emit_matrix)
        .input("xyz", &xyz)?;
    manifest.write(&config.out_dir)?;
    Ok(())
}
