//! One module per subcommand, plus the plumbing they share.

use std::fs;
use std::path::{Path, PathBuf};

use molkern::{build_graph, BondLengthTable, MolecularGraph};

use crate::config::RunConfig;
use crate::data::Dataset;
use crate::CliError;

pub mod active;
pub mod demo_lj;
pub mod fit_predict;
pub mod kernel;
pub mod scan;

/// Wraps a pipeline-stage error with the stage's name, per the exit
/// contract ("failures name the stage").
pub(crate) fn stage<T, E: std::fmt::Display>(
    name: &'static str,
    result: Result<T, E>,
) -> Result<T, CliError> {
    result.map_err(|e| CliError::Stage {
        stage: name,
        message: e.to_string(),
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The xyz path is mandatory for every dataset-driven command.
pub(crate) fn require_xyz(config: &RunConfig, what: &'static str) -> Result<PathBuf, CliError> {
    config.xyz.clone().ok_or(CliError::MissingPath {
        what,
        key: "paths.xyz",
    })
}

pub(crate) fn require_targets(config: &RunConfig, what: &'static str) -> Result<PathBuf, CliError> {
    config.targets.clone().ok_or(CliError::MissingPath {
        what,
        key: "paths.targets",
    })
}

/// Builds distance-labelled graphs for the given dataset indices.
pub(crate) fn graphs_for(
    stage_name: &'static str,
    dataset: &Dataset,
    indices: &[usize],
    table: &BondLengthTable,
    config: &RunConfig,
) -> Result<Vec<MolecularGraph>, CliError> {
    let params = config.hyperparams.graph_params(config.weight_cutoff);
    stage(
        stage_name,
        indices
            .iter()
            .map(|&i| build_graph(&dataset.molecules[i], table, &params))
            .collect::<Result<Vec<_>, _>>(),
    )
}

/// Targets for the given indices, failing with the offending id.
pub(crate) fn targets_for(dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>, CliError> {
    indices
        .iter()
        .map(|&i| dataset.require_target(i).map_err(CliError::from))
        .collect()
}

pub(crate) fn check_disjoint(
    train: &[usize],
    test: &[usize],
    dataset: &Dataset,
) -> Result<(), CliError> {
    let mut in_train = vec![false; dataset.len()];
    for &i in train {
        in_train[i] = true;
    }
    for &i in test {
        if in_train[i] {
            return Err(CliError::Overlap {
                id: dataset.ids[i].clone(),
            });
        }
    }
    Ok(())
}

/// Shortest-roundtrip float rendering used by every CSV this crate writes.
pub(crate) fn fmt_f64(value: f64) -> String {
    format!("{value:?}")
}

pub(crate) fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt_f64).unwrap_or_default()
}
