//! Gram matrices over sets of molecular graphs.
//!
//! Entries are independent kernel evaluations, so they are farmed out to
//! the current rayon pool. Each entry depends only on its own graph pair,
//! which makes the result identical no matter how many workers run or how
//! the schedule interleaves — a property the CLI's reproducibility
//! guarantees lean on.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::graph::MolecularGraph;
use crate::kernel::{solve_mgk, KernelError, KernelHyperparams, SolverSettings};

fn pair_value(
    graphs_a: &[MolecularGraph],
    graphs_b: &[MolecularGraph],
    i: usize,
    j: usize,
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<f64, KernelError> {
    solve_mgk(&graphs_a[i], &graphs_b[j], hp, settings).map_err(|e| KernelError::Pair {
        row: i,
        col: j,
        source: Box::new(e),
    })
}

/// Symmetric self-Gram of a graph set.
///
/// Only the upper triangle is evaluated; the lower is mirrored bit for
/// bit, so the result is exactly symmetric.
pub fn gram_matrix(
    graphs: &[MolecularGraph],
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<DMatrix<f64>, KernelError> {
    if graphs.is_empty() {
        return Err(KernelError::EmptySet);
    }
    let n = graphs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| pair_value(graphs, graphs, i, j, hp, settings))
        .collect::<Result<_, _>>()?;
    let mut gram = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        gram[(i, j)] = v;
        gram[(j, i)] = v;
    }
    Ok(gram)
}

/// Rectangular cross-Gram between two graph sets (rows × cols).
pub fn cross_gram_matrix(
    rows: &[MolecularGraph],
    cols: &[MolecularGraph],
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<DMatrix<f64>, KernelError> {
    if rows.is_empty() || cols.is_empty() {
        return Err(KernelError::EmptySet);
    }
    let (m, n) = (rows.len(), cols.len());
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| pair_value(rows, cols, i, j, hp, settings))
        .collect::<Result<_, _>>()?;
    let mut gram = DMatrix::zeros(m, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        gram[(i, j)] = v;
    }
    Ok(gram)
}

/// Self-kernel of each graph in a set: the diagonal a self-Gram would
/// have. Used for predictive variances, where the rest of the test×test
/// Gram is never needed.
pub fn kernel_diagonal(
    graphs: &[MolecularGraph],
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<Vec<f64>, KernelError> {
    if graphs.is_empty() {
        return Err(KernelError::EmptySet);
    }
    (0..graphs.len())
        .into_par_iter()
        .map(|i| pair_value(graphs, graphs, i, i, hp, settings))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::BondLengthTable;
    use crate::graph::{build_graph, parse_xyz};

    fn small_set(hp: &KernelHyperparams) -> Vec<MolecularGraph> {
        let table = BondLengthTable::standard();
        [
            "2\n\nH 0 0 0\nH 0 0 0.74\n",
            "3\n\nO 0 0 0\nH 0.96 0 0\nH -0.24 0.93 0\n",
            "4\n\nN 0 0 0\nH 1.01 0 0\nH -0.3 0.96 0\nH -0.3 -0.5 0.8\n",
            "2\n\nC 0 0 0\nO 0 0 1.27\n",
        ]
        .iter()
        .map(|xyz| {
            let mol = parse_xyz(xyz).unwrap();
            build_graph(&mol, &table, &hp.graph_params(1e-6)).unwrap()
        })
        .collect()
    }

    #[test]
    fn one_graph_self_gram_is_the_scalar_kernel() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        let graphs = small_set(&hp);
        let gram = gram_matrix(&graphs[..1], &hp, &settings).unwrap();
        let k = solve_mgk(&graphs[0], &graphs[0], &hp, &settings).unwrap();
        assert_eq!(gram[(0, 0)].to_bits(), k.to_bits());
    }

    #[test]
    fn self_gram_is_symmetric_and_matches_pairwise_calls() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        let graphs = small_set(&hp);
        let gram = gram_matrix(&graphs, &hp, &settings).unwrap();
        for i in 0..graphs.len() {
            for j in 0..graphs.len() {
                assert_eq!(gram[(i, j)].to_bits(), gram[(j, i)].to_bits());
                if i <= j {
                    let direct = solve_mgk(&graphs[i], &graphs[j], &hp, &settings).unwrap();
                    assert_eq!(gram[(i, j)].to_bits(), direct.to_bits());
                }
            }
        }
    }

    #[test]
    fn cross_gram_matches_elementwise_evaluation() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        let graphs = small_set(&hp);
        let cross = cross_gram_matrix(&graphs[..2], &graphs[2..], &hp, &settings).unwrap();
        assert_eq!(cross.shape(), (2, 2));
        for i in 0..2 {
            for j in 0..2 {
                let direct = solve_mgk(&graphs[i], &graphs[2 + j], &hp, &settings).unwrap();
                assert_eq!(cross[(i, j)].to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn diagonal_matches_self_gram() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        let graphs = small_set(&hp);
        let diag = kernel_diagonal(&graphs, &hp, &settings).unwrap();
        let gram = gram_matrix(&graphs, &hp, &settings).unwrap();
        for (i, d) in diag.iter().enumerate() {
            assert_eq!(d.to_bits(), gram[(i, i)].to_bits());
        }
    }

    #[test]
    fn small_gram_is_numerically_psd() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        let graphs = small_set(&hp);
        let gram = gram_matrix(&graphs, &hp, &settings).unwrap();
        let eigen = gram.symmetric_eigenvalues();
        let max = eigen.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-8 * max, "min {min} vs max {max}");
    }

    #[test]
    fn empty_set_is_rejected_and_pair_errors_carry_indices() {
        let hp = KernelHyperparams::default();
        let settings = SolverSettings::default();
        assert!(matches!(
            gram_matrix(&[], &hp, &settings),
            Err(KernelError::EmptySet)
        ));
        // Starve the solver to force a failure and check the pair index.
        let graphs = small_set(&hp);
        let starved = SolverSettings {
            cg_max_iter: Some(1),
            cg_tol: 1e-16,
            ..Default::default()
        };
        match gram_matrix(&graphs, &hp, &starved) {
            Err(KernelError::Pair { row, col, .. }) => {
                assert!(row < graphs.len() && col < graphs.len());
            }
            other => panic!("expected pair error, got {other:?}"),
        }
    }
}
