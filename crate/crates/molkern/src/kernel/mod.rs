//! The marginalized graph kernel on pairs of molecular graphs.
//!
//! The kernel compares two graphs by the expected similarity of
//! simultaneous random walks on both. That expectation is the solution of
//! a linear system on the product graph: with `V` the diagonal of
//! vertex-pair similarities, `D` the product of augmented degrees and `C`
//! the coupling matrix (adjacency products weighted by the edge kernel),
//!
//! ```text
//! (diag(D/V) − C)·x = D ⊙ q,     K = p · x
//! ```
//!
//! where `p` and `q` are the start and stop weights. The system is
//! strictly diagonally dominant, hence symmetric positive-definite, and is
//! solved either by Jacobi-preconditioned conjugate gradient or by a dense
//! factorization.

mod gram;
mod oracle;
mod solve;
mod system;

pub use gram::{cross_gram_matrix, gram_matrix, kernel_diagonal};
pub use oracle::{kernel_series, series_length_for_tolerance};
pub use system::{CouplingStorage, KroneckerSystem};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::element::Element;
use crate::graph::{GraphParams, MolecularGraph};

/// The five hyperparameters of the kernel.
///
/// `zeta` and `q` also shape graph construction (adjacency decay and stop
/// probabilities), so graphs handed to the kernel must have been built
/// with the same values; this is checked at assembly time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelHyperparams {
    /// Similarity between distinct elements, in (0, 1).
    pub nu: f64,
    /// Multiplier on tabulated bond lengths in the adjacency rule.
    pub zeta: f64,
    /// Length scale (Å) of the Gaussian edge kernel.
    pub lambda: f64,
    /// Uniform start weight per vertex; enters the kernel as s².
    pub s: f64,
    /// Uniform stop probability per vertex, in (0, 1).
    pub q: f64,
}

impl Default for KernelHyperparams {
    fn default() -> KernelHyperparams {
        KernelHyperparams {
            nu: 0.3,
            zeta: 1.0,
            lambda: 0.05,
            s: 250.0,
            q: 0.05,
        }
    }
}

impl KernelHyperparams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let check = |name, value, ok, requirement| {
            if ok {
                Ok(())
            } else {
                Err(KernelError::BadHyperparam {
                    name,
                    value,
                    requirement,
                })
            }
        };
        check(
            "nu",
            self.nu,
            self.nu > 0.0 && self.nu < 1.0,
            "lie in (0, 1)",
        )?;
        check("zeta", self.zeta, self.zeta > 0.0, "be positive")?;
        check("lambda", self.lambda, self.lambda > 0.0, "be positive")?;
        check("s", self.s, self.s > 0.0, "be positive")?;
        check("q", self.q, self.q > 0.0 && self.q < 1.0, "lie in (0, 1)")?;
        Ok(())
    }

    /// Graph-construction parameters consistent with these hyperparameters.
    pub fn graph_params(&self, weight_cutoff: f64) -> GraphParams {
        GraphParams {
            zeta: self.zeta,
            stop_prob: self.q,
            weight_cutoff,
        }
    }
}

/// How the product-graph linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverBackend {
    #[default]
    ConjugateGradient,
    DirectFactorization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub backend: SolverBackend,
    /// Relative-residual stopping threshold for conjugate gradient.
    pub cg_tol: f64,
    /// Iteration cap; `None` means 10× the system dimension.
    pub cg_max_iter: Option<usize>,
    /// Whether the coupling matrix is materialized or applied on the fly.
    pub coupling: CouplingStorage,
}

impl Default for SolverSettings {
    fn default() -> SolverSettings {
        SolverSettings {
            backend: SolverBackend::ConjugateGradient,
            cg_tol: 1e-9,
            cg_max_iter: None,
            coupling: CouplingStorage::Auto,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.cg_tol > 0.0) || !self.cg_tol.is_finite() {
            return Err(KernelError::BadSolverSetting {
                name: "cg_tol",
                detail: format!("must be positive and finite, got {}", self.cg_tol),
            });
        }
        if self.cg_max_iter == Some(0) {
            return Err(KernelError::BadSolverSetting {
                name: "cg_max_iter",
                detail: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("hyperparameter {name} must {requirement}, got {value}")]
    BadHyperparam {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("solver setting {name}: {detail}")]
    BadSolverSetting { name: &'static str, detail: String },
    #[error(
        "graph was built with {name}={graph_value} but the kernel expects {name}={expected}; \
         rebuild the graph with matching parameters"
    )]
    GraphMismatch {
        name: &'static str,
        graph_value: f64,
        expected: f64,
    },
    #[error(
        "conjugate gradient did not reach tolerance after {iterations} iterations \
         (relative residual {residual:.3e})"
    )]
    CgStalled { iterations: usize, residual: f64 },
    #[error("product system appears indefinite at CG iteration {iteration}")]
    IndefiniteSystem { iteration: usize },
    #[error("product system is not positive definite: factorization failed at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("kernel evaluation failed for pair ({row}, {col}): {source}")]
    Pair {
        row: usize,
        col: usize,
        #[source]
        source: Box<KernelError>,
    },
    #[error("graph set must not be empty")]
    EmptySet,
}

/// Vertex-label similarity: 1 for matching elements, `nu` otherwise.
#[inline]
pub fn vertex_kernel(a: Element, b: Element, nu: f64) -> f64 {
    if a == b {
        1.0
    } else {
        nu
    }
}

/// Edge-label similarity: squared-exponential in the length difference.
#[inline]
pub fn edge_kernel(e: f64, e_prime: f64, lambda: f64) -> f64 {
    let diff = e - e_prime;
    (-diff * diff / (2.0 * lambda * lambda)).exp()
}

/// Scalar kernel value between two molecular graphs.
pub fn solve_mgk(
    g: &MolecularGraph,
    g_prime: &MolecularGraph,
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<f64, KernelError> {
    settings.validate()?;
    let sys = KroneckerSystem::assemble(g, g_prime, hp, settings.coupling)?;
    let outcome = solve::solve_system(&sys, settings)?;
    Ok(sys.px() * outcome.x.iter().sum::<f64>())
}

/// Per-vertex-pair decomposition of the kernel value.
///
/// Entry (i, j) is the contribution of atom `i` of the first molecule
/// paired with atom `j` of the second; the entries sum to the scalar
/// kernel. Useful for inspecting which atomic neighborhoods two molecules
/// consider alike.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Sum of all entries (equals the scalar kernel value).
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Computes the vertex-pair similarity decomposition of the kernel.
pub fn vertex_pair_similarities(
    g: &MolecularGraph,
    g_prime: &MolecularGraph,
    hp: &KernelHyperparams,
    settings: &SolverSettings,
) -> Result<SimilarityMatrix, KernelError> {
    settings.validate()?;
    let sys = KroneckerSystem::assemble(g, g_prime, hp, settings.coupling)?;
    let outcome = solve::solve_system(&sys, settings)?;
    let (n1, n2) = sys.shape();
    let px = sys.px();
    let values = DMatrix::from_fn(n1, n2, |i, j| px * outcome.x[i * n2 + j]);
    Ok(SimilarityMatrix { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vertex_kernel_cases() {
        assert_eq!(vertex_kernel(Element::C, Element::C, 0.3), 1.0);
        assert_eq!(vertex_kernel(Element::C, Element::O, 0.3), 0.3);
        assert_eq!(vertex_kernel(Element::H, Element::S, 0.25), 0.25);
    }

    #[test]
    fn edge_kernel_cases() {
        assert_eq!(edge_kernel(1.0, 1.0, 0.123), 1.0);
        assert_relative_eq!(
            edge_kernel(1.00, 1.02, 0.02),
            (-0.5f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            edge_kernel(0.74, 1.39, 0.05),
            (-84.5f64).exp(),
            max_relative = 1e-12
        );
        // Symmetric in its arguments.
        assert_eq!(edge_kernel(1.3, 0.9, 0.05), edge_kernel(0.9, 1.3, 0.05));
    }

    #[test]
    fn hyperparams_validation() {
        assert!(KernelHyperparams::default().validate().is_ok());
        for bad in [
            KernelHyperparams {
                nu: 0.0,
                ..Default::default()
            },
            KernelHyperparams {
                nu: 1.0,
                ..Default::default()
            },
            KernelHyperparams {
                zeta: 0.0,
                ..Default::default()
            },
            KernelHyperparams {
                lambda: -0.05,
                ..Default::default()
            },
            KernelHyperparams {
                s: 0.0,
                ..Default::default()
            },
            KernelHyperparams {
                q: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?} should fail validation");
        }
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings {
            cg_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverSettings {
            cg_max_iter: Some(0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
