// Validation code writes `!(x > 0.0)` on purpose: unlike `x <= 0.0` it is
// also true for NaN, so one comparison rejects both signs and non-numbers.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Marginalized graph kernels on molecular graphs, with Gaussian process
//! regression and active learning on top.
//!
//! The pipeline: parse xyz geometries into [`graph::Molecule`]s, turn them
//! into distance-labelled graphs ([`graph::build_graph`]), compare graphs
//! with the marginalized kernel ([`kernel`]), and feed the resulting Gram
//! matrices into a Gaussian process ([`gpr`]). [`active`] wraps the
//! regressor in a greedy data-acquisition loop and [`scan`] sweeps the
//! kernel hyperparameters over a grid.

pub mod active;
pub mod element;
pub mod gpr;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod lj;
pub mod scan;
pub mod synth;
pub mod util;

pub use active::{
    run_active_learning, subset_gram, AcquisitionKind, AcquisitionStrategy, AlError, AlHistory,
    AlRow, AlSetup, SliceTargets, TargetSource, TargetUse,
};
pub use element::{bond_length, BondLengthTable, Element};
pub use gpr::{
    coverage_curve, error_uncertainty_correlation, fit, log_marginal_likelihood, mae, predict,
    rmse, two_sided_z, GprError, GprModel, PredictionResult, TestGram,
};
pub use graph::{
    adjacency_weight, build_graph, parse_xyz, parse_xyz_frames, GraphError, GraphParams,
    MolecularGraph, Molecule,
};
pub use kernel::{
    cross_gram_matrix, edge_kernel, gram_matrix, kernel_diagonal, solve_mgk, vertex_kernel,
    vertex_pair_similarities, CouplingStorage, KernelError, KernelHyperparams, SimilarityMatrix,
    SolverBackend, SolverSettings,
};
pub use lj::{lennard_jones, run_lj_demo, LjDemoParams, LjDemoResult, LjDemoRow, LjError};
pub use scan::{
    conditional_stats, grid_scan, input_digest, records_to_csv, stats_to_csv, AxisGroupStats,
    ScanAxis, ScanError, ScanGrid, ScanJournal, ScanRecord, ScanTask, SummaryStats,
};
pub use util::{fnv1a64, Fnv1a64, STREAM_SPLIT};
