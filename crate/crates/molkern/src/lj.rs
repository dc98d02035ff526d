//! One-dimensional active-learning demo on the Lennard-Jones potential.
//!
//! This deliberately bypasses the graph machinery: the pool is a grid of
//! scalar interatomic distances, the covariance is a squared-exponential
//! kernel on those distances, and the truth is the analytic potential.
//! It exists to show the acquisition loop shrinking the worst-case error
//! of the fitted curve, so alongside the usual history it replays every
//! training-set prefix and records max |prediction − truth| over the
//! whole pool per iteration.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::active::{
    run_active_learning, subset_gram, AcquisitionKind, AcquisitionStrategy, AlError, AlSetup,
    SliceTargets,
};
use crate::gpr;

/// Lennard-Jones potential with ε = σ = 1: V(r) = 4(r⁻¹² − r⁻⁶).
pub fn lennard_jones(r: f64) -> f64 {
    let inv6 = (1.0 / r).powi(6);
    4.0 * (inv6 * inv6 - inv6)
}

/// Depth of the ε = σ = 1 well (|V| at r = 2^(1/6)).
pub const LJ_WELL_DEPTH: f64 = 1.0;

#[derive(Debug, Error)]
pub enum LjError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("distance range [{r_min}, {r_max}] is empty")]
    EmptyRange { r_min: f64, r_max: f64 },
    #[error("pool of {pool_size} cannot hold {seed_count} seeds plus budget {budget}")]
    PoolTooSmall {
        pool_size: usize,
        seed_count: usize,
        budget: usize,
    },
    #[error(transparent)]
    Al(#[from] AlError),
}

#[derive(Debug, Clone)]
pub struct LjDemoParams {
    /// Number of equally spaced pool distances.
    pub pool_size: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Length scale of the squared-exponential covariance.
    pub length_scale: f64,
    /// Prior standard deviation (kernel amplitude is its square).
    pub signal: f64,
    /// Randomly drawn initial training points.
    pub seed_count: usize,
    /// Acquisitions after the seed fit.
    pub budget: usize,
    pub kind: AcquisitionKind,
    pub rng_seed: u64,
    pub rel_jitter: f64,
}

impl Default for LjDemoParams {
    fn default() -> Self {
        LjDemoParams {
            pool_size: 200,
            r_min: 0.95,
            r_max: 3.0,
            length_scale: 0.2,
            signal: 2.0,
            seed_count: 3,
            budget: 25,
            kind: AcquisitionKind::Uncertainty,
            rng_seed: 0,
            rel_jitter: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LjDemoRow {
    pub iteration: usize,
    /// Distance of the acquired point; `None` on the seed row.
    pub chosen_r: Option<f64>,
    /// Worst |prediction − truth| over the entire pool at this iteration.
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LjDemoResult {
    pub positions: Vec<f64>,
    pub truth: Vec<f64>,
    pub rows: Vec<LjDemoRow>,
    pub train_ids: Vec<usize>,
}

impl LjDemoResult {
    pub fn final_max_error(&self) -> f64 {
        self.rows
            .last()
            .expect("at least the seed row")
            .max_abs_error
    }

    /// CSV rendering, one line per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,chosen_r,max_abs_error\n");
        for row in &self.rows {
            let chosen = row.chosen_r.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{}\n",
                row.iteration, chosen, row.max_abs_error
            ));
        }
        out
    }
}

use crate::util::STREAM_SPLIT;

/// Runs the demo: seed points are drawn uniformly without replacement,
/// then the acquisition loop runs for `budget` iterations. The returned
/// rows replay each training-set prefix with a fresh fit, so row k's
/// max error describes exactly the model that had made k acquisitions.
pub fn run_lj_demo(params: &LjDemoParams) -> Result<LjDemoResult, LjError> {
    for (name, value) in [
        ("r_min", params.r_min),
        ("length_scale", params.length_scale),
        ("signal", params.signal),
    ] {
        if value <= 0.0 {
            return Err(LjError::NonPositive { name, value });
        }
    }
    if params.r_max <= params.r_min {
        return Err(LjError::EmptyRange {
            r_min: params.r_min,
            r_max: params.r_max,
        });
    }
    if params.seed_count == 0 || params.seed_count + params.budget > params.pool_size {
        return Err(LjError::PoolTooSmall {
            pool_size: params.pool_size,
            seed_count: params.seed_count,
            budget: params.budget,
        });
    }

    let n = params.pool_size;
    let step = (params.r_max - params.r_min) / (n - 1) as f64;
    let positions: Vec<f64> = (0..n).map(|i| params.r_min + i as f64 * step).collect();
    let truth: Vec<f64> = positions.iter().map(|&r| lennard_jones(r)).collect();

    let amplitude = params.signal * params.signal;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let d = (positions[i] - positions[j]) / params.length_scale;
        amplitude * (-0.5 * d * d).exp()
    });

    let mut seed_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut seed_ids = rand::seq::index::sample(&mut seed_rng, n, params.seed_count).into_vec();
    seed_ids.sort_unstable();

    let eval_ids: Vec<usize> = (0..n).collect();
    let history = run_active_learning(
        &gram,
        &SliceTargets(&truth),
        &AlSetup {
            seed_ids: &seed_ids,
            eval_ids: &eval_ids,
            candidate_ids: None,
            strategy: AcquisitionStrategy {
                kind: params.kind,
                rng_seed: params.rng_seed ^ STREAM_SPLIT,
            },
            budget: params.budget,
            rel_jitter: params.rel_jitter,
        },
    )?;

    let mut rows = Vec::with_capacity(history.rows.len());
    for (k, hrow) in history.rows.iter().enumerate() {
        let prefix = &history.train_ids[..params.seed_count + k];
        let train_gram = subset_gram(&gram, prefix, prefix)?;
        let train_y: Vec<f64> = prefix.iter().map(|&i| truth[i]).collect();
        let model = gpr::fit(&train_gram, &train_y, params.rel_jitter).map_err(AlError::from)?;
        let cross = subset_gram(&gram, prefix, &eval_ids)?;
        let pred = gpr::predict(&model, &cross, None).map_err(AlError::from)?;
        let max_abs_error = pred
            .mean
            .iter()
            .zip(&truth)
            .map(|(p, t)| (p - t).abs())
            .fold(0.0, f64::max);
        rows.push(LjDemoRow {
            iteration: hrow.iteration,
            chosen_r: hrow.chosen.map(|id| positions[id]),
            max_abs_error,
        });
    }

    Ok(LjDemoResult {
        positions,
        truth,
        rows,
        train_ids: history.train_ids,
    })
}
