//! Gaussian process regression on precomputed Gram matrices.
//!
//! The model is exact-interpolation GPR: no learned noise term, only a
//! small relative jitter added to the diagonal for numerical stability,
//! escalated by doubling if the factorization fails and always reported
//! back to the caller. Everything downstream of the factorization —
//! predictive means, (co)variances, log marginal likelihood — is standard
//! textbook material, kept deliberately close to the formulas so the test
//! oracles can mirror them with dense inverses.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum GprError {
    #[error("Gram matrix must be square, got {rows}×{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("Gram matrix is not symmetric (max deviation {max_dev:.3e})")]
    NotSymmetric { max_dev: f64 },
    #[error("Gram not positive definite (even with jitter {last_jitter:.3e})")]
    NotPositiveDefinite { last_jitter: f64 },
    #[error("input must not be empty")]
    EmptyInput,
    #[error("negative predictive std at index {index}")]
    NegativeStd { index: usize },
    #[error("confidence levels must be sorted and within [0, 1]")]
    BadLevels,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// A fitted Gaussian process.
#[derive(Debug, Clone)]
pub struct GprModel {
    /// Caller-meaningful identifiers of the training rows, defaulting to
    /// positional indices.
    pub train_ids: Vec<usize>,
    /// Lower Cholesky factor of (gram + jitter·I).
    pub gram_factor: DMatrix<f64>,
    /// Weights α = (gram + jitter·I)⁻¹·targets.
    pub weights: Vec<f64>,
    /// Training targets.
    pub targets: Vec<f64>,
    /// The diagonal jitter that made the factorization succeed.
    pub jitter_used: f64,
}

impl GprModel {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn with_train_ids(mut self, ids: Vec<usize>) -> GprModel {
        assert_eq!(ids.len(), self.targets.len());
        self.train_ids = ids;
        self
    }
}

const SYMMETRY_RTOL: f64 = 1e-8;
const MAX_JITTER_DOUBLINGS: u32 = 20;

/// Fits a GP to a symmetric Gram matrix and target vector.
///
/// The diagonal jitter starts at `rel_jitter × mean(diag)` and doubles on
/// factorization failure, up to 2²⁰ times the starting point. When
/// `rel_jitter` is zero the first attempt is exactly zero and the
/// escalation ladder starts from machine epsilon relative to the mean
/// diagonal instead (doubling zero would never terminate).
pub fn fit(gram: &DMatrix<f64>, targets: &[f64], rel_jitter: f64) -> Result<GprModel, GprError> {
    let m = gram.nrows();
    if gram.ncols() != m {
        return Err(GprError::NotSquare {
            rows: m,
            cols: gram.ncols(),
        });
    }
    if m == 0 {
        return Err(GprError::EmptyInput);
    }
    if targets.len() != m {
        return Err(GprError::LengthMismatch {
            expected: m,
            got: targets.len(),
        });
    }

    let mut scale = 0.0f64;
    let mut max_dev = 0.0f64;
    for i in 0..m {
        for j in i..m {
            scale = scale.max(gram[(i, j)].abs()).max(gram[(j, i)].abs());
            max_dev = max_dev.max((gram[(i, j)] - gram[(j, i)]).abs());
        }
    }
    if max_dev > SYMMETRY_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(GprError::NotSymmetric { max_dev });
    }

    let mean_diag = (0..m).map(|i| gram[(i, i)]).sum::<f64>() / m as f64;
    let base = rel_jitter * mean_diag;
    let ladder_unit = if base > 0.0 {
        base
    } else {
        f64::EPSILON * mean_diag
    };

    let mut last_jitter = base;
    for attempt in 0..=MAX_JITTER_DOUBLINGS {
        let jitter = if attempt == 0 {
            base
        } else {
            ladder_unit * f64::from(1u32 << attempt)
        };
        last_jitter = jitter;
        let mut factor = gram.clone();
        for i in 0..m {
            factor[(i, i)] += jitter;
        }
        if linalg::cholesky_in_place(&mut factor).is_ok() {
            if attempt > 0 {
                log::debug!("Gram factorization needed jitter escalation to {jitter:.3e}");
            }
            let mut weights = targets.to_vec();
            linalg::solve_llt(&factor, &mut weights);
            return Ok(GprModel {
                train_ids: (0..m).collect(),
                gram_factor: factor,
                weights,
                targets: targets.to_vec(),
                jitter_used: jitter,
            });
        }
    }
    Err(GprError::NotPositiveDefinite { last_jitter })
}

/// Test-side covariance handed to [`predict`].
pub enum TestGram<'a> {
    /// Just the self-kernels of the test points; enough for per-point
    /// standard deviations.
    Diagonal(&'a [f64]),
    /// The full test×test Gram; yields the full posterior covariance.
    Full(&'a DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    /// Present when a test-side Gram was supplied.
    pub std: Option<Vec<f64>>,
    /// Present when the full test×test Gram was supplied.
    pub covariance: Option<DMatrix<f64>>,
    /// How many negative predicted variances were clamped to zero.
    pub variance_clamps: usize,
}

/// Posterior mean (and optionally uncertainty) at test points.
///
/// `cross` is the train×test kernel block, one column per test point.
/// Negative variances — possible from floating-point cancellation — are
/// clamped to zero and counted.
pub fn predict(
    model: &GprModel,
    cross: &DMatrix<f64>,
    test_gram: Option<TestGram>,
) -> Result<PredictionResult, GprError> {
    let m = model.len();
    let n = cross.ncols();
    if cross.nrows() != m {
        return Err(GprError::LengthMismatch {
            expected: m,
            got: cross.nrows(),
        });
    }

    let mut mean = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..m {
            acc += cross[(i, j)] * model.weights[i];
        }
        mean[j] = acc;
    }

    let Some(test_gram) = test_gram else {
        return Ok(PredictionResult {
            mean,
            std: None,
            covariance: None,
            variance_clamps: 0,
        });
    };

    // V = L⁻¹·cross, column by column.
    let mut v = cross.clone();
    let mut col = vec![0.0; m];
    for j in 0..n {
        for i in 0..m {
            col[i] = v[(i, j)];
        }
        linalg::solve_lower(&model.gram_factor, &mut col);
        for i in 0..m {
            v[(i, j)] = col[i];
        }
    }

    let mut clamps = 0usize;
    match test_gram {
        TestGram::Diagonal(kss) => {
            if kss.len() != n {
                return Err(GprError::LengthMismatch {
                    expected: n,
                    got: kss.len(),
                });
            }
            let mut std = vec![0.0; n];
            for j in 0..n {
                let mut reduction = 0.0;
                for i in 0..m {
                    reduction += v[(i, j)] * v[(i, j)];
                }
                let mut var = kss[j] - reduction;
                if var < 0.0 {
                    var = 0.0;
                    clamps += 1;
                }
                std[j] = var.sqrt();
            }
            Ok(PredictionResult {
                mean,
                std: Some(std),
                covariance: None,
                variance_clamps: clamps,
            })
        }
        TestGram::Full(kss) => {
            if kss.nrows() != n || kss.ncols() != n {
                return Err(GprError::LengthMismatch {
                    expected: n,
                    got: kss.nrows(),
                });
            }
            let mut cov = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in a..n {
                    let mut reduction = 0.0;
                    for i in 0..m {
                        reduction += v[(i, a)] * v[(i, b)];
                    }
                    let mut value = kss[(a, b)] - reduction;
                    if a == b && value < 0.0 {
                        value = 0.0;
                        clamps += 1;
                    }
                    cov[(a, b)] = value;
                    cov[(b, a)] = value;
                }
            }
            let std = (0..n).map(|j| cov[(j, j)].sqrt()).collect();
            Ok(PredictionResult {
                mean,
                std: Some(std),
                covariance: Some(cov),
                variance_clamps: clamps,
            })
        }
    }
}

/// Log marginal likelihood of the fitted model:
/// −½·yᵀα − Σ log L_kk − (m/2)·log 2π.
pub fn log_marginal_likelihood(model: &GprModel) -> f64 {
    let m = model.len() as f64;
    let data_fit: f64 = model
        .targets
        .iter()
        .zip(&model.weights)
        .map(|(y, a)| y * a)
        .sum();
    -0.5 * data_fit
        - linalg::sum_log_diag(&model.gram_factor)
        - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
}

fn check_paired(pred: &[f64], truth: &[f64]) -> Result<(), GprError> {
    if pred.is_empty() {
        return Err(GprError::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(GprError::LengthMismatch {
            expected: pred.len(),
            got: truth.len(),
        });
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, GprError> {
    check_paired(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, GprError> {
    check_paired(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((total / pred.len() as f64).sqrt())
}

/// Pearson correlation between absolute errors and predictive stds.
///
/// Returns `None` when either sequence has zero variance — the statistic
/// is undefined there, and pretending otherwise would poison downstream
/// aggregates.
pub fn error_uncertainty_correlation(
    abs_errors: &[f64],
    stds: &[f64],
) -> Result<Option<f64>, GprError> {
    if abs_errors.len() != stds.len() {
        return Err(GprError::LengthMismatch {
            expected: abs_errors.len(),
            got: stds.len(),
        });
    }
    if abs_errors.len() < 2 {
        return Err(GprError::TooFewSamples {
            needed: 2,
            got: abs_errors.len(),
        });
    }
    let n = abs_errors.len() as f64;
    let mean_a = abs_errors.iter().sum::<f64>() / n;
    let mean_b = stds.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (a, b) in abs_errors.iter().zip(stds) {
        let da = a - mean_a;
        let db = b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (var_a.sqrt() * var_b.sqrt())))
}

/// Two-sided standard-normal quantile: the z with P(|Z| ≤ z) = level.
///
/// z(0) = 0 and z(1) = ∞; in between this uses Acklam's rational
/// approximation of the normal inverse CDF (relative error ~1e−9, far
/// below anything a coverage fraction can resolve).
pub fn two_sided_z(level: f64) -> f64 {
    if level <= 0.0 {
        0.0
    } else if level >= 1.0 {
        f64::INFINITY
    } else {
        normal_quantile(0.5 + 0.5 * level)
    }
}

// Coefficients are kept verbatim as published, trailing zeros included.
#[allow(clippy::excessive_precision)]
fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| -> f64 {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Fraction of truths inside the symmetric predictive interval at each
/// confidence level.
///
/// A sample counts as covered at level c when |truth − mean| ≤ z(c)·std;
/// a zero std makes the interval a single point at every level.
pub fn coverage_curve(
    mean: &[f64],
    std: &[f64],
    truth: &[f64],
    levels: &[f64],
) -> Result<Vec<(f64, f64)>, GprError> {
    check_paired(mean, truth)?;
    if std.len() != mean.len() {
        return Err(GprError::LengthMismatch {
            expected: mean.len(),
            got: std.len(),
        });
    }
    if let Some(index) = std.iter().position(|s| *s < 0.0) {
        return Err(GprError::NegativeStd { index });
    }
    if levels.iter().any(|c| !(0.0..=1.0).contains(c)) || levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(GprError::BadLevels);
    }

    let n = mean.len() as f64;
    let mut curve = Vec::with_capacity(levels.len());
    for &level in levels {
        let z = two_sided_z(level);
        let covered = mean
            .iter()
            .zip(std)
            .zip(truth)
            .filter(|((m, s), t)| {
                let threshold = if **s == 0.0 { 0.0 } else { z * **s };
                (*t - *m).abs() <= threshold
            })
            .count();
        curve.push((level, covered as f64 / n));
    }
    Ok(curve)
}
