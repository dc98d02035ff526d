//! Path-series evaluation of the kernel.
//!
//! The linear-system solution can equivalently be written as a sum over
//! simultaneous walk lengths: the first term pairs every vertex with every
//! vertex (weighted by vertex kernel and stop probabilities), and each
//! subsequent term extends both walks by one step through the coupling.
//! Truncating the series gives an independent check on the solver — the
//! terms are nonnegative, so the truncation is monotone from below, and
//! each step is damped by at least the product of the two graphs' largest
//! survival probabilities, giving a computable geometric tail bound.

use crate::graph::MolecularGraph;
use crate::kernel::system::KroneckerSystem;
use crate::kernel::{CouplingStorage, KernelError, KernelHyperparams};

/// Longest series any caller can request; beyond this the stop
/// probabilities are so small that the series is the wrong tool.
const MAX_SERIES_LEN: usize = 1_000_000;

/// Kernel value from the walk series truncated at `max_len` terms.
///
/// Monotone nondecreasing in `max_len` and convergent to the solver's
/// value. Intended for small graphs and tests; cost grows with
/// `max_len · nnz(coupling)`.
pub fn kernel_series(
    g: &MolecularGraph,
    g_prime: &MolecularGraph,
    hp: &KernelHyperparams,
    max_len: usize,
) -> Result<f64, KernelError> {
    assert!(max_len >= 1, "series needs at least one term");
    let sys = KroneckerSystem::assemble(g, g_prime, hp, CouplingStorage::OnTheFly)?;
    let dim = sys.dim();
    let vx = sys.vx();
    let dx = sys.dx();

    // First term: both walks stop immediately.
    let mut x: Vec<f64> = (0..dim).map(|r| vx[r] * sys.qx()[r]).collect();
    let mut total: f64 = x.iter().sum();
    let mut cx = vec![0.0; dim];
    for _ in 1..max_len {
        sys.apply_coupling(&x, &mut cx);
        for r in 0..dim {
            x[r] = vx[r] / dx[r] * cx[r];
        }
        let term: f64 = x.iter().sum();
        total += term;
        if term == 0.0 {
            break;
        }
    }
    Ok(sys.px() * total)
}

/// Number of series terms guaranteeing a relative truncation error below
/// `rel_tol`.
///
/// Per step, each graph's walk survives with probability at most
/// `max(1 − stop)` (zero if every vertex is terminal), so term ℓ is at
/// most `C₀·ρ^(ℓ−1)` of the first term with ρ the product of the two
/// survival maxima and `C₀` covering the spread between the largest and
/// smallest stop probabilities and the vertex-kernel floor.
pub fn series_length_for_tolerance(
    g: &MolecularGraph,
    g_prime: &MolecularGraph,
    hp: &KernelHyperparams,
    rel_tol: f64,
) -> Result<usize, KernelError> {
    hp.validate()?;
    assert!(rel_tol > 0.0, "tolerance must be positive");

    let survival_max =
        |graph: &MolecularGraph| graph.stop.iter().map(|q| 1.0 - q).fold(0.0f64, f64::max);
    let rho = survival_max(g) * survival_max(g_prime);
    if rho == 0.0 {
        // Every walk stops after one step; the series is exact at length 1.
        return Ok(1);
    }

    let extremes = |graph: &MolecularGraph| {
        let lo = graph.stop.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = graph.stop.iter().copied().fold(0.0f64, f64::max);
        (lo, hi)
    };
    let (q1_min, q1_max) = extremes(g);
    let (q2_min, q2_max) = extremes(g_prime);
    // Tail after L terms ≤ px·nn′·q_max·q′_max·ρ^L/(1−ρ), while the total
    // is at least the first term ≥ px·nn′·ν·q_min·q′_min.
    let c0 = (q1_max * q2_max) / (hp.nu * q1_min * q2_min);
    let needed = ((rel_tol * (1.0 - rho) / c0).ln() / rho.ln()).ceil();
    if !needed.is_finite() || needed >= MAX_SERIES_LEN as f64 {
        return Ok(MAX_SERIES_LEN);
    }
    Ok((needed as usize).max(1))
}
