//! Iterative active learning over a precomputed pool Gram matrix.
//!
//! The loop is the classic pool-based protocol: fit on the acquired set,
//! score every remaining candidate with the acquisition function, move the
//! argmax into the training set, refit, and record held-out metrics. Every
//! row of the returned history reflects the model *after* that row's
//! acquisition, so the final row describes the final training set and a
//! zero budget yields exactly one row for the seed model.
//!
//! Target access goes through [`TargetSource`] with an explicit
//! [`TargetUse`] so a test harness can verify that the uncertainty
//! strategy never peeks at the labels of points it has not acquired.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gpr::{self, GprError, TestGram};

#[derive(Debug, Error)]
pub enum AlError {
    #[error("pool Gram must be square, got {rows}×{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("id {id} out of range for pool of {pool}")]
    IdOutOfRange { id: usize, pool: usize },
    #[error("seed id {id} listed twice")]
    DuplicateSeed { id: usize },
    #[error("candidate id {id} listed twice")]
    DuplicateCandidate { id: usize },
    #[error("seed set must not be empty")]
    EmptySeed,
    #[error("evaluation set must not be empty")]
    EmptyEval,
    #[error("budget {budget} exceeds the {available} unacquired pool points")]
    BudgetExceedsPool { budget: usize, available: usize },
    #[error("no target available for id {id}")]
    MissingTarget { id: usize },
    #[error(transparent)]
    Gpr(#[from] GprError),
}

/// How the next training point is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionKind {
    /// Uniform random choice among the candidates.
    Random,
    /// Highest posterior standard deviation; needs no candidate labels.
    Uncertainty,
    /// Largest |prediction − target|; needs candidate labels.
    TrueError,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Random => "random",
            AcquisitionKind::Uncertainty => "uncertainty",
            AcquisitionKind::TrueError => "true-error",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AcquisitionStrategy {
    pub kind: AcquisitionKind,
    /// Drives random scores and breaks exact score ties for the other
    /// strategies; identical seeds reproduce the run bitwise.
    pub rng_seed: u64,
}

/// What a target lookup is for; lets instrumented sources audit access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetUse {
    /// Label of an acquired training point.
    Fit,
    /// Label of an unacquired candidate (true-error scoring only).
    Score,
    /// Label of a held-out evaluation point.
    Metric,
}

pub trait TargetSource {
    fn target(&self, id: usize, usage: TargetUse) -> Option<f64>;
}

/// Plain adapter: every id maps to the slice entry regardless of use.
pub struct SliceTargets<'a>(pub &'a [f64]);

impl TargetSource for SliceTargets<'_> {
    fn target(&self, id: usize, _usage: TargetUse) -> Option<f64> {
        self.0.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlRow {
    pub iteration: usize,
    /// `None` on the seed row.
    pub chosen: Option<usize>,
    /// Acquisition score of the chosen point; `None` on the seed row.
    pub score: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlHistory {
    pub rows: Vec<AlRow>,
    /// Seed ids in the order given, then acquisitions in order.
    pub train_ids: Vec<usize>,
}

impl AlHistory {
    /// CSV rendering, one line per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,chosen_id,score,mae,rmse,jitter\n");
        for row in &self.rows {
            let chosen = row.chosen.map(|c| c.to_string()).unwrap_or_default();
            let score = row.score.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.iteration, chosen, score, row.mae, row.rmse, row.jitter
            ));
        }
        out
    }
}

/// Extracts the induced submatrix of a pool Gram; no kernel re-evaluation.
pub fn subset_gram(
    pool_gram: &DMatrix<f64>,
    row_ids: &[usize],
    col_ids: &[usize],
) -> Result<DMatrix<f64>, AlError> {
    let n = pool_gram.nrows();
    for &id in row_ids.iter().chain(col_ids) {
        if id >= n {
            return Err(AlError::IdOutOfRange { id, pool: n });
        }
    }
    Ok(DMatrix::from_fn(row_ids.len(), col_ids.len(), |i, j| {
        pool_gram[(row_ids[i], col_ids[j])]
    }))
}

fn fetch_targets<T: TargetSource + ?Sized>(
    targets: &T,
    ids: &[usize],
    usage: TargetUse,
) -> Result<Vec<f64>, AlError> {
    ids.iter()
        .map(|&id| {
            targets
                .target(id, usage)
                .ok_or(AlError::MissingTarget { id })
        })
        .collect()
}

struct FitState {
    model: gpr::GprModel,
    mae: f64,
    rmse: f64,
}

fn fit_and_evaluate<T: TargetSource + ?Sized>(
    pool_gram: &DMatrix<f64>,
    targets: &T,
    train_ids: &[usize],
    eval_ids: &[usize],
    eval_truth: &[f64],
    rel_jitter: f64,
) -> Result<FitState, AlError> {
    let train_gram = subset_gram(pool_gram, train_ids, train_ids)?;
    let train_targets = fetch_targets(targets, train_ids, TargetUse::Fit)?;
    let model = gpr::fit(&train_gram, &train_targets, rel_jitter)?;
    let cross = subset_gram(pool_gram, train_ids, eval_ids)?;
    let pred = gpr::predict(&model, &cross, None)?;
    let mae = gpr::mae(&pred.mean, eval_truth)?;
    let rmse = gpr::rmse(&pred.mean, eval_truth)?;
    Ok(FitState { model, mae, rmse })
}

/// Picks the argmax index; exact ties are resolved by a seeded draw so
/// reruns stay reproducible while no candidate is systematically favored.
fn argmax_with_ties(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!scores.is_empty());
    let best = scores
        .iter()
        .copied()
        .max_by(f64::total_cmp)
        .expect("non-empty scores");
    let tied: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == best)
        .map(|(i, _)| i)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

/// The id sets, strategy, and budget of one active-learning run.
#[derive(Debug, Clone, Copy)]
pub struct AlSetup<'a> {
    pub seed_ids: &'a [usize],
    /// Held-out ids whose metrics each row reports.
    pub eval_ids: &'a [usize],
    /// Ids the loop may acquire; `None` means every pool id. Ids already
    /// in the seed set are treated as acquired either way.
    pub candidate_ids: Option<&'a [usize]>,
    pub strategy: AcquisitionStrategy,
    pub budget: usize,
    pub rel_jitter: f64,
}

/// Runs the pool-based active-learning loop.
///
/// Row 0 holds the seed-model evaluation with no chosen id; row k ≥ 1
/// holds the k-th acquisition and the metrics of the model refit on the
/// enlarged training set. The training set grows by exactly one id per
/// iteration and every refit is a fresh factorization.
pub fn run_active_learning<T: TargetSource + ?Sized>(
    pool_gram: &DMatrix<f64>,
    targets: &T,
    setup: &AlSetup,
) -> Result<AlHistory, AlError> {
    let n = pool_gram.nrows();
    if pool_gram.ncols() != n {
        return Err(AlError::NotSquare {
            rows: n,
            cols: pool_gram.ncols(),
        });
    }
    if setup.seed_ids.is_empty() {
        return Err(AlError::EmptySeed);
    }
    if setup.eval_ids.is_empty() {
        return Err(AlError::EmptyEval);
    }
    let mut acquired = vec![false; n];
    for &id in setup.seed_ids {
        if id >= n {
            return Err(AlError::IdOutOfRange { id, pool: n });
        }
        if acquired[id] {
            return Err(AlError::DuplicateSeed { id });
        }
        acquired[id] = true;
    }
    for &id in setup.eval_ids {
        if id >= n {
            return Err(AlError::IdOutOfRange { id, pool: n });
        }
    }
    // The candidate mask: seeds count as acquired within it.
    let eligible: Vec<usize> = match setup.candidate_ids {
        None => (0..n).collect(),
        Some(ids) => {
            let mut seen = vec![false; n];
            for &id in ids {
                if id >= n {
                    return Err(AlError::IdOutOfRange { id, pool: n });
                }
                if seen[id] {
                    return Err(AlError::DuplicateCandidate { id });
                }
                seen[id] = true;
            }
            ids.to_vec()
        }
    };
    let available = eligible.iter().filter(|&&id| !acquired[id]).count();
    if setup.budget > available {
        return Err(AlError::BudgetExceedsPool {
            budget: setup.budget,
            available,
        });
    }

    let eval_truth = fetch_targets(targets, setup.eval_ids, TargetUse::Metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.strategy.rng_seed);
    let mut train_ids = setup.seed_ids.to_vec();

    let mut state = fit_and_evaluate(
        pool_gram,
        targets,
        &train_ids,
        setup.eval_ids,
        &eval_truth,
        setup.rel_jitter,
    )?;
    let mut rows = vec![AlRow {
        iteration: 0,
        chosen: None,
        score: None,
        mae: state.mae,
        rmse: state.rmse,
        jitter: state.model.jitter_used,
    }];

    for iteration in 1..=setup.budget {
        let candidates: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&id| !acquired[id])
            .collect();
        let scores = match setup.strategy.kind {
            AcquisitionKind::Random => candidates
                .iter()
                .map(|_| rng.random::<f64>())
                .collect::<Vec<f64>>(),
            AcquisitionKind::Uncertainty => {
                let cross = subset_gram(pool_gram, &train_ids, &candidates)?;
                let kss: Vec<f64> = candidates.iter().map(|&id| pool_gram[(id, id)]).collect();
                let pred = gpr::predict(&state.model, &cross, Some(TestGram::Diagonal(&kss)))?;
                pred.std.expect("diagonal test gram yields stds")
            }
            AcquisitionKind::TrueError => {
                let cross = subset_gram(pool_gram, &train_ids, &candidates)?;
                let pred = gpr::predict(&state.model, &cross, None)?;
                let truth = fetch_targets(targets, &candidates, TargetUse::Score)?;
                pred.mean
                    .iter()
                    .zip(&truth)
                    .map(|(p, t)| (p - t).abs())
                    .collect()
            }
        };

        let pick = argmax_with_ties(&scores, &mut rng);
        let chosen = candidates[pick];
        acquired[chosen] = true;
        train_ids.push(chosen);

        state = fit_and_evaluate(
            pool_gram,
            targets,
            &train_ids,
            setup.eval_ids,
            &eval_truth,
            setup.rel_jitter,
        )?;
        rows.push(AlRow {
            iteration,
            chosen: Some(chosen),
            score: Some(scores[pick]),
            mae: state.mae,
            rmse: state.rmse,
            jitter: state.model.jitter_used,
        });
    }

    Ok(AlHistory { rows, train_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::cell::RefCell;

    fn rbf_pool(xs: &[f64], length: f64) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
            let d = (xs[i] - xs[j]) / length;
            (-0.5 * d * d).exp()
        })
    }

    fn uncertainty(seed: u64) -> AcquisitionStrategy {
        AcquisitionStrategy {
            kind: AcquisitionKind::Uncertainty,
            rng_seed: seed,
        }
    }

    fn setup<'a>(
        seed_ids: &'a [usize],
        strategy: AcquisitionStrategy,
        budget: usize,
        eval_ids: &'a [usize],
        rel_jitter: f64,
    ) -> AlSetup<'a> {
        AlSetup {
            seed_ids,
            eval_ids,
            candidate_ids: None,
            strategy,
            budget,
            rel_jitter,
        }
    }

    #[test]
    fn subset_gram_trivials() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.2, 1.0, 0.4, 0.3, 0.4, 1.0]);
        assert_eq!(subset_gram(&g, &[0, 1, 2], &[0, 1, 2]).unwrap(), g);
        let single = subset_gram(&g, &[1], &[1]).unwrap();
        assert_eq!(single[(0, 0)], 1.0);
        let permuted = subset_gram(&g, &[2, 0], &[1, 2]).unwrap();
        assert_eq!(permuted[(0, 0)], g[(2, 1)]);
        assert_eq!(permuted[(1, 1)], g[(0, 2)]);
        assert!(matches!(
            subset_gram(&g, &[3], &[0]),
            Err(AlError::IdOutOfRange { id: 3, pool: 3 })
        ));
    }

    #[test]
    fn zero_budget_gives_seed_row_only() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let gram = rbf_pool(&xs, 1.0);
        let ys = [0.0, 1.0, 0.5, -0.5, 0.2];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(&[0, 4], uncertainty(1), 0, &[1, 2, 3], 1e-10),
        )
        .unwrap();
        assert_eq!(history.rows.len(), 1);
        assert_eq!(history.rows[0].iteration, 0);
        assert_eq!(history.rows[0].chosen, None);
        assert_eq!(history.rows[0].score, None);
        assert_eq!(history.train_ids, vec![0, 4]);
    }

    #[test]
    fn uncertainty_picks_the_midpoint_of_a_line() {
        // Five equally spaced points, endpoints acquired: the centre is
        // farthest from all training data, so its posterior std is
        // largest.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let gram = rbf_pool(&xs, 1.5);
        let ys = [0.3, 0.1, -0.2, 0.4, 0.0];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(&[0, 4], uncertainty(7), 1, &[1, 2, 3], 1e-10),
        )
        .unwrap();
        assert_eq!(history.rows.len(), 2);
        assert_eq!(history.rows[1].chosen, Some(2));
        assert_eq!(history.train_ids, vec![0, 4, 2]);
    }

    #[test]
    fn training_set_grows_by_one_distinct_id_per_iteration() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let gram = rbf_pool(&xs, 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let eval: Vec<usize> = (0..12).collect();
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(&[0, 11], uncertainty(3), 6, &eval, 1e-10),
        )
        .unwrap();
        assert_eq!(history.train_ids.len(), 8);
        let mut sorted = history.train_ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8, "chosen ids must be distinct");
        for (k, row) in history.rows.iter().enumerate() {
            assert_eq!(row.iteration, k);
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let gram = rbf_pool(&xs, 2.0);
        let ys: Vec<f64> = xs.iter().map(|x| (0.7 * x).cos()).collect();
        let eval: Vec<usize> = (0..10).collect();
        for kind in [
            AcquisitionKind::Random,
            AcquisitionKind::Uncertainty,
            AcquisitionKind::TrueError,
        ] {
            let strategy = AcquisitionStrategy { kind, rng_seed: 42 };
            let a = run_active_learning(
                &gram,
                &SliceTargets(&ys),
                &setup(&[0, 9], strategy, 5, &eval, 1e-10),
            )
            .unwrap();
            let b = run_active_learning(
                &gram,
                &SliceTargets(&ys),
                &setup(&[0, 9], strategy, 5, &eval, 1e-10),
            )
            .unwrap();
            assert_eq!(a, b, "strategy {} not deterministic", kind.name());
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }

    #[test]
    fn final_row_matches_a_fresh_fit_on_the_final_set() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.7).collect();
        let gram = rbf_pool(&xs, 1.3);
        let ys: Vec<f64> = xs.iter().map(|x| x * x * 0.1 - x.sin()).collect();
        let eval = [1, 3, 5, 7];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(&[0, 8], uncertainty(5), 4, &eval, 1e-9),
        )
        .unwrap();

        let train = &history.train_ids;
        let train_gram = subset_gram(&gram, train, train).unwrap();
        let train_y: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
        let model = gpr::fit(&train_gram, &train_y, 1e-9).unwrap();
        let cross = subset_gram(&gram, train, &eval).unwrap();
        let pred = gpr::predict(&model, &cross, None).unwrap();
        let truth: Vec<f64> = eval.iter().map(|&i| ys[i]).collect();
        let last = history.rows.last().unwrap();
        assert_relative_eq!(
            last.mae,
            gpr::mae(&pred.mean, &truth).unwrap(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            last.rmse,
            gpr::rmse(&pred.mean, &truth).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn true_error_acquires_the_worst_predicted_point() {
        // Identity Gram: predictions at unacquired points are all zero,
        // so the true-error score is |target| and the largest wins.
        let gram = DMatrix::identity(4, 4);
        let ys = [0.5, 0.1, -3.0, 0.2];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(
                &[0],
                AcquisitionStrategy {
                    kind: AcquisitionKind::TrueError,
                    rng_seed: 0,
                },
                1,
                &[1, 3],
                0.0,
            ),
        )
        .unwrap();
        assert_eq!(history.rows[1].chosen, Some(2));
        assert_relative_eq!(history.rows[1].score.unwrap(), 3.0, max_relative = 1e-12);
    }

    /// Records every target access so tests can audit what each strategy
    /// reads.
    struct AuditedTargets<'a> {
        values: &'a [f64],
        log: RefCell<Vec<(usize, TargetUse)>>,
    }

    impl TargetSource for AuditedTargets<'_> {
        fn target(&self, id: usize, usage: TargetUse) -> Option<f64> {
            self.log.borrow_mut().push((id, usage));
            self.values.get(id).copied()
        }
    }

    #[test]
    fn uncertainty_never_reads_candidate_targets() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let gram = rbf_pool(&xs, 1.5);
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let audited = AuditedTargets {
            values: &ys,
            log: RefCell::new(Vec::new()),
        };
        let eval = [0, 7];
        let history = run_active_learning(
            &gram,
            &audited,
            &setup(&[0, 7], uncertainty(2), 3, &eval, 1e-10),
        )
        .unwrap();

        let log = audited.log.borrow();
        assert!(
            log.iter().all(|(_, usage)| *usage != TargetUse::Score),
            "uncertainty strategy consulted a candidate target"
        );
        // Fit lookups must only ever touch acquired ids.
        let mut acquired: Vec<usize> = vec![0, 7];
        let mut fit_reads = log.iter().filter(|(_, u)| *u == TargetUse::Fit);
        // Seed fit, then one refit per acquisition.
        for step in 0..=3usize {
            if step > 0 {
                acquired.push(history.train_ids[1 + step]);
            }
            for _ in 0..acquired.len() {
                let (id, _) = fit_reads.next().expect("missing fit read");
                assert!(acquired.contains(id), "fit read unacquired id {id}");
            }
        }
        assert!(fit_reads.next().is_none());
    }

    #[test]
    fn random_strategy_reads_no_candidate_targets_either() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let gram = rbf_pool(&xs, 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let audited = AuditedTargets {
            values: &ys,
            log: RefCell::new(Vec::new()),
        };
        run_active_learning(
            &gram,
            &audited,
            &setup(
                &[0],
                AcquisitionStrategy {
                    kind: AcquisitionKind::Random,
                    rng_seed: 9,
                },
                2,
                &[5],
                1e-10,
            ),
        )
        .unwrap();
        assert!(audited
            .log
            .borrow()
            .iter()
            .all(|(_, usage)| *usage != TargetUse::Score));
    }

    #[test]
    fn exact_ties_resolve_by_seed_but_stay_valid() {
        // Identity Gram makes every candidate's posterior std identical.
        let gram = DMatrix::identity(6, 6);
        let ys = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..20u64 {
            let history = run_active_learning(
                &gram,
                &SliceTargets(&ys),
                &setup(&[0], uncertainty(seed), 1, &[0], 0.0),
            )
            .unwrap();
            let chosen = history.rows[1].chosen.unwrap();
            assert!((1..=5).contains(&chosen));
            seen.insert(chosen);
            let again = run_active_learning(
                &gram,
                &SliceTargets(&ys),
                &setup(&[0], uncertainty(seed), 1, &[0], 0.0),
            )
            .unwrap();
            assert_eq!(again.rows[1].chosen, Some(chosen));
        }
        assert!(seen.len() > 1, "tie-break never varied across 20 seeds");
    }

    #[test]
    fn candidate_restriction_protects_held_out_ids() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.4).collect();
        let gram = rbf_pool(&xs, 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let candidates = [0usize, 2, 4, 6, 8];
        let eval = [1usize, 3, 5, 7, 9];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &AlSetup {
                seed_ids: &[0],
                eval_ids: &eval,
                candidate_ids: Some(&candidates),
                strategy: uncertainty(11),
                budget: 4,
                rel_jitter: 1e-10,
            },
        )
        .unwrap();
        assert_eq!(history.train_ids.len(), 5);
        for id in &history.train_ids {
            assert!(candidates.contains(id), "acquired {id} outside candidates");
        }
        // Budget equal to the remaining candidates is fine; one more is not.
        let base = AlSetup {
            seed_ids: &[0],
            eval_ids: &eval,
            candidate_ids: Some(&candidates),
            strategy: uncertainty(11),
            budget: 5,
            rel_jitter: 1e-10,
        };
        assert!(matches!(
            run_active_learning(&gram, &SliceTargets(&ys), &base),
            Err(AlError::BudgetExceedsPool {
                budget: 5,
                available: 4
            })
        ));
        assert!(matches!(
            run_active_learning(
                &gram,
                &SliceTargets(&ys),
                &AlSetup {
                    candidate_ids: Some(&[2, 2]),
                    ..base
                }
            ),
            Err(AlError::DuplicateCandidate { id: 2 })
        ));
    }

    #[test]
    fn input_validation() {
        let gram = DMatrix::identity(4, 4);
        let ys = [0.0, 1.0, 2.0, 3.0];
        let t = SliceTargets(&ys);
        let s = uncertainty(0);
        assert!(matches!(
            run_active_learning(&gram, &t, &setup(&[], s, 0, &[1], 0.0)),
            Err(AlError::EmptySeed)
        ));
        assert!(matches!(
            run_active_learning(&gram, &t, &setup(&[0], s, 0, &[], 0.0)),
            Err(AlError::EmptyEval)
        ));
        assert!(matches!(
            run_active_learning(&gram, &t, &setup(&[0, 0], s, 0, &[1], 0.0)),
            Err(AlError::DuplicateSeed { id: 0 })
        ));
        assert!(matches!(
            run_active_learning(&gram, &t, &setup(&[4], s, 0, &[1], 0.0)),
            Err(AlError::IdOutOfRange { id: 4, pool: 4 })
        ));
        assert!(matches!(
            run_active_learning(&gram, &t, &setup(&[0], s, 4, &[1], 0.0)),
            Err(AlError::BudgetExceedsPool {
                budget: 4,
                available: 3
            })
        ));
        // True-error without labels for candidates.
        struct FitOnly<'a>(&'a [f64]);
        impl TargetSource for FitOnly<'_> {
            fn target(&self, id: usize, usage: TargetUse) -> Option<f64> {
                match usage {
                    TargetUse::Score => None,
                    _ => self.0.get(id).copied(),
                }
            }
        }
        assert!(matches!(
            run_active_learning(
                &gram,
                &FitOnly(&ys),
                &setup(
                    &[0],
                    AcquisitionStrategy {
                        kind: AcquisitionKind::TrueError,
                        rng_seed: 0
                    },
                    1,
                    &[1],
                    0.0
                )
            ),
            Err(AlError::MissingTarget { .. })
        ));
    }

    #[test]
    fn csv_rendering_shape() {
        let gram = rbf_pool(&[0.0, 1.0, 2.0], 1.0);
        let ys = [0.1, 0.2, 0.3];
        let history = run_active_learning(
            &gram,
            &SliceTargets(&ys),
            &setup(&[0], uncertainty(1), 1, &[1], 1e-10),
        )
        .unwrap();
        let csv = history.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,chosen_id,score,mae,rmse,jitter");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,,,"), "seed row: {}", lines[1]);
        assert!(lines[2].starts_with("1,"), "acquisition row: {}", lines[2]);
    }
}
