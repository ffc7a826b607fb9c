//! Fairness-constrained re-ranking.
//!
//! The pipeline scores every candidate (debiased path term and SID), picks `K` of the
//! `N` candidates per user by maximizing the summed preference under two disparity
//! bounds, and orders the picks by a blend of fairness contribution and preference.

mod candidate;
mod config;
mod oracle;
mod problem;
mod rank;
mod scoring;
mod solver;

pub use candidate::{Candidate, CandidateSet, ScoredPath};
pub use config::{ConstraintMode, Epsilon, FairnessConfig, Scale, SolverBudget};
pub use oracle::{exhaustive_oracle, instance_size, OracleOutcome, ORACLE_LIMIT};
pub use problem::{violation, Evaluation, SelectionMatrix, SelectionProblem, UserCandidates};
pub use rank::{rank_selected, ranking_score};
pub use scoring::{
    auto_gamma, auto_lambda, contributions, path_fairness_score, pattern_preference,
    pattern_weight, score_candidates, ScoredCandidates,
};
pub use solver::{solve_constrained_selection, Move, SolveOutcome, TraceEvent, TraceRow};

use alloc::vec::Vec;

use crate::graph::EntityId;
use crate::metrics::Group;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub lambda: f64,
    pub gamma: f64,
    /// Resolved `[quality, diversity]` bounds.
    pub epsilon: [f64; 2],
    /// Per-user fairness contribution of every candidate, in candidate order.
    pub contributions: Vec<Vec<f64>>,
    pub baseline: SelectionMatrix,
    pub baseline_eval: Evaluation,
    /// Unconstrained top-K of every user by preference.
    pub baseline_lists: Vec<Vec<EntityId>>,
    pub solve: SolveOutcome,
    /// Fairness-aware top-K lists.
    pub fair_lists: Vec<Vec<EntityId>>,
}

/// Builds the selection problem for `pool` (one entry per user, `groups` aligned).
pub fn build_problem(
    pool: &[ScoredCandidates],
    groups: &[Group],
    k: usize,
    mode: ConstraintMode,
) -> Result<SelectionProblem> {
    SelectionProblem::new(
        pool.iter().map(|s| s.rec.clone()).collect(),
        pool.iter().map(|s| s.sid.clone()).collect(),
        groups.to_vec(),
        k,
        mode,
    )
}

/// Resolves `λ` and `γ` for `pool` and returns `(λ, per-candidate contributions, γ)`.
pub fn fairness_contributions(
    pool: &[ScoredCandidates],
    alpha: f64,
    lambda: Scale,
    gamma: Scale,
) -> Result<(f64, Vec<Vec<f64>>, f64)> {
    let lambda = match lambda {
        Scale::Auto => auto_lambda(pool),
        Scale::Fixed(v) => v,
    };
    let contributions: Vec<Vec<f64>> = pool
        .iter()
        .map(|s| contributions(s, alpha, lambda))
        .collect::<Result<_>>()?;
    let gamma = match gamma {
        Scale::Auto => auto_gamma(pool, &contributions),
        Scale::Fixed(v) => v,
    };
    Ok((lambda, contributions, gamma))
}

/// Ranked item lists of every user for `selection`.
pub fn ranked_lists(
    pool: &[ScoredCandidates],
    selection: &SelectionMatrix,
    contributions: &[Vec<f64>],
    beta: f64,
    gamma: f64,
) -> Vec<Vec<EntityId>> {
    pool.iter()
        .enumerate()
        .map(|(i, s)| {
            rank_selected(selection.row(i), &s.rec, &contributions[i], beta, gamma)
                .into_iter()
                .map(|j| s.items[j])
                .collect()
        })
        .collect()
}

/// Runs scoring, constrained selection and ranking for every user in `pool`.
///
/// The selection depends only on `k`, `mode`, `epsilon` and the budget; `alpha`,
/// `beta`, `lambda` and `gamma` only affect the final ordering.
pub fn rerank(
    pool: &[ScoredCandidates],
    groups: &[Group],
    cfg: &FairnessConfig,
    trace: bool,
) -> Result<RerankOutcome> {
    cfg.validate()?;
    let (lambda, contributions, gamma) =
        fairness_contributions(pool, cfg.alpha, cfg.lambda, cfg.gamma)?;

    let problem = build_problem(pool, groups, cfg.k, cfg.mode)?;
    let baseline = problem.greedy_top_k();
    let baseline_eval = problem.evaluate(&baseline)?;
    let epsilon = [
        cfg.epsilon[0].resolve(baseline_eval.values[0]),
        cfg.epsilon[1].resolve(baseline_eval.values[1]),
    ];
    let solve = solve_constrained_selection(&problem, &baseline, epsilon, &cfg.budget, trace)?;

    let baseline_lists = ranked_lists(pool, &baseline, &contributions, 0.0, gamma);
    let fair_lists = ranked_lists(pool, &solve.selection, &contributions, cfg.beta, gamma);

    Ok(RerankOutcome {
        lambda,
        gamma,
        epsilon,
        contributions,
        baseline,
        baseline_eval,
        baseline_lists,
        solve,
        fair_lists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pool() -> Vec<ScoredCandidates> {
        vec![
            ScoredCandidates {
                user: EntityId(0),
                items: vec![EntityId(10), EntityId(11), EntityId(12)],
                rec: vec![0.9, 0.8, 0.1],
                path_term: vec![1.0, 2.0, 0.5],
                sid: vec![0.0, 0.9, 0.5],
            },
            ScoredCandidates {
                user: EntityId(1),
                items: vec![EntityId(10), EntityId(13), EntityId(14)],
                rec: vec![0.5, 0.7, 0.6],
                path_term: vec![0.3, 0.2, 0.1],
                sid: vec![0.9, 0.2, 0.4],
            },
        ]
    }

    #[test]
    fn no_op_config_reproduces_baseline() {
        let cfg = FairnessConfig {
            beta: 0.0,
            k: 2,
            epsilon: [Epsilon::INACTIVE; 2],
            ..FairnessConfig::default()
        };
        let out = rerank(&pool(), &[Group::Active, Group::Inactive], &cfg, false).unwrap();
        assert_eq!(out.fair_lists, out.baseline_lists);
        assert_eq!(
            out.baseline_lists,
            vec![
                vec![EntityId(10), EntityId(11)],
                vec![EntityId(13), EntityId(14)]
            ]
        );
    }

    #[test]
    fn baseline_epsilon_demands_improvement() {
        let cfg = FairnessConfig {
            k: 1,
            ..FairnessConfig::default()
        };
        let out = rerank(&pool(), &[Group::Active, Group::Inactive], &cfg, false).unwrap();
        assert_eq!(out.epsilon, out.baseline_eval.values);
        if out.solve.feasible {
            for c in 0..2 {
                assert!(out.solve.evaluation.values[c] < out.epsilon[c]);
            }
        }
    }
}
