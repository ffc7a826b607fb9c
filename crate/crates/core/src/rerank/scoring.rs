//! Debiased path scores, diversity scores and their blend.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::distribution::{PatternCounts, PatternDistribution};
use crate::graph::EntityId;
use crate::path::{pattern_of, PathPattern};
use crate::rerank::candidate::{Candidate, CandidateSet};
use crate::{Error, Result};

/// `w_π = ln(2 + n_π / Σ n)` for the patterns of one user–item pair.
pub fn pattern_weight(counts: &PatternCounts, pattern: &PathPattern) -> Result<f64> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::EmptyInput("pattern weight needs at least one path"));
    }
    let n = counts.get(pattern).copied().unwrap_or(0);
    Ok(libm::log(2.0 + n as f64 / total as f64))
}

/// `S(u, π) = w_π / D_u(π) · Σ ℓ` over the paths of pattern `π`.
pub fn pattern_preference(
    pattern: &PathPattern,
    weight: f64,
    dist: &PatternDistribution,
    path_scores: impl IntoIterator<Item = f64>,
) -> Result<f64> {
    let d = dist.get(pattern).ok_or(Error::PatternNotInVocabulary)?;
    let sum: f64 = path_scores.into_iter().sum();
    Ok(weight / d * sum)
}

/// `α S_p + (1 - α) λ S_d`.
pub fn path_fairness_score(
    alpha: f64,
    lambda: f64,
    path_score: f64,
    diversity: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(alloc::format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(alpha * path_score + (1.0 - alpha) * lambda * diversity)
}

/// Per-candidate quantities the optimizer works with, ordered by item id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub user: EntityId,
    pub items: Vec<EntityId>,
    pub rec: Vec<f64>,
    /// Candidate's additive share of `S_p`: `Σ_π S(u, π)` over its own paths.
    pub path_term: Vec<f64>,
    /// Candidate's SID `T`.
    pub sid: Vec<f64>,
}

impl ScoredCandidates {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Scores every candidate of `set` against the user's historical distribution `dist`.
///
/// The output is ordered by ascending item id, which is the tie-break order used by
/// selection and ranking.
pub fn score_candidates(
    set: &CandidateSet,
    dist: &PatternDistribution,
) -> Result<ScoredCandidates> {
    let n = set.candidates.len();
    let mut order: Vec<&Candidate> = set.candidates.iter().collect();
    order.sort_by_key(|c| c.item);
    let mut out = ScoredCandidates {
        user: set.user,
        items: Vec::with_capacity(n),
        rec: Vec::with_capacity(n),
        path_term: Vec::with_capacity(n),
        sid: Vec::with_capacity(n),
    };
    for c in order {
        let mut by_pattern: BTreeMap<PathPattern, (u64, f64)> = BTreeMap::new();
        for p in &c.paths {
            let e = by_pattern.entry(pattern_of(&p.path)).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += p.score;
        }
        let counts: PatternCounts = by_pattern
            .iter()
            .map(|(p, &(n, _))| (p.clone(), n))
            .collect();
        let mut term = 0.0;
        for (pattern, &(_, sum)) in &by_pattern {
            let w = pattern_weight(&counts, pattern)?;
            term += pattern_preference(pattern, w, dist, [sum])?;
        }
        out.items.push(c.item);
        out.rec.push(c.rec_score);
        out.path_term.push(term);
        out.sid.push(c.sid());
    }
    Ok(out)
}

fn mean_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + libm::fabs(*v), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Ratio of mean magnitudes, falling back to 1 when the denominator pool is all zero.
fn magnitude_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 && num > 0.0 {
        num / den
    } else {
        1.0
    }
}

/// `λ = mean |path term| / mean |SID|` over the whole candidate pool.
pub fn auto_lambda(pool: &[ScoredCandidates]) -> f64 {
    magnitude_ratio(
        mean_abs(pool.iter().flat_map(|s| s.path_term.iter())),
        mean_abs(pool.iter().flat_map(|s| s.sid.iter())),
    )
}

/// Per-item fairness contributions `α P_j + (1 - α) λ T_j`.
pub fn contributions(set: &ScoredCandidates, alpha: f64, lambda: f64) -> Result<Vec<f64>> {
    set.path_term
        .iter()
        .zip(&set.sid)
        .map(|(&p, &t)| path_fairness_score(alpha, lambda, p, t))
        .collect()
}

/// `γ = mean |rec score| / mean |fairness contribution|` over the pool.
pub fn auto_gamma(pool: &[ScoredCandidates], contributions: &[Vec<f64>]) -> f64 {
    magnitude_ratio(
        mean_abs(pool.iter().flat_map(|s| s.rec.iter())),
        mean_abs(contributions.iter().flatten()),
    )
}
