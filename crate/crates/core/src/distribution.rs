//! Per-user distribution of paths over patterns, with additive smoothing.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::graph::{EntityId, KnowledgeGraph};
use crate::path::{for_each_user_item_path, pattern_of, Path, PathPattern};
use crate::{Error, Result};

pub type PatternCounts = BTreeMap<PathPattern, u64>;
pub type PatternVocabulary = BTreeSet<PathPattern>;

/// Default pseudo-count used when building per-user distributions.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PatternDistribution {
    weights: BTreeMap<PathPattern, f64>,
    smoothing: f64,
}

impl PatternDistribution {
    /// `D(π) = (N(π) + s) / Σ_{π' ∈ vocab} (N(π') + s)`.
    pub fn from_counts(
        counts: &PatternCounts,
        smoothing: f64,
        vocab: &PatternVocabulary,
    ) -> Result<Self> {
        if !smoothing.is_finite() || smoothing < 0.0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "smoothing pseudo-count must be finite and >= 0, got {smoothing}"
            )));
        }
        if counts.keys().any(|p| !vocab.contains(p)) {
            return Err(Error::PatternNotInVocabulary);
        }
        let mass = |p: &PathPattern| counts.get(p).copied().unwrap_or(0) as f64 + smoothing;
        let total: f64 = vocab.iter().map(mass).sum();
        if vocab.is_empty() || total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        let weights = vocab
            .iter()
            .filter_map(|p| {
                let w = mass(p) / total;
                (w > 0.0).then(|| (p.clone(), w))
            })
            .collect();
        Ok(PatternDistribution { weights, smoothing })
    }

    /// Probability of `pattern`; `None` outside the vocabulary or when the pattern
    /// carries no mass (only possible without smoothing).
    pub fn get(&self, pattern: &PathPattern) -> Option<f64> {
        self.weights.get(pattern).copied()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothing > 0.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathPattern, f64)> {
        self.weights.iter().map(|(p, &w)| (p, w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Distribution of `paths` (all from one user) over `vocab`.
pub fn path_distribution(
    paths: &[Path],
    smoothing: f64,
    vocab: &PatternVocabulary,
) -> Result<PatternDistribution> {
    if let Some(first) = paths.first() {
        if paths.iter().any(|p| p.start() != first.start()) {
            return Err(Error::InvalidPath("paths start at different users".into()));
        }
    }
    let mut counts = PatternCounts::new();
    for p in paths {
        *counts.entry(pattern_of(p)).or_insert(0) += 1;
    }
    PatternDistribution::from_counts(&counts, smoothing, vocab)
}

/// Pattern counts over every user→item path of `user` (no paths are materialized).
pub fn count_user_patterns(
    g: &KnowledgeGraph,
    user: EntityId,
    max_len: usize,
) -> Result<PatternCounts> {
    let mut counts = PatternCounts::new();
    let mut last: Option<(PathPattern, u64)> = None;
    for_each_user_item_path(g, user, max_len, |_, steps| {
        match &mut last {
            Some((p, n)) if p.steps() == steps => *n += 1,
            _ => {
                if let Some((p, n)) = last.take() {
                    *counts.entry(p).or_insert(0) += n;
                }
                // steps come from the enumerator, so the length is always in range
                last = Some((PathPattern::new(steps).expect("enumerated path"), 1));
            }
        }
    })?;
    if let Some((p, n)) = last {
        *counts.entry(p).or_insert(0) += n;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelationId;
    use crate::path::PatternStep;

    fn pat(rel: u32) -> PathPattern {
        PathPattern::new(&[PatternStep::forward(RelationId(rel))]).unwrap()
    }

    fn counts(pairs: &[(u32, u64)]) -> PatternCounts {
        pairs.iter().map(|&(r, n)| (pat(r), n)).collect()
    }

    #[test]
    fn frequency_ratio() {
        let vocab: PatternVocabulary = [pat(1), pat(2)].into_iter().collect();
        let d = PatternDistribution::from_counts(&counts(&[(1, 3), (2, 1)]), 0.0, &vocab).unwrap();
        assert_eq!(d.get(&pat(1)), Some(0.75));
        assert_eq!(d.get(&pat(2)), Some(0.25));
    }

    #[test]
    fn single_pattern() {
        let vocab: PatternVocabulary = [pat(1)].into_iter().collect();
        let d = PatternDistribution::from_counts(&counts(&[(1, 4)]), 0.0, &vocab).unwrap();
        assert_eq!(d.get(&pat(1)), Some(1.0));
    }

    #[test]
    fn laplace_smoothing() {
        let vocab: PatternVocabulary = [pat(1), pat(2)].into_iter().collect();
        let d = PatternDistribution::from_counts(&counts(&[(1, 1)]), 1.0, &vocab).unwrap();
        assert!((d.get(&pat(1)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.get(&pat(2)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(d.is_smoothed());
    }

    #[test]
    fn empty_without_smoothing_is_undefined() {
        let vocab: PatternVocabulary = [pat(1)].into_iter().collect();
        assert_eq!(
            path_distribution(&[], 0.0, &vocab).unwrap_err(),
            Error::EmptyDistribution
        );
        let d = path_distribution(&[], 1.0, &vocab).unwrap();
        assert_eq!(d.get(&pat(1)), Some(1.0));
    }

    #[test]
    fn observed_pattern_must_be_in_vocab() {
        let vocab: PatternVocabulary = [pat(1)].into_iter().collect();
        assert_eq!(
            PatternDistribution::from_counts(&counts(&[(2, 1)]), 1.0, &vocab).unwrap_err(),
            Error::PatternNotInVocabulary
        );
    }

    #[test]
    fn mixed_start_users_rejected() {
        use crate::graph::EntityId;
        let s = [PatternStep::forward(RelationId(0))];
        let a = Path::new(&[EntityId(0), EntityId(2)], &s).unwrap();
        let b = Path::new(&[EntityId(1), EntityId(2)], &s).unwrap();
        let vocab: PatternVocabulary = [pat(0)].into_iter().collect();
        assert!(matches!(
            path_distribution(&[a, b], 0.0, &vocab),
            Err(Error::InvalidPath(_))
        ));
    }
}
