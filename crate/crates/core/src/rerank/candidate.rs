use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::distribution::PatternCounts;
use crate::graph::{EntityId, KnowledgeGraph};
use crate::metrics::simpson_diversity;
use crate::path::{pattern_of, Path};
use crate::{Error, Result};

/// An explanation path together with its score `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPath {
    pub path: Path,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub item: EntityId,
    pub rec_score: f64,
    pub paths: Vec<ScoredPath>,
}

impl Candidate {
    pub fn pattern_counts(&self) -> PatternCounts {
        let mut counts = PatternCounts::new();
        for p in &self.paths {
            *counts.entry(pattern_of(&p.path)).or_insert(0) += 1;
        }
        counts
    }

    /// Simpson's index of diversity over the patterns of this candidate's paths.
    pub fn sid(&self) -> f64 {
        let counts: Vec<u64> = self.pattern_counts().into_values().collect();
        simpson_diversity(&counts)
    }
}

/// Top-N candidates of one user, in the order produced upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub user: EntityId,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Checks the optimizer preconditions: at least `k` candidates, distinct items,
    /// finite scores, and every candidate explained by paths from this user to it.
    pub fn validate(&self, g: &KnowledgeGraph, k: usize) -> Result<()> {
        let user = || g.entity_name(self.user).to_string();
        if self.candidates.len() < k {
            return Err(Error::TooFewCandidates {
                user: user(),
                have: self.candidates.len(),
                need: k,
            });
        }
        let mut seen = BTreeSet::new();
        for c in &self.candidates {
            if !seen.insert(c.item) {
                return Err(Error::DuplicateCandidate {
                    user: user(),
                    item: g.entity_name(c.item).to_string(),
                });
            }
            if c.paths.is_empty() {
                return Err(Error::EmptyCandidatePaths {
                    user: user(),
                    item: g.entity_name(c.item).to_string(),
                });
            }
            if !c.rec_score.is_finite() || c.paths.iter().any(|p| !p.score.is_finite()) {
                return Err(Error::NonFiniteValue);
            }
            for p in &c.paths {
                if p.path.start() != self.user || p.path.end() != c.item {
                    return Err(Error::InvalidPath(alloc::format!(
                        "path of candidate `{}` does not run from `{}` to it",
                        g.entity_name(c.item),
                        g.entity_name(self.user)
                    )));
                }
            }
        }
        Ok(())
    }
}
