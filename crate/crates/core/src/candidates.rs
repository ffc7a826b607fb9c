//! Top-N candidate construction and pool scoring.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::{PatternCounts, PatternDistribution, PatternVocabulary};
use crate::embed::{path_score_parts, preference_score, EmbeddingTable};
use crate::graph::{EntityClass, EntityId, KnowledgeGraph};
use crate::path::{for_each_user_item_path, pattern_of, Path, PathPattern, DEFAULT_MAX_LEN};
use crate::rerank::{score_candidates, Candidate, CandidateSet, ScoredCandidates, ScoredPath};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    /// Candidates per user (`N`).
    pub top_n: usize,
    pub max_len: usize,
    /// Highest-scoring paths kept per candidate.
    pub max_paths_per_candidate: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            top_n: 100,
            max_len: DEFAULT_MAX_LEN,
            max_paths_per_candidate: 50,
        }
    }
}

/// Pattern counts over all of `user`'s paths plus the items those paths reach.
pub fn user_history(
    g: &KnowledgeGraph,
    user: EntityId,
    max_len: usize,
) -> Result<(PatternCounts, Vec<EntityId>)> {
    let mut counts = PatternCounts::new();
    let mut reached = vec![false; g.num_entities()];
    let mut last: Option<(PathPattern, u64)> = None;
    for_each_user_item_path(g, user, max_len, |nodes, steps| {
        reached[nodes[nodes.len() - 1].index()] = true;
        match &mut last {
            Some((p, n)) if p.steps() == steps => *n += 1,
            _ => {
                if let Some((p, n)) = last.take() {
                    *counts.entry(p).or_insert(0) += n;
                }
                last = Some((PathPattern::new(steps).expect("enumerated path"), 1));
            }
        }
    })?;
    if let Some((p, n)) = last {
        *counts.entry(p).or_insert(0) += n;
    }
    let items = reached
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| EntityId(i as u32))
        .collect();
    Ok((counts, items))
}

/// Top-N unpurchased reachable items of `user` by preference, each with its
/// highest-scoring paths.
pub fn build_user_candidates(
    data: &Dataset,
    emb: &EmbeddingTable,
    user: EntityId,
    cfg: &CandidateConfig,
) -> Result<CandidateSet> {
    if cfg.top_n == 0 || cfg.max_paths_per_candidate == 0 {
        return Err(Error::InvalidConfig(
            "top_n and max_paths_per_candidate must be positive".into(),
        ));
    }
    let g = data.graph();
    if g.class(user) != EntityClass::User {
        return Err(Error::NotAUser(g.entity_name(user).into()));
    }
    let purchase = data.purchase_relation();
    let (_, reached) = user_history(g, user, cfg.max_len)?;
    let owned = data.train_purchased(user);
    let mut scored: Vec<(f64, EntityId)> = Vec::new();
    for v in reached.into_iter().filter(|v| !owned.contains(v)) {
        scored.push((preference_score(user, v, purchase, emb)?, v));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(cfg.top_n);

    let mut slot = vec![usize::MAX; g.num_entities()];
    for (i, &(_, v)) in scored.iter().enumerate() {
        slot[v.index()] = i;
    }
    let cap = cfg.max_paths_per_candidate;
    let mut paths: Vec<Vec<(f64, Path)>> = vec![Vec::new(); scored.len()];
    let mut failure = None;
    let keep_best = |list: &mut Vec<(f64, Path)>| {
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        list.truncate(cap);
    };
    for_each_user_item_path(g, user, cfg.max_len, |nodes, steps| {
        let s = slot[nodes[nodes.len() - 1].index()];
        if s == usize::MAX || failure.is_some() {
            return;
        }
        let scored_path = path_score_parts(nodes, steps.iter().map(|st| st.relation), emb)
            .and_then(|score| Path::new(nodes, steps).map(|p| (score, p)));
        match scored_path {
            Ok(entry) => {
                let list = &mut paths[s];
                list.push(entry);
                if list.len() >= 4 * cap {
                    keep_best(list);
                }
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut candidates = Vec::with_capacity(scored.len());
    for ((rec, item), mut list) in scored.into_iter().zip(paths) {
        keep_best(&mut list);
        if list.is_empty() {
            continue;
        }
        candidates.push(Candidate {
            item,
            rec_score: rec,
            paths: list
                .into_iter()
                .map(|(score, path)| ScoredPath { path, score })
                .collect(),
        });
    }
    Ok(CandidateSet { user, candidates })
}

/// Per-user historical pattern distributions over a shared vocabulary.
#[derive(Debug, Clone)]
pub struct PoolHistory {
    pub vocabulary: PatternVocabulary,
    pub distributions: Vec<PatternDistribution>,
}

/// Builds smoothed distributions for the users of `sets` from their training paths.
///
/// The vocabulary is every pattern seen in those users' training paths together with
/// every pattern used by a candidate path, so externally produced candidates whose
/// patterns never occur in training still get a (smoothed) probability.
pub fn pool_history(
    histories: &[PatternCounts],
    sets: &[CandidateSet],
    smoothing: f64,
) -> Result<PoolHistory> {
    if histories.len() != sets.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "{} histories for {} candidate sets",
            histories.len(),
            sets.len()
        )));
    }
    let mut vocabulary: PatternVocabulary =
        histories.iter().flat_map(|h| h.keys().cloned()).collect();
    for set in sets {
        for c in &set.candidates {
            for p in &c.paths {
                vocabulary.insert(pattern_of(&p.path));
            }
        }
    }
    let distributions = histories
        .iter()
        .map(|h| PatternDistribution::from_counts(h, smoothing, &vocabulary))
        .collect::<Result<_>>()?;
    Ok(PoolHistory {
        vocabulary,
        distributions,
    })
}

/// Scores every candidate set against its user's distribution.
pub fn score_pool(sets: &[CandidateSet], history: &PoolHistory) -> Result<Vec<ScoredCandidates>> {
    sets.iter()
        .zip(&history.distributions)
        .map(|(s, d)| score_candidates(s, d))
        .collect()
}

/// Sequential end-to-end candidate construction for every user of `data`.
pub fn build_candidates(
    data: &Dataset,
    emb: &EmbeddingTable,
    cfg: &CandidateConfig,
) -> Result<Vec<CandidateSet>> {
    data.graph()
        .users()
        .map(|u| build_user_candidates(data, emb, u, cfg))
        .collect()
}
