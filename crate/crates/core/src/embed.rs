//! Translational embeddings and the scores derived from them.
//!
//! A triple `(h, r, t)` scores `(h + r) · t`. Training minimises the margin ranking
//! loss `max(0, margin - s(pos) + s(neg))` over uniformly corrupted triples with
//! plain SGD; entity vectors are projected back onto the unit sphere after every
//! update, relation vectors are left free.
//!
//! The path score of `e0 -r1-> e1 ... -rn-> en` is `Σ_i (e0 + r_i) · e_i`; reversed
//! steps use the same relation vector as forward ones.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::path::Path;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 32,
            epochs: 25,
            learning_rate: 0.05,
            margin: 1.0,
            negatives_per_positive: 2,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be positive")));
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "embedding dim must be >= 2, got {}",
                self.dim
            )));
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad("margin");
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives_per_positive");
        }
        Ok(())
    }
}

/// Gradient laid out like the table: `entities[e * dim + k]`, `relations[r * dim + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGradient {
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = libm::sqrt(dot(v, v));
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

impl EmbeddingTable {
    /// Table from explicit vectors, indexed by entity / relation id.
    pub fn new(dim: usize, entities: Vec<Vec<f64>>, relations: Vec<Vec<f64>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "embedding dim must be >= 2, got {dim}"
            )));
        }
        let flatten = |rows: Vec<Vec<f64>>, kind: &str| -> Result<Vec<f64>> {
            let mut flat = Vec::with_capacity(rows.len() * dim);
            for (i, row) in rows.into_iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "{kind} #{i} has {} components, expected {dim}",
                        row.len()
                    )));
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteValue);
                }
                flat.extend(row);
            }
            Ok(flat)
        };
        Ok(EmbeddingTable {
            dim,
            entities: flatten(entities, "entity")?,
            relations: flatten(relations, "relation")?,
        })
    }

    /// Checks that the table covers every entity and relation of `g`.
    pub fn check_covers(&self, g: &KnowledgeGraph) -> Result<()> {
        if self.num_entities() < g.num_entities() {
            let missing = EntityId(self.num_entities() as u32);
            return Err(Error::MissingEmbedding(g.entity_name(missing).into()));
        }
        if self.num_relations() < g.num_relations() {
            let missing = RelationId(self.num_relations() as u32);
            return Err(Error::MissingEmbedding(g.relation_name(missing).into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len() / self.dim
    }

    pub fn entity(&self, id: EntityId) -> Result<&[f64]> {
        let i = id.index() * self.dim;
        self.entities
            .get(i..i + self.dim)
            .ok_or_else(|| Error::MissingEmbedding(format!("entity #{}", id.0)))
    }

    pub fn relation(&self, id: RelationId) -> Result<&[f64]> {
        let i = id.index() * self.dim;
        self.relations
            .get(i..i + self.dim)
            .ok_or_else(|| Error::MissingEmbedding(format!("relation #{}", id.0)))
    }

    fn entity_mut(&mut self, id: EntityId) -> &mut [f64] {
        let i = id.index() * self.dim;
        &mut self.entities[i..i + self.dim]
    }

    fn relation_mut(&mut self, id: RelationId) -> &mut [f64] {
        let i = id.index() * self.dim;
        &mut self.relations[i..i + self.dim]
    }

    /// Mutable flat parameter access (entities first), used by gradient checks.
    pub fn parameters_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.entities, &mut self.relations)
    }

    /// `(h + r) · t`.
    pub fn triple_score(&self, t: &Triple) -> Result<f64> {
        let h = self.entity(t.head)?;
        let r = self.relation(t.relation)?;
        let tail = self.entity(t.tail)?;
        Ok(hop_score(h, r, tail))
    }
}

#[inline]
fn hop_score(origin: &[f64], rel: &[f64], target: &[f64]) -> f64 {
    origin
        .iter()
        .zip(rel)
        .zip(target)
        .map(|((o, r), t)| (o + r) * t)
        .sum()
}

/// `Σ_i (e0 + r_i) · e_i` over the hops of `path`.
pub fn path_score(path: &Path, emb: &EmbeddingTable) -> Result<f64> {
    path_score_parts(path.nodes(), path.steps().iter().map(|s| s.relation), emb)
}

/// [`path_score`] over raw node / relation sequences.
pub fn path_score_parts<I>(nodes: &[EntityId], relations: I, emb: &EmbeddingTable) -> Result<f64>
where
    I: IntoIterator<Item = RelationId>,
{
    let Some(&start) = nodes.first() else {
        return Err(Error::InvalidPath("path without nodes".into()));
    };
    let origin = emb.entity(start)?;
    let mut total = 0.0;
    for (node, rel) in nodes[1..].iter().zip(relations) {
        total += hop_score(origin, emb.relation(rel)?, emb.entity(*node)?);
    }
    Ok(total)
}

/// `(u + r_purchase) · v`, the score of the direct purchase path `u -> v`.
pub fn preference_score(
    user: EntityId,
    item: EntityId,
    purchase: RelationId,
    emb: &EmbeddingTable,
) -> Result<f64> {
    Ok(hop_score(
        emb.entity(user)?,
        emb.relation(purchase)?,
        emb.entity(item)?,
    ))
}

/// `Σ max(0, margin - s(pos) + s(neg))` over `(positive, negative)` pairs.
pub fn margin_loss(emb: &EmbeddingTable, pairs: &[(Triple, Triple)], margin: f64) -> Result<f64> {
    let mut loss = 0.0;
    for (pos, neg) in pairs {
        loss += (margin - emb.triple_score(pos)? + emb.triple_score(neg)?).max(0.0);
    }
    Ok(loss)
}

/// Analytic gradient of [`margin_loss`] with respect to every parameter.
pub fn margin_loss_gradient(
    emb: &EmbeddingTable,
    pairs: &[(Triple, Triple)],
    margin: f64,
) -> Result<EmbeddingGradient> {
    let mut grad = EmbeddingGradient {
        entities: vec![0.0; emb.entities.len()],
        relations: vec![0.0; emb.relations.len()],
    };
    let d = emb.dim;
    for (pos, neg) in pairs {
        if margin - emb.triple_score(pos)? + emb.triple_score(neg)? <= 0.0 {
            continue;
        }
        for (t, sign) in [(pos, -1.0), (neg, 1.0)] {
            let h = emb.entity(t.head)?;
            let r = emb.relation(t.relation)?;
            let tail = emb.entity(t.tail)?;
            for k in 0..d {
                grad.entities[t.head.index() * d + k] += sign * tail[k];
                grad.relations[t.relation.index() * d + k] += sign * tail[k];
                grad.entities[t.tail.index() * d + k] += sign * (h[k] + r[k]);
            }
        }
    }
    Ok(grad)
}

fn corrupt(rng: &mut ChaCha8Rng, t: &Triple, n_entities: usize) -> Triple {
    let mut neg = *t;
    let replace_head = rng.random_bool(0.5);
    loop {
        let e = EntityId(rng.random_range(0..n_entities as u32));
        if replace_head {
            neg.head = e;
        } else {
            neg.tail = e;
        }
        if neg != *t || n_entities < 2 {
            return neg;
        }
    }
}

/// Trains a table for `g`; identical config and graph give identical tables.
pub fn train_embeddings(g: &KnowledgeGraph, cfg: &TrainConfig) -> Result<EmbeddingTable> {
    train_embeddings_with_history(g, cfg).map(|(table, _)| table)
}

/// Like [`train_embeddings`], also returning the summed loss of every epoch.
pub fn train_embeddings_with_history(
    g: &KnowledgeGraph,
    cfg: &TrainConfig,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    cfg.validate()?;
    if g.num_triples() == 0 {
        return Err(Error::EmptyInput("knowledge graph has no triples"));
    }
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 1.0 / libm::sqrt(d as f64);
    let mut table = EmbeddingTable {
        dim: d,
        entities: (0..g.num_entities() * d)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        relations: (0..g.num_relations() * d)
            .map(|_| rng.random_range(-bound..bound))
            .collect(),
    };
    for e in g.entities() {
        normalize(table.entity_mut(e));
    }

    let mut order: Vec<Triple> = g.triples().to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut scratch = vec![0.0; 6 * d];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for pos in &order {
            for _ in 0..cfg.negatives_per_positive {
                let neg = corrupt(&mut rng, pos, g.num_entities());
                let loss = cfg.margin - table.triple_score(pos)? + table.triple_score(&neg)?;
                if loss <= 0.0 {
                    continue;
                }
                epoch_loss += loss;
                sgd_step(&mut table, pos, &neg, cfg.learning_rate, &mut scratch);
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(epoch_loss);
    }
    if table
        .entities
        .iter()
        .chain(&table.relations)
        .any(|x| !x.is_finite())
    {
        return Err(Error::NonFiniteLoss {
            epoch: cfg.epochs.saturating_sub(1),
        });
    }
    Ok((table, history))
}

/// One SGD step on an active hinge; all gradient terms are read before any write.
fn sgd_step(table: &mut EmbeddingTable, pos: &Triple, neg: &Triple, lr: f64, scratch: &mut [f64]) {
    let d = table.dim;
    let (g_pos_t, rest) = scratch.split_at_mut(d);
    let (g_neg_t, rest) = rest.split_at_mut(d);
    let (pos_tail, rest) = rest.split_at_mut(d);
    let (neg_tail, _) = rest.split_at_mut(d);
    {
        let (h, r, t) = (
            table.entity(pos.head).unwrap(),
            table.relation(pos.relation).unwrap(),
            table.entity(pos.tail).unwrap(),
        );
        for k in 0..d {
            g_pos_t[k] = h[k] + r[k];
            pos_tail[k] = t[k];
        }
        let (h, r, t) = (
            table.entity(neg.head).unwrap(),
            table.relation(neg.relation).unwrap(),
            table.entity(neg.tail).unwrap(),
        );
        for k in 0..d {
            g_neg_t[k] = h[k] + r[k];
            neg_tail[k] = t[k];
        }
    }
    // loss = margin - s(pos) + s(neg); descend along -grad
    for k in 0..d {
        table.entity_mut(pos.head)[k] += lr * pos_tail[k];
        table.relation_mut(pos.relation)[k] += lr * pos_tail[k];
        table.entity_mut(pos.tail)[k] += lr * g_pos_t[k];
        table.entity_mut(neg.head)[k] -= lr * neg_tail[k];
        table.relation_mut(neg.relation)[k] -= lr * neg_tail[k];
        table.entity_mut(neg.tail)[k] -= lr * g_neg_t[k];
    }
    for e in [pos.head, pos.tail, neg.head, neg.tail] {
        normalize(table.entity_mut(e));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, TripleRecord};
    use crate::path::PatternStep;

    fn table_2d(entities: &[[f64; 2]], relations: &[[f64; 2]]) -> EmbeddingTable {
        EmbeddingTable::new(
            2,
            entities.iter().map(|v| v.to_vec()).collect(),
            relations.iter().map(|v| v.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_hop_dot_product() {
        let emb = table_2d(&[[1.0, 0.0], [1.0, 1.0]], &[[0.0, 1.0]]);
        let p = Path::new(
            &[EntityId(0), EntityId(1)],
            &[PatternStep::forward(RelationId(0))],
        )
        .unwrap();
        assert_eq!(path_score(&p, &emb).unwrap(), 2.0);
    }

    #[test]
    fn zero_origin_and_relations_give_zero() {
        let emb = table_2d(&[[0.0, 0.0], [3.0, -1.0], [0.5, 2.0]], &[[0.0, 0.0]]);
        let p = Path::new(
            &[EntityId(0), EntityId(1), EntityId(2)],
            &[
                PatternStep::forward(RelationId(0)),
                PatternStep::reversed(RelationId(0)),
            ],
        )
        .unwrap();
        assert_eq!(path_score(&p, &emb).unwrap(), 0.0);
    }

    #[test]
    fn two_hops_decompose() {
        let emb = table_2d(
            &[[0.3, -0.2], [1.5, 0.5], [-0.7, 2.0]],
            &[[0.1, 0.9], [-1.0, 0.25]],
        );
        let steps = [
            PatternStep::forward(RelationId(0)),
            PatternStep::reversed(RelationId(1)),
        ];
        let p = Path::new(&[EntityId(0), EntityId(1), EntityId(2)], &steps).unwrap();
        // hop terms by hand with the shared origin e0 = (0.3, -0.2)
        let hop1 = (0.3 + 0.1) * 1.5 + (-0.2 + 0.9) * 0.5;
        let hop2 = (0.3 - 1.0) * -0.7 + (-0.2 + 0.25) * 2.0;
        assert!((path_score(&p, &emb).unwrap() - (hop1 + hop2)).abs() < 1e-12);
    }

    #[test]
    fn preference_matches_direct_path() {
        let emb = table_2d(&[[1.0, 0.0], [2.0, 0.0]], &[[1.0, 0.0]]);
        assert_eq!(
            preference_score(EntityId(0), EntityId(1), RelationId(0), &emb).unwrap(),
            4.0
        );
        let p = Path::new(
            &[EntityId(0), EntityId(1)],
            &[PatternStep::forward(RelationId(0))],
        )
        .unwrap();
        assert_eq!(path_score(&p, &emb).unwrap(), 4.0);
        let zero = table_2d(&[[0.0, 0.0], [2.0, 7.0]], &[[0.0, 0.0]]);
        assert_eq!(
            preference_score(EntityId(0), EntityId(1), RelationId(0), &zero).unwrap(),
            0.0
        );
    }

    #[test]
    fn missing_embedding() {
        let emb = table_2d(&[[1.0, 0.0]], &[[1.0, 0.0]]);
        assert!(matches!(
            preference_score(EntityId(0), EntityId(3), RelationId(0), &emb),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig {
            dim: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(EmbeddingTable::new(1, vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let g = load_graph([
            TripleRecord::from_prefixed(0, "user:a", "purchase", "item:x"),
            TripleRecord::from_prefixed(0, "user:b", "purchase", "item:y"),
        ])
        .unwrap();
        let cfg = TrainConfig {
            dim: 4,
            epochs: 5,
            ..TrainConfig::default()
        };
        let a = train_embeddings(&g, &cfg).unwrap();
        let b = train_embeddings(&g, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_embeddings(&g, &TrainConfig { seed: 99, ..cfg }).unwrap();
        assert_ne!(a, c);
    }
}
