//! Training graph plus held-out test purchases.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{EntityClass, EntityId, KnowledgeGraph, RelationId};
use crate::{Error, Result};

/// Relation linking a user to a purchased item.
pub const PURCHASE: &str = "purchase";

/// Lower bounds of the purchase-count buckets; the last bucket is open-ended.
pub const HISTOGRAM_THRESHOLDS: [u64; 6] = [4, 5, 6, 9, 15, 30];

#[derive(Debug, Clone)]
pub struct Dataset {
    graph: KnowledgeGraph,
    purchase: RelationId,
    test: BTreeMap<EntityId, BTreeSet<EntityId>>,
    purchase_counts: BTreeMap<EntityId, u64>,
}

impl Dataset {
    /// `graph` holds the training triples only; `test` lists held-out `(user, item)`
    /// purchases by entity name.
    pub fn new<I, S>(graph: KnowledgeGraph, test: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let purchase = graph.require_relation(PURCHASE)?;
        let mut held_out: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        for (u, v) in test {
            let (u, v) = (u.as_ref(), v.as_ref());
            let uid = graph.require_entity(u)?;
            let vid = graph.require_entity(v)?;
            if graph.class(uid) != EntityClass::User {
                return Err(Error::NotAUser(u.to_string()));
            }
            if graph.class(vid) != EntityClass::Item {
                return Err(Error::InvalidConfig(alloc::format!(
                    "test purchase target `{v}` is not an item"
                )));
            }
            if graph.contains(uid, purchase, vid) {
                return Err(Error::TrainTestOverlap {
                    user: u.to_string(),
                    item: v.to_string(),
                });
            }
            held_out.entry(uid).or_default().insert(vid);
        }
        let purchase_counts = graph
            .users()
            .map(|u| (u, graph.tails(u, purchase).count() as u64))
            .collect();
        Ok(Dataset {
            graph,
            purchase,
            test: held_out,
            purchase_counts,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn purchase_relation(&self) -> RelationId {
        self.purchase
    }

    /// Held-out items of `user` (empty when the user has none).
    pub fn test_items(&self, user: EntityId) -> BTreeSet<EntityId> {
        self.test.get(&user).cloned().unwrap_or_default()
    }

    pub fn test_purchases(&self) -> &BTreeMap<EntityId, BTreeSet<EntityId>> {
        &self.test
    }

    /// Training purchase count of every user in the graph.
    pub fn purchase_counts(&self) -> &BTreeMap<EntityId, u64> {
        &self.purchase_counts
    }

    pub fn train_purchased(&self, user: EntityId) -> BTreeSet<EntityId> {
        self.graph.tails(user, self.purchase).collect()
    }

    /// Test purchases as `(user, item)` name pairs in id order.
    pub fn test_pairs(&self) -> Vec<(String, String)> {
        self.test
            .iter()
            .flat_map(|(u, items)| {
                items.iter().map(move |v| {
                    (
                        self.graph.entity_name(*u).to_string(),
                        self.graph.entity_name(*v).to_string(),
                    )
                })
            })
            .collect()
    }

    pub fn stats(&self) -> DatasetStats {
        let mut buckets = [0usize; HISTOGRAM_THRESHOLDS.len() + 1];
        for &n in self.purchase_counts.values() {
            let b = HISTOGRAM_THRESHOLDS.partition_point(|&t| t <= n);
            buckets[b] += 1;
        }
        let histogram = buckets
            .iter()
            .enumerate()
            .map(|(b, &count)| HistogramBucket {
                lower: if b == 0 {
                    0
                } else {
                    HISTOGRAM_THRESHOLDS[b - 1]
                },
                upper: HISTOGRAM_THRESHOLDS.get(b).copied(),
                users: count,
            })
            .collect();
        let total: u64 = self.purchase_counts.values().sum();
        let mut sorted: Vec<u64> = self.purchase_counts.values().copied().collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let top = libm::ceil(sorted.len() as f64 * 0.05) as usize;
        let top_share = if total == 0 {
            0.0
        } else {
            sorted[..top].iter().sum::<u64>() as f64 / total as f64
        };
        DatasetStats {
            users: self.purchase_counts.len(),
            items: self.graph.items().count(),
            triples: self.graph.num_triples(),
            train_purchases: total,
            test_purchases: self.test.values().map(BTreeSet::len).sum(),
            top5_purchase_share: top_share,
            histogram,
        }
    }
}

/// Users with `lower <= n < upper` training purchases (`upper = None` is unbounded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lower: u64,
    pub upper: Option<u64>,
    pub users: usize,
}

impl HistogramBucket {
    pub fn label(&self) -> String {
        match self.upper {
            Some(u) if self.lower == 0 => alloc::format!("n < {u}"),
            Some(u) => alloc::format!("{} <= n < {u}", self.lower),
            None => alloc::format!("n >= {}", self.lower),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub triples: usize,
    pub train_purchases: u64,
    pub test_purchases: usize,
    /// Share of training purchases held by the top 5% most active users.
    pub top5_purchase_share: f64,
    pub histogram: Vec<HistogramBucket>,
}
