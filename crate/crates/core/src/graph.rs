//! Immutable typed triple store.
//!
//! Entity and relation ids are interned in lexicographic order of their names, so
//! comparing [`EntityId`]s compares the underlying names. Adjacency is indexed in
//! both directions: every triple `(h, r, t)` contributes a forward edge at `h` and a
//! reversed edge at `t`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::path::{Direction, PatternStep};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityClass {
    User,
    Item,
    Word,
    Brand,
    Category,
    Other,
}

impl EntityClass {
    /// Class implied by an id prefix such as `user:` or `item:`.
    pub fn from_prefix(id: &str) -> EntityClass {
        match id.split_once(':').map(|(p, _)| p) {
            Some("user") => EntityClass::User,
            Some("item") => EntityClass::Item,
            Some("word") => EntityClass::Word,
            Some("brand") => EntityClass::Brand,
            Some("category") => EntityClass::Category,
            _ => EntityClass::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One `(head, relation, tail)` record with class annotations, as read from a source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleRecord {
    /// 1-based source line, 0 when the record has no textual origin.
    pub line: usize,
    pub head: String,
    pub head_class: EntityClass,
    pub relation: String,
    pub tail: String,
    pub tail_class: EntityClass,
}

impl TripleRecord {
    /// Record whose classes come from the id prefixes.
    pub fn from_prefixed(line: usize, head: &str, relation: &str, tail: &str) -> Self {
        TripleRecord {
            line,
            head: head.to_string(),
            head_class: EntityClass::from_prefix(head),
            relation: relation.to_string(),
            tail: tail.to_string(),
            tail_class: EntityClass::from_prefix(tail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Adjacency entry: following `step` from the owning node reaches `neighbor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub neighbor: EntityId,
    pub step: PatternStep,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    entity_classes: Vec<EntityClass>,
    entity_index: BTreeMap<String, EntityId>,
    relation_names: Vec<String>,
    relation_index: BTreeMap<String, RelationId>,
    triples: Vec<Triple>,
    adjacency: Vec<Vec<Edge>>,
}

/// Builds a deduplicated graph from annotated records.
pub fn load_graph<I>(records: I) -> Result<KnowledgeGraph>
where
    I: IntoIterator<Item = TripleRecord>,
{
    let mut classes: BTreeMap<String, EntityClass> = BTreeMap::new();
    let mut relations: BTreeMap<String, ()> = BTreeMap::new();
    let mut raw: Vec<TripleRecord> = Vec::new();

    for rec in records {
        for (field, value) in [
            ("head", &rec.head),
            ("relation", &rec.relation),
            ("tail", &rec.tail),
        ] {
            if value.is_empty() || value.chars().any(|c| c == '\t' || c == '\n') {
                return Err(Error::MalformedRecord {
                    line: rec.line,
                    reason: alloc::format!("invalid {field} `{value}`"),
                });
            }
        }
        for (id, class) in [(&rec.head, rec.head_class), (&rec.tail, rec.tail_class)] {
            match classes.get(id) {
                Some(&prev) if prev != class => {
                    return Err(Error::ClassCollision {
                        entity: id.clone(),
                        first: prev,
                        second: class,
                    })
                }
                Some(_) => {}
                None => {
                    classes.insert(id.clone(), class);
                }
            }
        }
        relations.insert(rec.relation.clone(), ());
        raw.push(rec);
    }

    let entity_names: Vec<String> = classes.keys().cloned().collect();
    let entity_classes: Vec<EntityClass> = classes.values().copied().collect();
    let entity_index: BTreeMap<String, EntityId> = entity_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), EntityId(i as u32)))
        .collect();
    let relation_names: Vec<String> = relations.into_keys().collect();
    let relation_index: BTreeMap<String, RelationId> = relation_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), RelationId(i as u32)))
        .collect();

    let mut triples: Vec<Triple> = raw
        .iter()
        .map(|r| Triple {
            head: entity_index[&r.head],
            relation: relation_index[&r.relation],
            tail: entity_index[&r.tail],
        })
        .collect();
    triples.sort_unstable();
    triples.dedup();

    let mut adjacency: Vec<Vec<Edge>> = alloc::vec![Vec::new(); entity_names.len()];
    for t in &triples {
        adjacency[t.head.index()].push(Edge {
            neighbor: t.tail,
            step: PatternStep::new(t.relation, Direction::Forward),
        });
        adjacency[t.tail.index()].push(Edge {
            neighbor: t.head,
            step: PatternStep::new(t.relation, Direction::Reversed),
        });
    }
    for edges in &mut adjacency {
        edges.sort_unstable();
    }

    Ok(KnowledgeGraph {
        entity_names,
        entity_classes,
        entity_index,
        relation_names,
        relation_index,
        triples,
        adjacency,
    })
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id.index()]
    }

    pub fn class(&self, id: EntityId) -> EntityClass {
        self.entity_classes[id.index()]
    }

    /// Sorted, deduplicated triples.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.triples
            .binary_search(&Triple {
                head,
                relation,
                tail,
            })
            .is_ok()
    }

    /// Outgoing and incoming edges of `id`, sorted by neighbor then step.
    pub fn neighbors(&self, id: EntityId) -> &[Edge] {
        &self.adjacency[id.index()]
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entity_names.len() as u32).map(EntityId)
    }

    pub fn entities_of(&self, class: EntityClass) -> impl Iterator<Item = EntityId> + '_ {
        self.entities().filter(move |&e| self.class(e) == class)
    }

    pub fn users(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities_of(EntityClass::User)
    }

    pub fn items(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities_of(EntityClass::Item)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relation_names.len() as u32).map(RelationId)
    }

    /// Tails reached from `head` through forward `relation` edges.
    pub fn tails(
        &self,
        head: EntityId,
        relation: RelationId,
    ) -> impl Iterator<Item = EntityId> + '_ {
        self.neighbors(head)
            .iter()
            .filter(move |e| e.step.relation == relation && e.step.direction == Direction::Forward)
            .map(|e| e.neighbor)
    }

    pub fn require_entity(&self, name: &str) -> Result<EntityId> {
        self.entity(name)
            .ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }

    pub fn require_relation(&self, name: &str) -> Result<RelationId> {
        self.relation(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }
}
