//! User→item paths and their relation-only abstraction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::graph::{EntityClass, EntityId, KnowledgeGraph, RelationId};
use crate::{Error, Result};

/// Longest supported path, in hops.
pub const MAX_PATH_LEN: usize = 3;

/// Default enumeration depth.
pub const DEFAULT_MAX_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "fwd")]
    Forward,
    #[serde(rename = "rev")]
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternStep {
    pub relation: RelationId,
    pub direction: Direction,
}

impl PatternStep {
    pub const fn new(relation: RelationId, direction: Direction) -> Self {
        PatternStep {
            relation,
            direction,
        }
    }

    pub const fn forward(relation: RelationId) -> Self {
        Self::new(relation, Direction::Forward)
    }

    pub const fn reversed(relation: RelationId) -> Self {
        Self::new(relation, Direction::Reversed)
    }
}

/// Relation/direction sequence of a path. Equality is step-wise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathPattern {
    steps: ArrayVec<PatternStep, MAX_PATH_LEN>,
}

impl PathPattern {
    pub fn new(steps: &[PatternStep]) -> Result<Self> {
        if steps.is_empty() || steps.len() > MAX_PATH_LEN {
            return Err(Error::InvalidPathLength(steps.len()));
        }
        Ok(PathPattern {
            steps: steps.iter().copied().collect(),
        })
    }

    pub fn steps(&self) -> &[PatternStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `purchase > purchase^-1 > purchase`, using relation names from `g`.
    pub fn describe(&self, g: &KnowledgeGraph) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push_str(" > ");
            }
            out.push_str(g.relation_name(s.relation));
            if s.direction == Direction::Reversed {
                out.push_str("^-1");
            }
        }
        out
    }
}

/// Entity/relation sequence `e0 -r1-> e1 ... -rn-> en`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: ArrayVec<EntityId, { MAX_PATH_LEN + 1 }>,
    steps: ArrayVec<PatternStep, MAX_PATH_LEN>,
}

impl Path {
    /// Checks only the shape (`nodes = steps + 1`, length bounds); see [`Path::validate`].
    pub fn new(nodes: &[EntityId], steps: &[PatternStep]) -> Result<Self> {
        if steps.is_empty() || steps.len() > MAX_PATH_LEN {
            return Err(Error::InvalidPathLength(steps.len()));
        }
        if nodes.len() != steps.len() + 1 {
            return Err(Error::InvalidPath(format!(
                "{} nodes for {} steps",
                nodes.len(),
                steps.len()
            )));
        }
        Ok(Path {
            nodes: nodes.iter().copied().collect(),
            steps: steps.iter().copied().collect(),
        })
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn steps(&self) -> &[PatternStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn start(&self) -> EntityId {
        self.nodes[0]
    }

    pub fn end(&self) -> EntityId {
        self.nodes[self.nodes.len() - 1]
    }

    /// Every hop must be backed by a triple in `g` (against orientation for reversed
    /// steps), and the path must run from a user to an item without revisiting nodes.
    pub fn validate(&self, g: &KnowledgeGraph) -> Result<()> {
        let n = g.num_entities();
        if let Some(bad) = self.nodes.iter().find(|e| e.index() >= n) {
            return Err(Error::UnknownEntity(format!("#{}", bad.0)));
        }
        if let Some(bad) = self
            .steps
            .iter()
            .find(|s| s.relation.index() >= g.num_relations())
        {
            return Err(Error::UnknownRelation(format!("#{}", bad.relation.0)));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            let ok = match step.direction {
                Direction::Forward => g.contains(a, step.relation, b),
                Direction::Reversed => g.contains(b, step.relation, a),
            };
            if !ok {
                return Err(Error::InvalidPath(format!(
                    "hop {} ({} -{}-> {}) has no backing triple",
                    i + 1,
                    g.entity_name(a),
                    g.relation_name(step.relation),
                    g.entity_name(b)
                )));
            }
        }
        if g.class(self.start()) != EntityClass::User {
            return Err(Error::NotAUser(g.entity_name(self.start()).into()));
        }
        if g.class(self.end()) != EntityClass::Item {
            return Err(Error::InvalidPath(format!(
                "path ends at non-item `{}`",
                g.entity_name(self.end())
            )));
        }
        for (i, a) in self.nodes.iter().enumerate() {
            if self.nodes[i + 1..].contains(a) {
                return Err(Error::InvalidPath(format!(
                    "node `{}` visited twice",
                    g.entity_name(*a)
                )));
            }
        }
        Ok(())
    }

    pub fn describe(&self, g: &KnowledgeGraph) -> String {
        let mut out = String::from(g.entity_name(self.nodes[0]));
        for (i, s) in self.steps.iter().enumerate() {
            let arrow = match s.direction {
                Direction::Forward => "",
                Direction::Reversed => "^-1",
            };
            let _ = write!(
                out,
                " -{}{}-> {}",
                g.relation_name(s.relation),
                arrow,
                g.entity_name(self.nodes[i + 1])
            );
        }
        out
    }
}

pub fn pattern_of(p: &Path) -> PathPattern {
    PathPattern {
        steps: p.steps.clone(),
    }
}

fn check_start(g: &KnowledgeGraph, user: EntityId, max_len: usize) -> Result<()> {
    if max_len == 0 || max_len > MAX_PATH_LEN {
        return Err(Error::InvalidPathLength(max_len));
    }
    if user.index() >= g.num_entities() {
        return Err(Error::UnknownEntity(format!("#{}", user.0)));
    }
    if g.class(user) != EntityClass::User {
        return Err(Error::NotAUser(g.entity_name(user).into()));
    }
    Ok(())
}

/// Calls `visit(nodes, steps)` for every simple path of length `1..=max_len` that
/// starts at `user` and ends at an item. Paths may pass through other items.
pub fn for_each_user_item_path<F>(
    g: &KnowledgeGraph,
    user: EntityId,
    max_len: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&[EntityId], &[PatternStep]),
{
    check_start(g, user, max_len)?;
    let mut nodes: ArrayVec<EntityId, { MAX_PATH_LEN + 1 }> = ArrayVec::new();
    let mut steps: ArrayVec<PatternStep, MAX_PATH_LEN> = ArrayVec::new();
    nodes.push(user);
    extend(g, max_len, &mut nodes, &mut steps, &mut visit);
    Ok(())
}

fn extend<F>(
    g: &KnowledgeGraph,
    max_len: usize,
    nodes: &mut ArrayVec<EntityId, { MAX_PATH_LEN + 1 }>,
    steps: &mut ArrayVec<PatternStep, MAX_PATH_LEN>,
    visit: &mut F,
) where
    F: FnMut(&[EntityId], &[PatternStep]),
{
    let last = nodes[nodes.len() - 1];
    let deeper = steps.len() + 1 < max_len;
    for edge in g.neighbors(last) {
        if nodes.contains(&edge.neighbor) {
            continue;
        }
        nodes.push(edge.neighbor);
        steps.push(edge.step);
        if g.class(edge.neighbor) == EntityClass::Item {
            visit(nodes, steps);
        }
        if deeper {
            extend(g, max_len, nodes, steps, visit);
        }
        nodes.pop();
        steps.pop();
    }
}

/// All simple user→item paths up to `max_len` hops, ordered lexicographically by
/// node ids and then by steps.
pub fn enumerate_user_item_paths(
    g: &KnowledgeGraph,
    user: EntityId,
    max_len: usize,
) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    for_each_user_item_path(g, user, max_len, |nodes, steps| {
        out.push(Path {
            nodes: nodes.iter().copied().collect(),
            steps: steps.iter().copied().collect(),
        });
    })?;
    out.sort_unstable_by(|a, b| a.nodes.cmp(&b.nodes).then_with(|| a.steps.cmp(&b.steps)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, TripleRecord};
    use alloc::vec;

    fn graph(triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
        load_graph(
            triples
                .iter()
                .map(|(h, r, t)| TripleRecord::from_prefixed(0, h, r, t)),
        )
        .unwrap()
    }

    fn also_bought() -> KnowledgeGraph {
        graph(&[
            ("user:u", "purchase", "item:v1"),
            ("user:u2", "purchase", "item:v1"),
            ("user:u2", "purchase", "item:v2"),
        ])
    }

    #[test]
    fn star_graph_single_path() {
        let g = graph(&[("user:u", "purchase", "item:v")]);
        let u = g.entity("user:u").unwrap();
        let paths = enumerate_user_item_paths(&g, u, 3).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].len(), 1);
        assert_eq!(paths[0].end(), g.entity("item:v").unwrap());
    }

    #[test]
    fn also_bought_path_of_length_three() {
        let g = also_bought();
        let u = g.entity("user:u").unwrap();
        let p = g.relation("purchase").unwrap();
        let paths = enumerate_user_item_paths(&g, u, 3).unwrap();
        let names: Vec<String> = paths.iter().map(|x| x.describe(&g)).collect();
        assert_eq!(
            names,
            vec![
                String::from("user:u -purchase-> item:v1"),
                String::from(
                    "user:u -purchase-> item:v1 -purchase^-1-> user:u2 -purchase-> item:v2"
                ),
            ]
        );
        assert_eq!(
            pattern_of(&paths[1]).steps(),
            &[
                PatternStep::forward(p),
                PatternStep::reversed(p),
                PatternStep::forward(p)
            ]
        );
        for path in &paths {
            path.validate(&g).unwrap();
        }
    }

    #[test]
    fn length_filter() {
        let g = also_bought();
        let u = g.entity("user:u").unwrap();
        let paths = enumerate_user_item_paths(&g, u, 1).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = also_bought();
        let u = g.entity("user:u").unwrap();
        let v = g.entity("item:v1").unwrap();
        assert_eq!(
            enumerate_user_item_paths(&g, u, 4).unwrap_err(),
            Error::InvalidPathLength(4)
        );
        assert_eq!(
            enumerate_user_item_paths(&g, u, 0).unwrap_err(),
            Error::InvalidPathLength(0)
        );
        assert!(matches!(
            enumerate_user_item_paths(&g, v, 2),
            Err(Error::NotAUser(_))
        ));
        assert!(matches!(
            enumerate_user_item_paths(&g, EntityId(99), 2),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn patterns_abstract_over_entities() {
        let g = graph(&[
            ("user:u", "purchase", "item:a"),
            ("user:u", "purchase", "item:b"),
        ]);
        let u = g.entity("user:u").unwrap();
        let paths = enumerate_user_item_paths(&g, u, 1).unwrap();
        assert_ne!(paths[0], paths[1]);
        assert_eq!(pattern_of(&paths[0]), pattern_of(&paths[1]));
        assert_eq!(pattern_of(&paths[0]).describe(&g), "purchase");
    }

    #[test]
    fn validate_catches_broken_hops() {
        let g = also_bought();
        let u = g.entity("user:u").unwrap();
        let v2 = g.entity("item:v2").unwrap();
        let p = g.relation("purchase").unwrap();
        let fake = Path::new(&[u, v2], &[PatternStep::forward(p)]).unwrap();
        assert!(matches!(fake.validate(&g), Err(Error::InvalidPath(_))));
        assert!(Path::new(&[u], &[PatternStep::forward(p)]).is_err());
    }

    #[test]
    fn multi_relation_edges_give_distinct_paths() {
        let g = graph(&[
            ("user:u", "purchase", "item:v"),
            ("user:u", "view", "item:v"),
        ]);
        let u = g.entity("user:u").unwrap();
        let paths = enumerate_user_item_paths(&g, u, 3).unwrap();
        assert_eq!(paths.len(), 2);
        assert_ne!(pattern_of(&paths[0]), pattern_of(&paths[1]));
    }
}
