//! Candidate sets as JSON lines, one user per line, with entities and relations by name.
//!
//! ```text
//! {"user":"user:u0001","candidates":[{"item":"item:i0042","rec_score":1.25,
//!   "paths":[{"nodes":["user:u0001","item:i0042"],"steps":[{"rel":"purchase","dir":"fwd"}],"score":1.25}]}],
//!  "schema":1}
//! ```
//!
//! Scores are stored as computed, so sets produced by any external recommender can be
//! re-ranked without this crate's embedding model.

use std::fmt::Write as _;
use std::path::Path;

use fairkg_core::graph::{EntityClass, KnowledgeGraph};
use fairkg_core::path::{Direction, Path as KgPath, PatternStep};
use fairkg_core::rerank::{Candidate, CandidateSet, ScoredPath};
use serde::{Deserialize, Serialize};

use crate::error::{FairkgError, Result};
use crate::io::read_text;

pub const CANDIDATE_SCHEMA: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord {
    rel: String,
    dir: Direction,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRecord {
    nodes: Vec<String>,
    steps: Vec<StepRecord>,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CandidateRecord {
    item: String,
    rec_score: f64,
    paths: Vec<PathRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UserRecord {
    user: String,
    candidates: Vec<CandidateRecord>,
    schema: u64,
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fairkg_core::Error::NonFiniteValue.into())
    }
}

/// Serializes `sets` in order. Candidates without paths are rejected.
pub fn format_candidates(sets: &[CandidateSet], g: &KnowledgeGraph) -> Result<String> {
    let mut out = String::new();
    for set in sets {
        let mut candidates = Vec::with_capacity(set.candidates.len());
        for c in &set.candidates {
            if c.paths.is_empty() {
                return Err(fairkg_core::Error::EmptyCandidatePaths {
                    user: g.entity_name(set.user).into(),
                    item: g.entity_name(c.item).into(),
                }
                .into());
            }
            let paths = c
                .paths
                .iter()
                .map(|p| {
                    Ok(PathRecord {
                        nodes: p
                            .path
                            .nodes()
                            .iter()
                            .map(|n| g.entity_name(*n).into())
                            .collect(),
                        steps: p
                            .path
                            .steps()
                            .iter()
                            .map(|s| StepRecord {
                                rel: g.relation_name(s.relation).into(),
                                dir: s.direction,
                            })
                            .collect(),
                        score: finite(p.score)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            candidates.push(CandidateRecord {
                item: g.entity_name(c.item).into(),
                rec_score: finite(c.rec_score)?,
                paths,
            });
        }
        let record = UserRecord {
            user: g.entity_name(set.user).into(),
            candidates,
            schema: CANDIDATE_SCHEMA,
        };
        let line = serde_json::to_string(&record).expect("candidate records serialize");
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

fn to_set(record: UserRecord, g: &KnowledgeGraph) -> fairkg_core::Result<CandidateSet> {
    let user = g.require_entity(&record.user)?;
    if g.class(user) != EntityClass::User {
        return Err(fairkg_core::Error::NotAUser(record.user));
    }
    let mut candidates = Vec::with_capacity(record.candidates.len());
    for c in record.candidates {
        let mut paths = Vec::with_capacity(c.paths.len());
        for p in c.paths {
            let nodes = p
                .nodes
                .iter()
                .map(|n| g.require_entity(n))
                .collect::<fairkg_core::Result<Vec<_>>>()?;
            let steps = p
                .steps
                .iter()
                .map(|s| Ok(PatternStep::new(g.require_relation(&s.rel)?, s.dir)))
                .collect::<fairkg_core::Result<Vec<_>>>()?;
            let path = KgPath::new(&nodes, &steps)?;
            path.validate(g)?;
            paths.push(ScoredPath {
                path,
                score: p.score,
            });
        }
        candidates.push(Candidate {
            item: g.require_entity(&c.item)?,
            rec_score: c.rec_score,
            paths,
        });
    }
    Ok(CandidateSet { user, candidates })
}

/// Parses a candidate file against `g`, checking the schema version of every line.
pub fn parse_candidates(text: &str, path: &Path, g: &KnowledgeGraph) -> Result<Vec<CandidateSet>> {
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| FairkgError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| bad(format!("invalid JSON: {e}")))?;
        let schema = value
            .get("schema")
            .and_then(|s| s.as_u64())
            .ok_or_else(|| bad("missing integer `schema` field".into()))?;
        if schema != CANDIDATE_SCHEMA {
            return Err(FairkgError::SchemaVersion {
                path: path.to_path_buf(),
                line: line_no,
                found: schema,
                supported: CANDIDATE_SCHEMA,
            });
        }
        let record: UserRecord =
            serde_json::from_value(value).map_err(|e| bad(format!("bad candidate record: {e}")))?;
        sets.push(to_set(record, g).map_err(|e| bad(e.to_string()))?);
    }
    Ok(sets)
}

pub fn load_candidates(path: &Path, g: &KnowledgeGraph) -> Result<Vec<CandidateSet>> {
    parse_candidates(&read_text(path)?, path, g)
}
