//! Text formats: triples, test purchases and embeddings, plus staged output writing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fairkg_core::dataset::Dataset;
use fairkg_core::embed::EmbeddingTable;
use fairkg_core::graph::{load_graph, KnowledgeGraph, TripleRecord};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{FairkgError, Result};

/// Prefix that marks relation rows in an embedding file.
pub const RELATION_PREFIX: &str = "rel:";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FairkgError::io(path, e))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| FairkgError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_error(path: &Path, line: usize, reason: impl Into<String>) -> FairkgError {
    FairkgError::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Splits a line into exactly `n` tab-separated fields.
fn fields<'a>(path: &Path, line: usize, text: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = text.split('\t').collect();
    if parts.len() != n || parts.iter().any(|p| p.is_empty()) {
        return Err(parse_error(
            path,
            line,
            format!(
                "expected {n} non-empty tab-separated fields, found {}",
                parts.len()
            ),
        ));
    }
    Ok(parts)
}

/// Parses `head<TAB>relation<TAB>tail` lines; classes come from the id prefixes.
pub fn parse_triples(text: &str, path: &Path) -> Result<Vec<TripleRecord>> {
    data_lines(text)
        .map(|(line, l)| {
            let f = fields(path, line, l, 3)?;
            Ok(TripleRecord::from_prefixed(line, f[0], f[1], f[2]))
        })
        .collect()
}

pub fn load_graph_file(path: &Path) -> Result<KnowledgeGraph> {
    let records = parse_triples(&read_text(path)?, path)?;
    load_graph(records).map_err(|e| match e {
        fairkg_core::Error::MalformedRecord { line, reason } => parse_error(path, line, reason),
        other => other.into(),
    })
}

/// Parses `user<TAB>item` lines.
pub fn parse_test(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    data_lines(text)
        .map(|(line, l)| {
            let f = fields(path, line, l, 2)?;
            Ok((f[0].to_string(), f[1].to_string()))
        })
        .collect()
}

/// Training graph plus optional held-out purchases.
pub fn load_dataset(triples: &Path, test: Option<&Path>) -> Result<Dataset> {
    let graph = load_graph_file(triples)?;
    let pairs = match test {
        Some(p) => parse_test(&read_text(p)?, p)?,
        None => Vec::new(),
    };
    Ok(Dataset::new(graph, pairs)?)
}

pub fn format_triples(g: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for t in g.triples() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            g.entity_name(t.head),
            g.relation_name(t.relation),
            g.entity_name(t.tail)
        );
    }
    out
}

pub fn format_test(data: &Dataset) -> String {
    let mut out = String::new();
    for (u, v) in data.test_pairs() {
        let _ = writeln!(out, "{u}\t{v}");
    }
    out
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `id<TAB>v1,v2,...` rows: entities by name, then relations as `rel:<name>`.
pub fn format_embeddings(emb: &EmbeddingTable, g: &KnowledgeGraph) -> Result<String> {
    let mut out = format!("# dim={}\n", emb.dim());
    for e in g.entities() {
        let _ = writeln!(out, "{}\t{}", g.entity_name(e), join(emb.entity(e)?));
    }
    for r in g.relations() {
        let _ = writeln!(
            out,
            "{RELATION_PREFIX}{}\t{}",
            g.relation_name(r),
            join(emb.relation(r)?)
        );
    }
    Ok(out)
}

/// Reads an embedding file for `g`; every entity and relation must be present.
pub fn load_embeddings(path: &Path, g: &KnowledgeGraph) -> Result<EmbeddingTable> {
    let text = read_text(path)?;
    let mut rows: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut dim = None;
    for (line, l) in data_lines(&text) {
        let f = fields(path, line, l, 2)?;
        let v = f[1]
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_error(path, line, format!("bad vector component: {e}")))?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("vector has {} components, expected {d}", v.len()),
                ))
            }
            _ => {}
        }
        let known = match f[0].strip_prefix(RELATION_PREFIX) {
            Some(rel) => g.relation(rel).is_some(),
            None => g.entity(f[0]).is_some(),
        };
        if !known {
            return Err(parse_error(
                path,
                line,
                format!("`{}` is not in the graph", f[0]),
            ));
        }
        if rows.insert(f[0], v).is_some() {
            return Err(parse_error(path, line, format!("`{}` listed twice", f[0])));
        }
    }
    let dim = dim.ok_or_else(|| parse_error(path, 0, "no embedding rows"))?;
    let mut take = |key: String| {
        rows.remove(key.as_str())
            .ok_or(fairkg_core::Error::MissingEmbedding(key))
    };
    let entities = g
        .entities()
        .map(|e| take(g.entity_name(e).to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let relations = g
        .relations()
        .map(|r| take(format!("{RELATION_PREFIX}{}", g.relation_name(r))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(EmbeddingTable::new(dim, entities, relations)?)
}

/// Output files staged next to their destination and moved into place together.
///
/// Dropping an uncommitted set deletes everything staged so far, so a failing command
/// leaves no partial outputs behind.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| FairkgError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let mut tmp =
            NamedTempFile::new_in(&self.dir).map_err(|e| FairkgError::io(&self.dir, e))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.flush())
            .map_err(|e| FairkgError::io(tmp.path(), e))?;
        self.staged.push((tmp, target));
        Ok(())
    }

    pub fn add_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| FairkgError::Json {
            path: self.dir.join(name),
            source: e,
        })?;
        bytes.push(b'\n');
        self.add(name, &bytes)
    }

    /// Moves every staged file into place; returns the final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.staged.len());
        for (tmp, target) in self.staged {
            if let Err(e) = tmp.persist(&target) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(FairkgError::io(&target, e.error));
            }
            done.push(target);
        }
        Ok(done)
    }
}
