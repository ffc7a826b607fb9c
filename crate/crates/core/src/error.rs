use alloc::string::String;
use core::fmt;

use crate::graph::EntityClass;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A triple record could not be interpreted; `line` is 1-based when known.
    MalformedRecord {
        line: usize,
        reason: String,
    },
    /// One entity id annotated with two different classes.
    ClassCollision {
        entity: String,
        first: EntityClass,
        second: EntityClass,
    },
    UnknownEntity(String),
    UnknownRelation(String),
    NotAUser(String),
    InvalidPathLength(usize),
    /// A path list mixing different start users, or paths that break the type invariants.
    InvalidPath(String),
    EmptyDistribution,
    PatternNotInVocabulary,
    NegativeValue(f64),
    NonFiniteValue,
    EmptyInput(&'static str),
    EmptyGroup,
    MissingScore(String),
    InvalidConfig(String),
    NonFiniteLoss {
        epoch: usize,
    },
    MissingEmbedding(String),
    TooFewCandidates {
        user: String,
        have: usize,
        need: usize,
    },
    DuplicateCandidate {
        user: String,
        item: String,
    },
    EmptyCandidatePaths {
        user: String,
        item: String,
    },
    InstanceTooLarge {
        combinations: u128,
        limit: u128,
    },
    TrainTestOverlap {
        user: String,
        item: String,
    },
    InfeasibleConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::MalformedRecord { line, reason } => {
                write!(f, "malformed record at line {line}: {reason}")
            }
            Error::ClassCollision {
                entity,
                first,
                second,
            } => write!(
                f,
                "entity `{entity}` declared as both {first:?} and {second:?}"
            ),
            Error::UnknownEntity(e) => write!(f, "unknown entity `{e}`"),
            Error::UnknownRelation(r) => write!(f, "unknown relation `{r}`"),
            Error::NotAUser(e) => write!(f, "entity `{e}` is not a user"),
            Error::InvalidPathLength(n) => {
                write!(f, "path length {n} outside the supported range 1..=3")
            }
            Error::InvalidPath(why) => write!(f, "invalid path: {why}"),
            Error::EmptyDistribution => {
                f.write_str("pattern distribution undefined: no paths and no smoothing")
            }
            Error::PatternNotInVocabulary => f.write_str("path pattern absent from the vocabulary"),
            Error::NegativeValue(v) => write!(f, "negative value {v} where non-negative required"),
            Error::NonFiniteValue => f.write_str("non-finite value"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::EmptyGroup => f.write_str("one of the user groups is empty"),
            Error::MissingScore(u) => write!(f, "no score for user `{u}`"),
            Error::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            Error::NonFiniteLoss { epoch } => {
                write!(f, "non-finite training loss in epoch {epoch}")
            }
            Error::MissingEmbedding(id) => write!(f, "missing embedding for `{id}`"),
            Error::TooFewCandidates { user, have, need } => write!(
                f,
                "user `{user}` has {have} candidates but {need} are required"
            ),
            Error::DuplicateCandidate { user, item } => {
                write!(f, "user `{user}` lists candidate `{item}` twice")
            }
            Error::EmptyCandidatePaths { user, item } => write!(
                f,
                "candidate `{item}` of user `{user}` carries no explanation paths"
            ),
            Error::InstanceTooLarge {
                combinations,
                limit,
            } => write!(
                f,
                "exhaustive search over {combinations} selections exceeds the limit of {limit}"
            ),
            Error::TrainTestOverlap { user, item } => write!(
                f,
                "test purchase ({user}, {item}) also appears as a training purchase"
            ),
            Error::InfeasibleConfig(why) => write!(f, "infeasible configuration: {why}"),
        }
    }
}

impl core::error::Error for Error {}
