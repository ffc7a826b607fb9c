//! Run configuration: defaults, then a `key=value` file, then command-line flags.
//!
//! Every value goes through [`RunConfig::set`], so a file entry and the flag of the same
//! name accept exactly the same syntax. Keys may be written `top-n` or `top_n`.

use std::path::{Path, PathBuf};

use fairkg_core::candidates::CandidateConfig;
use fairkg_core::embed::TrainConfig;
use fairkg_core::metrics::DEFAULT_GROUP_RATIO;
use fairkg_core::rerank::{ConstraintMode, Epsilon, FairnessConfig, Scale, SolverBudget};
use fairkg_core::synth::SynthConfig;
use serde::Serialize;

use crate::error::{FairkgError, Result};
use crate::io::read_text;

/// β values of the default sweep: 0, 0.125, …, 1.
pub const DEFAULT_SWEEP_BETAS: [f64; 9] = [0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub top_n: usize,
    pub group_ratio: f64,
    pub constraint_mode: ConstraintMode,
    #[serde(serialize_with = "ser_epsilon")]
    pub epsilon: [Epsilon; 2],
    #[serde(serialize_with = "ser_scale")]
    pub lambda: Scale,
    #[serde(serialize_with = "ser_scale")]
    pub gamma: Scale,
    /// Drives generation, training and the solver.
    pub seed: u64,
    pub max_iterations: usize,
    pub max_kicks: usize,
    pub max_paths: usize,
    pub dim: usize,
    pub epochs: usize,
    pub users: usize,
    pub items: usize,
    pub skew: f64,
    pub max_purchases: usize,
    pub sweep_alpha: Option<Vec<f64>>,
    pub sweep_beta: Option<Vec<f64>>,
    /// Not echoed: results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn ser_epsilon<S: serde::Serializer>(
    e: &[Epsilon; 2],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_epsilon(e))
}

fn ser_scale<S: serde::Serializer>(v: &Scale, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_scale(*v))
}

impl Default for RunConfig {
    fn default() -> Self {
        let fair = FairnessConfig::default();
        let cand = CandidateConfig::default();
        let train = TrainConfig::default();
        let synth = SynthConfig::default();
        RunConfig {
            alpha: fair.alpha,
            beta: fair.beta,
            k: fair.k,
            top_n: cand.top_n,
            group_ratio: DEFAULT_GROUP_RATIO,
            constraint_mode: fair.mode,
            epsilon: fair.epsilon,
            lambda: fair.lambda,
            gamma: fair.gamma,
            seed: 42,
            max_iterations: fair.budget.max_iterations,
            max_kicks: fair.budget.max_kicks,
            max_paths: cand.max_paths_per_candidate,
            dim: train.dim,
            epochs: train.epochs,
            users: synth.users,
            items: synth.items,
            skew: synth.skew,
            max_purchases: synth.max_purchases,
            sweep_alpha: None,
            sweep_beta: None,
            workers: 1,
            out: PathBuf::from("fairkg-out"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> FairkgError {
    FairkgError::Config(format!("`{key}` = `{value}`: {why}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| bad(key, value, e))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_epsilon_token(key: &str, value: &str) -> Result<Epsilon> {
    match value.trim() {
        "baseline" => Ok(Epsilon::Baseline),
        "inf" | "infinity" => Ok(Epsilon::INACTIVE),
        v => Ok(Epsilon::Value(parse(key, v)?)),
    }
}

/// `baseline`, `inf`, one value for both constraints, or `quality,diversity`.
pub fn parse_epsilon(value: &str) -> Result<[Epsilon; 2]> {
    let parts: Vec<&str> = value.split(',').collect();
    match parts.as_slice() {
        [one] => Ok([parse_epsilon_token("epsilon", one)?; 2]),
        [q, d] => Ok([
            parse_epsilon_token("epsilon", q)?,
            parse_epsilon_token("epsilon", d)?,
        ]),
        _ => Err(bad(
            "epsilon",
            value,
            "expected one or two comma-separated bounds",
        )),
    }
}

fn epsilon_token(e: Epsilon) -> String {
    match e {
        Epsilon::Baseline => "baseline".into(),
        Epsilon::Value(v) if v == f64::INFINITY => "inf".into(),
        Epsilon::Value(v) => v.to_string(),
    }
}

pub fn format_epsilon(e: &[Epsilon; 2]) -> String {
    if e[0] == e[1] {
        epsilon_token(e[0])
    } else {
        format!("{},{}", epsilon_token(e[0]), epsilon_token(e[1]))
    }
}

pub fn parse_scale(key: &str, value: &str) -> Result<Scale> {
    match value.trim() {
        "auto" => Ok(Scale::Auto),
        v => Ok(Scale::Fixed(parse(key, v)?)),
    }
}

pub fn format_scale(s: Scale) -> String {
    match s {
        Scale::Auto => "auto".into(),
        Scale::Fixed(v) => v.to_string(),
    }
}

impl RunConfig {
    /// Applies one setting. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let norm = key.trim().replace('_', "-");
        match norm.as_str() {
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "top-n" => self.top_n = parse(key, value)?,
            "group-ratio" => self.group_ratio = parse(key, value)?,
            "constraint-mode" => {
                self.constraint_mode = match value.trim() {
                    "group" => ConstraintMode::Group,
                    "individual" => ConstraintMode::Individual,
                    _ => return Err(bad(key, value, "expected `group` or `individual`")),
                }
            }
            "epsilon" => self.epsilon = parse_epsilon(value)?,
            "lambda" => self.lambda = parse_scale(key, value)?,
            "gamma" => self.gamma = parse_scale(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "max-iterations" => self.max_iterations = parse(key, value)?,
            "max-kicks" => self.max_kicks = parse(key, value)?,
            "max-paths" => self.max_paths = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "users" => self.users = parse(key, value)?,
            "items" => self.items = parse(key, value)?,
            "skew" => self.skew = parse(key, value)?,
            "max-purchases" => self.max_purchases = parse(key, value)?,
            "sweep-alpha" => self.sweep_alpha = Some(parse_list(key, value)?),
            "sweep-beta" => self.sweep_beta = Some(parse_list(key, value)?),
            "workers" => self.workers = parse(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            _ => return Err(FairkgError::Config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (i, line) in read_text(path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| FairkgError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected `key=value`".into(),
            })?;
            self.set(key, value).map_err(|e| FairkgError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn fairness(&self) -> FairnessConfig {
        FairnessConfig {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            gamma: self.gamma,
            k: self.k,
            mode: self.constraint_mode,
            epsilon: self.epsilon,
            budget: SolverBudget {
                max_iterations: self.max_iterations,
                max_kicks: self.max_kicks,
                seed: self.seed,
            },
        }
    }

    pub fn candidates(&self) -> CandidateConfig {
        CandidateConfig {
            top_n: self.top_n,
            max_paths_per_candidate: self.max_paths,
            ..CandidateConfig::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            epochs: self.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            users: self.users,
            items: self.items,
            skew: self.skew,
            max_purchases: self.max_purchases,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }

    pub fn sweep_alphas(&self) -> Vec<f64> {
        self.sweep_alpha.clone().unwrap_or_else(|| vec![self.alpha])
    }

    pub fn sweep_betas(&self) -> Vec<f64> {
        self.sweep_beta
            .clone()
            .unwrap_or_else(|| DEFAULT_SWEEP_BETAS.to_vec())
    }

    /// Checks every setting, including the derived core configs.
    pub fn validate(&self) -> Result<()> {
        self.fairness().validate()?;
        self.train().validate()?;
        self.synth().validate()?;
        if self.top_n < self.k {
            return Err(FairkgError::Config(format!(
                "top-n ({}) must be at least k ({})",
                self.top_n, self.k
            )));
        }
        if self.max_paths == 0 {
            return Err(FairkgError::Config("max-paths must be at least 1".into()));
        }
        if !(self.group_ratio > 0.0 && self.group_ratio < 1.0) {
            return Err(FairkgError::Config(format!(
                "group-ratio must lie in (0, 1), got {}",
                self.group_ratio
            )));
        }
        if self.workers == 0 {
            return Err(FairkgError::Config("workers must be at least 1".into()));
        }
        for (name, list) in [
            ("sweep-alpha", self.sweep_alphas()),
            ("sweep-beta", self.sweep_betas()),
        ] {
            if list.is_empty() || list.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(FairkgError::Config(format!(
                    "{name} values must lie in [0, 1], got {list:?}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_forms() {
        assert_eq!(parse_epsilon("baseline").unwrap(), [Epsilon::Baseline; 2]);
        assert_eq!(parse_epsilon("inf").unwrap(), [Epsilon::INACTIVE; 2]);
        assert_eq!(
            parse_epsilon("0.1,inf").unwrap(),
            [Epsilon::Value(0.1), Epsilon::INACTIVE]
        );
        assert!(parse_epsilon("1,2,3").is_err());
        for s in ["baseline", "inf", "0.25", "0.1,baseline"] {
            assert_eq!(format_epsilon(&parse_epsilon(s).unwrap()), s);
        }
    }

    #[test]
    fn keys_accept_both_spellings() {
        let mut c = RunConfig::default();
        c.set("top_n", "20").unwrap();
        c.set("group-ratio", "0.1").unwrap();
        assert_eq!((c.top_n, c.group_ratio), (20, 0.1));
        assert!(c.set("topn", "1").is_err());
        assert!(c.set("k", "ten").is_err());
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let c = RunConfig {
            alpha: 1.5,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            k: 200,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
