use alloc::format;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A scale factor fixed by the caller or derived from the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Auto,
    Fixed(f64),
}

/// Upper bound of one fairness constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Epsilon {
    /// The disparity of the unconstrained top-K selection (demands strict improvement).
    Baseline,
    /// An explicit bound; `f64::INFINITY` disables the constraint.
    Value(f64),
}

impl Epsilon {
    pub const INACTIVE: Epsilon = Epsilon::Value(f64::INFINITY);

    pub fn resolve(self, baseline: f64) -> f64 {
        match self {
            Epsilon::Baseline => baseline,
            Epsilon::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Proxy-GRU and GEDU: group-mean gaps between active and inactive users.
    Group,
    /// Proxy-IRU and IEDU: Gini coefficients across all users.
    Individual,
}

impl ConstraintMode {
    /// Names of the two constrained quantities, quality first.
    pub fn constraint_names(self) -> [&'static str; 2] {
        match self {
            ConstraintMode::Group => ["proxy_gru", "gedu"],
            ConstraintMode::Individual => ["proxy_iru", "iedu"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverBudget {
    /// Accepted moves, penalty updates and kicks all count as one iteration.
    pub max_iterations: usize,
    /// Random restarts from feasible local optima.
    pub max_kicks: usize,
    pub seed: u64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            max_iterations: 5000,
            max_kicks: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    /// Weight of the path score against the diversity score.
    pub alpha: f64,
    /// Weight of the fairness score against the predicted preference when ranking.
    pub beta: f64,
    pub lambda: Scale,
    pub gamma: Scale,
    pub k: usize,
    pub mode: ConstraintMode,
    /// Bounds on `[quality disparity, diversity disparity]` for the active mode.
    pub epsilon: [Epsilon; 2],
    pub budget: SolverBudget,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        FairnessConfig {
            alpha: 0.75,
            beta: 0.5,
            lambda: Scale::Auto,
            gamma: Scale::Auto,
            k: 10,
            mode: ConstraintMode::Group,
            epsilon: [Epsilon::Baseline; 2],
            budget: SolverBudget::default(),
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

impl FairnessConfig {
    pub fn validate(&self) -> Result<()> {
        unit_interval("alpha", self.alpha)?;
        unit_interval("beta", self.beta)?;
        for (name, s) in [("lambda", self.lambda), ("gamma", self.gamma)] {
            if let Scale::Fixed(v) = s {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        for e in self.epsilon {
            if let Epsilon::Value(v) = e {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "epsilon must be non-negative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}
