//! Evaluation of ranked lists against held-out purchases.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::EntityId;
use crate::metrics::{f1_at_k, gini, ndcg_at_k, Group};
use crate::rerank::ConstraintMode;
use crate::{Error, Result};

/// Mean of a per-user quantity over everyone and over each group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub overall: f64,
    pub active: f64,
    pub inactive: f64,
}

impl GroupMeans {
    pub fn of(values: &[f64], groups: &[Group]) -> Result<Self> {
        let mut sums = [0.0; 2];
        let mut sizes = [0usize; 2];
        for (v, g) in values.iter().zip(groups) {
            sums[*g as usize] += v;
            sizes[*g as usize] += 1;
        }
        if sizes[0] == 0 || sizes[1] == 0 {
            return Err(Error::EmptyGroup);
        }
        Ok(GroupMeans {
            overall: (sums[0] + sums[1]) / (sizes[0] + sizes[1]) as f64,
            active: sums[0] / sizes[0] as f64,
            inactive: sums[1] / sizes[1] as f64,
        })
    }

    /// `|active - inactive|`.
    pub fn gap(&self) -> f64 {
        libm::fabs(self.active - self.inactive)
    }
}

/// Resolved settings of the run that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub mode: ConstraintMode,
    /// Resolved bounds; `None` when a constraint was disabled.
    pub epsilon: [Option<f64>; 2],
    pub lambda: f64,
    pub gamma: f64,
    pub group_ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub label: String,
    pub users: usize,
    pub active_users: usize,
    pub inactive_users: usize,
    /// Users with at least one held-out purchase.
    pub covered_users: usize,
    pub ndcg: GroupMeans,
    pub f1: GroupMeans,
    /// Group gap of NDCG / F1 (GRU).
    pub gru_ndcg: f64,
    pub gru_f1: f64,
    /// Gini of per-user NDCG / F1 (IRU).
    pub iru_ndcg: f64,
    pub iru_f1: f64,
    /// Label-free quality used inside the optimizer.
    pub proxy_quality: GroupMeans,
    pub proxy_gru: f64,
    pub proxy_iru: f64,
    /// Per-user explanation diversity (mean SID of the recommended items).
    pub sid: GroupMeans,
    pub gedu: f64,
    pub iedu: f64,
    /// `Σ` predicted preference over all recommended items.
    pub objective: f64,
    pub feasible: bool,
    pub config: ReportConfig,
}

/// Per-user inputs to a report, aligned by index.
#[derive(Debug, Clone, Copy)]
pub struct ReportInput<'a> {
    pub lists: &'a [Vec<EntityId>],
    pub groups: &'a [Group],
    pub test: &'a [BTreeSet<EntityId>],
    pub proxy_quality: &'a [f64],
    pub diversity: &'a [f64],
    pub objective: f64,
    pub feasible: bool,
}

/// Evaluates `input.lists` at cutoff `config.k`.
pub fn evaluate(
    label: &str,
    input: ReportInput<'_>,
    config: ReportConfig,
) -> Result<FairnessReport> {
    let m = input.lists.len();
    if m == 0 {
        return Err(Error::EmptyInput("no ranked lists to evaluate"));
    }
    if [
        input.groups.len(),
        input.test.len(),
        input.proxy_quality.len(),
        input.diversity.len(),
    ]
    .iter()
    .any(|&n| n != m)
    {
        return Err(Error::InvalidConfig("report inputs are not aligned".into()));
    }
    let k = config.k;
    let ndcg: Vec<f64> = input
        .lists
        .iter()
        .zip(input.test)
        .map(|(l, t)| ndcg_at_k(l, t, k))
        .collect();
    let f1: Vec<f64> = input
        .lists
        .iter()
        .zip(input.test)
        .map(|(l, t)| f1_at_k(l, t, k))
        .collect();
    let ndcg_means = GroupMeans::of(&ndcg, input.groups)?;
    let f1_means = GroupMeans::of(&f1, input.groups)?;
    let proxy = GroupMeans::of(input.proxy_quality, input.groups)?;
    let sid = GroupMeans::of(input.diversity, input.groups)?;
    let active = input.groups.iter().filter(|g| **g == Group::Active).count();
    Ok(FairnessReport {
        label: label.into(),
        users: m,
        active_users: active,
        inactive_users: m - active,
        covered_users: input.test.iter().filter(|t| !t.is_empty()).count(),
        gru_ndcg: ndcg_means.gap(),
        gru_f1: f1_means.gap(),
        iru_ndcg: gini(&ndcg)?,
        iru_f1: gini(&f1)?,
        ndcg: ndcg_means,
        f1: f1_means,
        proxy_gru: proxy.gap(),
        proxy_iru: gini(input.proxy_quality)?,
        proxy_quality: proxy,
        gedu: sid.gap(),
        iedu: gini(input.diversity)?,
        sid,
        objective: input.objective,
        feasible: input.feasible,
        config,
    })
}

/// Per-user NDCG keyed by user, handy for plotting.
pub fn per_user_ndcg(
    users: &[EntityId],
    lists: &[Vec<EntityId>],
    test: &[BTreeSet<EntityId>],
    k: usize,
) -> BTreeMap<EntityId, f64> {
    users
        .iter()
        .zip(lists.iter().zip(test))
        .map(|(u, (l, t))| (*u, ndcg_at_k(l, t, k)))
        .collect()
}
