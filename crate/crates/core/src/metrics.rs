//! Diversity, inequality and top-K quality measures, plus the active/inactive split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Simpson's index of diversity over pattern counts: one minus the probability that
/// two paths drawn without replacement share a pattern. Defined as 0 for `N <= 1`.
pub fn simpson_diversity(counts: &[u64]) -> f64 {
    let total: u128 = counts.iter().map(|&n| n as u128).sum();
    if total <= 1 {
        return 0.0;
    }
    let same: u128 = counts
        .iter()
        .map(|&n| n as u128 * (n as u128).saturating_sub(1))
        .sum();
    1.0 - same as f64 / (total * (total - 1)) as f64
}

fn check_non_negative(values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        if v < 0.0 {
            return Err(Error::NegativeValue(v));
        }
    }
    Ok(())
}

/// Gini coefficient `Σ_{x,y} |F_x - F_y| / (2 m Σ F)` over ordered pairs.
///
/// Returns 0 when every value is 0.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("gini needs at least one value"));
    }
    check_non_negative(values)?;
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len();
    // Σ_{x,y} |F_x - F_y| = 2 Σ_i (2i - m + 1) F_(i) with ascending, 0-based i
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (2.0 * i as f64 - m as f64 + 1.0) * v)
        .sum::<f64>()
        * 2.0;
    Ok((pair_sum / (2.0 * m as f64 * total)).max(0.0))
}

fn dcg_discount(rank0: usize) -> f64 {
    1.0 / libm::log2(rank0 as f64 + 2.0)
}

/// Binary-gain NDCG@K with a `1 / log2(rank + 1)` discount.
pub fn ndcg_at_k<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(i, _)| dcg_discount(i))
        .sum();
    let ideal: f64 = (0..k.min(relevant.len())).map(dcg_discount).sum();
    dcg / ideal
}

/// F1 of precision `hits / K` and recall `hits / |relevant|`.
pub fn f1_at_k<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|i| relevant.contains(i))
        .count() as f64;
    let precision = hits / k as f64;
    let recall = hits / relevant.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Active,
    Inactive,
}

/// Active users (G1) are the top `ceil(ratio * m)` by training purchases.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit<K: Ord> {
    active: BTreeSet<K>,
    inactive: BTreeSet<K>,
    ratio: f64,
}

/// Default share of users placed in the active group.
pub const DEFAULT_GROUP_RATIO: f64 = 0.05;

/// Splits users by purchase count; boundary ties go to the smaller user id.
pub fn group_split<K: Ord + Clone>(
    purchase_counts: &BTreeMap<K, u64>,
    ratio: f64,
) -> Result<GroupSplit<K>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "group ratio must lie in (0, 1), got {ratio}"
        )));
    }
    if purchase_counts.is_empty() {
        return Err(Error::EmptyInput("no users to split"));
    }
    let m = purchase_counts.len();
    // guard against 0.05 * 100 = 5.000000000000001 style round-up
    let n_active = (libm::ceil(ratio * m as f64 - 1e-9) as usize).clamp(1, m);
    let mut ranked: Vec<(&K, u64)> = purchase_counts.iter().map(|(k, &c)| (k, c)).collect();
    ranked.sort_by_key(|&(k, c)| (Reverse(c), k));
    let active = ranked[..n_active]
        .iter()
        .map(|(k, _)| (*k).clone())
        .collect();
    let inactive = ranked[n_active..]
        .iter()
        .map(|(k, _)| (*k).clone())
        .collect();
    Ok(GroupSplit {
        active,
        inactive,
        ratio,
    })
}

impl<K: Ord> GroupSplit<K> {
    /// Split from explicit groups; they must be disjoint.
    pub fn from_groups(active: BTreeSet<K>, inactive: BTreeSet<K>) -> Result<Self> {
        if active.iter().any(|k| inactive.contains(k)) {
            return Err(Error::InvalidConfig("groups overlap".into()));
        }
        let m = active.len() + inactive.len();
        let ratio = if m == 0 {
            0.0
        } else {
            active.len() as f64 / m as f64
        };
        Ok(GroupSplit {
            active,
            inactive,
            ratio,
        })
    }

    pub fn active(&self) -> &BTreeSet<K> {
        &self.active
    }

    pub fn inactive(&self) -> &BTreeSet<K> {
        &self.inactive
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn len(&self) -> usize {
        self.active.len() + self.inactive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group_of(&self, k: &K) -> Option<Group> {
        if self.active.contains(k) {
            Some(Group::Active)
        } else if self.inactive.contains(k) {
            Some(Group::Inactive)
        } else {
            None
        }
    }

    pub fn members(&self, group: Group) -> &BTreeSet<K> {
        match group {
            Group::Active => &self.active,
            Group::Inactive => &self.inactive,
        }
    }
}

fn group_mean<K: Ord + core::fmt::Debug>(
    scores: &BTreeMap<K, f64>,
    members: &BTreeSet<K>,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut sum = 0.0;
    for k in members {
        let v = *scores
            .get(k)
            .ok_or_else(|| Error::MissingScore(format!("{k:?}")))?;
        check_non_negative(&[v])?;
        sum += v;
    }
    Ok(sum / members.len() as f64)
}

/// Mean score of each group: `(active, inactive)`.
pub fn group_means<K: Ord + core::fmt::Debug>(
    scores: &BTreeMap<K, f64>,
    split: &GroupSplit<K>,
) -> Result<(f64, f64)> {
    Ok((
        group_mean(scores, &split.active)?,
        group_mean(scores, &split.inactive)?,
    ))
}

/// Absolute difference between the active and inactive group means.
pub fn group_disparity<K: Ord + core::fmt::Debug>(
    scores: &BTreeMap<K, f64>,
    split: &GroupSplit<K>,
) -> Result<f64> {
    let (a, b) = group_means(scores, split)?;
    Ok(libm::fabs(a - b))
}

/// Gini coefficient of per-user scores.
pub fn individual_disparity<K: Ord>(scores: &BTreeMap<K, f64>) -> Result<f64> {
    let values: Vec<f64> = scores.values().copied().collect();
    gini(&values)
}
