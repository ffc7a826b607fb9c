//! Exhaustive search over every selection matrix, for small instances.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::{gini, group_disparity, Group, GroupSplit};
use crate::rerank::config::ConstraintMode;
use crate::rerank::problem::{violation, SelectionMatrix, SelectionProblem};
use crate::{Error, Result};

/// Largest number of selection matrices the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Best feasible selection, `None` when no selection satisfies the bounds.
    pub selection: Option<SelectionMatrix>,
    pub objective: Option<f64>,
    pub enumerated: u128,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i + 1) as u128
    })
}

/// `Π_i C(N_i, K)`, saturating.
pub fn instance_size(problem: &SelectionProblem) -> u128 {
    problem.users().iter().fold(1u128, |acc, u| {
        acc.saturating_mul(binomial(u.rec.len(), problem.k()))
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Globally optimal feasible selection by full enumeration.
///
/// Constraint values are computed with the metric functions directly, independent of
/// the solver's incremental bookkeeping.
/// One user's subset with its rec sum, proxy quality and diversity.
type UserOption = (Vec<usize>, f64, f64, f64);

pub fn exhaustive_oracle(problem: &SelectionProblem, epsilon: [f64; 2]) -> Result<OracleOutcome> {
    let combinations = instance_size(problem);
    if combinations > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge {
            combinations,
            limit: ORACLE_LIMIT,
        });
    }
    let k = problem.k();
    let options: Vec<Vec<UserOption>> = (0..problem.num_users())
        .map(|i| {
            let u = problem.user(i);
            subsets(u.rec.len(), k)
                .into_iter()
                .map(|s| {
                    let r = s.iter().map(|&j| u.rec[j]).sum();
                    let q = problem.proxy_quality(i, &s);
                    let d = problem.diversity(i, &s);
                    (s, r, q, d)
                })
                .collect()
        })
        .collect();

    let split = if problem.mode() == ConstraintMode::Group {
        let mut active = alloc::collections::BTreeSet::new();
        let mut inactive = alloc::collections::BTreeSet::new();
        for (i, g) in problem.groups().iter().enumerate() {
            match g {
                Group::Active => active.insert(i),
                Group::Inactive => inactive.insert(i),
            };
        }
        Some(GroupSplit::from_groups(active, inactive)?)
    } else {
        None
    };
    let disparity = |v: &[f64]| -> Result<f64> {
        match &split {
            Some(s) => {
                let map: BTreeMap<usize, f64> = v.iter().copied().enumerate().collect();
                group_disparity(&map, s)
            }
            None => gini(v),
        }
    };

    let m = options.len();
    let mut odometer = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut enumerated = 0u128;
    let mut q = vec![0.0; m];
    let mut d = vec![0.0; m];
    loop {
        enumerated += 1;
        let mut objective = 0.0;
        for (i, &o) in odometer.iter().enumerate() {
            let (_, r, qi, di) = &options[i][o];
            objective += r;
            q[i] = *qi;
            d[i] = *di;
        }
        if best.as_ref().is_none_or(|(b, _)| objective > *b)
            && violation(disparity(&q)?, epsilon[0]) == 0.0
            && violation(disparity(&d)?, epsilon[1]) == 0.0
        {
            best = Some((objective, odometer.clone()));
        }
        // advance
        let mut pos = 0;
        loop {
            if pos == m {
                let selection = best.as_ref().map(|(_, odo)| {
                    SelectionMatrix::from_rows_unchecked(
                        odo.iter()
                            .enumerate()
                            .map(|(i, &o)| options[i][o].0.clone())
                            .collect(),
                    )
                });
                return Ok(OracleOutcome {
                    selection,
                    objective: best.map(|(b, _)| b),
                    enumerated,
                });
            }
            odometer[pos] += 1;
            if odometer[pos] < options[pos].len() {
                break;
            }
            odometer[pos] = 0;
            pos += 1;
        }
    }
}
