//! The constrained 0-1 selection problem and its exact (non-incremental) evaluation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::metrics::{gini, group_disparity, Group, GroupSplit};
use crate::rerank::config::ConstraintMode;
use crate::{Error, Result};

/// One user's candidates as seen by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCandidates {
    pub rec: Vec<f64>,
    /// `rec` min-max normalized over the whole problem, in `[0, 1]`.
    pub gain: Vec<f64>,
    pub sid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    k: usize,
    mode: ConstraintMode,
    users: Vec<UserCandidates>,
    groups: Vec<Group>,
    ideal_dcg: f64,
}

pub(crate) fn discount(rank0: usize) -> f64 {
    1.0 / libm::log2(rank0 as f64 + 2.0)
}

impl SelectionProblem {
    /// `rec[i][j]` and `sid[i][j]` describe candidate `j` of user `i`; index order is
    /// the tie-break order.
    pub fn new(
        rec: Vec<Vec<f64>>,
        sid: Vec<Vec<f64>>,
        groups: Vec<Group>,
        k: usize,
        mode: ConstraintMode,
    ) -> Result<Self> {
        if rec.is_empty() {
            return Err(Error::EmptyInput("selection problem without users"));
        }
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if sid.len() != rec.len() || groups.len() != rec.len() {
            return Err(Error::InvalidConfig(format!(
                "{} score rows, {} SID rows and {} group labels",
                rec.len(),
                sid.len(),
                groups.len()
            )));
        }
        if mode == ConstraintMode::Group
            && !(groups.contains(&Group::Active) && groups.contains(&Group::Inactive))
        {
            return Err(Error::EmptyGroup);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, (r, s)) in rec.iter().zip(&sid).enumerate() {
            if r.len() < k {
                return Err(Error::TooFewCandidates {
                    user: format!("#{i}"),
                    have: r.len(),
                    need: k,
                });
            }
            if s.len() != r.len() {
                return Err(Error::InvalidConfig(format!(
                    "user #{i}: {} scores but {} SIDs",
                    r.len(),
                    s.len()
                )));
            }
            if r.iter().chain(s).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue);
            }
            if let Some(&bad) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfig(format!("SID {bad} outside [0, 1]")));
            }
            for &v in r {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let span = hi - lo;
        let users = rec
            .into_iter()
            .zip(sid)
            .map(|(rec, sid)| {
                let gain = rec
                    .iter()
                    .map(|&v| if span > 0.0 { (v - lo) / span } else { 1.0 })
                    .collect();
                UserCandidates { rec, gain, sid }
            })
            .collect();
        Ok(SelectionProblem {
            k,
            mode,
            users,
            groups,
            ideal_dcg: (0..k).map(discount).sum(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, i: usize) -> &UserCandidates {
        &self.users[i]
    }

    pub fn users(&self) -> &[UserCandidates] {
        &self.users
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub(crate) fn ideal_dcg(&self) -> f64 {
        self.ideal_dcg
    }

    /// Label-free stand-in for the quality of a selection: DCG of the normalized
    /// gains in descending score order, over the DCG of `K` maximal gains.
    pub fn proxy_quality(&self, user: usize, selected: &[usize]) -> f64 {
        let u = &self.users[user];
        let mut gains: Vec<f64> = selected.iter().map(|&j| u.gain[j]).collect();
        gains.sort_unstable_by(|a, b| b.total_cmp(a));
        dcg(&gains) / self.ideal_dcg
    }

    /// Mean SID of the selected candidates.
    pub fn diversity(&self, user: usize, selected: &[usize]) -> f64 {
        let u = &self.users[user];
        selected.iter().map(|&j| u.sid[j]).sum::<f64>() / self.k as f64
    }

    /// The unconstrained optimum: each user's `K` highest scores, ties to lower index.
    pub fn greedy_top_k(&self) -> SelectionMatrix {
        let rows = self
            .users
            .iter()
            .map(|u| {
                let mut idx: Vec<usize> = (0..u.rec.len()).collect();
                idx.sort_by(|&a, &b| u.rec[b].total_cmp(&u.rec[a]).then(a.cmp(&b)));
                idx.truncate(self.k);
                idx.sort_unstable();
                idx
            })
            .collect();
        SelectionMatrix { rows }
    }

    fn split(&self) -> Result<GroupSplit<usize>> {
        let mut active = alloc::collections::BTreeSet::new();
        let mut inactive = alloc::collections::BTreeSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            match g {
                Group::Active => active.insert(i),
                Group::Inactive => inactive.insert(i),
            };
        }
        GroupSplit::from_groups(active, inactive)
    }

    /// Objective, per-user proxy quality and diversity, and the two constrained
    /// disparities of `selection`, computed from scratch with the metric functions.
    pub fn evaluate(&self, selection: &SelectionMatrix) -> Result<Evaluation> {
        selection.check(self)?;
        let mut objective = 0.0;
        let mut quality = Vec::with_capacity(self.users.len());
        let mut diversity = Vec::with_capacity(self.users.len());
        for (i, row) in selection.rows.iter().enumerate() {
            objective += row.iter().map(|&j| self.users[i].rec[j]).sum::<f64>();
            quality.push(self.proxy_quality(i, row));
            diversity.push(self.diversity(i, row));
        }
        let values = match self.mode {
            ConstraintMode::Group => {
                let split = self.split()?;
                let as_map =
                    |v: &[f64]| -> BTreeMap<usize, f64> { v.iter().copied().enumerate().collect() };
                [
                    group_disparity(&as_map(&quality), &split)?,
                    group_disparity(&as_map(&diversity), &split)?,
                ]
            }
            ConstraintMode::Individual => [gini(&quality)?, gini(&diversity)?],
        };
        Ok(Evaluation {
            objective,
            quality,
            diversity,
            values,
        })
    }
}

pub(crate) fn dcg(sorted_gains: &[f64]) -> f64 {
    sorted_gains
        .iter()
        .enumerate()
        .map(|(r, g)| g * discount(r))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `Σ_i Σ_j Q_ij S(i, j)`.
    pub objective: f64,
    pub quality: Vec<f64>,
    pub diversity: Vec<f64>,
    /// `[quality disparity, diversity disparity]` under the problem's mode.
    pub values: [f64; 2],
}

impl Evaluation {
    pub fn violations(&self, epsilon: &[f64; 2]) -> [f64; 2] {
        [
            violation(self.values[0], epsilon[0]),
            violation(self.values[1], epsilon[1]),
        ]
    }

    pub fn is_feasible(&self, epsilon: &[f64; 2]) -> bool {
        self.violations(epsilon) == [0.0, 0.0]
    }
}

fn strictness(epsilon: f64) -> f64 {
    1e-9 * libm::fmax(1.0, libm::fabs(epsilon))
}

/// How far `value` is from satisfying `value < epsilon`; zero when satisfied.
///
/// Strictness is enforced with a relative margin of `1e-9`, so a value equal to its
/// bound violates it by that margin. An infinite bound is never violated.
pub fn violation(value: f64, epsilon: f64) -> f64 {
    if epsilon == f64::INFINITY {
        return 0.0;
    }
    libm::fmax(0.0, value - (epsilon - strictness(epsilon)))
}

/// `Q`: the selected candidate indices of every user, each row sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionMatrix {
    rows: Vec<Vec<usize>>,
}

impl SelectionMatrix {
    pub fn new(mut rows: Vec<Vec<usize>>, problem: &SelectionProblem) -> Result<Self> {
        for r in &mut rows {
            r.sort_unstable();
        }
        let m = SelectionMatrix { rows };
        m.check(problem)?;
        Ok(m)
    }

    fn check(&self, problem: &SelectionProblem) -> Result<()> {
        if self.rows.len() != problem.users.len() {
            return Err(Error::InvalidConfig(format!(
                "selection has {} rows for {} users",
                self.rows.len(),
                problem.users.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let n = problem.users[i].rec.len();
            let distinct = row.windows(2).all(|w| w[0] < w[1]);
            if row.len() != problem.k || !distinct || row.iter().any(|&j| j >= n) {
                return Err(Error::InvalidConfig(format!(
                    "row {i} is not a set of exactly {} candidates",
                    problem.k
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, user: usize) -> &[usize] {
        &self.rows[user]
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<usize>>) -> Self {
        SelectionMatrix { rows }
    }

    /// Dense 0/1 view of one row over `n` candidates.
    pub fn indicator(&self, user: usize, n: usize) -> Vec<u8> {
        let mut q = alloc::vec![0u8; n];
        for &j in &self.rows[user] {
            q[j] = 1;
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_user_problem() -> SelectionProblem {
        SelectionProblem::new(
            vec![vec![0.9, 0.8], vec![0.5]],
            vec![vec![0.0, 0.9], vec![0.9]],
            vec![Group::Active, Group::Inactive],
            1,
            ConstraintMode::Group,
        )
        .unwrap()
    }

    #[test]
    fn greedy_picks_highest_scores() {
        let p = two_user_problem();
        let q = p.greedy_top_k();
        assert_eq!(q.rows(), &[vec![0], vec![0]]);
        let e = p.evaluate(&q).unwrap();
        assert!((e.objective - 1.4).abs() < 1e-12);
        // gains: 0.9 -> 1, 0.5 -> 0
        assert_eq!(e.quality, vec![1.0, 0.0]);
        assert_eq!(e.values, [1.0, 0.9]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let p = SelectionProblem::new(
            vec![vec![0.5, 0.7, 0.7, 0.1]],
            vec![vec![0.0; 4]],
            vec![Group::Inactive],
            2,
            ConstraintMode::Individual,
        )
        .unwrap();
        assert_eq!(p.greedy_top_k().rows(), &[vec![1, 2]]);
        let p = SelectionProblem::new(
            vec![vec![0.7, 0.7, 0.7]],
            vec![vec![0.0; 3]],
            vec![Group::Inactive],
            1,
            ConstraintMode::Individual,
        )
        .unwrap();
        assert_eq!(p.greedy_top_k().rows(), &[vec![0]]);
    }

    #[test]
    fn strict_bounds() {
        assert!(violation(0.5, 0.5) > 0.0);
        assert_eq!(violation(0.4, 0.5), 0.0);
        assert_eq!(violation(10.0, f64::INFINITY), 0.0);
        assert!((violation(0.7, 0.5) - 0.2).abs() < 1e-8);
    }

    #[test]
    fn rejects_malformed_selections() {
        let p = two_user_problem();
        assert!(SelectionMatrix::new(vec![vec![0, 1], vec![0]], &p).is_err());
        assert!(SelectionMatrix::new(vec![vec![2], vec![0]], &p).is_err());
        assert!(SelectionMatrix::new(vec![vec![1]], &p).is_err());
        let q = SelectionMatrix::new(vec![vec![1], vec![0]], &p).unwrap();
        assert_eq!(q.indicator(0, 2), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(matches!(
            SelectionProblem::new(
                vec![vec![0.1]],
                vec![vec![0.0]],
                vec![Group::Active],
                2,
                ConstraintMode::Individual
            ),
            Err(Error::TooFewCandidates { .. })
        ));
        assert_eq!(
            SelectionProblem::new(
                vec![vec![0.1]],
                vec![vec![0.0]],
                vec![Group::Active],
                1,
                ConstraintMode::Group
            )
            .unwrap_err(),
            Error::EmptyGroup
        );
    }
}
