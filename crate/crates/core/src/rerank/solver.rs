//! Penalty-method local search over single-swap moves.
//!
//! Starting from the greedy top-K selection, the search maximizes
//! `Φ = Σ R - Σ_c μ_c · violation_c` by best-improvement hill climbing. When no
//! single swap improves `Φ`, pairs of swaps are tried on small instances. At an
//! infeasible local optimum the multipliers of the violated constraints double; when no
//! swap can lower the penalty any more, or at a feasible local optimum, a seeded random
//! kick of one to three swaps restarts the climb (from the best feasible selection once
//! there is one). Constraint values are maintained incrementally: group gaps from
//! per-group sums, Gini coefficients from a sorted copy of the per-user values with
//! prefix sums.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::Group;
use crate::rerank::config::{ConstraintMode, SolverBudget};
use crate::rerank::problem::{discount, violation, Evaluation, SelectionMatrix, SelectionProblem};
use crate::Result;

/// Swap `out` for `incoming` in the selection of `user` (candidate indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub user: usize,
    pub out: usize,
    pub incoming: usize,
}

impl Move {
    fn reversed(self) -> Move {
        Move {
            user: self.user,
            out: self.incoming,
            incoming: self.out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Start,
    Swap(Move),
    Penalty,
    Kick,
}

impl TraceEvent {
    pub fn label(&self) -> String {
        match self {
            TraceEvent::Start => "start".into(),
            TraceEvent::Swap(m) => format!("swap:{}:{}>{}", m.user, m.out, m.incoming),
            TraceEvent::Penalty => "penalty".into(),
            TraceEvent::Kick => "kick".into(),
        }
    }
}

/// One line of the optional solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Unpenalized objective `Σ R` of the current selection.
    pub objective: f64,
    pub violations: [f64; 2],
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub selection: SelectionMatrix,
    /// Exact evaluation of `selection`.
    pub evaluation: Evaluation,
    pub feasible: bool,
    pub iterations: usize,
    pub kicks: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
struct GroupGap {
    sums: [f64; 2],
    sizes: [f64; 2],
}

impl GroupGap {
    fn gap(sums: &[f64; 2], sizes: &[f64; 2]) -> f64 {
        libm::fabs(sums[0] / sizes[0] - sums[1] / sizes[1])
    }
}

/// Sorted copy of per-user values supporting `O(log m)` what-if Gini queries.
#[derive(Debug, Clone)]
struct GiniState {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    /// `Σ_{i<j} |x_i - x_j|`.
    pairs: f64,
}

impl GiniState {
    fn total(&self) -> f64 {
        self.prefix[self.sorted.len()]
    }

    /// `Σ_y |z - y|` over the current values.
    fn abs_dev(&self, z: f64) -> f64 {
        let m = self.sorted.len();
        let below = self.sorted.partition_point(|&y| y < z);
        let lo = self.prefix[below];
        z * below as f64 - lo + (self.total() - lo) - z * (m - below) as f64
    }

    fn gini(pairs: f64, total: f64, m: usize) -> f64 {
        if total <= 0.0 {
            0.0
        } else {
            libm::fmax(0.0, pairs / (m as f64 * total))
        }
    }
}

#[derive(Debug, Clone)]
enum Tracker {
    Group(GroupGap),
    Gini(GiniState),
}

impl Tracker {
    fn build(mode: ConstraintMode, values: &[f64], groups: &[Group]) -> Tracker {
        match mode {
            ConstraintMode::Group => {
                let mut sums = [0.0; 2];
                let mut sizes = [0.0; 2];
                for (v, g) in values.iter().zip(groups) {
                    sums[*g as usize] += v;
                    sizes[*g as usize] += 1.0;
                }
                Tracker::Group(GroupGap { sums, sizes })
            }
            ConstraintMode::Individual => {
                let mut sorted = values.to_vec();
                sorted.sort_unstable_by(f64::total_cmp);
                let mut prefix = Vec::with_capacity(sorted.len() + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &v in &sorted {
                    acc += v;
                    prefix.push(acc);
                }
                let m = sorted.len() as f64;
                let pairs = sorted
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (2.0 * i as f64 - m + 1.0) * v)
                    .sum();
                Tracker::Gini(GiniState {
                    sorted,
                    prefix,
                    pairs,
                })
            }
        }
    }

    fn value(&self) -> f64 {
        match self {
            Tracker::Group(g) => GroupGap::gap(&g.sums, &g.sizes),
            Tracker::Gini(s) => GiniState::gini(s.pairs, s.total(), s.sorted.len()),
        }
    }

    /// Value after one user's entry changes from `old` to `new`.
    fn value_after(&self, group: Group, old: f64, new: f64) -> f64 {
        match self {
            Tracker::Group(g) => {
                let mut sums = g.sums;
                sums[group as usize] += new - old;
                GroupGap::gap(&sums, &g.sizes)
            }
            Tracker::Gini(s) => {
                let pairs = s.pairs + s.abs_dev(new) - s.abs_dev(old) - libm::fabs(new - old);
                GiniState::gini(pairs, s.total() - old + new, s.sorted.len())
            }
        }
    }
}

#[derive(Clone)]
struct Search<'a> {
    problem: &'a SelectionProblem,
    epsilon: [f64; 2],
    disc: Vec<f64>,
    rows: Vec<Vec<usize>>,
    selected: Vec<Vec<bool>>,
    /// Candidate indices of each user by decreasing `R` (ties by index).
    by_rec: Vec<Vec<usize>>,
    /// Gains of each row in descending order.
    gains: Vec<Vec<f64>>,
    rec_sum: Vec<f64>,
    /// Per-user `[quality, diversity]`.
    values: [Vec<f64>; 2],
    trackers: [Tracker; 2],
    objective: f64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a SelectionProblem, start: &SelectionMatrix, epsilon: [f64; 2]) -> Self {
        let k = problem.k();
        let mut s = Search {
            problem,
            epsilon,
            disc: (0..k).map(discount).collect(),
            rows: start.rows().to_vec(),
            selected: Vec::new(),
            by_rec: Vec::new(),
            gains: Vec::new(),
            rec_sum: Vec::new(),
            values: [Vec::new(), Vec::new()],
            trackers: [
                Tracker::build(problem.mode(), &[], &[]),
                Tracker::build(problem.mode(), &[], &[]),
            ],
            objective: 0.0,
        };
        for i in 0..problem.num_users() {
            let u = problem.user(i);
            let mut mask = vec![false; u.rec.len()];
            for &j in &s.rows[i] {
                mask[j] = true;
            }
            s.selected.push(mask);
            let mut by_rec: Vec<usize> = (0..u.rec.len()).collect();
            by_rec.sort_by(|&a, &b| u.rec[b].total_cmp(&u.rec[a]).then(a.cmp(&b)));
            s.by_rec.push(by_rec);
            s.gains.push(Vec::new());
            s.rec_sum.push(0.0);
            s.values[0].push(0.0);
            s.values[1].push(0.0);
            s.refresh_user(i);
        }
        s.rebuild();
        s
    }

    fn refresh_user(&mut self, i: usize) {
        let u = self.problem.user(i);
        let row = &self.rows[i];
        let mut g: Vec<f64> = row.iter().map(|&j| u.gain[j]).collect();
        g.sort_unstable_by(|a, b| b.total_cmp(a));
        self.values[0][i] = self.problem.proxy_quality(i, row);
        self.values[1][i] = self.problem.diversity(i, row);
        self.rec_sum[i] = row.iter().map(|&j| u.rec[j]).sum();
        self.gains[i] = g;
    }

    fn rebuild(&mut self) {
        let mode = self.problem.mode();
        let groups = self.problem.groups();
        self.trackers = [
            Tracker::build(mode, &self.values[0], groups),
            Tracker::build(mode, &self.values[1], groups),
        ];
        self.objective = self.rec_sum.iter().sum();
    }

    fn current_values(&self) -> [f64; 2] {
        [self.trackers[0].value(), self.trackers[1].value()]
    }

    fn violations_of(&self, values: [f64; 2]) -> [f64; 2] {
        [
            violation(values[0], self.epsilon[0]),
            violation(values[1], self.epsilon[1]),
        ]
    }

    fn violations(&self) -> [f64; 2] {
        self.violations_of(self.current_values())
    }

    /// Quality of user `i` after swapping a selected gain `out` for `incoming`.
    fn swapped_quality(&self, i: usize, out: f64, incoming: f64) -> f64 {
        let mut sum = 0.0;
        let mut rank = 0;
        let mut removed = false;
        let mut inserted = false;
        for &g in &self.gains[i] {
            if !removed && g == out {
                removed = true;
                continue;
            }
            if !inserted && incoming > g {
                sum += incoming * self.disc[rank];
                rank += 1;
                inserted = true;
            }
            sum += g * self.disc[rank];
            rank += 1;
        }
        if !inserted {
            sum += incoming * self.disc[rank];
        }
        sum / self.problem.ideal_dcg()
    }

    /// Change in objective and the constraint values after `mv`.
    fn delta(&self, mv: Move) -> (f64, [f64; 2]) {
        let u = self.problem.user(mv.user);
        let group = self.problem.groups()[mv.user];
        let d_rec = u.rec[mv.incoming] - u.rec[mv.out];
        let q_old = self.values[0][mv.user];
        let q_new = self.swapped_quality(mv.user, u.gain[mv.out], u.gain[mv.incoming]);
        let d_old = self.values[1][mv.user];
        let d_new = d_old + (u.sid[mv.incoming] - u.sid[mv.out]) / self.problem.k() as f64;
        (
            d_rec,
            [
                self.trackers[0].value_after(group, q_old, q_new),
                self.trackers[1].value_after(group, d_old, d_new),
            ],
        )
    }

    fn penalty(&self, mv: Move, mu: [f64; 2]) -> f64 {
        let viol = self.violations_of(self.delta(mv).1);
        mu[0] * viol[0] + mu[1] * viol[1]
    }

    /// Best single swap by `Δ Σ R - Δ penalty`, if any improves by more than `1e-12`.
    ///
    /// Since the penalty is non-negative, no move gains more than `Δ R + cur_pen`;
    /// incoming candidates are visited by decreasing `R`, so each scan stops early.
    fn best_move(&self, order: &[usize], mu: [f64; 2], cur_pen: f64) -> Option<Move> {
        let mut best: Option<(f64, Move)> = None;
        for &i in order {
            let u = self.problem.user(i);
            for &out in &self.rows[i] {
                for &incoming in &self.by_rec[i] {
                    let d_rec = u.rec[incoming] - u.rec[out];
                    let bar = best.map_or(1e-12, |(b, _)| b);
                    if d_rec + cur_pen <= bar {
                        break;
                    }
                    if self.selected[i][incoming] {
                        continue;
                    }
                    let mv = Move {
                        user: i,
                        out,
                        incoming,
                    };
                    let gain = d_rec - (self.penalty(mv, mu) - cur_pen);
                    if gain > bar {
                        best = Some((gain, mv));
                    }
                }
            }
        }
        best.map(|(_, mv)| mv)
    }

    fn moves(&self, order: &[usize]) -> Vec<Move> {
        let mut out = Vec::new();
        for &i in order {
            for &o in &self.rows[i] {
                for incoming in 0..self.problem.user(i).rec.len() {
                    if !self.selected[i][incoming] {
                        out.push(Move {
                            user: i,
                            out: o,
                            incoming,
                        });
                    }
                }
            }
        }
        out
    }

    /// Best pair of swaps applied together, for small neighborhoods only.
    fn best_pair_move(&self, order: &[usize], mu: [f64; 2], cur_pen: f64) -> Option<(Move, Move)> {
        let k = self.problem.k();
        let size: usize = self
            .problem
            .users()
            .iter()
            .map(|u| k * (u.rec.len() - k))
            .sum();
        if size > PAIR_NEIGHBORHOOD_LIMIT {
            return None;
        }
        let moves = self.moves(order);
        let rec_delta = |mv: &Move| {
            let u = self.problem.user(mv.user);
            u.rec[mv.incoming] - u.rec[mv.out]
        };
        let mut best: Option<(f64, Move, Move)> = None;
        for (n, a) in moves.iter().enumerate() {
            let mut after = self.clone();
            after.apply(*a);
            let d_a = rec_delta(a);
            for b in &moves[n + 1..] {
                if b.user == a.user && (b.out == a.out || b.incoming == a.incoming) {
                    continue;
                }
                let bar = best.map_or(1e-12, |(g, _, _)| g);
                if d_a + rec_delta(b) + cur_pen <= bar {
                    continue;
                }
                let gain = d_a + rec_delta(b) - (after.penalty(*b, mu) - cur_pen);
                if gain > bar {
                    best = Some((gain, *a, *b));
                }
            }
        }
        best.map(|(_, a, b)| (a, b))
    }

    /// Whether any single swap lowers the penalty, regardless of `Σ R`.
    fn can_reduce_penalty(&self, order: &[usize], mu: [f64; 2], cur_pen: f64) -> bool {
        order.iter().any(|&i| {
            self.rows[i].iter().any(|&out| {
                (0..self.problem.user(i).rec.len()).any(|incoming| {
                    !self.selected[i][incoming]
                        && self.penalty(
                            Move {
                                user: i,
                                out,
                                incoming,
                            },
                            mu,
                        ) < cur_pen * (1.0 - 1e-9)
                })
            })
        })
    }

    fn apply(&mut self, mv: Move) {
        let row = &mut self.rows[mv.user];
        let pos = row.iter().position(|&j| j == mv.out).expect("selected");
        row[pos] = mv.incoming;
        self.selected[mv.user][mv.out] = false;
        self.selected[mv.user][mv.incoming] = true;
        self.refresh_user(mv.user);
        // full rebuild keeps the incremental state free of drift
        self.rebuild();
    }

    fn selection(&self) -> SelectionMatrix {
        let mut rows = self.rows.clone();
        for r in &mut rows {
            r.sort_unstable();
        }
        SelectionMatrix::from_rows_unchecked(rows)
    }
}

/// Doubling streak after which the search kicks instead of pricing further.
const MAX_DOUBLINGS: usize = 64;

/// Pair moves are only searched when there are at most this many single swaps.
const PAIR_NEIGHBORHOOD_LIMIT: usize = 400;

fn is_zero(v: &[f64; 2]) -> bool {
    v[0] == 0.0 && v[1] == 0.0
}

/// Maximizes `Σ R` subject to the mode's two disparity bounds (`value < ε`).
///
/// `epsilon` must already be resolved to numbers (infinity disables a constraint).
/// When no feasible selection is found within the budget, the least-violating
/// selection that is nowhere worse than `baseline` is returned with
/// `feasible == false`.
pub fn solve_constrained_selection(
    problem: &SelectionProblem,
    baseline: &SelectionMatrix,
    epsilon: [f64; 2],
    budget: &SolverBudget,
    trace: bool,
) -> Result<SolveOutcome> {
    let base_eval = problem.evaluate(baseline)?;
    let base_viol = base_eval.violations(&epsilon);
    let finish = |selection: SelectionMatrix, iterations, kicks, rows| -> Result<SolveOutcome> {
        let evaluation = problem.evaluate(&selection)?;
        let feasible = evaluation.is_feasible(&epsilon);
        Ok(SolveOutcome {
            selection,
            evaluation,
            feasible,
            iterations,
            kicks,
            trace: rows,
        })
    };
    if is_zero(&base_viol) {
        let rows = if trace {
            vec![TraceRow {
                iter: 0,
                objective: base_eval.objective,
                violations: base_viol,
                event: TraceEvent::Start,
            }]
        } else {
            Vec::new()
        };
        return finish(baseline.clone(), 0, 0, rows);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut search = Search::new(problem, baseline, epsilon);
    let m = problem.num_users();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);

    let mean_rec = {
        let (s, n) = problem
            .users()
            .iter()
            .flat_map(|u| u.rec.iter())
            .fold((0.0, 0usize), |(s, n), v| (s + libm::fabs(*v), n + 1));
        let mean = s / n as f64;
        if mean > 0.0 {
            mean
        } else {
            1.0
        }
    };
    let mut mu = base_eval
        .values
        .map(|v| mean_rec / libm::fmax(libm::fabs(v), 1e-9));
    let scale = [
        libm::fmax(libm::fabs(epsilon[0]), 1e-9),
        libm::fmax(libm::fabs(epsilon[1]), 1e-9),
    ];
    let weighted = |v: &[f64; 2]| v[0] / scale[0] + v[1] / scale[1];

    let mut rows = Vec::new();
    let record = |rows: &mut Vec<TraceRow>, iter, s: &Search<'_>, event| {
        if trace {
            rows.push(TraceRow {
                iter,
                objective: s.objective,
                violations: s.violations(),
                event,
            });
        }
    };
    record(&mut rows, 0, &search, TraceEvent::Start);

    let mut best_feasible: Option<(f64, SelectionMatrix)> = None;
    let mut fallback = (weighted(&base_viol), baseline.clone());
    let mut kicks = 0;
    let mut iter = 0;
    // consecutive multiplier doublings without an accepted move
    let mut doublings = 0;

    while iter < budget.max_iterations {
        iter += 1;
        let cur_viol = search.violations();
        if is_zero(&cur_viol) {
            if best_feasible
                .as_ref()
                .is_none_or(|(obj, _)| search.objective > *obj)
            {
                best_feasible = Some((search.objective, search.selection()));
            }
        } else if best_feasible.is_none()
            && (0..2).all(|c| cur_viol[c] <= base_viol[c])
            && weighted(&cur_viol) < fallback.0
        {
            fallback = (weighted(&cur_viol), search.selection());
        }
        let cur_pen = mu[0] * cur_viol[0] + mu[1] * cur_viol[1];
        // moves are priced incrementally; accept only what the rebuilt state confirms,
        // otherwise rounding at large μ lets a move and its reverse both look improving
        let before = search.objective - cur_pen;
        let tol = 1e-12 * (1.0 + libm::fabs(search.objective) + cur_pen);
        let improved = |s: &Search<'_>| {
            let v = s.violations();
            s.objective - (mu[0] * v[0] + mu[1] * v[1]) > before + tol
        };

        if let Some(mv) = search.best_move(&order, mu, cur_pen) {
            search.apply(mv);
            if improved(&search) {
                doublings = 0;
                record(&mut rows, iter, &search, TraceEvent::Swap(mv));
                continue;
            }
            search.apply(mv.reversed());
        }
        if let Some((a, b)) = search.best_pair_move(&order, mu, cur_pen) {
            search.apply(a);
            search.apply(b);
            if improved(&search) {
                doublings = 0;
                record(&mut rows, iter, &search, TraceEvent::Swap(a));
                record(&mut rows, iter, &search, TraceEvent::Swap(b));
                continue;
            }
            search.apply(b.reversed());
            search.apply(a.reversed());
        }
        if !is_zero(&cur_viol) {
            // every infeasible stagnation raises the price of the violated bounds
            for c in 0..2 {
                if cur_viol[c] > 0.0 {
                    mu[c] *= 2.0;
                }
            }
            record(&mut rows, iter, &search, TraceEvent::Penalty);
            doublings += 1;
            let raised = mu[0] * cur_viol[0] + mu[1] * cur_viol[1];
            if doublings < MAX_DOUBLINGS && search.can_reduce_penalty(&order, mu, raised) {
                continue;
            }
        }
        if kicks >= budget.max_kicks {
            break;
        }
        kicks += 1;
        doublings = 0;
        // restart from the incumbent when there is one, otherwise from here
        if let Some((_, sel)) = &best_feasible {
            search = Search::new(problem, sel, epsilon);
        }
        for _ in 0..rng.random_range(1..=3usize) {
            let i = rng.random_range(0..m);
            let n = problem.user(i).rec.len();
            if n == problem.k() {
                continue;
            }
            let out = search.rows[i][rng.random_range(0..problem.k())];
            let free: Vec<usize> = (0..n).filter(|&j| !search.selected[i][j]).collect();
            let incoming = free[rng.random_range(0..free.len())];
            search.apply(Move {
                user: i,
                out,
                incoming,
            });
        }
        record(&mut rows, iter, &search, TraceEvent::Kick);
    }

    // the state left by the last move has not been inspected yet
    let final_viol = search.violations();
    if is_zero(&final_viol)
        && best_feasible
            .as_ref()
            .is_none_or(|(obj, _)| search.objective > *obj)
    {
        best_feasible = Some((search.objective, search.selection()));
    }

    match best_feasible {
        Some((_, sel)) => finish(sel, iter, kicks, rows),
        None => finish(fallback.1, iter, kicks, rows),
    }
}
