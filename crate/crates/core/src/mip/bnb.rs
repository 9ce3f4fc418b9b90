//! LP-based branch and bound for binary programs.
//!
//! Branching picks the most fractional variable (lowest index on ties). The
//! search dives depth-first into the child on the rounding side of the
//! branching variable and, once a dive ends, resumes from the open node with
//! the smallest LP bound. Nodes off the dive are rebuilt from the root
//! tableau by fixing their variables and running the dual simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mip::program::{BinaryProgram, Sense};
use crate::mip::simplex::{LpStatus, Tableau};

const INTEGRALITY_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Wall-clock budget in seconds; `None` for no limit.
    pub time_s: Option<f64>,
    pub node_cap: usize,
    pub gap_tol: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { time_s: None, node_cap: 1_000_000, gap_tol: 1e-6 }
    }
}

impl Limits {
    pub fn with_time(time_s: f64) -> Self {
        Self { time_s: Some(time_s), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    /// A limit stopped the search with an incumbent in hand.
    Feasible,
    Infeasible,
    /// A limit stopped the search before any incumbent was found.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<u8>>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub elapsed: f64,
}

impl MipResult {
    fn infeasible(nodes: usize, elapsed: f64) -> Self {
        Self {
            status: MipStatus::Infeasible,
            incumbent: None,
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            gap: 0.0,
            nodes,
            elapsed,
        }
    }
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

#[derive(Debug)]
struct Node {
    bound: f64,
    fixings: Vec<(usize, bool)>,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound (then oldest node) compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    x: Vec<u8>,
    objective: f64,
}

pub fn bnb_solve(prog: &BinaryProgram, limits: &Limits) -> Result<MipResult> {
    prog.validate()?;
    let start = Instant::now();
    let n = prog.var_count;
    let (status, root) = Tableau::solve(prog, &vec![0.0; n], &vec![1.0; n])?;
    let root = match (status, root) {
        (LpStatus::Optimal, Some(t)) => t,
        _ => return Ok(MipResult::infeasible(1, start.elapsed().as_secs_f64())),
    };
    let mut search = Search {
        prog,
        root: &root,
        limits,
        deadline: limits.time_s.map(|s| start + std::time::Duration::from_secs_f64(s.max(0.0))),
        incumbent: None,
        nodes: 0,
    };
    let root_x = root.structural_values();
    if let Some(inc) = rounding_heuristic(prog, &root, &root_x, limits)? {
        search.offer(inc.x, inc.objective);
    }
    let open_bound = search.run(Vec::new(), root.clone(), root.objective())?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(search.finish(open_bound, elapsed))
}

struct Search<'a> {
    prog: &'a BinaryProgram,
    root: &'a Tableau,
    limits: &'a Limits,
    deadline: Option<Instant>,
    incumbent: Option<Incumbent>,
    nodes: usize,
}

impl Search<'_> {
    fn offer(&mut self, x: Vec<u8>, objective: f64) -> bool {
        if !self.prog.is_feasible(&x, FEASIBILITY_TOL) {
            return false;
        }
        if self.incumbent.as_ref().is_none_or(|inc| objective < inc.objective) {
            self.incumbent = Some(Incumbent { x, objective });
            return true;
        }
        false
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some(inc) => inc.objective - self.limits.gap_tol * inc.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn out_of_budget(&self) -> bool {
        self.nodes >= self.limits.node_cap || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Explores the subtree rooted at `fixings`, whose tableau is `tab`.
    /// Returns the smallest bound among nodes left open by a limit, or
    /// `+inf` when the subtree was exhausted.
    fn run(&mut self, fixings: Vec<(usize, bool)>, tab: Tableau, bound: f64) -> Result<f64> {
        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut seq = 0usize;
        let mut dive = Some((fixings, tab, bound));
        loop {
            let (fixings, mut tab, parent_bound) = match dive.take() {
                Some(d) => d,
                None => {
                    let Some(node) = heap.pop() else {
                        return Ok(f64::INFINITY);
                    };
                    if node.bound >= self.cutoff() {
                        // Best-first order: everything left is dominated.
                        return Ok(f64::INFINITY);
                    }
                    let mut t = self.root.clone();
                    for &(j, v) in &node.fixings {
                        t.fix(j, f64::from(u8::from(v)));
                    }
                    (node.fixings, t, node.bound)
                }
            };
            if self.out_of_budget() {
                let open = heap.iter().map(|n| n.bound).fold(parent_bound, f64::min);
                return Ok(open);
            }
            self.nodes += 1;
            if tab.dual()? != LpStatus::Optimal {
                continue;
            }
            let bound = tab.objective();
            if bound >= self.cutoff() {
                continue;
            }
            let x = tab.structural_values();
            let branch = most_fractional(&x);
            let Some(j) = branch else {
                let xi: Vec<u8> = x.iter().map(|&v| u8::from(v > 0.5)).collect();
                let obj = self.prog.evaluate(&xi.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
                self.offer(xi, obj);
                continue;
            };
            let up_first = x[j] >= 0.5;
            let mut other = fixings.clone();
            other.push((j, !up_first));
            heap.push(Node { bound, fixings: other, seq });
            seq += 1;
            let mut next = fixings;
            next.push((j, up_first));
            tab.fix(j, f64::from(u8::from(up_first)));
            dive = Some((next, tab, bound));
        }
    }

    fn finish(self, open_bound: f64, elapsed: f64) -> MipResult {
        let limited = open_bound != f64::INFINITY;
        match self.incumbent {
            None if !limited => MipResult::infeasible(self.nodes, elapsed),
            None => MipResult {
                status: MipStatus::Unknown,
                incumbent: None,
                objective: f64::INFINITY,
                bound: open_bound,
                gap: f64::INFINITY,
                nodes: self.nodes,
                elapsed,
            },
            Some(inc) => {
                let bound = open_bound.min(inc.objective);
                let gap = relative_gap(inc.objective, bound);
                let status = if !limited || gap <= self.limits.gap_tol {
                    MipStatus::Optimal
                } else {
                    MipStatus::Feasible
                };
                MipResult {
                    status,
                    incumbent: Some(inc.x),
                    objective: inc.objective,
                    bound,
                    gap,
                    nodes: self.nodes,
                    elapsed,
                }
            }
        }
    }
}

fn most_fractional(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Rows of the form `sum x_j = 1` with unit coefficients over disjoint
/// variables: the "assign exactly one" structure of assignment programs.
fn choice_groups(prog: &BinaryProgram) -> Vec<Vec<usize>> {
    let mut used = vec![false; prog.var_count];
    let mut groups = Vec::new();
    for c in &prog.constraints {
        if c.sense != Sense::Eq || c.rhs != 1.0 || c.coeffs.len() < 2 {
            continue;
        }
        if c.coeffs.iter().any(|&(j, a)| a != 1.0 || used[j]) {
            continue;
        }
        for &(j, _) in &c.coeffs {
            used[j] = true;
        }
        groups.push(c.coeffs.iter().map(|&(j, _)| j).collect());
    }
    groups
}

/// Rounds the root LP onto the choice groups, repairs rows that only touch
/// group variables by single reassignments, then completes the remaining
/// variables with a small sub-search.
fn rounding_heuristic(
    prog: &BinaryProgram,
    root: &Tableau,
    lp_x: &[f64],
    limits: &Limits,
) -> Result<Option<Incumbent>> {
    let groups = choice_groups(prog);
    if groups.is_empty() {
        return Ok(None);
    }
    let mut in_group = vec![false; prog.var_count];
    for g in &groups {
        for &j in g {
            in_group[j] = true;
        }
    }
    let local_rows: Vec<usize> = (0..prog.constraints.len())
        .filter(|&r| prog.constraints[r].coeffs.iter().all(|&(j, _)| in_group[j]))
        .collect();
    let mut x = vec![0.0; prog.var_count];
    let mut choice: Vec<usize> = groups
        .iter()
        .map(|g| {
            *g.iter()
                .max_by(|&&a, &&b| lp_x[a].total_cmp(&lp_x[b]).then(b.cmp(&a)))
                .expect("non-empty group")
        })
        .collect();
    for &j in &choice {
        x[j] = 1.0;
    }
    let violation = |x: &[f64]| -> f64 {
        local_rows.iter().map(|&r| prog.constraints[r].violation(x)).sum()
    };
    let mut current = violation(&x);
    let mut rounds = 0;
    while current > FEASIBILITY_TOL {
        rounds += 1;
        if rounds > 10 * groups.len() {
            return Ok(None);
        }
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (g, members) in groups.iter().enumerate() {
            let from = choice[g];
            for &to in members {
                if to == from {
                    continue;
                }
                x[from] = 0.0;
                x[to] = 1.0;
                let v = violation(&x);
                x[to] = 0.0;
                x[from] = 1.0;
                let delta = prog.objective[to] - prog.objective[from];
                let better = v < current - 1e-12
                    && best.is_none_or(|(_, _, bv, bd)| v < bv - 1e-12 || (v <= bv + 1e-12 && delta < bd));
                if better {
                    best = Some((g, to, v, delta));
                }
            }
        }
        let Some((g, to, v, _)) = best else {
            return Ok(None);
        };
        x[choice[g]] = 0.0;
        x[to] = 1.0;
        choice[g] = to;
        current = v;
    }
    let fixings: Vec<(usize, bool)> = groups
        .iter()
        .flatten()
        .map(|&j| (j, x[j] > 0.5))
        .collect();
    let mut tab = root.clone();
    for &(j, v) in &fixings {
        tab.fix(j, f64::from(u8::from(v)));
    }
    let sub_limits = Limits {
        time_s: limits.time_s.map(|t| t * 0.1),
        node_cap: 500,
        gap_tol: limits.gap_tol,
    };
    let mut sub = Search {
        prog,
        root,
        limits: &sub_limits,
        deadline: sub_limits
            .time_s
            .map(|s| Instant::now() + std::time::Duration::from_secs_f64(s.max(0.0))),
        incumbent: None,
        nodes: 0,
    };
    // Open nodes are rebuilt from `root`, so every node carries the fixings.
    sub.run(fixings, tab, f64::NEG_INFINITY)?;
    Ok(sub.incumbent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enumerate_optimum(p: &BinaryProgram) -> Option<f64> {
        let n = p.var_count;
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
            if p.max_violation(&x) <= 1e-9 {
                let v = p.evaluate(&x);
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        }
        best
    }

    fn random_program(rng: &mut ChaCha8Rng) -> BinaryProgram {
        let n = rng.random_range(2..=12);
        let mut p = BinaryProgram::new(n);
        for j in 0..n {
            p.set_objective(j, rng.random_range(-5i32..=5) as f64);
        }
        for _ in 0..rng.random_range(1..=6) {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.6) {
                    coeffs.push((j, rng.random_range(-3i32..=4) as f64));
                }
            }
            let sense = match rng.random_range(0..3) {
                0 => Sense::Le,
                1 => Sense::Ge,
                _ => Sense::Eq,
            };
            let rhs = rng.random_range(-2i32..=5) as f64;
            p.add_constraint(coeffs, sense, rhs).unwrap();
        }
        p
    }

    #[test]
    fn knapsack_cardinality() {
        let mut p = BinaryProgram::new(3);
        for j in 0..3 {
            p.set_objective(j, -1.0);
        }
        p.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0).unwrap();
        let r = bnb_solve(&p, &Limits::default()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn integral_root_needs_one_node() {
        let mut p = BinaryProgram::new(4);
        for (j, c) in [3.0, 1.0, 2.0, 5.0].into_iter().enumerate() {
            p.set_objective(j, c);
        }
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0).unwrap();
        p.add_constraint(vec![(2, 1.0), (3, 1.0)], Sense::Eq, 1.0).unwrap();
        let r = bnb_solve(&p, &Limits::default()).unwrap();
        assert_eq!(r.nodes, 1);
        assert_eq!(r.incumbent.unwrap(), vec![0, 1, 1, 0]);
    }

    #[test]
    fn matches_enumeration_on_random_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let p = random_program(&mut rng);
            let r = bnb_solve(&p, &Limits::default()).unwrap();
            match enumerate_optimum(&p) {
                None => assert_eq!(r.status, MipStatus::Infeasible, "{}", p.to_lp_string()),
                Some(opt) => {
                    assert_eq!(r.status, MipStatus::Optimal, "{}", p.to_lp_string());
                    assert!((r.objective - opt).abs() <= 1e-6, "{} vs {opt}\n{}", r.objective, p.to_lp_string());
                    assert!(p.is_feasible(r.incumbent.as_ref().unwrap(), 1e-6));
                    assert!(r.bound <= r.objective + 1e-6);
                }
            }
        }
    }

    #[test]
    fn node_capped_bounds_stay_valid_and_runs_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let p = random_program(&mut rng);
            let Some(opt) = enumerate_optimum(&p) else { continue };
            for cap in [1, 2, 3, 5, 8] {
                let limits = Limits { node_cap: cap, ..Limits::default() };
                let a = bnb_solve(&p, &limits).unwrap();
                let b = bnb_solve(&p, &limits).unwrap();
                assert!(a.bound <= opt + 1e-6, "bound {} above optimum {opt}", a.bound);
                assert_eq!(a.nodes, b.nodes);
                assert_eq!(a.incumbent, b.incumbent);
                if let Some(x) = &a.incumbent {
                    assert!(p.is_feasible(x, 1e-6));
                    assert!(a.objective >= opt - 1e-6);
                }
            }
        }
    }
}
