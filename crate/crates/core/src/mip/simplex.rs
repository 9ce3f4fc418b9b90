//! Dense bounded-variable simplex.
//!
//! Every row `a·x {<=,=,>=} b` gets a slack `s` with `a·x + s = b`, bounded
//! to `[0, inf)`, `(-inf, 0]` or `[0, 0]` by sense. Rows whose slack cannot
//! absorb the initial residual get an artificial variable, and a phase-one
//! pass drives those to zero. The resulting tableau is kept so branch and
//! bound can tighten variable bounds and reoptimise with the dual simplex.

use crate::error::{Error, Result};
use crate::mip::program::{BinaryProgram, Sense};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
pub(crate) const PRIMAL_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the program's variables (empty unless optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the relaxation `0 <= x <= 1` of a binary program.
pub fn lp_solve(prog: &BinaryProgram) -> Result<LpSolution> {
    prog.validate()?;
    let n = prog.var_count;
    let (status, tab) = Tableau::solve(prog, &vec![0.0; n], &vec![1.0; n])?;
    Ok(match (status, tab) {
        (LpStatus::Optimal, Some(t)) => LpSolution {
            status,
            x: t.structural_values(),
            objective: t.objective(),
            iterations: t.iterations,
        },
        (status, t) => LpSolution {
            status,
            x: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            iterations: t.map_or(0, |t| t.iterations),
        },
    })
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    rows: usize,
    cols: usize,
    structural: usize,
    // rows x cols, B^-1 A.
    a: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    artificial: Vec<bool>,
    pub(crate) iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    /// Two-phase primal simplex from scratch. Returns the final tableau when
    /// the relaxation is optimal (or unbounded, for diagnostics).
    pub(crate) fn solve(prog: &BinaryProgram, lo: &[f64], up: &[f64]) -> Result<(LpStatus, Option<Tableau>)> {
        let mut t = Self::build(prog, lo, up);
        if t.artificial.iter().any(|&a| a) {
            let phase_one: Vec<f64> = t.artificial.iter().map(|&a| f64::from(u8::from(a))).collect();
            t.price(&phase_one);
            match t.primal()? {
                LpStatus::Optimal => {}
                // Phase one is bounded below by zero.
                LpStatus::Unbounded => return Err(Error::Solver("phase one diverged".into())),
                LpStatus::Infeasible => unreachable!(),
            }
            let infeasibility: f64 = (0..t.cols)
                .filter(|&j| t.artificial[j])
                .map(|j| t.value(j))
                .sum();
            if infeasibility > PHASE_ONE_TOL {
                return Ok((LpStatus::Infeasible, None));
            }
            t.retire_artificials();
        }
        let cost = t.cost.clone();
        t.price(&cost);
        let status = t.primal()?;
        Ok((status, Some(t)))
    }

    fn build(prog: &BinaryProgram, lo_x: &[f64], up_x: &[f64]) -> Tableau {
        let n = prog.var_count;
        let m = prog.constraints.len();
        let mut lo: Vec<f64> = lo_x.to_vec();
        let mut up: Vec<f64> = up_x.to_vec();
        let mut state = vec![State::Lower; n];
        let x0: Vec<f64> = lo_x.to_vec();
        for c in &prog.constraints {
            let (l, u) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            up.push(u);
            state.push(if l.is_finite() { State::Lower } else { State::Upper });
        }
        let mut residual = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        for (r, c) in prog.constraints.iter().enumerate() {
            let res = c.rhs - c.activity(&x0);
            let (l, u) = (lo[n + r], up[n + r]);
            residual.push(res);
            needs_art.push(res < l - PRIMAL_TOL || res > u + PRIMAL_TOL);
        }
        let arts = needs_art.iter().filter(|&&b| b).count();
        let cols = n + m + arts;
        let mut a = vec![0.0; m * cols];
        let mut xb = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; cols];
        let mut next_art = n + m;
        for (r, c) in prog.constraints.iter().enumerate() {
            let row = &mut a[r * cols..(r + 1) * cols];
            for &(j, v) in &c.coeffs {
                row[j] = v;
            }
            row[n + r] = 1.0;
            if needs_art[r] {
                // Slack stays nonbasic at its finite bound (0).
                let sigma = residual[r].signum();
                for v in row.iter_mut() {
                    *v *= sigma;
                }
                row[next_art] = 1.0;
                artificial[next_art] = true;
                basis[r] = next_art;
                xb[r] = residual[r].abs();
                state.push(State::Basic);
                lo.push(0.0);
                up.push(f64::INFINITY);
                next_art += 1;
            } else {
                basis[r] = n + r;
                xb[r] = residual[r];
                state[n + r] = State::Basic;
            }
        }
        let mut cost = prog.objective.clone();
        cost.resize(cols, 0.0);
        Tableau {
            rows: m,
            cols,
            structural: n,
            a,
            xb,
            basis,
            state,
            lo,
            up,
            cost,
            reduced: vec![0.0; cols],
            artificial,
            iterations: 0,
            max_iterations: 50_000 + 200 * (m + cols),
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lo[j],
            State::Upper => self.up[j],
            State::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.xb[r]
            }
        }
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.structural)
            .map(|j| match self.state[j] {
                State::Lower => self.lo[j],
                State::Upper => self.up[j],
                State::Basic => 0.0,
            })
            .collect();
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.xb[r];
            }
        }
        x
    }

    pub(crate) fn objective(&self) -> f64 {
        self.structural_values()
            .iter()
            .zip(&self.cost)
            .map(|(x, c)| x * c)
            .sum()
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * self.cols..(r + 1) * self.cols];
                for (d, v) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * v;
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.up[j] - self.lo[j] <= PRIMAL_TOL
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.a[r * cols + q];
        let mut pivot_row = self.a[r * cols..(r + 1) * cols].to_vec();
        for v in pivot_row.iter_mut() {
            *v /= p;
        }
        pivot_row[q] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + q];
            if f != 0.0 {
                let row = &mut self.a[i * cols..(i + 1) * cols];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[q] = 0.0;
            }
        }
        let dq = self.reduced[q];
        if dq != 0.0 {
            for (d, pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= dq * pr;
            }
            self.reduced[q] = 0.0;
        }
        self.a[r * cols..(r + 1) * cols].copy_from_slice(&pivot_row);
        self.iterations += 1;
    }

    fn check_budget(&self) -> Result<()> {
        if self.iterations > self.max_iterations {
            return Err(Error::Solver(format!(
                "simplex exceeded {} iterations",
                self.max_iterations
            )));
        }
        Ok(())
    }

    fn primal(&mut self) -> Result<LpStatus> {
        let stall_limit = 10 * self.structural.max(1);
        let mut stalled = 0;
        let mut bland = false;
        loop {
            self.check_budget()?;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.cols {
                if self.state[j] == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let d = self.reduced[j];
                let dir = match self.state[j] {
                    State::Lower if d < -OPT_TOL => 1.0,
                    State::Upper if d > OPT_TOL => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let mut step = self.up[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.rows {
                let rate = dir * self.a[i * self.cols + q];
                let b = self.basis[i];
                let (limit, to_lower) = if rate > PIVOT_TOL {
                    ((self.xb[i] - self.lo[b]) / rate, true)
                } else if rate < -PIVOT_TOL && self.up[b].is_finite() {
                    ((self.up[b] - self.xb[i]) / -rate, false)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < step - 1e-12 {
                    true
                } else if limit <= step + 1e-12 {
                    // On a tie with the bound flip, flip.
                    match leave {
                        Some((li, _)) if bland => b < self.basis[li],
                        Some(_) => rate.abs() > leave_mag,
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leave = Some((i, to_lower));
                    leave_mag = rate.abs();
                }
            }
            if !step.is_finite() {
                return Ok(LpStatus::Unbounded);
            }
            if step <= 1e-12 {
                stalled += 1;
                if stalled > stall_limit {
                    bland = true;
                }
            } else {
                stalled = 0;
            }
            for i in 0..self.rows {
                let a = self.a[i * self.cols + q];
                if a != 0.0 {
                    self.xb[i] -= dir * step * a;
                }
            }
            let start = if self.state[q] == State::Lower { self.lo[q] } else { self.up[q] };
            match leave {
                None => {
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.iterations += 1;
                }
                Some((r, to_lower)) => {
                    let out = self.basis[r];
                    self.state[out] = if to_lower { State::Lower } else { State::Upper };
                    self.pivot(r, q);
                    self.basis[r] = q;
                    self.state[q] = State::Basic;
                    self.xb[r] = start + dir * step;
                }
            }
        }
    }

    /// Pins artificials at zero, pivots basic ones out where possible and
    /// drops the nonbasic ones from the tableau.
    fn retire_artificials(&mut self) {
        for j in 0..self.cols {
            if self.artificial[j] {
                self.up[j] = 0.0;
            }
        }
        for r in 0..self.rows {
            let b = self.basis[r];
            if !self.artificial[b] {
                continue;
            }
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            let pick = (0..self.cols)
                .filter(|&j| !self.artificial[j] && self.state[j] != State::Basic)
                .max_by(|&x, &y| row[x].abs().total_cmp(&row[y].abs()).then(y.cmp(&x)));
            if let Some(q) = pick.filter(|&q| row[q].abs() > 1e-7) {
                let v = if self.state[q] == State::Lower { self.lo[q] } else { self.up[q] };
                self.pivot(r, q);
                self.basis[r] = q;
                self.state[q] = State::Basic;
                self.state[b] = State::Lower;
                self.xb[r] = v;
            } else {
                self.xb[r] = 0.0;
            }
        }
        let keep: Vec<usize> = (0..self.cols)
            .filter(|&j| !self.artificial[j] || self.state[j] == State::Basic)
            .collect();
        if keep.len() == self.cols {
            return;
        }
        let mut remap = vec![usize::MAX; self.cols];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let cols = keep.len();
        let mut a = vec![0.0; self.rows * cols];
        for r in 0..self.rows {
            for (new, &old) in keep.iter().enumerate() {
                a[r * cols + new] = self.a[r * self.cols + old];
            }
        }
        self.a = a;
        self.cols = cols;
        let pick = |v: &Vec<f64>| keep.iter().map(|&j| v[j]).collect::<Vec<f64>>();
        self.lo = pick(&self.lo);
        self.up = pick(&self.up);
        self.cost = pick(&self.cost);
        self.reduced = pick(&self.reduced);
        self.state = keep.iter().map(|&j| self.state[j]).collect();
        self.artificial = keep.iter().map(|&j| self.artificial[j]).collect();
        for b in self.basis.iter_mut() {
            *b = remap[*b];
        }
    }

    /// Fixes a structural variable to `value`, keeping the basis.
    pub(crate) fn fix(&mut self, j: usize, value: f64) {
        match self.state[j] {
            State::Basic => {
                self.lo[j] = value;
                self.up[j] = value;
            }
            s => {
                let old = if s == State::Lower { self.lo[j] } else { self.up[j] };
                self.lo[j] = value;
                self.up[j] = value;
                self.state[j] = State::Lower;
                let delta = value - old;
                if delta != 0.0 {
                    for i in 0..self.rows {
                        let a = self.a[i * self.cols + j];
                        if a != 0.0 {
                            self.xb[i] -= a * delta;
                        }
                    }
                }
            }
        }
    }

    /// Dual simplex from a dual-feasible basis.
    pub(crate) fn dual(&mut self) -> Result<LpStatus> {
        loop {
            self.check_budget()?;
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = PRIMAL_TOL;
            for i in 0..self.rows {
                let b = self.basis[i];
                let below = self.lo[b] - self.xb[i];
                let above = self.xb[i] - self.up[b];
                if below > worst {
                    worst = below;
                    leave = Some((i, true));
                } else if above > worst {
                    worst = above;
                    leave = Some((i, false));
                }
            }
            let Some((r, below)) = leave else {
                return Ok(LpStatus::Optimal);
            };
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            let mut entering: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..self.cols {
                if self.state[j] == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let alpha = row[j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let at_lower = self.state[j] == State::Lower;
                let eligible = if below { at_lower == (alpha < 0.0) } else { at_lower == (alpha > 0.0) };
                if !eligible {
                    continue;
                }
                let ratio = (self.reduced[j] / alpha).abs();
                if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && alpha.abs() > best_mag) {
                    best_ratio = ratio;
                    best_mag = alpha.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(LpStatus::Infeasible);
            };
            let out = self.basis[r];
            let target = if below { self.lo[out] } else { self.up[out] };
            let alpha_q = self.a[r * self.cols + q];
            let delta = (self.xb[r] - target) / alpha_q;
            for i in 0..self.rows {
                let a = self.a[i * self.cols + q];
                if a != 0.0 {
                    self.xb[i] -= a * delta;
                }
            }
            let start = if self.state[q] == State::Lower { self.lo[q] } else { self.up[q] };
            self.state[out] = if below { State::Lower } else { State::Upper };
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = State::Basic;
            self.xb[r] = start + delta;
        }
    }
}
