//! Candidate subsets, feature matrices and sparse regression.
//!
//! Feature `A[i][j]` counts the agents of sampled plan `i` whose task set
//! meets candidate subset `j`. Weights are fitted by lasso
//!
//! ```text
//! minimize  ½‖Aβ − b‖² + γ‖β‖₁
//! ```
//!
//! without intercept, standardization or sign constraints, solved by cyclic
//! coordinate descent on the Gram matrix `AᵀA`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bitset::TaskSubset;
use crate::error::{Error, Result};
use crate::model::{g_count, AssignmentPlan};

/// Coefficients at or below this magnitude count as zero.
pub const EPS_ZERO: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 10_000;
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const PATH_STEPS: usize = 50;
pub const PATH_RATIO: f64 = 1e-4;

// Largest catalog slice we materialize for one cardinality.
const CATALOG_LIMIT: u128 = 5_000_000;

/// The k-subsets of `0..n` in co-lexicographic order: ordered by largest
/// member, then by the next largest, and so on.
pub fn colex_subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = (k <= n).then(|| (0..k).collect::<Vec<_>>());
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut c = cur.clone();
        // Smallest position that can move up without colliding with the next.
        let j = (0..k).find(|&j| {
            let limit = if j + 1 < k { c[j + 1] } else { n };
            c[j] + 1 < limit
        });
        if let Some(j) = j {
            c[j] += 1;
            for (t, v) in c.iter_mut().enumerate().take(j) {
                *v = t;
            }
            next = Some(c);
        }
        Some(cur)
    })
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, t| acc * (n - t) as u128 / (t + 1) as u128)
}

/// Enumerates candidate subsets one cardinality at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetCatalog {
    pub task_count: usize,
    /// When set, each cardinality's list is permuted by a generator seeded
    /// with `seed + k`.
    pub shuffle_seed: Option<u64>,
}

impl SubsetCatalog {
    pub fn new(task_count: usize) -> Self {
        Self { task_count, shuffle_seed: None }
    }

    pub fn shuffled(task_count: usize, seed: u64) -> Self {
        Self { task_count, shuffle_seed: Some(seed) }
    }

    pub fn count(&self, k: usize) -> u128 {
        binomial(self.task_count, k)
    }

    pub fn subsets(&self, k: usize) -> Result<Vec<TaskSubset>> {
        if k == 0 {
            return Err(Error::EmptySubset);
        }
        if self.count(k) > CATALOG_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "{} subsets of size {k} is more than the catalog will hold",
                self.count(k)
            )));
        }
        let n = self.task_count;
        let mut out: Vec<TaskSubset> = colex_subsets(n, k)
            .map(|ids| TaskSubset::from_ids(n, ids))
            .collect();
        if let Some(seed) = self.shuffle_seed {
            out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64)));
        }
        Ok(out)
    }
}

/// Row-major matrix of g-counts with one labelled column per subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
    labels: Vec<TaskSubset>,
}

impl FeatureMatrix {
    /// Matrix from raw counts; column j is labelled with the singleton {j}.
    pub fn from_counts(rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged count rows".into()));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
            labels: (0..cols).map(|j| TaskSubset::from_ids(cols, [j])).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| f64::from(self.get(i, j))).collect()
    }

    pub fn labels(&self) -> &[TaskSubset] {
        &self.labels
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            data.extend(cols.iter().map(|&j| self.get(i, j)));
        }
        FeatureMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
        }
    }

    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(beta).map(|(&a, b)| f64::from(a) * b).sum())
            .collect()
    }

    /// CSV with a quoted header of subset labels and one row per plan.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.labels.iter().map(|l| format!("\"{}\"", l.label())).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

pub fn build_features(plans: &[AssignmentPlan], h: &[TaskSubset]) -> Result<FeatureMatrix> {
    if h.is_empty() {
        return Err(Error::InvalidArgument("no candidate subsets".into()));
    }
    if h.iter().any(TaskSubset::is_empty) {
        return Err(Error::EmptySubset);
    }
    let rows: Vec<Vec<u32>> = plans
        .par_iter()
        .map(|p| h.iter().map(|s| g_count(p, s).map(|g| g as u32)).collect())
        .collect::<Result<_>>()?;
    Ok(FeatureMatrix {
        rows: plans.len(),
        cols: h.len(),
        data: rows.into_iter().flatten().collect(),
        labels: h.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub beta: Vec<f64>,
    /// Zero unless the fit was asked for an intercept.
    pub intercept: f64,
    pub gamma: f64,
    pub r2: f64,
    /// TSS was zero and `r2` was defined as 0.
    pub r2_degenerate: bool,
    pub rss: f64,
    pub nonzero_count: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Lasso objective after each sweep, starting with the initial point.
    pub objective_history: Vec<f64>,
}

impl RegressionResult {
    /// Indices with `|β| > EPS_ZERO`.
    pub fn support(&self) -> Vec<usize> {
        support(&self.beta)
    }
}

pub fn support(beta: &[f64]) -> Vec<usize> {
    (0..beta.len()).filter(|&j| beta[j].abs() > EPS_ZERO).collect()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Output of one coordinate-descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct CdFit {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

/// Gram form of a lasso problem, shared across a regularization path.
///
/// With an intercept the columns and the target are centered first; the
/// intercept itself is unpenalized and recovered as `b̄ − μᵀβ`.
pub struct LassoProblem {
    p: usize,
    n: usize,
    gram: Vec<f64>,
    atb: Vec<f64>,
    btb: f64,
    col_mean: Vec<f64>,
    b_mean: f64,
}

impl LassoProblem {
    /// No intercept: the model is `Aβ`.
    pub fn new(a: &FeatureMatrix, b: &[f64]) -> Result<Self> {
        Self::build(a, b, false)
    }

    /// Model `β₀ + Aβ` with `β₀` unpenalized.
    pub fn with_intercept(a: &FeatureMatrix, b: &[f64]) -> Result<Self> {
        Self::build(a, b, true)
    }

    /// No intercept, real-valued design given row by row.
    pub fn from_dense(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        if rows.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "{} design rows for {} targets",
                rows.len(),
                b.len()
            )));
        }
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) || rows.iter().flatten().chain(b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ragged or non-finite design".into()));
        }
        let mut gram = vec![0.0; p * p];
        let mut atb = vec![0.0; p];
        for (row, &bi) in rows.iter().zip(b) {
            for j in 0..p {
                atb[j] += row[j] * bi;
                for k in 0..p {
                    gram[j * p + k] += row[j] * row[k];
                }
            }
        }
        Ok(Self {
            p,
            n: b.len(),
            gram,
            atb,
            btb: b.iter().map(|v| v * v).sum(),
            col_mean: vec![0.0; p],
            b_mean: 0.0,
        })
    }

    fn build(a: &FeatureMatrix, b: &[f64], intercept: bool) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows for {} targets",
                a.rows(),
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite target".into()));
        }
        let (n, p) = (a.rows(), a.cols());
        let mut gram = vec![0.0; p * p];
        let mut atb = vec![0.0; p];
        let mut col_sum = vec![0.0; p];
        for i in 0..n {
            let row = a.row(i);
            for (j, &aj) in row.iter().enumerate() {
                if aj == 0 {
                    continue;
                }
                let aj = f64::from(aj);
                col_sum[j] += aj;
                atb[j] += aj * b[i];
                for (k, &ak) in row.iter().enumerate().skip(j) {
                    gram[j * p + k] += aj * f64::from(ak);
                }
            }
        }
        let mut btb: f64 = b.iter().map(|v| v * v).sum();
        let (col_mean, b_mean) = if intercept && n > 0 {
            let nf = n as f64;
            let mu: Vec<f64> = col_sum.iter().map(|s| s / nf).collect();
            let bm = b.iter().sum::<f64>() / nf;
            for j in 0..p {
                atb[j] -= nf * mu[j] * bm;
                for k in j..p {
                    gram[j * p + k] -= nf * mu[j] * mu[k];
                }
            }
            btb = b.iter().map(|v| (v - bm).powi(2)).sum();
            (mu, bm)
        } else {
            (vec![0.0; p], 0.0)
        };
        for j in 0..p {
            for k in 0..j {
                gram[j * p + k] = gram[k * p + j];
            }
        }
        Ok(Self { p, n, gram, atb, btb, col_mean, b_mean })
    }

    /// Smallest γ at which β = 0 is optimal.
    pub fn gamma_max(&self) -> f64 {
        self.atb.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn intercept(&self, beta: &[f64]) -> f64 {
        self.b_mean - self.col_mean.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
    }

    /// Residual sum of squares from the Gram form; `q` must equal `Gβ`.
    fn rss_with(&self, beta: &[f64], q: &[f64]) -> f64 {
        let quad: f64 = beta.iter().zip(q).map(|(b, q)| b * q).sum();
        let lin: f64 = beta.iter().zip(&self.atb).map(|(b, c)| b * c).sum();
        (self.btb - 2.0 * lin + quad).max(0.0)
    }

    fn objective(&self, beta: &[f64], q: &[f64], gamma: f64) -> f64 {
        0.5 * self.rss_with(beta, q) + gamma * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Coordinate descent from `warm` (or zero). Sweeps alternate between the
    /// full coordinate set and the current support until a full sweep moves
    /// no coefficient by more than the tolerance.
    pub fn fit(&self, gamma: f64, warm: Option<&[f64]>) -> Result<CdFit> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} must be finite and >= 0")));
        }
        let p = self.p;
        let mut beta = match warm {
            Some(w) if w.len() == p => w.to_vec(),
            Some(w) => {
                return Err(Error::InvalidArgument(format!("warm start of length {}", w.len())))
            }
            None => vec![0.0; p],
        };
        let mut q = vec![0.0; p];
        for (j, &bj) in beta.iter().enumerate() {
            if bj != 0.0 {
                for k in 0..p {
                    q[k] += self.gram[k * p + j] * bj;
                }
            }
        }
        let mut history = vec![self.objective(&beta, &q, gamma)];
        let mut sweeps = 0;
        let mut converged = false;
        let mut full = true;
        let mut active: Vec<usize> = Vec::with_capacity(p);
        while sweeps < MAX_SWEEPS {
            active.clear();
            active.extend((0..p).filter(|&j| full || beta[j] != 0.0));
            let mut max_change: f64 = 0.0;
            for &j in &active {
                let gjj = self.gram[j * p + j];
                if gjj <= 0.0 {
                    continue;
                }
                let old = beta[j];
                let rho = self.atb[j] - q[j] + gjj * old;
                let new = soft_threshold(rho, gamma) / gjj;
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    for k in 0..p {
                        q[k] += self.gram[k * p + j] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            sweeps += 1;
            history.push(self.objective(&beta, &q, gamma));
            if max_change < CONVERGENCE_TOL {
                if full {
                    converged = true;
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }
        Ok(CdFit { beta, sweeps, converged, objective_history: history })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn problem(a: &FeatureMatrix, b: &[f64], intercept: bool) -> Result<LassoProblem> {
    if intercept {
        LassoProblem::with_intercept(a, b)
    } else {
        LassoProblem::new(a, b)
    }
}

/// Fits the lasso at a fixed γ from a zero start, without intercept.
pub fn lasso_fit(a: &FeatureMatrix, b: &[f64], gamma: f64) -> Result<RegressionResult> {
    lasso_fit_with(a, b, gamma, false)
}

pub fn lasso_fit_with(
    a: &FeatureMatrix,
    b: &[f64],
    gamma: f64,
    intercept: bool,
) -> Result<RegressionResult> {
    let prob = problem(a, b, intercept)?;
    let fit = prob.fit(gamma, None)?;
    let beta0 = if intercept { prob.intercept(&fit.beta) } else { 0.0 };
    let pred = predict(a, &fit.beta, beta0);
    let (r2, r2_degenerate) = r_squared_of(&pred, b);
    Ok(RegressionResult {
        nonzero_count: support(&fit.beta).len(),
        rss: rss_of(&pred, b),
        beta: fit.beta,
        intercept: beta0,
        gamma,
        r2,
        r2_degenerate,
        sweeps: fit.sweeps,
        converged: fit.converged,
        objective_history: fit.objective_history,
    })
}

/// One point of a regularization path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub gamma: f64,
    pub rss: f64,
    pub df: usize,
    pub bic: f64,
}

/// BIC along a geometric γ grid from `‖Aᵀb‖_∞` down to `1e-4` of it, warm
/// starting each fit from the previous one. `df` is the support size.
pub fn lasso_path(a: &FeatureMatrix, b: &[f64], intercept: bool) -> Result<Vec<PathPoint>> {
    let prob = problem(a, b, intercept)?;
    let n = b.len() as f64;
    let gmax = prob.gamma_max();
    // RSS is floored relative to ‖b‖² so exact fits compare by df.
    let floor = (1e-12 * b.iter().map(|v| v * v).sum::<f64>()).max(f64::MIN_POSITIVE);
    let mut warm = vec![0.0; a.cols()];
    let mut out = Vec::with_capacity(PATH_STEPS);
    for step in 0..PATH_STEPS {
        let gamma = gmax * PATH_RATIO.powf(step as f64 / (PATH_STEPS - 1) as f64);
        let fit = prob.fit(gamma, Some(&warm))?;
        let rss = rss_of(&predict(a, &fit.beta, prob.intercept(&fit.beta)), b);
        let df = support(&fit.beta).len();
        let bic = n * (rss.max(floor) / n).ln() + df as f64 * n.ln();
        out.push(PathPoint { gamma, rss, df, bic });
        warm = fit.beta;
    }
    Ok(out)
}

/// γ minimizing BIC on the path (largest γ on ties), for a fit without
/// intercept. Returns `‖Aᵀb‖_∞` when `b` has no variance.
pub fn gamma_select(a: &FeatureMatrix, b: &[f64]) -> Result<f64> {
    gamma_select_with(a, b, false)
}

pub fn gamma_select_with(a: &FeatureMatrix, b: &[f64], intercept: bool) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidArgument("empty feature matrix".into()));
    }
    let prob = problem(a, b, intercept)?;
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    if b.iter().all(|&v| v == mean) {
        return Ok(prob.gamma_max());
    }
    let path = lasso_path(a, b, intercept)?;
    let best = path
        .iter()
        .fold(&path[0], |best, p| if p.bic < best.bic { p } else { best });
    Ok(best.gamma)
}

pub fn predict(a: &FeatureMatrix, beta: &[f64], intercept: f64) -> Vec<f64> {
    a.mul(beta).into_iter().map(|v| v + intercept).collect()
}

fn rss_of(pred: &[f64], b: &[f64]) -> f64 {
    pred.iter().zip(b).map(|(p, v)| (p - v).powi(2)).sum()
}

fn r_squared_of(pred: &[f64], b: &[f64]) -> (f64, bool) {
    let mean = b.iter().sum::<f64>() / b.len().max(1) as f64;
    let tss: f64 = b.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return (0.0, true);
    }
    (1.0 - rss_of(pred, b) / tss, false)
}

pub fn residual_sum_squares(a: &FeatureMatrix, beta: &[f64], b: &[f64]) -> f64 {
    rss_of(&a.mul(beta), b)
}

/// `1 − RSS/TSS` for the model `Aβ`, plus a flag set when TSS is zero (and
/// the value defined as 0).
pub fn r_squared_flagged(a: &FeatureMatrix, beta: &[f64], b: &[f64]) -> Result<(f64, bool)> {
    if a.rows() != b.len() || a.cols() != beta.len() {
        return Err(Error::InvalidArgument("shape mismatch in r_squared".into()));
    }
    Ok(r_squared_of(&a.mul(beta), b))
}

pub fn r_squared(a: &FeatureMatrix, beta: &[f64], b: &[f64]) -> Result<f64> {
    r_squared_flagged(a, beta, b).map(|(r2, _)| r2)
}

#[cfg(test)]
pub(crate) fn matrix_from_rows(rows: &[Vec<u32>]) -> FeatureMatrix {
    FeatureMatrix::from_counts(rows).expect("rectangular rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn example1() -> (Vec<AssignmentPlan>, Vec<TaskSubset>) {
        let plans = [
            vec![vec![0], vec![1, 2]],
            vec![vec![1], vec![0, 2]],
            vec![vec![2], vec![0, 1]],
        ]
        .iter()
        .map(|l| AssignmentPlan::from_lists(3, l).unwrap())
        .collect();
        let cat = SubsetCatalog::new(3);
        let h = (1..=3).flat_map(|k| cat.subsets(k).unwrap()).collect();
        (plans, h)
    }

    #[test]
    fn colex_order_and_counts() {
        let got: Vec<Vec<usize>> = colex_subsets(4, 2).collect();
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3], vec![1, 3], vec![2, 3]]);
        for n in 0..9 {
            for k in 0..=n + 1 {
                assert_eq!(colex_subsets(n, k).count() as u128, binomial(n, k), "C({n},{k})");
            }
        }
        assert_eq!(colex_subsets(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn shuffled_catalog_is_a_reproducible_permutation() {
        let plain = SubsetCatalog::new(7).subsets(3).unwrap();
        let a = SubsetCatalog::shuffled(7, 9).subsets(3).unwrap();
        let b = SubsetCatalog::shuffled(7, 9).subsets(3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, plain);
        let mut sorted = a.clone();
        sorted.sort_by(TaskSubset::canonical_cmp);
        let mut plain_sorted = plain.clone();
        plain_sorted.sort_by(TaskSubset::canonical_cmp);
        assert_eq!(sorted, plain_sorted);
    }

    #[test]
    fn example1_feature_matrix() {
        let (plans, h) = example1();
        let a = build_features(&plans, &h).unwrap();
        assert_eq!(
            a.to_rows(),
            vec![vec![1, 1, 1, 2, 2, 1, 2], vec![1, 1, 1, 2, 1, 2, 2], vec![1, 1, 1, 1, 2, 2, 2]]
        );
        let pairs = a.select(&[3, 4, 5]);
        assert_eq!(pairs.to_rows(), vec![vec![2, 2, 1], vec![2, 1, 2], vec![1, 2, 2]]);
        assert!(a.to_csv().starts_with("\"{0}\",\"{1}\",\"{2}\",\"{0,1}\""));
        assert!(build_features(&plans, &[]).is_err());
    }

    #[test]
    fn exact_model_has_unit_r2() {
        let (plans, h) = example1();
        let a = build_features(&plans, &h).unwrap();
        let beta = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 0.0];
        let b = a.mul(&beta);
        assert_eq!(b, vec![9.0, 10.0, 11.0]);
        assert!((r_squared(&a, &beta, &b).unwrap() - 1.0).abs() < 1e-9);
        // Unit weights on the pairs price every plan at 5: no variance to explain.
        let flat_beta = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let flat = a.mul(&flat_beta);
        assert_eq!(r_squared_flagged(&a, &flat_beta, &flat).unwrap(), (0.0, true));
    }

    // Orthogonal columns scaled to unit norm: rows are split into disjoint
    // blocks of four, column j is 1/2 on block j. Entries are not integers,
    // so this drives the Gram solver directly.
    fn orthonormal_problem(p: usize, b: &[f64]) -> (LassoProblem, Vec<f64>) {
        let mut gram = vec![0.0; p * p];
        for j in 0..p {
            gram[j * p + j] = 1.0;
        }
        let atb: Vec<f64> = (0..p).map(|j| b[4 * j..4 * j + 4].iter().sum::<f64>() * 0.5).collect();
        let prob = LassoProblem {
            p,
            n: b.len(),
            gram,
            atb: atb.clone(),
            btb: b.iter().map(|v| v * v).sum(),
            col_mean: vec![0.0; p],
            b_mean: 0.0,
        };
        (prob, atb)
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = rng.random_range(1..6);
            let b: Vec<f64> = (0..4 * p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let gamma = rng.random_range(0.0..2.0);
            let (prob, atb) = orthonormal_problem(p, &b);
            let beta = prob.fit(gamma, None).unwrap().beta;
            for j in 0..p {
                assert!((beta[j] - soft_threshold(atb[j], gamma)).abs() < 1e-8);
            }
            let zero = prob.fit(prob.gamma_max(), None).unwrap().beta;
            assert!(zero.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let rows: Vec<Vec<u32>> = (0..40)
                .map(|_| (0..12).map(|_| rng.random_range(1..4)).collect())
                .collect();
            let a = matrix_from_rows(&rows);
            let b: Vec<f64> = (0..40).map(|_| rng.random_range(10.0..50.0)).collect();
            let gamma = rng.random_range(0.0..5.0);
            let fit = lasso_fit(&a, &b, gamma).unwrap();
            for w in fit.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn single_predictor_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<u32>> = (0..60)
            .map(|_| (0..6).map(|_| rng.random_range(0..6)).collect())
            .collect();
        let a = matrix_from_rows(&rows);
        let b = a.column(2).iter().map(|v| 3.0 * v).collect::<Vec<_>>();
        let gamma = gamma_select(&a, &b).unwrap();
        let fit = lasso_fit(&a, &b, gamma).unwrap();
        assert_eq!(fit.support(), vec![2], "{:?}", fit.beta);
    }

    #[test]
    fn zero_target_selects_gamma_max() {
        let a = matrix_from_rows(&[vec![1, 2], vec![2, 1], vec![1, 1]]);
        assert_eq!(gamma_select(&a, &[0.0; 3]).unwrap(), 0.0);
        let fit = lasso_fit(&a, &[0.0; 3], 0.0).unwrap();
        assert!(fit.beta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn structure_keeps_more_signal_than_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<u32>> = (0..200)
            .map(|_| (0..8).map(|_| rng.random_range(0..5)).collect())
            .collect();
        let a = matrix_from_rows(&rows);
        let truth = [2.0, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0, 1.5];
        let signal = a.mul(&truth);
        let scale = (signal.iter().map(|v| v * v).sum::<f64>() / 200.0).sqrt();
        let structured: Vec<f64> = signal.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let noise: Vec<f64> = (0..200).map(|_| rng.random_range(-scale..scale) * 1.7).collect();
        assert!(gamma_select(&a, &structured).unwrap() < gamma_select(&a, &noise).unwrap());
    }

    // Least squares restricted to `cols`, via normal equations.
    fn restricted_ls(a: &FeatureMatrix, b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
        let sub = a.select(cols);
        let m = nalgebra::DMatrix::from_fn(sub.rows(), sub.cols(), |i, j| f64::from(sub.get(i, j)));
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = (m.transpose() * &m).cholesky()?.solve(&(m.transpose() * rhs));
        Some(x.iter().copied().collect())
    }

    /// Non-negative least squares by enumerating supports (≤ 10 columns).
    fn nnls(a: &FeatureMatrix, b: &[f64]) -> Vec<f64> {
        let p = a.cols();
        assert!(p <= 10);
        let mut best = (residual_sum_squares(a, &vec![0.0; p], b), vec![0.0; p]);
        for mask in 1u32..(1 << p) {
            let cols: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
            let Some(x) = restricted_ls(a, b, &cols) else { continue };
            if x.iter().any(|&v| v < 0.0) {
                continue;
            }
            let mut beta = vec![0.0; p];
            for (&j, v) in cols.iter().zip(x) {
                beta[j] = v;
            }
            let rss = residual_sum_squares(a, &beta, b);
            if rss < best.0 - 1e-12 {
                best = (rss, beta);
            }
        }
        best.1
    }

    #[test]
    fn unpenalized_fit_matches_nnls_when_solution_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let rows: Vec<Vec<u32>> = (0..30)
                .map(|_| (0..5).map(|_| rng.random_range(1..4)).collect())
                .collect();
            let a = matrix_from_rows(&rows);
            let truth: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..3.0)).collect();
            let b: Vec<f64> = a.mul(&truth).iter().map(|v| v + rng.random_range(-0.01..0.01)).collect();
            let reference = nnls(&a, &b);
            let fit = lasso_fit(&a, &b, 0.0).unwrap();
            for (x, y) in fit.beta.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-5, "{:?} vs {:?}", fit.beta, reference);
            }
        }
    }
}
