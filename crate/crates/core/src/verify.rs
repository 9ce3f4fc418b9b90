//! Self-checks of the structural claims the surrogate relies on, each against
//! an independent oracle (enumeration, a pinned MIP, closed-form lasso
//! solutions, simulation). The CLI `verify` command and the acceptance tests
//! both run these.

use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bitset::TaskSubset;
use crate::enumerate::{brute_optimum, feasible_plans};
use crate::learning::{build_features, lasso_fit_with, FeatureMatrix, LassoProblem, SubsetCatalog};
use crate::mip::{bnb_solve, BinaryProgram, Limits, MipStatus, Sense};
use crate::model::{check_p1, equivalent, AssignmentPlan, GaprInstance};
use crate::problems::{generate_jobprp, JobprpParams, WarehouseLayout};
use crate::stats::{conditional_expectation, conditional_upper_bound, fit_bivariate, residual_bound, theorem5_check};
use crate::surrogate::{distinguishing_h, evaluate_L, evaluate_L_by_mip, solve_surrogate, SetIndicatorModel};
use crate::Result;

pub const SUITES: [&str; 9] =
    ["table2", "prop1", "theorem2", "theorem3", "corollary1", "theorem5", "theorem4", "bnb", "lasso"];

/// Outcome of one check: how many cases ran and which failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    pub note: String,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self { name: name.into(), cases: 0, failures: Vec::new(), note: String::new() }
    }

    fn case(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {} cases, {} failures", self.name, self.cases, self.failures.len())?;
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        for msg in self.failures.iter().take(5) {
            write!(f, "\n    {msg}")?;
        }
        Ok(())
    }
}

/// Three-task, two-agent example: its three single-task splits and all
/// seven nonempty subsets in colex order.
pub fn example1() -> (Vec<AssignmentPlan>, Vec<TaskSubset>) {
    let plans = [vec![vec![0], vec![1, 2]], vec![vec![1], vec![0, 2]], vec![vec![2], vec![0, 1]]]
        .iter()
        .map(|l| AssignmentPlan::from_lists(3, l).expect("valid plan"))
        .collect();
    let cat = SubsetCatalog::new(3);
    let h = (1..=3).flat_map(|k| cat.subsets(k).expect("small catalog")).collect();
    (plans, h)
}

/// Expected feature matrix of [`example1`].
pub const TABLE2: [[u32; 7]; 3] = [[1, 1, 1, 2, 2, 1, 2], [1, 1, 1, 2, 1, 2, 2], [1, 1, 1, 1, 2, 2, 2]];

pub fn table2() -> Result<CheckReport> {
    let mut r = CheckReport::new("table2");
    let (plans, h) = example1();
    let a = build_features(&plans, &h)?;
    for (i, row) in TABLE2.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            let got = a.get(i, j);
            r.case(got == want, || format!("entry ({i},{j}) is {got}, expected {want}"));
        }
    }
    r.note = a.to_csv().trim_end().replace('\n', " | ");
    Ok(r)
}

fn random_plan(inst: &GaprInstance, rng: &mut ChaCha8Rng) -> AssignmentPlan {
    let (tasks, agents) = (inst.task_count(), inst.agent_count());
    loop {
        let mut subsets = vec![TaskSubset::empty(tasks); agents];
        for i in 0..tasks {
            subsets[rng.random_range(0..agents)].insert(i);
        }
        let plan = AssignmentPlan::new(subsets).expect("disjoint cover");
        if crate::model::is_feasible(&plan, inst) {
            return plan;
        }
    }
}

fn random_subset(tasks: usize, rng: &mut ChaCha8Rng) -> TaskSubset {
    loop {
        let s = TaskSubset::from_ids(tasks, (0..tasks).filter(|_| rng.random_bool(0.4)));
        if !s.is_empty() {
            return s;
        }
    }
}

fn all_subsets(tasks: usize) -> Vec<TaskSubset> {
    (1u32..1 << tasks)
        .map(|m| TaskSubset::from_ids(tasks, (0..tasks).filter(|&i| m >> i & 1 == 1)))
        .collect()
}

/// The g-sum test agrees with direct containment for every plan of every
/// grid instance and every family of at most three distinct subsets.
pub fn prop1() -> Result<CheckReport> {
    let mut r = CheckReport::new("prop1");
    let mut instances = 0;
    for tasks in 4..=6usize {
        for agents in 2..=3usize {
            let weights: Vec<f64> = (0..tasks).map(|i| 1.0 + (i % 3) as f64).collect();
            let total: f64 = weights.iter().sum();
            let tight = (total / agents as f64).ceil() + 1.0;
            for capacity in [f64::INFINITY, tight] {
                let inst = GaprInstance::without_routing(weights.clone(), agents, capacity, false)?;
                let plans = feasible_plans(&inst)?;
                let subsets = all_subsets(tasks);
                let mut families: Vec<Vec<usize>> = Vec::new();
                for a in 0..subsets.len() {
                    families.push(vec![a]);
                    for b in a + 1..subsets.len() {
                        families.push(vec![a, b]);
                        for c in b + 1..subsets.len() {
                            families.push(vec![a, b, c]);
                        }
                    }
                }
                let bad: Vec<String> = plans
                    .par_iter()
                    .flat_map_iter(|plan| {
                        let subsets = &subsets;
                        families.iter().filter_map(move |fam| {
                            let h: Vec<TaskSubset> = fam.iter().map(|&k| subsets[k].clone()).collect();
                            let direct = h.iter().all(|s| plan.subsets().iter().any(|b| s.is_subset(b)));
                            (check_p1(plan, &h) != direct)
                                .then(|| format!("plan {:?} family {fam:?}", plan.to_lists()))
                        })
                    })
                    .collect();
                r.cases += plans.len() * families.len();
                r.failures.extend(bad);
                instances += 1;
            }
        }
    }
    r.note = format!("{instances} instances");
    Ok(r)
}

/// Closed-form surrogate value equals the compiled program with y pinned.
pub fn theorem2(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("theorem2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let tasks = rng.random_range(3..=8);
        let agents = rng.random_range(2..=3);
        let inst = GaprInstance::without_routing(vec![1.0; tasks], agents, f64::INFINITY, false)?;
        let plan = random_plan(&inst, &mut rng);
        let h: Vec<TaskSubset> = (0..rng.random_range(1..=4)).map(|_| random_subset(tasks, &mut rng)).collect();
        let beta: Vec<f64> = h.iter().map(|_| rng.random_range(0.0..5.0)).collect();
        let model = SetIndicatorModel::new(h, beta)?;
        let closed = evaluate_L(&plan, &model)?;
        let mip = evaluate_L_by_mip(&plan, &model, &inst)?;
        r.case((closed - mip).abs() <= 1e-6, || {
            format!("plan {:?}: closed form {closed}, program {mip}", plan.to_lists())
        });
    }
    Ok(r)
}

fn permute_agents(plan: &AssignmentPlan, rng: &mut ChaCha8Rng) -> AssignmentPlan {
    let mut blocks = plan.subsets().to_vec();
    blocks.shuffle(rng);
    AssignmentPlan::new(blocks).expect("permutation of a plan")
}

/// Equivalent plans share every surrogate value; non-equivalent plans are
/// split by the constructed one-subset family.
pub fn theorem3(eq_pairs: usize, trials: usize, neq_pairs: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("theorem3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..eq_pairs {
        let tasks = rng.random_range(3..=8);
        let agents = rng.random_range(2..=4);
        let inst = GaprInstance::without_routing(vec![1.0; tasks], agents, f64::INFINITY, false)?;
        let s1 = random_plan(&inst, &mut rng);
        let s2 = permute_agents(&s1, &mut rng);
        for _ in 0..trials {
            let h: Vec<TaskSubset> = (0..rng.random_range(1..=5)).map(|_| random_subset(tasks, &mut rng)).collect();
            let beta: Vec<f64> = h.iter().map(|_| rng.random_range(-2.0..5.0)).collect();
            let model = SetIndicatorModel::new(h, beta)?;
            let (l1, l2) = (evaluate_L(&s1, &model)?, evaluate_L(&s2, &model)?);
            r.case(l1 == l2, || format!("equivalent plans priced {l1} and {l2}"));
        }
    }
    let mut found = 0;
    while found < neq_pairs {
        let tasks = rng.random_range(2..=8);
        let agents = rng.random_range(2..=4);
        let inst = GaprInstance::without_routing(vec![1.0; tasks], agents, f64::INFINITY, false)?;
        let (s1, s2) = (random_plan(&inst, &mut rng), random_plan(&inst, &mut rng));
        if equivalent(&s1, &s2)? {
            continue;
        }
        found += 1;
        let Some(h) = distinguishing_h(&s1, &s2)? else {
            r.case(false, || format!("no family for {:?} vs {:?}", s1.to_lists(), s2.to_lists()));
            continue;
        };
        let model = SetIndicatorModel::unit(h)?;
        let (l1, l2) = (evaluate_L(&s1, &model)?, evaluate_L(&s2, &model)?);
        r.case(l1 != l2, || format!("{:?} vs {:?} both priced {l1}", s1.to_lists(), s2.to_lists()));
    }
    Ok(r)
}

/// Small routed instance with every agent required to work.
pub fn busy_instance(tasks: usize, agents: usize, seed: u64) -> Result<GaprInstance> {
    let mut p = JobprpParams::new(tasks, agents, f64::INFINITY, seed);
    p.layout = WarehouseLayout::new(3, 3);
    let base = generate_jobprp(&p)?;
    GaprInstance::new(base.weights().to_vec(), agents, base.capacity(), true, base.oracle().clone())
}

/// Unit weights on the optimum's blocks make every surrogate minimizer
/// equivalent to that optimum.
pub fn corollary1(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("corollary1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..instances {
        let tasks = rng.random_range(4..=6);
        let agents = rng.random_range(2..=3);
        let inst = busy_instance(tasks, agents, seed.wrapping_add(k as u64))?;
        let best = brute_optimum(&inst)?;
        let h: Vec<TaskSubset> = best.plan.subsets().iter().filter(|s| !s.is_empty()).cloned().collect();
        let model = SetIndicatorModel::unit(h)?;
        let plans = feasible_plans(&inst)?;
        let values: Vec<f64> = plans.iter().map(|p| evaluate_L(p, &model)).collect::<Result<_>>()?;
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, &v) in plans.iter().zip(&values) {
            if v == low {
                let ok = equivalent(p, &best.plan)?;
                r.case(ok, || format!("minimizer {:?} differs from optimum {:?}", p.to_lists(), best.plan.to_lists()));
            }
        }
        let (solved, _) = solve_surrogate(&model, &inst, &Limits::default())?;
        let ok = equivalent(&solved, &best.plan)?;
        r.case(ok, || format!("solver returned {:?}", solved.to_lists()));
    }
    Ok(r)
}

/// Residual of the normalized least-squares fit stays below √λ_max of the
/// residual projector, whose spectrum is {0, 1}.
pub fn theorem5(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("theorem5");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let check = |r: &mut CheckReport, res: crate::stats::ResidualBound, what: &str| {
        let spectral = res.lambda_max.abs() < 1e-9 || (res.lambda_max - 1.0).abs() < 1e-9;
        r.case(res.holds && spectral, || {
            format!("{what}: residual {} bound {} lambda {}", res.residual, res.bound, res.lambda_max)
        });
    };
    let (plans, h) = example1();
    let a = build_features(&plans, &h)?;
    let b: Vec<f64> = (0..3).map(|_| rng.random_range(1.0..10.0)).collect();
    check(&mut r, theorem5_check(&a, &b)?, "example matrix");
    let mut fallbacks = 0;
    for k in 1..cases.max(1) {
        let rows = rng.random_range(4..=12);
        let cols = rng.random_range(1..rows);
        let mut a = DMatrix::from_fn(rows, cols, |_, _| f64::from(rng.random_range(0u32..4)));
        if k % 4 == 0 && cols > 1 {
            let first = a.column(0).clone_owned();
            a.set_column(cols - 1, &first);
        }
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-5.0..5.0)).collect();
        let res = residual_bound(&a, &b)?;
        fallbacks += usize::from(res.fallback);
        check(&mut r, res, &format!("random {rows}x{cols}"));
    }
    r.note = format!("{fallbacks} rank-deficient designs");
    Ok(r)
}

/// Known-parameter bivariate normal draws: the quantile bound covers
/// 1 − α of the draws near each ŷ, and the conditional mean is affine.
pub fn theorem4(draws: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("theorem4");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mu_x, mu_y, sx, sy, rho) = (50.0, 20.0, 4.0, 2.0, 0.7);
    let mut xs = Vec::with_capacity(draws);
    let mut ys = Vec::with_capacity(draws);
    for _ in 0..draws {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        ys.push(mu_y + sy * z1);
        xs.push(mu_x + sx * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
    }
    let fit = fit_bivariate(&xs, &ys)?;
    let slope = fit.sigma_x * fit.rho / fit.sigma_y;
    let points = [fit.mu_y - 3.0, fit.mu_y, fit.mu_y + 5.0];
    let e: Vec<f64> = points.iter().map(|&y| conditional_expectation(&fit, y)).collect::<Result<_>>()?;
    for w in 0..2 {
        let s = (e[w + 1] - e[w]) / (points[w + 1] - points[w]);
        r.case((s - slope).abs() <= 1e-12 * slope.abs().max(1.0), || format!("slope {s} vs {slope}"));
    }
    r.case(e[1] == fit.mu_x, || format!("centered estimate {} vs mean {}", e[1], fit.mu_x));
    let eps = 0.1 * sy;
    let mut notes = Vec::new();
    for y_hat in [mu_y - 0.5 * sy, mu_y, mu_y + 0.5 * sy] {
        for alpha in [0.05, 0.5] {
            let zeta = conditional_upper_bound(&fit, y_hat, alpha)?;
            let (mut inside, mut below) = (0usize, 0usize);
            for (x, y) in xs.iter().zip(&ys) {
                if (y - y_hat).abs() <= eps {
                    inside += 1;
                    below += usize::from(*x < zeta);
                }
            }
            let cover = below as f64 / inside.max(1) as f64;
            notes.push(format!("{cover:.3}"));
            r.case((cover - (1.0 - alpha)).abs() <= 0.02, || {
                format!("y={y_hat} alpha={alpha}: coverage {cover:.4} over {inside} draws")
            });
        }
    }
    r.note = format!("coverage {}", notes.join(" "));
    Ok(r)
}

fn random_program(rng: &mut ChaCha8Rng) -> BinaryProgram {
    let n = rng.random_range(2..=16);
    let mut p = BinaryProgram::new(n);
    for j in 0..n {
        p.set_objective(j, f64::from(rng.random_range(-6i32..=6)));
    }
    for _ in 0..rng.random_range(1..=6) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.5) {
                coeffs.push((j, f64::from(rng.random_range(-3i32..=5))));
            }
        }
        let sense = [Sense::Le, Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..4)];
        let rhs = f64::from(rng.random_range(0i32..=8));
        p.add_constraint(coeffs, sense, rhs).expect("indices in range");
    }
    p
}

/// Exhaustive optimum of a binary program, `None` when infeasible.
pub fn enumerate_program(p: &BinaryProgram) -> Option<f64> {
    let n = p.var_count;
    (0u32..1 << n)
        .filter_map(|m| {
            let x: Vec<f64> = (0..n).map(|j| f64::from(m >> j & 1)).collect();
            (p.max_violation(&x) <= 1e-9).then(|| p.evaluate(&x))
        })
        .min_by(f64::total_cmp)
}

/// Branch and bound matches enumeration, infeasibility included.
pub fn bnb(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("bnb");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = Limits { gap_tol: 1e-6, ..Limits::default() };
    let mut infeasible = 0;
    for k in 0..cases {
        let p = random_program(&mut rng);
        let res = bnb_solve(&p, &limits)?;
        match enumerate_program(&p) {
            Some(opt) => r.case(
                res.status == MipStatus::Optimal && (res.objective - opt).abs() <= 1e-6,
                || format!("program {k}: {:?} {} vs {opt}", res.status, res.objective),
            ),
            None => {
                infeasible += 1;
                r.case(res.status == MipStatus::Infeasible, || format!("program {k}: {:?}, expected infeasible", res.status));
            }
        }
    }
    r.note = format!("{infeasible} infeasible");
    Ok(r)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Orthonormal designs reduce the lasso to soft thresholding; every
/// coordinate-descent objective history is non-increasing.
pub fn lasso(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("lasso");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        // Column j is 1/2 on rows 4j..4j+4: unit norm, disjoint supports.
        let p = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..4 * p)
            .map(|i| (0..p).map(|j| if i / 4 == j { 0.5 } else { 0.0 }).collect())
            .collect();
        let b: Vec<f64> = (0..4 * p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gamma = rng.random_range(0.0..2.0);
        let prob = LassoProblem::from_dense(&rows, &b)?;
        let fit = prob.fit(gamma, None)?;
        for j in 0..p {
            let z: f64 = (0..4).map(|i| 0.5 * b[4 * j + i]).sum();
            let want = soft_threshold(z, gamma);
            r.case((fit.beta[j] - want).abs() <= 1e-8, || format!("beta[{j}] {} vs {want}", fit.beta[j]));
        }
        monotone(&mut r, &fit.objective_history);
    }
    for k in 0..cases {
        let counts: Vec<Vec<u32>> = (0..30).map(|_| (0..10).map(|_| rng.random_range(0..4)).collect()).collect();
        let a = FeatureMatrix::from_counts(&counts)?;
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(5.0..40.0)).collect();
        let gamma = rng.random_range(0.0..20.0);
        let fit = lasso_fit_with(&a, &b, gamma, k % 2 == 0)?;
        monotone(&mut r, &fit.objective_history);
    }
    Ok(r)
}

fn monotone(r: &mut CheckReport, history: &[f64]) {
    let worst = history.windows(2).find(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0)).map(|w| (w[0], w[1]));
    r.case(worst.is_none(), || format!("objective rose {:?}", worst));
}

/// Runs one named suite at its default size.
pub fn run_suite(name: &str) -> Result<Option<CheckReport>> {
    Ok(Some(match name {
        "table2" => table2()?,
        "prop1" => prop1()?,
        "theorem2" => theorem2(200, 2)?,
        "theorem3" => theorem3(50, 50, 100, 3)?,
        "corollary1" => corollary1(20, 5)?,
        "theorem5" => theorem5(20, 7)?,
        "theorem4" => theorem4(100_000, 11)?,
        "bnb" => bnb(50, 13)?,
        "lasso" => lasso(20, 17)?,
        _ => return Ok(None),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for r in [table2().unwrap(), theorem2(10, 1).unwrap(), theorem3(3, 5, 10, 1).unwrap(), bnb(5, 1).unwrap(), lasso(3, 1).unwrap()] {
            assert!(r.passed(), "{r}");
        }
        assert!(run_suite("nope").unwrap().is_none());
    }

    #[test]
    fn enumeration_sees_infeasibility() {
        let mut p = BinaryProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 3.0).unwrap();
        assert_eq!(enumerate_program(&p), None);
    }
}
