//! Greedy search over candidate subsets.
//!
//! Each iteration tops up the working set `H` with not-yet-tried subsets of
//! the current cardinality (at most `⌊θN⌋` columns in total), fits a lasso,
//! keeps only the subsets with nonzero weight and, if the fit explains
//! enough variance, solves the resulting surrogate and prices its plan with
//! the true objective. Training stops at the first surrogate plan that does
//! not improve on the best one so far.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bitset::TaskSubset;
use crate::error::{Error, Result};
use crate::learning::{build_features, gamma_select_with, lasso_fit_with, SubsetCatalog};
use crate::mip::{Limits, MipStatus};
use crate::model::{f_obj, AssignmentPlan, GaprInstance};
use crate::sampler::{collect_with, Dataset, SampleConfig};
use crate::surrogate::{compile, solve_surrogate, SetIndicatorModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Column budget as a fraction of the sample count.
    pub theta: f64,
    pub pi_card: usize,
    pub pi_limit: usize,
    /// A surrogate is solved only when R² exceeds this.
    pub r_limit: f64,
    pub eps_zero: f64,
    /// Fit an unpenalized intercept alongside β. It only shifts the
    /// surrogate objective by a constant, so the surrogate itself ignores it.
    pub intercept: bool,
    pub shuffle_seed: Option<u64>,
    pub surrogate_limits: Limits,
    /// Wall-clock budget for the whole loop, in seconds.
    pub time_budget_s: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            theta: 0.2,
            pi_card: 3,
            pi_limit: 5,
            r_limit: 0.5,
            eps_zero: crate::learning::EPS_ZERO,
            intercept: true,
            shuffle_seed: None,
            surrogate_limits: Limits::with_time(20.0),
            time_budget_s: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!("theta {} outside (0, 1]", self.theta)));
        }
        if self.pi_card == 0 || self.pi_limit < self.pi_card {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= pi_card <= pi_limit, got {} and {}",
                self.pi_card, self.pi_limit
            )));
        }
        if self.r_limit.is_nan() || !(self.eps_zero >= 0.0) {
            return Err(Error::InvalidArgument("bad r_limit or eps_zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    NonImprovement,
    CardinalityExhausted,
    R2NeverPassed,
    Budget,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::NonImprovement => "non-improvement",
            StopReason::CardinalityExhausted => "cardinality-exhausted",
            StopReason::R2NeverPassed => "r2-never-passed",
            StopReason::Budget => "budget",
        }
    }
}

/// Surrogate solve figures, named after the usual solver log columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSolve {
    pub status: MipStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub rows: usize,
    pub cols: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    /// Cardinality of the candidates merged in this iteration.
    pub cardinality: usize,
    pub added: usize,
    /// Columns in the regression.
    pub columns: usize,
    pub gamma: f64,
    pub r2: f64,
    /// Subsets kept after pruning.
    pub support: usize,
    pub surrogate: Option<SurrogateSolve>,
    pub z: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub avg_sample_seconds: f64,
    pub train_seconds: f64,
    pub solve_seconds: f64,
    /// Average sample time plus train time.
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `+∞` when no surrogate passed the R² gate.
    pub best_objective: f64,
    pub best_plan: AssignmentPlan,
    /// Set when `best_plan` is the best sampled plan rather than a surrogate plan.
    pub fallback: bool,
    pub best_model: Option<SetIndicatorModel>,
    pub iterations: Vec<Iteration>,
    pub stop_reason: StopReason,
    pub sample_min: f64,
    pub timing: Timing,
}

impl TrainReport {
    /// Objective of the plan actually returned (surrogate or fallback).
    pub fn plan_objective(&self, inst: &GaprInstance) -> Result<f64> {
        Ok(f_obj(&self.best_plan, inst)?.total)
    }

    /// Per-iteration log, one CSV row per iteration.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from(
            "iteration,cardinality,added,columns,gamma,r2,support,status,obj,bound,gap,nodes,rows,cols,time_mip,z,seconds\n",
        );
        for it in &self.iterations {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},",
                it.index, it.cardinality, it.added, it.columns, it.gamma, it.r2, it.support
            );
            match &it.surrogate {
                Some(s) => {
                    let status = serde_json::to_value(s.status).expect("status serializes");
                    let _ = write!(
                        out,
                        "{},{},{},{},{},{},{},{},",
                        status.as_str().unwrap_or(""),
                        s.objective,
                        s.bound,
                        s.gap,
                        s.nodes,
                        s.rows,
                        s.cols,
                        s.seconds
                    );
                }
                None => out.push_str(",,,,,,,,"),
            }
            let z = it.z.map(|z| z.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{z},{}", it.seconds);
        }
        out
    }

    /// The report with every wall-clock figure zeroed, for comparing runs.
    pub fn without_timing(&self) -> TrainReport {
        let mut r = self.clone();
        r.timing = Timing::default();
        for it in &mut r.iterations {
            it.seconds = 0.0;
            if let Some(s) = &mut it.surrogate {
                s.seconds = 0.0;
            }
        }
        r
    }
}

pub fn train(inst: &GaprInstance, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.meta.task_count != inst.task_count() || data.meta.agent_count != inst.agent_count() {
        return Err(Error::InvalidArgument("dataset does not match the instance".into()));
    }
    let start = Instant::now();
    let catalog = SubsetCatalog { task_count: inst.task_count(), shuffle_seed: cfg.shuffle_seed };
    let cap = (cfg.theta * data.len() as f64).floor() as usize;
    let b = &data.values;

    let mut z_star = f64::INFINITY;
    let mut best: Option<(AssignmentPlan, SetIndicatorModel)> = None;
    let mut h: Vec<TaskSubset> = Vec::new();
    let mut pending: VecDeque<TaskSubset> = VecDeque::new();
    let mut pi_card = cfg.pi_card;
    let mut loaded_card = pi_card;
    let mut iterations = Vec::new();
    let mut solve_seconds = 0.0;
    let mut stop = None;

    while pi_card <= cfg.pi_limit || !pending.is_empty() {
        if cfg.time_budget_s.is_some_and(|t| start.elapsed().as_secs_f64() > t) {
            stop = Some(StopReason::Budget);
            break;
        }
        let it_start = Instant::now();
        if pending.is_empty() {
            pending = catalog.subsets(pi_card)?.into();
            loaded_card = pi_card;
            pi_card += 1;
        }
        let take = if h.len() + pending.len() <= cap {
            pending.len()
        } else {
            cap.saturating_sub(h.len())
        };
        if take == 0 && !pending.is_empty() {
            // The last fit kept all `cap` columns, so the next one would
            // repeat it exactly and no further candidate can enter. The
            // fallthrough below reports that as exhaustion.
            break;
        }
        h.extend(pending.drain(..take));
        if h.is_empty() {
            continue;
        }

        let a = build_features(&data.plans, &h)?;
        let gamma = gamma_select_with(&a, b, cfg.intercept)?;
        let fit = lasso_fit_with(&a, b, gamma, cfg.intercept)?;
        let keep: Vec<usize> = (0..h.len()).filter(|&j| fit.beta[j].abs() > cfg.eps_zero).collect();
        let columns = h.len();
        h = keep.iter().map(|&j| h[j].clone()).collect();
        let beta: Vec<f64> = keep.iter().map(|&j| fit.beta[j]).collect();

        let mut record = Iteration {
            index: iterations.len(),
            cardinality: loaded_card,
            added: take,
            columns,
            gamma,
            r2: fit.r2,
            support: h.len(),
            surrogate: None,
            z: None,
            seconds: 0.0,
        };
        let mut improved = true;
        if fit.r2 > cfg.r_limit && !h.is_empty() {
            let model = SetIndicatorModel::new(h.clone(), beta)?;
            let prog = compile(&model, inst)?;
            let (plan, res) = solve_surrogate(&model, inst, &cfg.surrogate_limits)?;
            solve_seconds += res.elapsed;
            let z = f_obj(&plan, inst)?.total;
            record.surrogate = Some(SurrogateSolve {
                status: res.status,
                objective: res.objective,
                bound: res.bound,
                gap: res.gap,
                nodes: res.nodes,
                rows: prog.rows(),
                cols: prog.cols(),
                seconds: res.elapsed,
            });
            record.z = Some(z);
            if z < z_star {
                z_star = z;
                best = Some((plan, model));
            } else {
                improved = false;
            }
        }
        record.seconds = it_start.elapsed().as_secs_f64();
        iterations.push(record);
        if !improved {
            stop = Some(StopReason::NonImprovement);
            break;
        }
    }

    let stop_reason = stop.unwrap_or(if best.is_some() {
        StopReason::CardinalityExhausted
    } else {
        StopReason::R2NeverPassed
    });
    let (best_plan, best_model, fallback) = match best {
        Some((plan, model)) => (plan, Some(model), false),
        None => {
            let k = data.best_index().expect("nonempty dataset");
            (data.plans[k].clone(), None, true)
        }
    };
    let train_seconds = start.elapsed().as_secs_f64();
    Ok(TrainReport {
        best_objective: z_star,
        best_plan,
        fallback,
        best_model,
        iterations,
        stop_reason,
        sample_min: data.min_value(),
        timing: Timing {
            avg_sample_seconds: data.timing.mean_sample_seconds,
            train_seconds,
            solve_seconds,
            total_seconds: data.timing.mean_sample_seconds + train_seconds,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineSeeds {
    pub sample_seed: u64,
    pub workers: usize,
}

/// Sampling followed by training.
pub fn pipeline(
    inst: &GaprInstance,
    n: usize,
    cfg: &TrainConfig,
    seeds: PipelineSeeds,
) -> Result<(Dataset, TrainReport)> {
    let data = collect_with(inst, n, seeds.workers, seeds.sample_seed, &SampleConfig::default())?;
    let report = train(inst, &data, cfg)?;
    Ok((data, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::feasible_plans;
    use crate::learning::binomial;
    use crate::model::g_count;
    use crate::problems::{generate_jobprp, JobprpParams};
    use crate::sampler::collect;
    use crate::surrogate::evaluate_L;

    fn planted(inst: &GaprInstance, n: usize, h0: &[TaskSubset]) -> Dataset {
        let mut data = collect(inst, n, 2, 1).unwrap();
        data.values = data
            .plans
            .iter()
            .map(|p| h0.iter().map(|s| g_count(p, s).unwrap() as f64).sum())
            .collect();
        data
    }

    #[test]
    fn recovers_a_planted_model() {
        let inst = GaprInstance::without_routing(vec![1.0; 6], 2, 4.0, false).unwrap();
        let h0 = vec![
            TaskSubset::from_ids(6, [0, 1, 2]),
            TaskSubset::from_ids(6, [3, 4, 5]),
            TaskSubset::from_ids(6, [1, 2, 3]),
        ];
        let data = planted(&inst, 300, &h0);
        let cfg = TrainConfig { pi_limit: 3, ..TrainConfig::default() };
        let report = train(&inst, &data, &cfg).unwrap();
        let first = &report.iterations[0];
        assert!(first.r2 > 0.999, "r2 {}", first.r2);
        let model = report.best_model.as_ref().unwrap();
        for s in &h0 {
            assert!(model.subsets().contains(s), "{s:?} dropped");
        }
        let planted_model = SetIndicatorModel::unit(h0.clone()).unwrap();
        let brute = feasible_plans(&inst)
            .unwrap()
            .iter()
            .map(|p| evaluate_L(p, &planted_model).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(evaluate_L(&report.best_plan, &planted_model).unwrap(), brute);
    }

    #[test]
    fn unreachable_gate_falls_back_to_samples() {
        let inst = generate_jobprp(&JobprpParams::new(6, 2, 10.0, 4)).unwrap();
        let data = collect(&inst, 60, 2, 0).unwrap();
        let cfg = TrainConfig { r_limit: 1.1, pi_limit: 4, ..TrainConfig::default() };
        let report = train(&inst, &data, &cfg).unwrap();
        assert!(report.best_objective.is_infinite());
        assert!(report.fallback);
        assert!(matches!(report.stop_reason, StopReason::R2NeverPassed));
        assert!(report.iterations.iter().all(|it| it.surrogate.is_none()));
        assert_eq!(report.plan_objective(&inst).unwrap(), data.min_value());
    }

    #[test]
    fn first_iteration_respects_the_column_cap() {
        let inst = generate_jobprp(&JobprpParams::new(9, 2, 14.0, 2)).unwrap();
        let data = collect(&inst, 100, 2, 3).unwrap();
        assert!(binomial(9, 3) > 20);
        let cfg = TrainConfig { pi_limit: 3, ..TrainConfig::default() };
        let report = train(&inst, &data, &cfg).unwrap();
        assert_eq!(report.iterations[0].columns, 20);
        assert!(report.iterations.iter().all(|it| it.columns <= 20));
        assert!(report.iterations.iter().all(|it| it.support <= it.columns));
    }

    #[test]
    fn accepted_objectives_strictly_decrease() {
        let inst = generate_jobprp(&JobprpParams::new(8, 2, 12.0, 6)).unwrap();
        let (_, report) = pipeline(
            &inst,
            120,
            &TrainConfig::default(),
            PipelineSeeds { sample_seed: 9, workers: 2 },
        )
        .unwrap();
        let zs: Vec<f64> = report.iterations.iter().filter_map(|it| it.z).collect();
        let accepted = match report.stop_reason {
            StopReason::NonImprovement => &zs[..zs.len() - 1],
            _ => &zs[..],
        };
        assert!(accepted.windows(2).all(|w| w[1] < w[0]), "{zs:?}");
        if !report.fallback {
            assert_eq!(report.best_objective, accepted.iter().copied().fold(f64::INFINITY, f64::min));
        }
        let csv = report.iterations_csv();
        assert_eq!(csv.lines().count(), report.iterations.len() + 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = TrainConfig { theta: 0.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { pi_card: 4, pi_limit: 3, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }
}
