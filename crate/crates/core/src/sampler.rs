//! Monte-Carlo sampling of optimal assignment plans.
//!
//! Each sample draws a uniform random assignment cost `c_ij ∈ [0,1]`, solves
//! the plain assignment problem over P to optimality and records the plan
//! together with its true objective. Sample `i` is driven entirely by seed
//! `base_seed + i`, so a dataset does not depend on the number of workers.

use std::io::{BufRead, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mip::{bnb_solve, BinaryProgram, Limits, MipStatus};
use crate::model::{f_obj, AssignmentPlan, GaprInstance};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    /// Per-sample solve limit in seconds.
    pub time_limit_s: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { time_limit_s: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub plan: AssignmentPlan,
    pub value: f64,
    pub seed: u64,
    /// The solve hit its limit and the best incumbent was kept.
    pub limited: bool,
    pub solve_seconds: f64,
}

/// Row-major `|I|×|J|` cost matrix for one sample.
pub fn random_costs(inst: &GaprInstance, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..inst.task_count() * inst.agent_count())
        .map(|_| rng.random::<f64>())
        .collect()
}

/// `min c·y` over P.
pub fn assignment_program(inst: &GaprInstance, costs: &[f64]) -> Result<BinaryProgram> {
    let vars = inst.task_count() * inst.agent_count();
    if costs.len() != vars {
        return Err(Error::InvalidArgument(format!("{} costs for {vars} variables", costs.len())));
    }
    let mut prog = BinaryProgram::new(vars);
    prog.objective = costs.to_vec();
    inst.add_polytope_rows(&mut prog)?;
    Ok(prog)
}

pub fn sample_once(inst: &GaprInstance, seed: u64) -> Result<Sample> {
    sample_with(inst, seed, &SampleConfig::default())
}

pub fn sample_with(inst: &GaprInstance, seed: u64, cfg: &SampleConfig) -> Result<Sample> {
    let start = Instant::now();
    let prog = assignment_program(inst, &random_costs(inst, seed))?;
    let res = bnb_solve(&prog, &Limits::with_time(cfg.time_limit_s))?;
    let limited = match res.status {
        MipStatus::Optimal => false,
        MipStatus::Feasible => true,
        MipStatus::Infeasible => return Err(Error::Solver("assignment program infeasible".into())),
        MipStatus::Unknown => {
            return Err(Error::Solver("no incumbent within the sample time limit".into()))
        }
    };
    let x = res.incumbent.expect("optimal or feasible status carries an incumbent");
    let plan = inst.plan_from_solution(&x)?;
    let value = f_obj(&plan, inst)?.total;
    Ok(Sample { plan, value, seed, limited, solve_seconds: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub instance_digest: String,
    pub task_count: usize,
    pub agent_count: usize,
    pub base_seed: u64,
    pub n: usize,
    pub limited_count: usize,
}

/// Wall-clock figures kept apart from the dataset so that its bytes stay
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleTiming {
    pub workers: usize,
    pub mean_sample_seconds: f64,
    pub max_sample_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub plans: Vec<AssignmentPlan>,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub limited: Vec<bool>,
    pub timing: SampleTiming,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    #[serde(flatten)]
    meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct Record {
    plan: Vec<Vec<usize>>,
    value: f64,
    seed: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    limited: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Index of the lowest value (first on ties).
    pub fn best_index(&self) -> Option<usize> {
        (0..self.values.len()).min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Re-evaluates every plan and compares with the stored value.
    pub fn verify(&self, inst: &GaprInstance) -> Result<()> {
        if self.meta.instance_digest != inst.digest() {
            return Err(Error::DigestMismatch {
                expected: inst.digest(),
                found: self.meta.instance_digest.clone(),
            });
        }
        for (k, (plan, &v)) in self.plans.iter().zip(&self.values).enumerate() {
            let again = f_obj(plan, inst)?.total;
            if (again - v).abs() > 1e-9 {
                return Err(Error::Format(format!("record {k} stores {v}, plan evaluates to {again}")));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header { kind: "header".into(), meta: self.meta.clone() };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for k in 0..self.len() {
            let rec = Record {
                plan: self.plans[k].to_lists(),
                value: self.values[k],
                seed: self.seeds[k],
                limited: self.limited[k],
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses a dataset; timing is left at its default.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let header: Header = serde_json::from_str(&first)?;
        if header.kind != "header" || header.meta.format_version != FORMAT_VERSION {
            return Err(Error::Format("missing or unsupported dataset header".into()));
        }
        let meta = header.meta;
        let mut data = Dataset {
            plans: Vec::with_capacity(meta.n),
            values: Vec::with_capacity(meta.n),
            seeds: Vec::with_capacity(meta.n),
            limited: Vec::with_capacity(meta.n),
            timing: SampleTiming::default(),
            meta,
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)?;
            if rec.plan.len() != data.meta.agent_count {
                return Err(Error::Format(format!("record has {} agents", rec.plan.len())));
            }
            data.plans.push(AssignmentPlan::from_lists(data.meta.task_count, &rec.plan)?);
            data.values.push(rec.value);
            data.seeds.push(rec.seed);
            data.limited.push(rec.limited);
        }
        if data.len() != data.meta.n {
            return Err(Error::Format(format!(
                "header announces {} records, found {}",
                data.meta.n,
                data.len()
            )));
        }
        Ok(data)
    }
}

pub fn collect(inst: &GaprInstance, n: usize, workers: usize, base_seed: u64) -> Result<Dataset> {
    collect_with(inst, n, workers, base_seed, &SampleConfig::default())
}

pub fn collect_with(
    inst: &GaprInstance,
    n: usize,
    workers: usize,
    base_seed: u64,
    cfg: &SampleConfig,
) -> Result<Dataset> {
    if n == 0 || workers == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and workers >= 1, got n={n}, workers={workers}"
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let start = Instant::now();
    let results: Vec<Result<Sample>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| sample_with(inst, base_seed.wrapping_add(i as u64), cfg))
            .collect()
    });
    let wall_seconds = start.elapsed().as_secs_f64();
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut samples = Vec::with_capacity(n);
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => return Err(Error::Sample { index, completed, source: Box::new(e) }),
        }
    }
    let times: Vec<f64> = samples.iter().map(|s| s.solve_seconds).collect();
    let timing = SampleTiming {
        workers,
        mean_sample_seconds: times.iter().sum::<f64>() / n as f64,
        max_sample_seconds: times.iter().copied().fold(0.0, f64::max),
        wall_seconds,
    };
    let limited: Vec<bool> = samples.iter().map(|s| s.limited).collect();
    Ok(Dataset {
        meta: DatasetMeta {
            format_version: FORMAT_VERSION,
            instance_digest: inst.digest(),
            task_count: inst.task_count(),
            agent_count: inst.agent_count(),
            base_seed,
            n,
            limited_count: limited.iter().filter(|&&l| l).count(),
        },
        values: samples.iter().map(|s| s.value).collect(),
        seeds: samples.iter().map(|s| s.seed).collect(),
        plans: samples.into_iter().map(|s| s.plan).collect(),
        limited,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{feasible_plans, plan_classes};
    use crate::model::{equivalent, is_feasible};
    use crate::problems::{generate_jobprp, JobprpParams};

    fn c_cost(plan: &AssignmentPlan, inst: &GaprInstance, c: &[f64]) -> f64 {
        plan.subsets()
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().map(move |i| c[inst.y_index(i, j)]))
            .sum()
    }

    #[test]
    fn sampled_plan_is_cost_optimal() {
        let inst = GaprInstance::without_routing(vec![1.0; 3], 2, f64::INFINITY, false).unwrap();
        let plans = feasible_plans(&inst).unwrap();
        for seed in 0..40 {
            let s = sample_once(&inst, seed).unwrap();
            let c = random_costs(&inst, seed);
            let best = plans.iter().map(|p| c_cost(p, &inst, &c)).fold(f64::INFINITY, f64::min);
            assert!(plans.contains(&s.plan));
            assert!((c_cost(&s.plan, &inst, &c) - best).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn single_agent_has_one_plan() {
        let inst = GaprInstance::without_routing(vec![1.0; 4], 1, 10.0, false).unwrap();
        for seed in 0..5 {
            assert_eq!(sample_once(&inst, seed).unwrap().plan.to_lists(), vec![vec![0, 1, 2, 3]]);
        }
    }

    #[test]
    fn covers_every_class() {
        let inst = GaprInstance::without_routing(vec![1.0; 4], 2, f64::INFINITY, false).unwrap();
        let data = collect(&inst, 2000, 4, 11).unwrap();
        let classes = plan_classes(&inst).unwrap();
        assert_eq!(classes.len(), 8);
        for class in &classes {
            assert!(data.plans.iter().any(|p| equivalent(p, class).unwrap()), "{class:?} missing");
        }
    }

    #[test]
    fn workers_do_not_change_the_dataset() {
        let inst = generate_jobprp(&JobprpParams::new(8, 2, 12.0, 3)).unwrap();
        let a = collect(&inst, 10, 1, 100).unwrap();
        let b = collect(&inst, 10, 4, 100).unwrap();
        let (mut wa, mut wb) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut wa).unwrap();
        b.write_jsonl(&mut wb).unwrap();
        assert_eq!(wa, wb);
        assert!(a.plans.iter().all(|p| is_feasible(p, &inst)));
        a.verify(&inst).unwrap();
    }

    #[test]
    fn jsonl_round_trip() {
        let inst = generate_jobprp(&JobprpParams::new(6, 2, 10.0, 1)).unwrap();
        let data = collect(&inst, 7, 2, 5).unwrap();
        let mut bytes = Vec::new();
        data.write_jsonl(&mut bytes).unwrap();
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 8);
        let back = Dataset::read_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(back.plans, data.plans);
        assert_eq!(back.values, data.values);
        let mut again = Vec::new();
        back.write_jsonl(&mut again).unwrap();
        assert_eq!(again, bytes);
        back.verify(&inst).unwrap();
    }

    #[test]
    fn rejects_empty_requests() {
        let inst = GaprInstance::without_routing(vec![1.0; 2], 2, f64::INFINITY, false).unwrap();
        assert!(collect(&inst, 0, 1, 0).is_err());
        assert!(collect(&inst, 1, 0, 0).is_err());
    }
}
