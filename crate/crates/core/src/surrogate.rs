//! The set-indicator surrogate.
//!
//! Given candidate subsets `I_η` with weights `β_η`, the surrogate program
//! keeps the assignment block `y` over P and adds a binary `δ_jη` per agent
//! and subset, forced to 1 whenever agent `j` holds a task of `I_η`:
//!
//! ```text
//! minimize   Σ_η β_η Σ_j δ_jη
//! subject to y ∈ P
//!            M_η δ_jη − Σ_{i ∈ I_η} y_ij ≥ 0     M_η = |I_η|
//! ```
//!
//! For `β_η ≥ 0` the optimal δ counts the agents meeting `I_η`, so the
//! surrogate value of a plan is `Σ β_η g(s, I_η)`. A negative weight drives
//! every `δ_jη` to 1 and contributes the constant `β_η |J|`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bitset::TaskSubset;
use crate::error::{Error, Result};
use crate::mip::{bnb_solve, BinaryProgram, Limits, MipResult, MipStatus, Sense};
use crate::model::{equivalent, g_count, AssignmentPlan, GaprInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct SetIndicatorModel {
    subsets: Vec<TaskSubset>,
    beta: Vec<f64>,
    big_m: Vec<usize>,
}

impl SetIndicatorModel {
    pub fn new(subsets: Vec<TaskSubset>, beta: Vec<f64>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::InvalidArgument("surrogate needs at least one subset".into()));
        }
        if subsets.len() != beta.len() {
            return Err(Error::InvalidArgument(format!(
                "{} subsets but {} weights",
                subsets.len(),
                beta.len()
            )));
        }
        if subsets.iter().any(TaskSubset::is_empty) {
            return Err(Error::EmptySubset);
        }
        let universe = subsets[0].universe();
        if let Some(s) = subsets.iter().find(|s| s.universe() != universe) {
            return Err(Error::UniverseMismatch(universe, s.universe()));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        let big_m = subsets.iter().map(TaskSubset::len).collect();
        Ok(Self { subsets, beta, big_m })
    }

    /// Unit weights on every subset.
    pub fn unit(subsets: Vec<TaskSubset>) -> Result<Self> {
        let beta = vec![1.0; subsets.len()];
        Self::new(subsets, beta)
    }

    pub fn subsets(&self) -> &[TaskSubset] {
        &self.subsets
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn big_m(&self) -> &[usize] {
        &self.big_m
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    fn check_instance(&self, inst: &GaprInstance) -> Result<()> {
        if self.subsets[0].universe() != inst.task_count() {
            return Err(Error::UniverseMismatch(inst.task_count(), self.subsets[0].universe()));
        }
        Ok(())
    }
}

/// Index of `δ_jη` in the compiled program.
pub fn delta_index(inst: &GaprInstance, eta: usize, agent: usize) -> usize {
    inst.task_count() * inst.agent_count() + eta * inst.agent_count() + agent
}

/// Builds the surrogate program. Variables are the `|I|·|J|` y-block
/// followed by `δ_jη` at `delta_index`; rows are those of P followed by one
/// indicator row per (η, j).
pub fn compile(model: &SetIndicatorModel, inst: &GaprInstance) -> Result<BinaryProgram> {
    model.check_instance(inst)?;
    let (tasks, agents) = (inst.task_count(), inst.agent_count());
    let mut prog = BinaryProgram::new(tasks * agents + model.len() * agents);
    let mut names: Vec<String> = Vec::with_capacity(prog.var_count);
    for i in 0..tasks {
        names.extend((0..agents).map(|j| format!("y{i}_{j}")));
    }
    for eta in 0..model.len() {
        names.extend((0..agents).map(|j| format!("d{j}_{eta}")));
    }
    prog.var_names = Some(names);
    for (eta, &b) in model.beta.iter().enumerate() {
        for j in 0..agents {
            prog.set_objective(delta_index(inst, eta, j), b);
        }
    }
    inst.add_polytope_rows(&mut prog)?;
    for (eta, subset) in model.subsets.iter().enumerate() {
        for j in 0..agents {
            let mut row = vec![(delta_index(inst, eta, j), model.big_m[eta] as f64)];
            row.extend(subset.iter().map(|i| (inst.y_index(i, j), -1.0)));
            prog.add_constraint(row, Sense::Ge, 0.0)?;
        }
    }
    Ok(prog)
}

/// Solves the surrogate and extracts the plan from the incumbent's y-block.
pub fn solve_surrogate(
    model: &SetIndicatorModel,
    inst: &GaprInstance,
    limits: &Limits,
) -> Result<(AssignmentPlan, MipResult)> {
    let prog = compile(model, inst)?;
    let res = bnb_solve(&prog, limits)?;
    match res.status {
        MipStatus::Optimal | MipStatus::Feasible => {}
        MipStatus::Infeasible => return Err(Error::Solver("surrogate program infeasible".into())),
        MipStatus::Unknown => {
            return Err(Error::Solver("surrogate limit hit before any incumbent".into()))
        }
    }
    let x = res.incumbent.as_deref().expect("incumbent present");
    let plan = inst.plan_from_solution(x)?;
    Ok((plan, res))
}

/// Surrogate value of a plan in closed form.
#[allow(non_snake_case)]
pub fn evaluate_L(plan: &AssignmentPlan, model: &SetIndicatorModel) -> Result<f64> {
    let agents = plan.agent_count() as f64;
    let mut total = 0.0;
    for (s, &b) in model.subsets.iter().zip(&model.beta) {
        total += if b >= 0.0 { b * g_count(plan, s)? as f64 } else { b * agents };
    }
    Ok(total)
}

/// Surrogate value of a plan by solving the compiled program with the
/// y-block pinned to the plan.
#[allow(non_snake_case)]
pub fn evaluate_L_by_mip(
    plan: &AssignmentPlan,
    model: &SetIndicatorModel,
    inst: &GaprInstance,
) -> Result<f64> {
    let mut prog = compile(model, inst)?;
    for (j, s) in plan.subsets().iter().enumerate() {
        for i in 0..inst.task_count() {
            prog.fix(inst.y_index(i, j), s.contains(i))?;
        }
    }
    let res = bnb_solve(&prog, &Limits::default())?;
    if res.status != MipStatus::Optimal {
        return Err(Error::Solver(format!("pinned surrogate ended {:?}", res.status)));
    }
    Ok(res.objective)
}

/// A one-subset family whose unit-weight surrogate tells the plans apart,
/// or `None` when they are equivalent.
///
/// Take a nonempty block `a` of `s1` that is not a block of `s2`. If `a`
/// sits strictly inside a block `b` of `s2`, then `b` is split in `s1` and
/// `{b}` separates; otherwise `a` is split in `s2` and `{a}` separates.
pub fn distinguishing_h(s1: &AssignmentPlan, s2: &AssignmentPlan) -> Result<Option<Vec<TaskSubset>>> {
    if equivalent(s1, s2)? {
        return Ok(None);
    }
    // If every nonempty block of s1 were a block of s2 the plans would be
    // equivalent, so such a block exists.
    let a = s1
        .subsets()
        .iter()
        .find(|a| !a.is_empty() && !s2.subsets().contains(a))
        .expect("non-equivalent plans have an unmatched nonempty block");
    let h = match s2.subsets().iter().find(|b| a.is_subset(b)) {
        Some(b) => b.clone(),
        None => a.clone(),
    };
    Ok(Some(vec![h]))
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTerm {
    pub subset: Vec<usize>,
    pub beta: f64,
}

/// On-disk form of a trained surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub instance_digest: String,
    pub task_count: usize,
    pub agent_count: usize,
    pub terms: Vec<ModelTerm>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ModelFile {
    pub fn from_model(model: &SetIndicatorModel, inst: &GaprInstance) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            instance_digest: inst.digest(),
            task_count: inst.task_count(),
            agent_count: inst.agent_count(),
            terms: model
                .subsets
                .iter()
                .zip(&model.beta)
                .map(|(s, &beta)| ModelTerm { subset: s.to_vec(), beta })
                .collect(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_model(&self) -> Result<SetIndicatorModel> {
        let n = self.task_count;
        if let Some(bad) = self.terms.iter().flat_map(|t| &t.subset).find(|&&i| i >= n) {
            return Err(Error::Format(format!("model references task {bad} of {n}")));
        }
        SetIndicatorModel::new(
            self.terms.iter().map(|t| TaskSubset::from_ids(n, t.subset.iter().copied())).collect(),
            self.terms.iter().map(|t| t.beta).collect(),
        )
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("model format {}", file.format_version)));
        }
        Ok(file)
    }
}
