//! Instances, assignment plans and the true objective.
//!
//! An assignment plan is an ordered sequence of disjoint task subsets, one per
//! agent. Plans are in one-to-one correspondence with binary matrices `y`
//! whose rows sum to one; [`plan_from_y`] and [`y_from_plan`] convert between
//! the two.

use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bitset::TaskSubset;
use crate::error::{Error, Result};
use crate::mip::{BinaryProgram, Sense};
use crate::problems::routing::{Geometry, Route, RouteOracle, DEFAULT_HK_THRESHOLD};

/// Assignment problem with a per-agent routing cost.
///
/// Agents are homogeneous: they share one capacity and one routing oracle.
#[derive(Debug, Clone)]
pub struct GaprInstance {
    weights: Vec<f64>,
    agent_count: usize,
    capacity: f64,
    nonempty_agents: bool,
    // |I| x |J|, row-major.
    assignment_cost: Vec<f64>,
    oracle: Arc<RouteOracle>,
}

impl GaprInstance {
    /// `capacity` may be `f64::INFINITY` for an uncapacitated instance.
    pub fn new(
        weights: Vec<f64>,
        agent_count: usize,
        capacity: f64,
        nonempty_agents: bool,
        oracle: Arc<RouteOracle>,
    ) -> Result<Self> {
        let tasks = weights.len();
        if agent_count == 0 {
            return Err(Error::InvalidInstance("agent count must be positive".into()));
        }
        if capacity.is_nan() || capacity <= 0.0 {
            return Err(Error::InvalidInstance(format!("capacity {capacity} must be positive")));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidInstance(format!("task {i} has weight {w}")));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| **w > capacity) {
            return Err(Error::InvalidInstance(format!(
                "task {i} weight {w} exceeds capacity {capacity}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total > capacity * agent_count as f64 {
            return Err(Error::InvalidInstance(format!(
                "total weight {total} exceeds fleet capacity {}",
                capacity * agent_count as f64
            )));
        }
        if nonempty_agents && tasks < agent_count {
            return Err(Error::InvalidInstance(format!(
                "{tasks} tasks cannot keep {agent_count} agents busy"
            )));
        }
        if oracle.task_count() != tasks {
            return Err(Error::InvalidInstance(format!(
                "oracle knows {} tasks, instance has {tasks}",
                oracle.task_count()
            )));
        }
        Ok(Self {
            assignment_cost: vec![0.0; tasks * agent_count],
            weights,
            agent_count,
            capacity,
            nonempty_agents,
            oracle,
        })
    }

    /// Instance whose routing cost is identically zero.
    pub fn without_routing(
        weights: Vec<f64>,
        agent_count: usize,
        capacity: f64,
        nonempty_agents: bool,
    ) -> Result<Self> {
        let oracle = RouteOracle::new(Geometry::empty(weights.len()), DEFAULT_HK_THRESHOLD)?;
        Self::new(weights, agent_count, capacity, nonempty_agents, Arc::new(oracle))
    }

    /// Replaces the assignment cost matrix (`rows[i][j]` = cost of task i on agent j).
    pub fn with_assignment_cost(mut self, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != self.task_count() || rows.iter().any(|r| r.len() != self.agent_count) {
            return Err(Error::InvalidInstance("assignment cost has wrong shape".into()));
        }
        if rows.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance("non-finite assignment cost".into()));
        }
        self.assignment_cost = rows.iter().flatten().copied().collect();
        Ok(self)
    }

    pub fn task_count(&self) -> usize {
        self.weights.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn nonempty_agents(&self) -> bool {
        self.nonempty_agents
    }

    pub fn assignment_cost(&self, task: usize, agent: usize) -> f64 {
        self.assignment_cost[task * self.agent_count + agent]
    }

    pub fn assignment_cost_rows(&self) -> Vec<Vec<f64>> {
        self.assignment_cost
            .chunks(self.agent_count)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn has_assignment_cost(&self) -> bool {
        self.assignment_cost.iter().any(|&c| c != 0.0)
    }

    pub fn oracle(&self) -> &Arc<RouteOracle> {
        &self.oracle
    }

    /// Hex SHA-256 over the instance data (weights, fleet, costs, geometry).
    /// Two instances with equal digests price every plan identically.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Content<'a> {
            weights: &'a [f64],
            agents: usize,
            capacity: Option<f64>,
            nonempty_agents: bool,
            assignment_cost: &'a [f64],
            geometry: &'a Geometry,
            hk_threshold: usize,
        }
        let content = Content {
            weights: &self.weights,
            agents: self.agent_count,
            capacity: self.capacity.is_finite().then_some(self.capacity),
            nonempty_agents: self.nonempty_agents,
            assignment_cost: &self.assignment_cost,
            geometry: self.oracle.geometry(),
            hk_threshold: self.oracle.hk_threshold(),
        };
        let bytes = serde_json::to_vec(&content).expect("instance content serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Index of `y_ij` in programs built over this instance.
    pub fn y_index(&self, task: usize, agent: usize) -> usize {
        task * self.agent_count + agent
    }

    /// Adds the rows of the feasible region P over the first `|I|·|J|`
    /// variables: one assignment per task, the capacity of every agent when
    /// finite, and a nonempty row per agent when agents must stay busy.
    pub fn add_polytope_rows(&self, prog: &mut BinaryProgram) -> Result<()> {
        let (tasks, agents) = (self.task_count(), self.agent_count);
        for i in 0..tasks {
            let row = (0..agents).map(|j| (self.y_index(i, j), 1.0)).collect();
            prog.add_constraint(row, Sense::Eq, 1.0)?;
        }
        if self.capacity.is_finite() {
            for j in 0..agents {
                let row = (0..tasks).map(|i| (self.y_index(i, j), self.weights[i])).collect();
                prog.add_constraint(row, Sense::Le, self.capacity)?;
            }
        }
        if self.nonempty_agents {
            for j in 0..agents {
                let row = (0..tasks).map(|i| (self.y_index(i, j), 1.0)).collect();
                prog.add_constraint(row, Sense::Ge, 1.0)?;
            }
        }
        Ok(())
    }

    /// Reads the plan encoded by the y-block of a program solution.
    pub fn plan_from_solution(&self, x: &[u8]) -> Result<AssignmentPlan> {
        let agents = self.agent_count;
        if x.len() < self.task_count() * agents {
            return Err(Error::MalformedAssignment("solution shorter than the y-block".into()));
        }
        let y: Vec<Vec<u8>> = x[..self.task_count() * agents]
            .chunks(agents)
            .map(<[u8]>::to_vec)
            .collect();
        plan_from_y(&y, self)
    }
}

/// Ordered sequence of task subsets, one per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentPlan {
    subsets: Vec<TaskSubset>,
}

impl AssignmentPlan {
    pub fn new(subsets: Vec<TaskSubset>) -> Result<Self> {
        let Some(first) = subsets.first() else {
            return Err(Error::MalformedAssignment("a plan needs at least one agent".into()));
        };
        let universe = first.universe();
        if let Some(bad) = subsets.iter().find(|s| s.universe() != universe) {
            return Err(Error::UniverseMismatch(universe, bad.universe()));
        }
        Ok(Self { subsets })
    }

    /// Builds a plan from per-agent task id lists.
    pub fn from_lists(task_count: usize, lists: &[Vec<usize>]) -> Result<Self> {
        if let Some(&bad) = lists.iter().flatten().find(|&&t| t >= task_count) {
            return Err(Error::MalformedAssignment(format!("unknown task {bad}")));
        }
        Self::new(
            lists
                .iter()
                .map(|l| TaskSubset::from_ids(task_count, l.iter().copied()))
                .collect(),
        )
    }

    pub fn subsets(&self) -> &[TaskSubset] {
        &self.subsets
    }

    pub fn agent_count(&self) -> usize {
        self.subsets.len()
    }

    pub fn task_count(&self) -> usize {
        self.subsets[0].universe()
    }

    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        self.subsets.iter().map(TaskSubset::to_vec).collect()
    }

    /// Agent holding `task`, if any.
    pub fn agent_of(&self, task: usize) -> Option<usize> {
        self.subsets.iter().position(|s| s.contains(task))
    }

    /// Subsets sorted by (cardinality, lexicographic members); equal for
    /// plans that differ only by a permutation of agents.
    pub fn canonical(&self) -> Vec<TaskSubset> {
        let mut c = self.subsets.clone();
        c.sort_by(TaskSubset::canonical_cmp);
        c
    }
}

/// Interprets a binary matrix `y` (`y[i][j]` = task i on agent j) as a plan.
pub fn plan_from_y(y: &[Vec<u8>], inst: &GaprInstance) -> Result<AssignmentPlan> {
    let (tasks, agents) = (inst.task_count(), inst.agent_count());
    if y.len() != tasks {
        return Err(Error::MalformedAssignment(format!(
            "y has {} rows, instance has {tasks} tasks",
            y.len()
        )));
    }
    let mut subsets = vec![TaskSubset::empty(tasks); agents];
    for (i, row) in y.iter().enumerate() {
        if row.len() != agents {
            return Err(Error::MalformedAssignment(format!("row {i} has {} columns", row.len())));
        }
        if row.iter().any(|&v| v > 1) {
            return Err(Error::MalformedAssignment(format!("row {i} is not binary")));
        }
        let ones: Vec<usize> = (0..agents).filter(|&j| row[j] == 1).collect();
        if ones.len() != 1 {
            return Err(Error::MalformedAssignment(format!(
                "row {i} sums to {}, expected 1",
                ones.len()
            )));
        }
        subsets[ones[0]].insert(i);
    }
    AssignmentPlan::new(subsets)
}

pub fn y_from_plan(plan: &AssignmentPlan) -> Vec<Vec<u8>> {
    (0..plan.task_count())
        .map(|i| plan.subsets().iter().map(|s| u8::from(s.contains(i))).collect())
        .collect()
}

/// Partition, capacity and (when required) non-emptiness all hold.
pub fn is_feasible(plan: &AssignmentPlan, inst: &GaprInstance) -> bool {
    feasibility_violation(plan, inst).is_none()
}

/// Describes the first violated constraint, if any.
pub fn feasibility_violation(plan: &AssignmentPlan, inst: &GaprInstance) -> Option<String> {
    if plan.task_count() != inst.task_count() {
        return Some(format!(
            "plan covers {} tasks, instance has {}",
            plan.task_count(),
            inst.task_count()
        ));
    }
    if plan.agent_count() != inst.agent_count() {
        return Some(format!(
            "plan has {} agents, instance has {}",
            plan.agent_count(),
            inst.agent_count()
        ));
    }
    let mut seen = TaskSubset::empty(inst.task_count());
    for (k, s) in plan.subsets().iter().enumerate() {
        if s.intersects(&seen) {
            return Some(format!("agent {k} shares a task with another agent"));
        }
        seen.union_with(s);
        let load: f64 = s.iter().map(|i| inst.weights()[i]).sum();
        if load > inst.capacity() + 1e-9 {
            return Some(format!("agent {k} load {load} exceeds capacity {}", inst.capacity()));
        }
        if inst.nonempty_agents() && s.is_empty() {
            return Some(format!("agent {k} is idle"));
        }
    }
    if seen.len() != inst.task_count() {
        return Some(format!("{} tasks unassigned", inst.task_count() - seen.len()));
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub assignment_part: f64,
    pub routing_part: f64,
    /// One route per agent, in agent order.
    pub routes: Vec<Route>,
}

/// Assignment cost plus the routing cost of every agent's task set.
pub fn f_obj(plan: &AssignmentPlan, inst: &GaprInstance) -> Result<ObjectiveValue> {
    if let Some(why) = feasibility_violation(plan, inst) {
        return Err(Error::Infeasible(why));
    }
    let mut assignment_part = 0.0;
    for (j, s) in plan.subsets().iter().enumerate() {
        for i in s.iter() {
            assignment_part += inst.assignment_cost(i, j);
        }
    }
    let routes = plan
        .subsets()
        .iter()
        .map(|s| inst.oracle().route_for_tasks(s))
        .collect::<Result<Vec<_>>>()?;
    let routing_part: f64 = routes.iter().map(|r| r.cost).sum();
    Ok(ObjectiveValue {
        total: assignment_part + routing_part,
        assignment_part,
        routing_part,
        routes,
    })
}

/// True when the plans agree up to a permutation of agents.
pub fn equivalent(a: &AssignmentPlan, b: &AssignmentPlan) -> Result<bool> {
    if a.task_count() != b.task_count() {
        return Err(Error::UniverseMismatch(a.task_count(), b.task_count()));
    }
    Ok(a.canonical() == b.canonical())
}

/// Number of agents whose task set meets `subset`.
pub fn g_count(plan: &AssignmentPlan, subset: &TaskSubset) -> Result<usize> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if subset.universe() != plan.task_count() {
        return Err(Error::UniverseMismatch(plan.task_count(), subset.universe()));
    }
    Ok(plan.subsets().iter().filter(|s| s.intersects(subset)).count())
}

/// `Σ g = |H|`, i.e. every subset of `h` sits inside one agent's task set.
/// Empty subsets are trivially contained and count once.
pub fn check_p1(plan: &AssignmentPlan, h: &[TaskSubset]) -> bool {
    let total: usize = h
        .iter()
        .map(|s| g_count(plan, s).unwrap_or(1))
        .sum();
    total == h.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::routing::{Metric, Point};

    fn plan(n: usize, lists: &[&[usize]]) -> AssignmentPlan {
        let owned: Vec<Vec<usize>> = lists.iter().map(|l| l.to_vec()).collect();
        AssignmentPlan::from_lists(n, &owned).unwrap()
    }

    fn set(n: usize, ids: &[usize]) -> TaskSubset {
        TaskSubset::from_ids(n, ids.iter().copied())
    }

    fn uncapped(n: usize, agents: usize) -> GaprInstance {
        GaprInstance::without_routing(vec![1.0; n], agents, f64::INFINITY, false).unwrap()
    }

    // Tasks 1,2,3 of the worked example map to ids 0,1,2.
    #[test]
    fn y_to_plan_worked_example() {
        let inst = uncapped(3, 2);
        let y = vec![vec![1, 0], vec![0, 1], vec![0, 1]];
        let s = plan_from_y(&y, &inst).unwrap();
        assert_eq!(s.to_lists(), vec![vec![0], vec![1, 2]]);
        assert_eq!(y_from_plan(&s), y);
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = uncapped(4, 1);
        let y = vec![vec![1]; 4];
        assert_eq!(plan_from_y(&y, &inst).unwrap().to_lists(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let inst = uncapped(2, 2);
        assert!(matches!(
            plan_from_y(&[vec![1, 1], vec![0, 1]], &inst),
            Err(Error::MalformedAssignment(_))
        ));
        assert!(plan_from_y(&[vec![0, 0], vec![0, 1]], &inst).is_err());
        assert!(plan_from_y(&[vec![2, 0], vec![0, 1]], &inst).is_err());
    }

    #[test]
    fn feasibility_cases() {
        let tight = GaprInstance::without_routing(vec![1.0; 3], 2, 2.0, false).unwrap();
        assert!(is_feasible(&plan(3, &[&[0], &[1, 2]]), &tight));
        assert!(!is_feasible(&plan(3, &[&[], &[0, 1, 2]]), &tight));
        let busy = GaprInstance::without_routing(vec![1.0; 3], 2, 10.0, true).unwrap();
        assert!(!is_feasible(&plan(3, &[&[], &[0, 1, 2]]), &busy));
        assert!(!is_feasible(&plan(3, &[&[0, 1], &[1, 2]]), &busy));
        assert!(!is_feasible(&plan(3, &[&[0], &[2]]), &busy));
    }

    #[test]
    fn construction_rejects_overfull_fleet() {
        assert!(GaprInstance::without_routing(vec![2.0; 3], 2, 2.5, false).is_err());
        assert!(GaprInstance::without_routing(vec![1.0; 2], 3, 5.0, true).is_err());
        assert!(GaprInstance::without_routing(vec![-1.0], 1, 5.0, false).is_err());
    }

    #[test]
    fn objective_on_unit_square() {
        let geo = Geometry {
            metric: Metric::Manhattan,
            depot: Point::new(0.0, 0.0),
            nodes: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            task_nodes: vec![vec![0], vec![1], vec![2], vec![3]],
        };
        let oracle = Arc::new(RouteOracle::new(geo, 14).unwrap());
        let inst = GaprInstance::new(vec![1.0; 4], 1, 4.0, false, oracle).unwrap();
        let v = f_obj(&plan(4, &[&[0, 1, 2, 3]]), &inst).unwrap();
        assert!((v.total - 4.0).abs() < 1e-12);
        assert_eq!(v.routes.len(), 1);
    }

    #[test]
    fn objective_adds_assignment_cost() {
        let inst = uncapped(3, 2)
            .with_assignment_cost(&[vec![0.5, 1.0], vec![2.0, 0.25], vec![0.0, 3.0]])
            .unwrap();
        let v = f_obj(&plan(3, &[&[0, 2], &[1]]), &inst).unwrap();
        assert!((v.assignment_part - 0.75).abs() < 1e-12);
        assert_eq!(v.routing_part, 0.0);
        assert!((v.total - v.assignment_part - v.routing_part).abs() < 1e-9);
        let bad = plan(3, &[&[0], &[2]]);
        assert!(matches!(f_obj(&bad, &inst), Err(Error::Infeasible(_))));
    }

    #[test]
    fn equivalence_is_agent_permutation() {
        let a = plan(3, &[&[0], &[1, 2]]);
        let b = plan(3, &[&[1, 2], &[0]]);
        let c = plan(3, &[&[1], &[0, 2]]);
        assert!(equivalent(&a, &b).unwrap());
        assert!(!equivalent(&a, &c).unwrap());
        assert!(equivalent(&a, &a).unwrap());
        assert!(equivalent(&a, &plan(4, &[&[0], &[1, 2, 3]])).is_err());
    }

    #[test]
    fn g_count_worked_example() {
        let s1 = plan(3, &[&[0], &[1, 2]]);
        assert_eq!(g_count(&s1, &set(3, &[1, 2])).unwrap(), 1);
        assert_eq!(g_count(&s1, &set(3, &[0, 1])).unwrap(), 2);
        for i in 0..3 {
            assert_eq!(g_count(&s1, &set(3, &[i])).unwrap(), 1);
        }
        assert!(matches!(g_count(&s1, &set(3, &[])), Err(Error::EmptySubset)));
    }

    #[test]
    fn p1_worked_example() {
        let s1 = plan(3, &[&[0], &[1, 2]]);
        assert!(check_p1(&s1, &[set(3, &[1, 2])]));
        assert!(!check_p1(&s1, &[set(3, &[0, 1])]));
        assert!(check_p1(&s1, &[]));
    }
}
