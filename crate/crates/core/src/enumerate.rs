//! Exhaustive enumeration of assignment plans, used as an oracle on small
//! instances.

use std::collections::BTreeMap;

use crate::bitset::TaskSubset;
use crate::error::{Error, Result};
use crate::model::{f_obj, is_feasible, AssignmentPlan, GaprInstance};

/// Refuse to enumerate more than this many ordered plans.
pub const ENUMERATION_LIMIT: u64 = 1 << 22;

fn ordered_count(inst: &GaprInstance) -> Result<u64> {
    let (tasks, agents) = (inst.task_count() as u32, inst.agent_count() as u64);
    agents
        .checked_pow(tasks)
        .filter(|&n| n <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{agents}^{tasks} plans is too many to enumerate"))
        })
}

/// Every feasible ordered plan, in base-|J| counting order over task 0 first.
pub fn feasible_plans(inst: &GaprInstance) -> Result<Vec<AssignmentPlan>> {
    let total = ordered_count(inst)?;
    let (tasks, agents) = (inst.task_count(), inst.agent_count());
    let mut out = Vec::new();
    let mut digits = vec![0usize; tasks];
    for _ in 0..total {
        let mut subsets = vec![TaskSubset::empty(tasks); agents];
        for (i, &j) in digits.iter().enumerate() {
            subsets[j].insert(i);
        }
        let plan = AssignmentPlan::new(subsets)?;
        if is_feasible(&plan, inst) {
            out.push(plan);
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < agents {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}

/// One representative (the first enumerated) per equivalence class of
/// feasible plans.
pub fn plan_classes(inst: &GaprInstance) -> Result<Vec<AssignmentPlan>> {
    let mut classes = BTreeMap::new();
    for plan in feasible_plans(inst)? {
        let key: Vec<Vec<usize>> = plan.canonical().iter().map(TaskSubset::to_vec).collect();
        classes.entry(key).or_insert(plan);
    }
    Ok(classes.into_values().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub plan: AssignmentPlan,
    pub value: f64,
    /// False if any route was priced by the 2-opt heuristic.
    pub exact: bool,
    pub plans_checked: usize,
}

/// Minimum of the true objective over all feasible plans. Ties keep the
/// first plan in enumeration order.
pub fn brute_optimum(inst: &GaprInstance) -> Result<BruteForce> {
    let plans = feasible_plans(inst)?;
    let plans_checked = plans.len();
    let mut best: Option<BruteForce> = None;
    let mut exact = true;
    for plan in plans {
        let v = f_obj(&plan, inst)?;
        exact &= v.routes.iter().all(|r| r.exact);
        if best.as_ref().is_none_or(|b| v.total < b.value) {
            best = Some(BruteForce { plan, value: v.total, exact: true, plans_checked });
        }
    }
    let mut best = best.ok_or_else(|| Error::InvalidInstance("no feasible plan".into()))?;
    best.exact = exact;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_combinatorics() {
        let inst = GaprInstance::without_routing(vec![1.0; 3], 2, f64::INFINITY, false).unwrap();
        assert_eq!(feasible_plans(&inst).unwrap().len(), 8);
        // {123|}, {1|23}, {2|13}, {3|12}
        assert_eq!(plan_classes(&inst).unwrap().len(), 4);

        let busy = GaprInstance::without_routing(vec![1.0; 4], 3, f64::INFINITY, true).unwrap();
        // Surjections 4 -> 3 and Stirling S(4,3).
        assert_eq!(feasible_plans(&busy).unwrap().len(), 36);
        assert_eq!(plan_classes(&busy).unwrap().len(), 6);

        let tight = GaprInstance::without_routing(vec![1.0; 4], 2, 2.0, false).unwrap();
        assert_eq!(feasible_plans(&tight).unwrap().len(), 6);
    }

    #[test]
    fn optimum_uses_assignment_cost() {
        let inst = GaprInstance::without_routing(vec![1.0; 2], 2, f64::INFINITY, false)
            .unwrap()
            .with_assignment_cost(&[vec![3.0, 1.0], vec![0.5, 2.0]])
            .unwrap();
        let best = brute_optimum(&inst).unwrap();
        assert_eq!(best.value, 1.5);
        assert_eq!(best.plan.to_lists(), vec![vec![1], vec![0]]);
    }

    #[test]
    fn refuses_huge_enumerations() {
        let inst = GaprInstance::without_routing(vec![0.0; 30], 3, f64::INFINITY, false).unwrap();
        assert!(feasible_plans(&inst).is_err());
    }
}
