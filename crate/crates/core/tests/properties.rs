use proptest::prelude::*;

use gapr::bitset::TaskSubset;
use gapr::learning::build_features;
use gapr::model::{check_p1, equivalent, g_count, plan_from_y, y_from_plan, AssignmentPlan, GaprInstance};
use gapr::surrogate::{distinguishing_h, evaluate_L, SetIndicatorModel};

/// `(task_count, agent_count, agent of each task)`.
fn assignment() -> impl Strategy<Value = (usize, usize, Vec<usize>)> {
    (1usize..9, 1usize..5).prop_flat_map(|(n, m)| (Just(n), Just(m), prop::collection::vec(0..m, n)))
}

fn plan(n: usize, m: usize, owner: &[usize]) -> AssignmentPlan {
    let mut lists = vec![Vec::new(); m];
    for (task, &agent) in owner.iter().enumerate() {
        lists[agent].push(task);
    }
    AssignmentPlan::from_lists(n, &lists).unwrap()
}

fn subset(n: usize) -> impl Strategy<Value = TaskSubset> {
    prop::collection::btree_set(0..n, 1..=n).prop_map(move |ids| TaskSubset::from_ids(n, ids))
}

proptest! {
    #[test]
    fn y_matrix_round_trips((n, m, owner) in assignment()) {
        let p = plan(n, m, &owner);
        let inst = GaprInstance::without_routing(vec![1.0; n], m, f64::INFINITY, false).unwrap();
        let y = y_from_plan(&p);
        prop_assert!(y.iter().all(|row| row.iter().map(|&v| v as usize).sum::<usize>() == 1));
        prop_assert_eq!(plan_from_y(&y, &inst).unwrap(), p);
    }

    #[test]
    fn g_counts_touched_agents(((n, m, owner), picks) in assignment().prop_flat_map(|a| {
        let n = a.0;
        (Just(a), prop::collection::btree_set(0..n, 1..=n))
    })) {
        let p = plan(n, m, &owner);
        let h = TaskSubset::from_ids(n, picks.iter().copied());
        let g = g_count(&p, &h).unwrap();
        let touched: std::collections::BTreeSet<usize> = picks.iter().map(|&t| owner[t]).collect();
        prop_assert_eq!(g, touched.len());
        prop_assert!(g >= 1 && g <= h.len().min(m));
    }

    #[test]
    fn agent_relabelling_changes_nothing((n, m, owner) in assignment(), shift in 0usize..4) {
        let p = plan(n, m, &owner);
        let q = plan(n, m, &owner.iter().map(|&a| (a + shift) % m).collect::<Vec<_>>());
        prop_assert!(equivalent(&p, &q).unwrap());
        prop_assert_eq!(distinguishing_h(&p, &q).unwrap(), None);
        for ids in 1..(1usize << n).min(64) {
            let h = TaskSubset::from_ids(n, (0..n).filter(|b| ids >> b & 1 == 1));
            prop_assert_eq!(g_count(&p, &h).unwrap(), g_count(&q, &h).unwrap());
        }
    }

    #[test]
    fn containment_test_matches_blocks((n, m, owner) in assignment(), hs in prop::collection::vec(subset(8), 1..5)) {
        let p = plan(n, m, &owner);
        let hs: Vec<TaskSubset> = hs.iter().map(|h| TaskSubset::from_ids(n, h.iter().filter(|&t| t < n))).filter(|h| !h.is_empty()).collect();
        let direct = hs.iter().all(|h| p.subsets().iter().any(|b| h.is_subset(b)));
        prop_assert_eq!(check_p1(&p, &hs), direct);
    }

    #[test]
    fn separating_set_splits_exactly_one_plan((n, m, a) in assignment(), seed in prop::collection::vec(0usize..4, 8)) {
        let p = plan(n, m, &a);
        let q = plan(n, m, &seed[..n].iter().map(|&k| k % m).collect::<Vec<_>>());
        match distinguishing_h(&p, &q).unwrap() {
            None => prop_assert!(equivalent(&p, &q).unwrap()),
            Some(h) => prop_assert_ne!(check_p1(&p, &h), check_p1(&q, &h)),
        }
    }

    #[test]
    fn features_and_surrogate_agree_with_g(
        (n, m, owner) in assignment(),
        hs in prop::collection::vec(subset(8), 1..5),
        beta in prop::collection::vec(0.0f64..5.0, 5),
    ) {
        let p = plan(n, m, &owner);
        let hs: Vec<TaskSubset> = hs.iter().map(|h| TaskSubset::from_ids(n, h.iter().filter(|&t| t < n))).filter(|h| !h.is_empty()).collect();
        prop_assume!(!hs.is_empty());
        let a = build_features(std::slice::from_ref(&p), &hs).unwrap();
        let mut expected = 0.0;
        for (k, h) in hs.iter().enumerate() {
            let g = g_count(&p, h).unwrap();
            prop_assert_eq!(a.get(0, k) as usize, g);
            expected += beta[k] * g as f64;
        }
        let model = SetIndicatorModel::new(hs.clone(), beta[..hs.len()].to_vec()).unwrap();
        prop_assert!((evaluate_L(&p, &model).unwrap() - expected).abs() < 1e-9);
    }
}
