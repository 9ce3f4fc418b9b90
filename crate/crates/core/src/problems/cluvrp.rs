//! Soft-clustered vehicle routing.
//!
//! Customers are grouped into clusters and a cluster must be served by a
//! single vehicle, but a route may interleave customers of different
//! clusters. Clusters are the tasks; a vehicle's cost is the closed Euclidean
//! tour over the customers of all clusters it serves.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::routing::{Geometry, Metric, Point, RouteOracle, DEFAULT_HK_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::GaprInstance;

const PLANE: f64 = 100.0;
const CLUSTER_SPREAD: f64 = 8.0;
const MAX_DEMAND: u32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub depot: Point,
    pub customers: Vec<Point>,
    pub clusters: Vec<Vec<usize>>,
    pub demands: Vec<f64>,
}

impl ClusterMap {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            metric: Metric::Euclidean,
            depot: self.depot,
            nodes: self.customers.clone(),
            task_nodes: self.clusters.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CluvrpParams {
    pub clusters: usize,
    pub customers: usize,
    pub vehicles: usize,
    pub capacity: f64,
    pub seed: u64,
    pub hk_threshold: usize,
}

impl CluvrpParams {
    pub fn new(clusters: usize, customers: usize, vehicles: usize, capacity: f64, seed: u64) -> Self {
        Self { clusters, customers, vehicles, capacity, seed, hk_threshold: DEFAULT_HK_THRESHOLD }
    }
}

/// Draws cluster centres uniformly, scatters customers around them and gives
/// each customer an integer demand in `1..=5`.
pub fn cluster_map(p: &CluvrpParams) -> Result<ClusterMap> {
    if p.vehicles == 0 || p.clusters < p.vehicles {
        return Err(Error::InvalidArgument(format!(
            "need clusters >= vehicles >= 1, got {} clusters and {} vehicles",
            p.clusters, p.vehicles
        )));
    }
    if p.customers < p.clusters {
        return Err(Error::InvalidArgument(format!(
            "{} customers cannot fill {} clusters",
            p.customers, p.clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let centres: Vec<Point> = (0..p.clusters)
        .map(|_| {
            Point::new(
                rng.random_range(CLUSTER_SPREAD..PLANE - CLUSTER_SPREAD),
                rng.random_range(CLUSTER_SPREAD..PLANE - CLUSTER_SPREAD),
            )
        })
        .collect();
    let mut clusters = vec![Vec::new(); p.clusters];
    let mut customers = Vec::with_capacity(p.customers);
    let mut demands = vec![0.0; p.clusters];
    for c in 0..p.customers {
        let k = if c < p.clusters { c } else { rng.random_range(0..p.clusters) };
        let centre = centres[k];
        customers.push(Point::new(
            centre.x + rng.random_range(-CLUSTER_SPREAD..CLUSTER_SPREAD),
            centre.y + rng.random_range(-CLUSTER_SPREAD..CLUSTER_SPREAD),
        ));
        clusters[k].push(c);
        demands[k] += f64::from(rng.random_range(1..=MAX_DEMAND));
    }
    Ok(ClusterMap { depot: Point::new(PLANE / 2.0, PLANE / 2.0), customers, clusters, demands })
}

pub fn generate_cluvrp(p: &CluvrpParams) -> Result<GaprInstance> {
    let map = cluster_map(p)?;
    let oracle = Arc::new(RouteOracle::new(map.geometry(), p.hk_threshold)?);
    GaprInstance::new(map.demands, p.vehicles, p.capacity, false, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset::NodeSet;
    use crate::model::{f_obj, AssignmentPlan};
    use crate::problems::routing::DEPOT;

    #[test]
    fn counts_and_determinism() {
        let p = CluvrpParams::new(14, 60, 3, 200.0, 1);
        let a = generate_cluvrp(&p).unwrap();
        assert_eq!(a.task_count(), 14);
        assert_eq!(a.agent_count(), 3);
        let b = generate_cluvrp(&p).unwrap();
        assert_eq!(a.oracle().geometry(), b.oracle().geometry());
        let map = cluster_map(&p).unwrap();
        let mut all: Vec<usize> = map.clusters.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
        assert!(map.demands.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn infeasible_capacity() {
        assert!(matches!(
            generate_cluvrp(&CluvrpParams::new(14, 60, 3, 10.0, 1)),
            Err(Error::InvalidInstance(_))
        ));
        assert!(generate_cluvrp(&CluvrpParams::new(2, 60, 3, 500.0, 1)).is_err());
        assert!(generate_cluvrp(&CluvrpParams::new(6, 4, 3, 500.0, 1)).is_err());
    }

    // Cluster tour from the oracle versus permutation enumeration.
    #[test]
    fn single_cluster_route_is_an_exact_tsp() {
        let p = CluvrpParams::new(8, 40, 2, 500.0, 5);
        let inst = generate_cluvrp(&p).unwrap();
        let geo = inst.oracle().geometry().clone();
        for (k, members) in geo.task_nodes.iter().enumerate() {
            if members.len() > 8 {
                continue;
            }
            let mut lists = vec![vec![], (0..8).filter(|&c| c != k).collect::<Vec<_>>()];
            lists[0].push(k);
            let plan = AssignmentPlan::from_lists(8, &lists).unwrap();
            let v = f_obj(&plan, &inst).unwrap();
            let o = inst.oracle();
            let mut best = f64::INFINITY;
            permute(members.clone(), 0, &mut |perm| {
                let mut t = vec![DEPOT];
                t.extend_from_slice(perm);
                best = best.min(o.tour_length(&t));
            });
            assert!((v.routes[0].cost - best).abs() < 1e-9);
            let direct = o
                .route_cost(&NodeSet::from_ids(geo.nodes.len(), members.iter().copied()))
                .unwrap();
            assert_eq!(direct.cost, v.routes[0].cost);
        }
    }

    fn permute(mut v: Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == v.len() {
            f(&v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v.clone(), k + 1, f);
            v.swap(k, i);
        }
    }
}
