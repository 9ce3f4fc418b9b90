//! Closed-tour routing costs for agent task sets.
//!
//! A [`RouteOracle`] maps a set of tasks to the length of a closed tour that
//! starts and ends at the depot and visits every node of those tasks. Node
//! sets up to `hk_threshold` are solved exactly by Held-Karp; larger ones use
//! nearest-neighbour construction followed by 2-opt. Results are memoised per
//! node set and the cache may be shared across threads.

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::bitset::{NodeSet, TaskSubset};
use crate::error::{Error, Result};

/// Sentinel id for the depot inside a tour.
pub const DEPOT: usize = usize::MAX;

pub const DEFAULT_HK_THRESHOLD: usize = 14;

// 2^20 * 20 states is the most we let Held-Karp allocate.
const HK_HARD_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Manhattan,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: Point, b: Point) -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        match self {
            Metric::Manhattan => dx.abs() + dy.abs(),
            Metric::Euclidean => (dx * dx + dy * dy).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Node locations plus the task-to-node incidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub metric: Metric,
    pub depot: Point,
    pub nodes: Vec<Point>,
    /// For each task, the node ids the visiting agent must reach.
    pub task_nodes: Vec<Vec<usize>>,
}

impl Geometry {
    /// Geometry with no nodes at all: every route costs zero.
    pub fn empty(tasks: usize) -> Self {
        Self {
            metric: Metric::Euclidean,
            depot: Point::new(0.0, 0.0),
            nodes: Vec::new(),
            task_nodes: vec![Vec::new(); tasks],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub cost: f64,
    /// Visit order starting with [`DEPOT`]; the return leg is implied.
    pub tour: Vec<usize>,
    /// True when `cost` is the optimal closed-tour length.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TourMethod {
    HeldKarp,
    TwoOpt,
}

#[derive(Debug)]
pub struct RouteOracle {
    geometry: Geometry,
    hk_threshold: usize,
    // Row/column 0 is the depot, node v sits at v + 1.
    dist: Vec<f64>,
    cache: DashMap<NodeSet, Route>,
}

impl RouteOracle {
    pub fn new(geometry: Geometry, hk_threshold: usize) -> Result<Self> {
        let n = geometry.nodes.len();
        for (t, nodes) in geometry.task_nodes.iter().enumerate() {
            if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
                return Err(Error::Routing(format!("task {t} references unknown node {bad}")));
            }
        }
        let pts: Vec<Point> = std::iter::once(geometry.depot)
            .chain(geometry.nodes.iter().copied())
            .collect();
        if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Routing("non-finite coordinate".into()));
        }
        let m = pts.len();
        let mut dist = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                dist[a * m + b] = geometry.metric.distance(pts[a], pts[b]);
            }
        }
        Ok(Self {
            geometry,
            hk_threshold: hk_threshold.min(HK_HARD_LIMIT),
            dist,
            cache: DashMap::new(),
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn hk_threshold(&self) -> usize {
        self.hk_threshold
    }

    pub fn node_count(&self) -> usize {
        self.geometry.nodes.len()
    }

    pub fn task_count(&self) -> usize {
        self.geometry.task_nodes.len()
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }

    /// Distance between two node ids, either of which may be [`DEPOT`].
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let m = self.geometry.nodes.len() + 1;
        self.dist[Self::slot(a) * m + Self::slot(b)]
    }

    fn slot(v: usize) -> usize {
        if v == DEPOT {
            0
        } else {
            v + 1
        }
    }

    /// Union of the nodes required by the given tasks.
    pub fn nodes_for_tasks(&self, tasks: &TaskSubset) -> Result<NodeSet> {
        let mut nodes = NodeSet::empty(self.node_count());
        for t in tasks.iter() {
            let list = self
                .geometry
                .task_nodes
                .get(t)
                .ok_or_else(|| Error::Routing(format!("unknown task {t}")))?;
            for &v in list {
                nodes.insert(v);
            }
        }
        Ok(nodes)
    }

    pub fn route_for_tasks(&self, tasks: &TaskSubset) -> Result<Route> {
        let nodes = self.nodes_for_tasks(tasks)?;
        self.route_cost(&nodes)
    }

    /// Cached closed-tour cost over `nodes`.
    pub fn route_cost(&self, nodes: &NodeSet) -> Result<Route> {
        if nodes.universe() != self.node_count() {
            return Err(Error::Routing(format!(
                "node set over {} ids, oracle has {}",
                nodes.universe(),
                self.node_count()
            )));
        }
        if let Some(hit) = self.cache.get(nodes) {
            return Ok(hit.clone());
        }
        let method = if nodes.len() <= self.hk_threshold {
            TourMethod::HeldKarp
        } else {
            TourMethod::TwoOpt
        };
        let route = self.solve(nodes, method)?;
        // Concurrent writers compute identical values, so overwriting is harmless.
        self.cache.insert(nodes.clone(), route.clone());
        Ok(route)
    }

    /// Uncached solve with an explicit method.
    pub fn solve(&self, nodes: &NodeSet, method: TourMethod) -> Result<Route> {
        let ids = nodes.to_vec();
        if let Some(&bad) = ids.iter().find(|&&v| v >= self.node_count()) {
            return Err(Error::Routing(format!("unknown node {bad}")));
        }
        if ids.is_empty() {
            return Ok(Route { cost: 0.0, tour: vec![DEPOT], exact: true });
        }
        let (tour, exact) = match method {
            TourMethod::HeldKarp => {
                if ids.len() > HK_HARD_LIMIT {
                    return Err(Error::Routing(format!(
                        "{} nodes exceed the Held-Karp limit {HK_HARD_LIMIT}",
                        ids.len()
                    )));
                }
                (self.held_karp(&ids), true)
            }
            TourMethod::TwoOpt => {
                let tour = self.two_opt(self.nearest_neighbour(&ids));
                // Up to three nodes every closed tour has the same length.
                (tour, ids.len() <= 3)
            }
        };
        Ok(Route { cost: self.tour_length(&tour), tour, exact })
    }

    /// Length of the closed tour, summed in visiting order.
    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        let mut total = 0.0;
        for w in tour.windows(2) {
            total += self.distance(w[0], w[1]);
        }
        if let (Some(&first), Some(&last)) = (tour.first(), tour.last()) {
            total += self.distance(last, first);
        }
        total
    }

    fn held_karp(&self, ids: &[usize]) -> Vec<usize> {
        let n = ids.len();
        let full = (1usize << n) - 1;
        let mut cost = vec![f64::INFINITY; (1 << n) * n];
        let mut parent = vec![u8::MAX; (1 << n) * n];
        for (k, &v) in ids.iter().enumerate() {
            cost[(1 << k) * n + k] = self.distance(DEPOT, v);
        }
        for mask in 1..=full {
            for last in 0..n {
                if mask & (1 << last) == 0 {
                    continue;
                }
                let here = cost[mask * n + last];
                if !here.is_finite() {
                    continue;
                }
                for next in 0..n {
                    if mask & (1 << next) != 0 {
                        continue;
                    }
                    let nmask = mask | (1 << next);
                    let cand = here + self.distance(ids[last], ids[next]);
                    let slot = nmask * n + next;
                    if cand < cost[slot] {
                        cost[slot] = cand;
                        parent[slot] = last as u8;
                    }
                }
            }
        }
        let mut best_last = 0;
        let mut best = f64::INFINITY;
        for last in 0..n {
            let c = cost[full * n + last] + self.distance(ids[last], DEPOT);
            if c < best {
                best = c;
                best_last = last;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut mask = full;
        let mut cur = best_last;
        loop {
            order.push(ids[cur]);
            let p = parent[mask * n + cur];
            mask &= !(1 << cur);
            if p == u8::MAX {
                break;
            }
            cur = p as usize;
        }
        order.push(DEPOT);
        order.reverse();
        order
    }

    fn nearest_neighbour(&self, ids: &[usize]) -> Vec<usize> {
        let mut left: Vec<usize> = ids.to_vec();
        let mut tour = vec![DEPOT];
        let mut cur = DEPOT;
        while !left.is_empty() {
            let mut pick = 0;
            for k in 1..left.len() {
                if self.distance(cur, left[k]) < self.distance(cur, left[pick]) {
                    pick = k;
                }
            }
            cur = left.remove(pick);
            tour.push(cur);
        }
        tour
    }

    fn two_opt(&self, mut tour: Vec<usize>) -> Vec<usize> {
        let len = tour.len();
        if len < 4 {
            return tour;
        }
        loop {
            let mut improved = false;
            for i in 0..len - 2 {
                for j in i + 2..len {
                    if i == 0 && j == len - 1 {
                        continue;
                    }
                    let (a, b) = (tour[i], tour[i + 1]);
                    let (c, d) = (tour[j], tour[(j + 1) % len]);
                    let delta = self.distance(a, c) + self.distance(b, d)
                        - self.distance(a, b)
                        - self.distance(c, d);
                    if delta < -1e-10 {
                        tour[i + 1..=j].reverse();
                        improved = true;
                    }
                }
            }
            if !improved {
                return tour;
            }
        }
    }
}
