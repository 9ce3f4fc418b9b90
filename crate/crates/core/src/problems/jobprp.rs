//! Warehouse order batching with picker routing.
//!
//! Orders are tasks, trolleys are agents. An order's weight is its item
//! count and its nodes are the storage blocks holding its items. A batch is
//! priced as a closed Manhattan tour from the depot over the union of its
//! blocks.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::routing::{Geometry, Metric, Point, RouteOracle, DEFAULT_HK_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::GaprInstance;

/// Rack grid: `aisles` vertical aisles, each with `blocks_per_aisle` storage
/// blocks. The depot sits at the front of the first aisle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarehouseLayout {
    pub aisles: usize,
    pub blocks_per_aisle: usize,
    /// Horizontal distance between adjacent aisles.
    pub aisle_spacing: f64,
}

impl WarehouseLayout {
    pub fn new(aisles: usize, blocks_per_aisle: usize) -> Self {
        Self { aisles, blocks_per_aisle, aisle_spacing: 3.0 }
    }

    pub fn block_count(&self) -> usize {
        self.aisles * self.blocks_per_aisle
    }

    pub fn depot(&self) -> Point {
        Point::new(0.0, 0.0)
    }

    pub fn block_point(&self, block: usize) -> Point {
        let aisle = block / self.blocks_per_aisle;
        let depth = block % self.blocks_per_aisle;
        Point::new(aisle as f64 * self.aisle_spacing, (depth + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobprpParams {
    pub orders: usize,
    pub min_items: usize,
    pub max_items: usize,
    pub layout: WarehouseLayout,
    pub trolleys: usize,
    pub capacity: f64,
    pub seed: u64,
    pub hk_threshold: usize,
}

impl JobprpParams {
    pub fn new(orders: usize, trolleys: usize, capacity: f64, seed: u64) -> Self {
        Self {
            orders,
            min_items: 1,
            max_items: 3,
            layout: WarehouseLayout::new(4, 5),
            trolleys,
            capacity,
            seed,
            hk_threshold: DEFAULT_HK_THRESHOLD,
        }
    }
}

pub fn generate_jobprp(p: &JobprpParams) -> Result<GaprInstance> {
    if p.trolleys == 0 || p.orders < p.trolleys {
        return Err(Error::InvalidArgument(format!(
            "need orders >= trolleys >= 1, got {} orders and {} trolleys",
            p.orders, p.trolleys
        )));
    }
    if p.min_items == 0 || p.min_items > p.max_items {
        return Err(Error::InvalidArgument(format!(
            "bad order size range {}..={}",
            p.min_items, p.max_items
        )));
    }
    if p.max_items > p.layout.block_count() {
        return Err(Error::InvalidArgument(format!(
            "orders of {} items do not fit {} blocks",
            p.max_items,
            p.layout.block_count()
        )));
    }
    if p.capacity < p.max_items as f64 {
        return Err(Error::InvalidArgument(format!(
            "capacity {} below the largest order size {}",
            p.capacity, p.max_items
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let blocks = p.layout.block_count();
    let mut weights = Vec::with_capacity(p.orders);
    let mut task_nodes = Vec::with_capacity(p.orders);
    for _ in 0..p.orders {
        let size = rng.random_range(p.min_items..=p.max_items);
        let mut picks = sample(&mut rng, blocks, size).into_vec();
        picks.sort_unstable();
        weights.push(size as f64);
        task_nodes.push(picks);
    }
    let geometry = Geometry {
        metric: Metric::Manhattan,
        depot: p.layout.depot(),
        nodes: (0..blocks).map(|b| p.layout.block_point(b)).collect(),
        task_nodes,
    };
    let oracle = Arc::new(RouteOracle::new(geometry, p.hk_threshold)?);
    GaprInstance::new(weights, p.trolleys, p.capacity, false, oracle)
}
