//! Instance families and their routing oracles.

pub mod cluvrp;
pub mod jobprp;
pub mod routing;

pub use cluvrp::{generate_cluvrp, ClusterMap, CluvrpParams};
pub use jobprp::{generate_jobprp, JobprpParams, WarehouseLayout};
pub use routing::{Geometry, Metric, Point, Route, RouteOracle, TourMethod, DEPOT};
