//! Runs every example's `run()`; the examples double as smoke tests.

mod bnb_solver {
    include!("../examples/bnb_solver.rs");
}
mod cli_workflow {
    include!("../examples/cli_workflow.rs");
}
mod instance_generation {
    include!("../examples/instance_generation.rs");
}
mod lasso_path {
    include!("../examples/lasso_path.rs");
}
mod routing_oracle {
    include!("../examples/routing_oracle.rs");
}
mod sampling {
    include!("../examples/sampling.rs");
}
mod self_checks {
    include!("../examples/self_checks.rs");
}
mod separation {
    include!("../examples/separation.rs");
}
mod stats_calibration {
    include!("../examples/stats_calibration.rs");
}
mod surrogate_solve {
    include!("../examples/surrogate_solve.rs");
}
mod table2_features {
    include!("../examples/table2_features.rs");
}
mod training_pipeline {
    include!("../examples/training_pipeline.rs");
}

#[test]
fn bnb_solver() {
    bnb_solver::run().unwrap();
}

#[test]
fn cli_workflow() {
    cli_workflow::run().unwrap();
}

#[test]
fn instance_generation() {
    instance_generation::run().unwrap();
}

#[test]
fn lasso_path() {
    lasso_path::run().unwrap();
}

#[test]
fn routing_oracle() {
    routing_oracle::run().unwrap();
}

#[test]
fn sampling() {
    sampling::run().unwrap();
}

#[test]
fn self_checks() {
    self_checks::run().unwrap();
}

#[test]
fn separation() {
    separation::run().unwrap();
}

#[test]
fn stats_calibration() {
    stats_calibration::run().unwrap();
}

#[test]
fn surrogate_solve() {
    surrogate_solve::run().unwrap();
}

#[test]
fn table2_features() {
    table2_features::run().unwrap();
}

#[test]
fn training_pipeline() {
    training_pipeline::run().unwrap();
}
