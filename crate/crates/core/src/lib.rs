//! Dynamic load planning for parcel terminals: how many trailers to run on
//! each outbound sort pair, and how to split commodity volume across them.
//!
//! The crate covers exact optimization ([`formulations`]), a greedy
//! baseline ([`greedy`]), a learned proxy with feasibility restoration
//! ([`proxy`], [`restoration`]), dataset generation ([`datagen`]),
//! evaluation metrics ([`metrics`]) and brute-force reference solvers
//! ([`oracles`]).

pub mod datagen;
pub mod error;
pub mod fixtures;
pub mod flows;
pub mod formulations;
pub mod greedy;
pub mod metrics;
pub mod network;
pub mod oracles;
pub mod plan;
pub mod proxy;
pub mod restoration;
pub mod runner;

pub use error::{Error, Result};
pub use formulations::{
    build_model1, build_model2, build_model2_weighted, polish_toward_reference, solve_gdo, solve_model1, GdoResult,
    Model1Result, StageLimits, VariableIndexMap,
};
pub use network::{
    diversion_cost, epsilon_weight, load_instance, parse_instance, restrict_scenario, Instance,
    InstanceFormat, Scenario,
};
pub use metrics::Method;
pub use plan::{LoadPlan, PlanViolation};
pub use runner::{run_method, MethodOutcome};
