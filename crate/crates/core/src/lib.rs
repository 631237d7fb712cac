//! Misinformation containment on opinion networks: simulation, exact and
//! heuristic blocker selection, and graph-network planners trained by
//! supervised imitation or value learning.

pub mod dynamics;
pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod neural;
pub mod oracle;
pub mod planners;
pub mod rng;
pub mod scenario_io;
pub mod template;
pub mod training;

pub use dynamics::{default_max_steps, run_episode, step, DynamicsConfig, StepOutcome, Trajectory};
pub use error::{Error, ErrorKind, Result};
pub use graph::{
    generate_network, init_state, Case, InitParams, Network, NetworkState, Propagation, Scenario,
    Status, Topology, TrustModel,
};
pub use neural::{GcnModel, Head};
pub use planners::{Planner, PlannerKind, StandardPlanner};
pub use template::{InfectedCount, ScenarioTemplate};
pub use training::RewardKind;
