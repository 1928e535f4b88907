//! Scenario files, seeded experiments and CSV output for the cache contract
//! mechanism in `scn-cache-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod generate;
pub mod output;

pub use config::{ChannelConfig, ScenarioConfig};
pub use error::{Result, SimError};
pub use experiments::{
    choose_solver, run_baseline_comparison, run_design, run_misreport_sweep, run_scaling_study,
    run_verify, SolverChoice,
};
pub use generate::{build_scenario, load_scenario, LoadedScenario};
