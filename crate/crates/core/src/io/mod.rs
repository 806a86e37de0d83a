//! Scenario configs, CSV/JSON files and the seeded end-to-end pipeline.

pub mod config;
pub mod pipeline;
pub mod table;

pub use config::{ScenarioConfig, SamplerConfig};
pub use pipeline::{diagnose_to_dir, fit_to_dir, observe, run_scenario, scenario, simulate, SCENARIOS};
pub use table::Table;
