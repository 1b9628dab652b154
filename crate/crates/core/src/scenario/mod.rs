//! Scenario configuration, the discrete-event runner that drives the NCP
//! machines over the simulated orderwire, metrics extraction and golden
//! log comparison.
//!
//! A run writes three files: `transitions.log` (one FSM transition per
//! line, interleaved with rollback, PNNI signaling, fault and diagnosis
//! records), `metrics.csv` and `summary.txt`.

mod config;
mod golden;
mod metrics;
mod runner;

pub use config::{
    load_config, parse_config, serialize_config, ConfigError, ScenarioConfig, REQUIRED_KEYS,
    SECTIONS,
};
pub use golden::{compare_golden, DiffReport, Divergence, OTHER_STREAM};
pub use metrics::{RunMetrics, CSV_HEADER, CSV_SCALARS, CSV_SERIES};
pub use runner::{
    run_batch, run_scenario, run_with_layout, Delivery, Diagnosis, Layout, RunError, RunOutput,
    MAX_TX_JITTER_MS, P2P_SPACING,
};
