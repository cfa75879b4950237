//! Experiment runner: baselines, the batch-update loop, metrics CSV and
//! latency measurement.

mod agents;
mod config;
mod latency;
mod linear_ts;
mod runner;

pub use agents::{
    build_agent, select_exhaust, Action, Agent, BestArmAgent, LinearTsAgent, NeuralAgent, Observation, RandomAgent,
    ServeMode,
};
pub use config::{EnvSpec, ExperimentConfig, LinearTsConfig, ModelConfig, PolicyName, UcbConfig};
pub use latency::{measure_latency, trained_agent, LatencySummary, WARMUP_REQUESTS};
pub use linear_ts::LinearTsState;
pub use runner::{read_metrics, run_experiment, run_experiment_to, write_metrics, MetricsRecord, RunSummary, CSV_HEADER};
