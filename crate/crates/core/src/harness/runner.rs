use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::agents::{build_agent, Action, Observation, ServeMode};
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::policy::HistoryTriplet;

pub const CSV_HEADER: &str = "t,policy,arm_id,reward,cum_reward,latency_ns,mode";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub t: u64,
    pub policy: String,
    pub arm_id: u64,
    pub reward: f64,
    pub cum_reward: f64,
    pub latency_ns: u64,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rounds: usize,
    pub cumulative_reward: f64,
    /// Sum of noiseless expected rewards of the chosen actions.
    pub cumulative_expected: f64,
    /// Sum over rounds of the oracle value minus the chosen expected reward.
    pub cumulative_regret: f64,
}

/// Runs the experiment and writes the metrics CSV to `cfg.output`, if set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            run_experiment_to(cfg, std::fs::File::create(path)?)
        }
        None => run_experiment_to(cfg, std::io::sink()),
    }
}

/// Serves `cfg.rounds` requests in batches of `cfg.batch_size`: selections
/// within a batch use a frozen snapshot, then the agent updates on what it
/// observed. Every selection is written as it happens, so a failing run
/// leaves the rows before the failure behind.
pub fn run_experiment_to<W: Write>(cfg: &ExperimentConfig, out: W) -> Result<RunSummary> {
    cfg.validate()?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let result = run_loop(cfg, &mut writer);
    writer.flush()?;
    result
}

fn run_loop<W: Write>(cfg: &ExperimentConfig, writer: &mut csv::Writer<W>) -> Result<RunSummary> {
    let mut env = cfg.environment.build(cfg.seed)?;
    let mut agent = build_agent(cfg, env.as_ref())?;
    let ids = env.arms().ids().to_vec();
    let mut history: Vec<HistoryTriplet> = Vec::with_capacity(cfg.rounds);
    let mut pending: Vec<Observation> = Vec::with_capacity(cfg.batch_size);
    let mut summary = RunSummary {
        rounds: 0,
        cumulative_reward: 0.0,
        cumulative_expected: 0.0,
        cumulative_regret: 0.0,
    };
    writer.write_record(CSV_HEADER.split(','))?;
    for t in 1..=cfg.rounds as u64 {
        let context = env.next_context()?;
        let start = Instant::now();
        let action = agent.select(&context, t)?;
        let latency_ns = if cfg.record_latency {
            start.elapsed().as_nanos() as u64
        } else {
            0
        };
        let (arm, embedding, reward, expected) = match action {
            Action::Arm(i) => {
                let reward = env.reward(i)?;
                (i, env.arms().row(i).to_vec(), reward, env.expected_reward(i)?)
            }
            Action::Point(p) => {
                let reward = env.reward_at(&p)?;
                (env.nearest_arm(&p)?, p.clone(), reward, env.expected_reward_at(&p)?)
            }
        };
        if !reward.is_finite() {
            return Err(Error::Numerical(format!("non-finite reward at round {t}")));
        }
        summary.rounds += 1;
        summary.cumulative_reward += reward;
        summary.cumulative_expected += expected;
        summary.cumulative_regret += env.optimal_value()? - expected;
        writer.serialize(MetricsRecord {
            t,
            policy: cfg.policy.to_string(),
            arm_id: ids[arm],
            reward,
            cum_reward: summary.cumulative_reward,
            latency_ns,
            mode: ServeMode::Single.as_str().into(),
        })?;
        history.push(HistoryTriplet::new(context.clone(), embedding.clone(), reward)?);
        pending.push(Observation {
            context,
            arm: Some(arm),
            action: embedding,
            reward,
        });
        if pending.len() == cfg.batch_size && t < cfg.rounds as u64 {
            agent.update(&pending, &history)?;
            pending.clear();
        }
    }
    Ok(summary)
}

pub fn write_metrics(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Format(format!("unexpected metrics header {:?}", header.join(","))));
    }
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}
