use std::time::Instant;

use rand::Rng;

use super::agents::{build_agent, Action, Agent, Observation, ServeMode};
use super::config::ExperimentConfig;
use super::runner::MetricsRecord;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::HistoryTriplet;
use crate::rng::{stream_rng, Stream};

/// Requests served before timing starts.
pub const WARMUP_REQUESTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LatencySummary {
    pub policy: String,
    pub mode: ServeMode,
    pub requests: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
}

/// An agent of `cfg.policy` after one batch update on `cfg.batch_size`
/// uniformly random interactions with `env`.
pub fn trained_agent(cfg: &ExperimentConfig, env: &mut dyn Environment) -> Result<Box<dyn Agent>> {
    let mut agent = build_agent(cfg, env)?;
    let mut rng = stream_rng(cfg.seed, Stream::Baseline, 0);
    let mut history = Vec::with_capacity(cfg.batch_size);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let context = env.next_context()?;
        let arm = rng.random_range(0..env.arms().len());
        let reward = env.reward(arm)?;
        let action = env.arms().row(arm).to_vec();
        history.push(HistoryTriplet::new(context.clone(), action.clone(), reward)?);
        batch.push(Observation {
            context,
            arm: Some(arm),
            action,
            reward,
        });
    }
    agent.update(&batch, &history)?;
    Ok(agent)
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Wall-clock per-selection latency over `n_requests` sequential requests
/// after a trained snapshot is in place. Single mode times each request;
/// batch mode times one call serving all requests and reports the per-request
/// share. Returned rows carry latency only (reward columns are zero).
pub fn measure_latency(
    cfg: &ExperimentConfig,
    mode: ServeMode,
    n_requests: usize,
) -> Result<(LatencySummary, Vec<MetricsRecord>)> {
    if n_requests == 0 {
        return Err(Error::Config("n_requests must be >= 1".into()));
    }
    let mut env = cfg.environment.build(cfg.seed)?;
    let mut agent = trained_agent(cfg, env.as_mut())?;
    agent.set_mode(mode);
    let mut contexts = Vec::with_capacity(WARMUP_REQUESTS + n_requests);
    for _ in 0..WARMUP_REQUESTS + n_requests {
        contexts.push(env.next_context()?);
    }
    let (warm, timed) = contexts.split_at(WARMUP_REQUESTS);
    let first = cfg.batch_size as u64 + 1;
    let (latencies, actions): (Vec<u64>, Vec<Action>) = match mode {
        ServeMode::Single => {
            for (i, c) in warm.iter().enumerate() {
                agent.select(c, first + i as u64)?;
            }
            let mut lat = Vec::with_capacity(n_requests);
            let mut acts = Vec::with_capacity(n_requests);
            for (i, c) in timed.iter().enumerate() {
                let start = Instant::now();
                let a = agent.select(c, first + (WARMUP_REQUESTS + i) as u64)?;
                lat.push(start.elapsed().as_nanos() as u64);
                acts.push(a);
            }
            (lat, acts)
        }
        ServeMode::Batch => {
            agent.select_batch(warm, first)?;
            let start = Instant::now();
            let acts = agent.select_batch(timed, first + WARMUP_REQUESTS as u64)?;
            let share = start.elapsed().as_nanos() as u64 / n_requests as u64;
            (vec![share; n_requests], acts)
        }
    };
    let ids = env.arms().ids();
    let records = latencies
        .iter()
        .zip(&actions)
        .enumerate()
        .map(|(i, (&ns, a))| {
            let arm = match a {
                Action::Arm(p) => Ok(*p),
                Action::Point(p) => env.nearest_arm(p),
            }?;
            Ok(MetricsRecord {
                t: i as u64 + 1,
                policy: cfg.policy.to_string(),
                arm_id: ids[arm],
                reward: 0.0,
                cum_reward: 0.0,
                latency_ns: ns,
                mode: mode.as_str().into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = latencies.clone();
    sorted.sort_unstable();
    let summary = LatencySummary {
        policy: cfg.policy.to_string(),
        mode,
        requests: n_requests,
        mean_ns: latencies.iter().sum::<u64>() as f64 / n_requests as f64,
        p50_ns: percentile(&sorted, 0.5),
        p99_ns: percentile(&sorted, 0.99),
    };
    Ok((summary, records))
}
