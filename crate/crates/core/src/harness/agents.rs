use rand::Rng;

use super::config::{ExperimentConfig, PolicyName};
use super::linear_ts::LinearTsState;
use crate::ann::{ArmIndex, ArmSet};
use crate::env::{Environment, RewardKind};
use crate::error::{Error, Result};
use crate::fastbandit::select_arm_fast;
use crate::gan::{select_arm_gan, train_gan, ActionMap, GanConfig, GanObjective, GanOptimizers, Generator};
use crate::nn::{AdamConfig, AdamState, MlpModel, OutputHead};
use crate::policy::{
    joint_input, train_reward_model, ts_draw, ucb_update, ArmScorer, CovarianceState, HistoryTriplet, UcbScorer,
};
use crate::rng::{stream_rng, Stream, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Position in the environment's arm set.
    Arm(usize),
    /// A free point in a continuous action space.
    Point(Vec<f64>),
}

/// One served request: what the agent saw, chose and received.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub context: Vec<f64>,
    pub arm: Option<usize>,
    /// Arm embedding or free action fed to the reward model.
    pub action: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServeMode {
    /// Requests one at a time, arms scored one at a time.
    Single,
    /// Arms (or requests) pushed through the network in matrix-shaped passes.
    Batch,
}

impl ServeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ServeMode::Single => "single",
            ServeMode::Batch => "batch",
        }
    }
}

pub trait Agent {
    fn policy(&self) -> PolicyName;

    /// Chooses an action for round `round` under the current snapshot.
    fn select(&mut self, context: &[f64], round: u64) -> Result<Action>;

    /// Serves several requests; round `first + i` for `contexts[i]`.
    fn select_batch(&mut self, contexts: &[Vec<f64>], first: u64) -> Result<Vec<Action>> {
        contexts
            .iter()
            .enumerate()
            .map(|(i, c)| self.select(c, first + i as u64))
            .collect()
    }

    /// Batch update: `batch` holds the observations since the previous
    /// update, `history` every triplet so far.
    fn update(&mut self, batch: &[Observation], history: &[HistoryTriplet]) -> Result<()>;

    /// Chooses how arms are scored; agents without a network ignore it.
    fn set_mode(&mut self, _mode: ServeMode) {}

    /// The published reward model, for agents that have one.
    fn snapshot(&self) -> Option<&MlpModel> {
        None
    }
}

fn round_rng(seed: u64, round: u64) -> StreamRng {
    stream_rng(seed, Stream::Selection, round)
}

/// Argmax of the policy score over all arms, ties to the lower position.
/// Batch mode scores every arm in one matrix-shaped pass.
pub fn select_exhaust(scorer: &dyn ArmScorer, context: &[f64], arms: &ArmSet, mode: ServeMode) -> Result<(usize, f64)> {
    if arms.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let scores = match mode {
        ServeMode::Batch => scorer.score_many(context, arms.data(), arms.dim())?,
        ServeMode::Single => (0..arms.len())
            .map(|i| scorer.score(context, arms.row(i)))
            .collect::<Result<_>>()?,
    };
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &s) in scores.iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best)
}

pub struct RandomAgent {
    arms: usize,
    seed: u64,
}

impl Agent for RandomAgent {
    fn policy(&self) -> PolicyName {
        PolicyName::Random
    }

    fn select(&mut self, _context: &[f64], round: u64) -> Result<Action> {
        Ok(Action::Arm(round_rng(self.seed, round).random_range(0..self.arms)))
    }

    fn update(&mut self, _batch: &[Observation], _history: &[HistoryTriplet]) -> Result<()> {
        Ok(())
    }
}

/// Plays the arm with the best observed mean reward, ignoring context.
pub struct BestArmAgent {
    sums: Vec<f64>,
    counts: Vec<u64>,
    seed: u64,
}

impl Agent for BestArmAgent {
    fn policy(&self) -> PolicyName {
        PolicyName::Bestarm
    }

    fn select(&mut self, _context: &[f64], round: u64) -> Result<Action> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&s, &c)) in self.sums.iter().zip(&self.counts).enumerate() {
            if c > 0 {
                let mean = s / c as f64;
                if best.is_none_or(|b| mean > b.1) {
                    best = Some((i, mean));
                }
            }
        }
        Ok(Action::Arm(match best {
            Some((i, _)) => i,
            None => round_rng(self.seed, round).random_range(0..self.sums.len()),
        }))
    }

    fn update(&mut self, batch: &[Observation], _history: &[HistoryTriplet]) -> Result<()> {
        for o in batch {
            if let Some(a) = o.arm {
                self.sums[a] += o.reward;
                self.counts[a] += 1;
            }
        }
        Ok(())
    }
}

pub struct LinearTsAgent {
    state: LinearTsState,
    arms: ArmSet,
    seed: u64,
}

impl Agent for LinearTsAgent {
    fn policy(&self) -> PolicyName {
        PolicyName::LinearTs
    }

    fn select(&mut self, context: &[f64], round: u64) -> Result<Action> {
        let mut rng = round_rng(self.seed, round);
        Ok(Action::Arm(self.state.select(context, &self.arms, &mut rng)?))
    }

    fn update(&mut self, batch: &[Observation], _history: &[HistoryTriplet]) -> Result<()> {
        for o in batch {
            self.state.update(&o.context, &o.action, o.reward)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Search {
    Exhaust,
    Fast,
    Gan,
}

/// Exhaust, FastBandit and GANBandit under TS or UCB. Selects uniformly at
/// random until the first batch update has trained a reward model.
pub struct NeuralAgent {
    policy: PolicyName,
    search: Search,
    ucb: bool,
    arms: ArmSet,
    index: Option<ArmIndex>,
    continuum: bool,
    model: MlpModel,
    adam: AdamState,
    cov: Option<CovarianceState>,
    gen: Option<(Generator, GanOptimizers, GanConfig)>,
    trained: bool,
    updates: u64,
    mode: ServeMode,
    cfg: ExperimentConfig,
}

impl NeuralAgent {
    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.gen.as_ref().map(|g| &g.0)
    }

    pub fn covariance(&self) -> Option<&CovarianceState> {
        self.cov.as_ref()
    }

    fn with_scorer<T>(&self, rng: &mut StreamRng, f: impl FnOnce(&dyn ArmScorer, &mut StreamRng) -> Result<T>) -> Result<T> {
        if self.ucb {
            let cov = self.cov.as_ref().expect("UCB agents carry a covariance");
            let scorer = UcbScorer::new(&self.model, cov)?;
            f(&scorer, rng)
        } else {
            let sample = ts_draw(&self.model, self.cfg.train.dropout, rng)?;
            f(&sample, rng)
        }
    }

    fn lookup(&self, id: u64) -> Result<usize> {
        let pos = id as usize;
        if pos >= self.arms.len() {
            return Err(Error::InvalidArm(pos));
        }
        Ok(pos)
    }
}

impl Agent for NeuralAgent {
    fn policy(&self) -> PolicyName {
        self.policy
    }

    fn select(&mut self, context: &[f64], round: u64) -> Result<Action> {
        let mut rng = round_rng(self.cfg.seed, round);
        if !self.trained {
            return Ok(Action::Arm(rng.random_range(0..self.arms.len())));
        }
        match self.search {
            Search::Exhaust => {
                let mode = self.mode;
                let arms = &self.arms;
                let (i, _) = self.with_scorer(&mut rng, |s, _| select_exhaust(s, context, arms, mode))?;
                Ok(Action::Arm(i))
            }
            Search::Fast => {
                let index = self.index.as_ref().expect("fast agents carry an index");
                let ascent = &self.cfg.ascent;
                let sel = self.with_scorer(&mut rng, |s, r| select_arm_fast(s, context, index, ascent, r.random()))?;
                Ok(Action::Arm(self.lookup(sel.arm_id)?))
            }
            Search::Gan => {
                let (gen, _, gcfg) = self.gen.as_ref().expect("gan agents carry a generator");
                if self.continuum {
                    let z = gen.sample_noise(&mut rng);
                    let e = gen.generate(context, &z)?;
                    return Ok(Action::Point(gcfg.action.apply(&e)));
                }
                let index = self.index.as_ref().expect("gan agents carry an index");
                let k = gcfg.top_k;
                let sel = self.with_scorer(&mut rng, |s, r| select_arm_gan(gen, s, context, index, k, r))?;
                Ok(Action::Arm(self.lookup(sel.arm_id)?))
            }
        }
    }

    fn select_batch(&mut self, contexts: &[Vec<f64>], first: u64) -> Result<Vec<Action>> {
        if self.search != Search::Gan || self.continuum || !self.trained || self.mode == ServeMode::Single {
            return contexts
                .iter()
                .enumerate()
                .map(|(i, c)| self.select(c, first + i as u64))
                .collect();
        }
        // One generator pass and one shared search scratch for all requests;
        // each request still draws its own posterior sample.
        let (gen, _, gcfg) = self.gen.as_ref().expect("gan agents carry a generator");
        let index = self.index.as_ref().expect("gan agents carry an index");
        let mut rngs: Vec<StreamRng> = (0..contexts.len()).map(|i| round_rng(self.cfg.seed, first + i as u64)).collect();
        let mut zs = Vec::with_capacity(contexts.len() * gen.noise_dim());
        for rng in rngs.iter_mut() {
            zs.extend(gen.sample_noise(rng));
        }
        let embeddings = gen.generate_batch(&contexts.concat(), &zs)?;
        let neighbors = index.query_batch(&embeddings, gcfg.top_k)?;
        let dim = self.arms.dim();
        let mut out = Vec::with_capacity(contexts.len());
        for ((ctx, nbrs), rng) in contexts.iter().zip(neighbors).zip(rngs.iter_mut()) {
            let mut ids: Vec<u64> = nbrs.iter().map(|n| n.id).collect();
            ids.sort_unstable();
            let mut cand = Vec::with_capacity(ids.len() * dim);
            for &id in &ids {
                cand.extend_from_slice(self.arms.row(self.lookup(id)?));
            }
            let scores = self.with_scorer(rng, |s, _| s.score_many(ctx, &cand, dim))?;
            let mut best = (ids[0], f64::NEG_INFINITY);
            for (&id, &s) in ids.iter().zip(&scores) {
                if s > best.1 {
                    best = (id, s);
                }
            }
            out.push(Action::Arm(self.lookup(best.0)?));
        }
        Ok(out)
    }

    fn update(&mut self, batch: &[Observation], history: &[HistoryTriplet]) -> Result<()> {
        let mut rng = stream_rng(self.cfg.seed, Stream::Training, self.updates);
        self.updates += 1;
        match &mut self.gen {
            Some((gen, opt, gcfg)) => {
                let (g, d, _) = train_gan(gen, &self.model, history, opt, gcfg, &self.cfg.train, self.cov.as_ref(), &mut rng)?;
                *gen = g;
                self.model = d;
            }
            None => {
                let (m, _) = train_reward_model(&self.model, history, &mut self.adam, &self.cfg.train, &mut rng)?;
                self.model = m;
            }
        }
        if let Some(cov) = &mut self.cov {
            for o in batch {
                let cache = self.model.forward(&joint_input(&o.context, &o.action), None)?;
                ucb_update(cov, &self.model.backward_params(&cache, &[1.0])?)?;
            }
        }
        self.trained = true;
        Ok(())
    }

    fn set_mode(&mut self, mode: ServeMode) {
        self.mode = mode;
    }

    fn snapshot(&self) -> Option<&MlpModel> {
        Some(&self.model)
    }
}

/// Builds the agent named by `cfg.policy` for `env`.
pub fn build_agent(cfg: &ExperimentConfig, env: &dyn Environment) -> Result<Box<dyn Agent>> {
    cfg.validate()?;
    let arms = env.arms().clone();
    let seed = cfg.seed;
    let search = match cfg.policy {
        PolicyName::Random => {
            return Ok(Box::new(RandomAgent {
                arms: arms.len(),
                seed,
            }))
        }
        PolicyName::Bestarm => {
            return Ok(Box::new(BestArmAgent {
                sums: vec![0.0; arms.len()],
                counts: vec![0; arms.len()],
                seed,
            }))
        }
        PolicyName::LinearTs => {
            let state = LinearTsState::new(env.context_dim() + arms.dim(), cfg.linear_ts.lambda, cfg.linear_ts.scale)?;
            return Ok(Box::new(LinearTsAgent { state, arms, seed }));
        }
        PolicyName::ExhaustTs | PolicyName::ExhaustUcb => Search::Exhaust,
        PolicyName::FastTs | PolicyName::FastUcb => Search::Fast,
        PolicyName::GanTs | PolicyName::GanUcb => Search::Gan,
    };
    Ok(Box::new(NeuralAgent::new(cfg, env, search)?))
}

impl NeuralAgent {
    fn new(cfg: &ExperimentConfig, env: &dyn Environment, search: Search) -> Result<Self> {
        let arms = env.arms().clone();
        let continuum = env.is_continuum();
        let ucb = cfg.policy.is_ucb();
        let head = match env.reward_kind() {
            RewardKind::Binary => OutputHead::Sigmoid,
            RewardKind::Real => OutputHead::Identity,
        };
        let mut dims = vec![env.context_dim() + arms.dim()];
        dims.extend_from_slice(&cfg.model.hidden);
        dims.push(1);
        let model = MlpModel::new(&dims, head, &mut stream_rng(cfg.seed, Stream::Init, 0))?;
        let cov = if ucb {
            Some(CovarianceState::for_model(&model, cfg.ucb.mode, cfg.ucb.lambda, cfg.ucb.gamma)?)
        } else {
            None
        };
        let index = if search != Search::Exhaust && !continuum {
            // Keyed by position so snapped ids index `arms` directly.
            let rows = arms.data().chunks(arms.dim()).enumerate().map(|(i, v)| (i as u64, v));
            Some(ArmIndex::build(rows, cfg.ann)?)
        } else {
            None
        };
        let gen = if search == Search::Gan {
            let mut gcfg = cfg.gan.clone();
            gcfg.objective = if ucb { GanObjective::Ucb } else { GanObjective::Ts };
            let out_dim = if continuum {
                gcfg.action = ActionMap::UnitInterval;
                2
            } else {
                arms.dim()
            };
            let g = Generator::new(
                env.context_dim(),
                gcfg.noise_dim,
                &gcfg.hidden,
                out_dim,
                &mut stream_rng(cfg.seed, Stream::Init, 1),
            )?;
            let opt = GanOptimizers::new(&g, &model, AdamConfig::default(), &gcfg);
            Some((g, opt, gcfg))
        } else {
            None
        };
        Ok(Self {
            policy: cfg.policy,
            search,
            ucb,
            arms,
            index,
            continuum,
            adam: AdamState::new(model.param_count(), AdamConfig::default()),
            model,
            cov,
            gen,
            trained: false,
            updates: 0,
            mode: ServeMode::Single,
            cfg: cfg.clone(),
        })
    }
}
