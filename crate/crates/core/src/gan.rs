//! A generator trained against the reward model so one forward pass emits a
//! near-optimal arm embedding for a context.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ann::ArmIndex;
use crate::error::{check_dim, Error, Result};
use crate::fastbandit::{best_of, Selection};
use crate::nn::io::{read_container, read_u64, write_container, PayloadWriter, Section};
use crate::nn::{AdamConfig, AdamState, MlpModel, OutputHead, PROB_EPSILON};
use crate::policy::{
    dataset_loss, reward_model_step, ts_draw, ArmScorer, CovarianceState, HistoryTriplet, TrainConfig, UcbScorer,
};

pub const GENB_TAG: &[u8; 4] = b"GENB";

/// Maps `concat(context, z)` to a unit-norm arm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    net: MlpModel,
    context_dim: usize,
    noise_dim: usize,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(
        context_dim: usize,
        noise_dim: usize,
        hidden: &[usize],
        arm_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![context_dim + noise_dim];
        dims.extend_from_slice(hidden);
        dims.push(arm_dim);
        Self::from_model(MlpModel::new(&dims, OutputHead::Identity, rng)?, context_dim, noise_dim)
    }

    pub fn from_model(net: MlpModel, context_dim: usize, noise_dim: usize) -> Result<Self> {
        check_dim("generator input", context_dim + noise_dim, net.input_dim())?;
        if net.head() != OutputHead::Identity {
            return Err(Error::Contract("generator needs an identity head".into()));
        }
        Ok(Self {
            net,
            context_dim,
            noise_dim,
        })
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn arm_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.noise_dim).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn input(&self, context: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        check_dim("generator context", self.context_dim, context.len())?;
        check_dim("generator noise", self.noise_dim, z.len())?;
        let mut x = Vec::with_capacity(self.context_dim + self.noise_dim);
        x.extend_from_slice(context);
        x.extend_from_slice(z);
        Ok(x)
    }

    /// Unit-norm embedding; a zero pre-output maps to `e_0`.
    pub fn generate(&self, context: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.net.predict(&self.input(context, z)?, None)?;
        unit_or_e0(&mut y);
        Ok(y)
    }

    /// Row-major contexts and noises in one matrix-shaped pass.
    pub fn generate_batch(&self, contexts: &[f64], zs: &[f64]) -> Result<Vec<f64>> {
        let rows = contexts.len() / self.context_dim.max(1);
        check_dim("generator contexts", rows * self.context_dim, contexts.len())?;
        check_dim("generator noise", rows * self.noise_dim, zs.len())?;
        let mut inputs = Vec::with_capacity(rows * self.net.input_dim());
        for r in 0..rows {
            inputs.extend_from_slice(&contexts[r * self.context_dim..(r + 1) * self.context_dim]);
            inputs.extend_from_slice(&zs[r * self.noise_dim..(r + 1) * self.noise_dim]);
        }
        let mut out = self.net.forward_batch(&inputs, None)?;
        for row in out.chunks_mut(self.arm_dim()) {
            unit_or_e0(row);
        }
        Ok(out)
    }

    pub fn to_section(&self) -> Result<Section> {
        let mut w = PayloadWriter::default();
        w.u64(self.context_dim as u64).u64(self.noise_dim as u64);
        let mut section = w.finish(GENB_TAG);
        write_container(&mut section.payload, &self.net, &[])?;
        Ok(section)
    }

    pub fn from_section(section: &Section) -> Result<Self> {
        if &section.tag != GENB_TAG {
            return Err(Error::Format("not a GENB section".into()));
        }
        let r = &mut section.payload.as_slice();
        let context_dim = read_u64(r)? as usize;
        let noise_dim = read_u64(r)? as usize;
        let (net, _) = read_container(r)?;
        Self::from_model(net, context_dim, noise_dim)
    }
}

fn unit_or_e0(y: &mut [f64]) {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        y.iter_mut().for_each(|v| *v /= norm);
    } else {
        y.iter_mut().enumerate().for_each(|(i, v)| *v = if i == 0 { 1.0 } else { 0.0 });
    }
}

/// How a generated unit vector becomes the action the critic scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMap {
    /// The embedding is the arm.
    #[default]
    Embedding,
    /// Angle of `(e0, e1)` rescaled onto `[0, 1]`. The affine map `(e0 + 1) / 2`
    /// has zero gradient at both ends, where the generator tends to stall.
    UnitInterval,
}

impl ActionMap {
    pub fn apply(self, embedding: &[f64]) -> Vec<f64> {
        match self {
            ActionMap::Embedding => embedding.to_vec(),
            ActionMap::UnitInterval => vec![unit_interval(embedding)],
        }
    }

    /// Pulls an action gradient back to the embedding.
    fn pull_back(self, embedding: &[f64], grad: &[f64]) -> Vec<f64> {
        match self {
            ActionMap::Embedding => grad.to_vec(),
            ActionMap::UnitInterval => {
                let (x, y) = (embedding[0], embedding[1]);
                let r2 = (x * x + y * y).max(f64::MIN_POSITIVE);
                let c = grad[0] / (2.0 * std::f64::consts::PI * r2);
                let mut g = vec![0.0; embedding.len()];
                g[0] = -y * c;
                g[1] = x * c;
                g
            }
        }
    }
}

/// `(atan2(e1, e0) / pi + 1) / 2`; needs at least two coordinates.
pub fn unit_interval(e: &[f64]) -> f64 {
    ((e[1].atan2(e[0]) / std::f64::consts::PI + 1.0) * 0.5).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GanObjective {
    Ts,
    Ucb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    /// Outer alternations; each runs `k_d` critic and `k_g` generator steps.
    pub iterations: usize,
    pub k_d: usize,
    pub k_g: usize,
    pub minibatch: usize,
    pub non_saturating: bool,
    pub objective: GanObjective,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Nearest arms scored after snapping a generated embedding.
    pub top_k: usize,
    pub action: ActionMap,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            k_d: 1,
            k_g: 3,
            minibatch: 64,
            non_saturating: true,
            objective: GanObjective::Ts,
            noise_dim: 4,
            hidden: vec![8, 8],
            learning_rate: 1e-3,
            top_k: 3,
            action: ActionMap::Embedding,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_d == 0 || self.k_g == 0 {
            return Err(Error::Config(format!(
                "k_d and k_g must be >= 1, got {} and {}",
                self.k_d, self.k_g
            )));
        }
        if self.minibatch == 0 || self.top_k == 0 {
            return Err(Error::Config("GAN minibatch and top_k must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad generator learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Adapts a critic over actions to one over generator embeddings.
struct MappedCritic<'a> {
    inner: &'a dyn ArmScorer,
    map: ActionMap,
}

impl ArmScorer for MappedCritic<'_> {
    fn score(&self, context: &[f64], arm: &[f64]) -> Result<f64> {
        self.inner.score(context, &self.map.apply(arm))
    }

    fn score_with_arm_grad(&self, context: &[f64], arm: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.inner.score_with_arm_grad(context, &self.map.apply(arm))?;
        Ok((v, self.map.pull_back(arm, &g)))
    }

    fn is_probability(&self) -> bool {
        self.inner.is_probability()
    }
}

/// One Adam step on the generator against a frozen critic. Each sample draws
/// a context from `contexts` and fresh noise. For probability critics the
/// loss is `-ln D` (non-saturating) or `ln(1 - D)`; otherwise `-D`. Returns
/// the mean critic score of the minibatch.
#[allow(clippy::too_many_arguments)]
pub fn generator_step<R: Rng + ?Sized>(
    gen: &mut Generator,
    adam: &mut AdamState,
    critic: &dyn ArmScorer,
    contexts: &[&[f64]],
    minibatch: usize,
    non_saturating: bool,
    action: ActionMap,
    rng: &mut R,
) -> Result<f64> {
    if contexts.is_empty() {
        return Err(Error::Contract("generator step without contexts".into()));
    }
    let critic = MappedCritic { inner: critic, map: action };
    let probability = critic.is_probability();
    let size = minibatch.max(1);
    let mut grad = vec![0.0; gen.net.param_count()];
    let mut total = 0.0;
    for _ in 0..size {
        let ctx = contexts[rng.random_range(0..contexts.len())];
        let z = gen.sample_noise(rng);
        let cache = gen.net.forward(&gen.input(ctx, &z)?, None)?;
        let y = cache.output();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            continue;
        }
        let a: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let (d, dd_da) = critic.score_with_arm_grad(ctx, &a)?;
        total += d;
        let dl_dd = if !probability {
            -1.0
        } else if non_saturating {
            -1.0 / d.max(PROB_EPSILON)
        } else {
            -1.0 / (1.0 - d).max(PROB_EPSILON)
        };
        let dl_da: Vec<f64> = dd_da.iter().map(|g| dl_dd * g).collect();
        let radial: f64 = a.iter().zip(&dl_da).map(|(u, g)| u * g).sum();
        let dl_dy: Vec<f64> = dl_da
            .iter()
            .zip(&a)
            .map(|(g, u)| (g - u * radial) / norm / size as f64)
            .collect();
        gen.net.accumulate_param_grad(&cache, &dl_dy, &mut grad)?;
    }
    let mean = total / size as f64;
    if !mean.is_finite() {
        return Err(Error::Training(format!("generator critic score diverged to {mean}")));
    }
    let mut params = gen.net.params();
    adam.step(&mut params, &grad)?;
    gen.net
        .set_params(&params)
        .map_err(|e| Error::Training(format!("generator: {e}")))?;
    Ok(mean)
}

/// Optimizer state carried across batch updates.
#[derive(Debug, Clone)]
pub struct GanOptimizers {
    pub disc: AdamState,
    pub gen: AdamState,
}

impl GanOptimizers {
    pub fn new(gen: &Generator, disc: &MlpModel, disc_cfg: AdamConfig, gan: &GanConfig) -> Self {
        Self {
            disc: AdamState::new(disc.param_count(), disc_cfg),
            gen: AdamState::new(gen.net.param_count(), gan.adam()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanReport {
    pub disc_loss_before: f64,
    pub disc_loss_after: f64,
    /// Mean critic score over the last generator step.
    pub final_gen_score: f64,
}

/// Alternates `k_d` reward-model steps on observed triplets with `k_g`
/// generator steps against the current critic. In TS mode every generator
/// step scores under a fresh dropout draw; in UCB mode the critic is the
/// optimistic objective with `cov` held fixed. Returns new snapshots.
#[allow(clippy::too_many_arguments)]
pub fn train_gan<R: Rng + ?Sized>(
    gen: &Generator,
    disc: &MlpModel,
    batch: &[HistoryTriplet],
    opt: &mut GanOptimizers,
    cfg: &GanConfig,
    train: &TrainConfig,
    cov: Option<&CovarianceState>,
    rng: &mut R,
) -> Result<(Generator, MlpModel, GanReport)> {
    cfg.validate()?;
    if cfg.objective == GanObjective::Ucb && cov.is_none() {
        return Err(Error::Contract("UCB generator training needs a covariance".into()));
    }
    let disc_loss_before = dataset_loss(disc, batch)?;
    let contexts: Vec<&[f64]> = batch.iter().map(|t| t.context.as_slice()).collect();
    let mut gen = gen.clone();
    let mut disc = disc.clone();
    let mut final_gen_score = f64::NAN;
    let disc_cfg = TrainConfig {
        minibatch: cfg.minibatch,
        ..*train
    };
    for _ in 0..cfg.iterations {
        for _ in 0..cfg.k_d {
            reward_model_step(&mut disc, batch, &mut opt.disc, &disc_cfg, rng)?;
        }
        for _ in 0..cfg.k_g {
            final_gen_score = match cfg.objective {
                GanObjective::Ts => {
                    let critic = ts_draw(&disc, train.dropout, rng)?;
                    generator_step(&mut gen, &mut opt.gen, &critic, &contexts, cfg.minibatch, cfg.non_saturating, cfg.action, rng)?
                }
                GanObjective::Ucb => {
                    let critic = UcbScorer::new(&disc, cov.expect("checked above"))?;
                    generator_step(&mut gen, &mut opt.gen, &critic, &contexts, cfg.minibatch, cfg.non_saturating, cfg.action, rng)?
                }
            };
        }
    }
    let disc_loss_after = dataset_loss(&disc, batch)?;
    Ok((
        gen,
        disc,
        GanReport {
            disc_loss_before,
            disc_loss_after,
            final_gen_score,
        },
    ))
}

/// One generator forward, one `k`-NN snap, `k` policy scorings.
pub fn select_arm_gan<R: Rng + ?Sized>(
    gen: &Generator,
    scorer: &dyn ArmScorer,
    context: &[f64],
    index: &ArmIndex,
    k: usize,
    rng: &mut R,
) -> Result<Selection> {
    let z = gen.sample_noise(rng);
    let a = gen.generate(context, &z)?;
    let mut ids: Vec<u64> = index.query_knn(&a, k)?.into_iter().map(|n| n.id).collect();
    best_of(scorer, context, index, &mut ids)
}

/// The unsnapped generator output is itself the action.
pub fn select_continuum(gen: &Generator, context: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    gen.generate(context, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::{random_unit_vectors, HnswParams};
    use crate::nn::sample_mask;
    use crate::policy::SampledModel;
    use crate::rng::seeded;

    #[test]
    fn zero_generator_falls_back_to_e0() {
        let g = Generator::from_model(MlpModel::zeros(&[3, 4, 3], OutputHead::Identity).unwrap(), 2, 1).unwrap();
        assert_eq!(g.generate(&[0.3, 0.1], &[2.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn outputs_are_unit_and_deterministic() {
        let g = Generator::new(4, 3, &[8, 8], 4, &mut seeded(1)).unwrap();
        let mut rng = seeded(2);
        for _ in 0..1000 {
            let ctx: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = g.sample_noise(&mut rng);
            let a = g.generate(&ctx, &z).unwrap();
            let n: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
            assert_eq!(a, g.generate(&ctx, &z).unwrap());
        }
    }

    #[test]
    fn batch_generation_matches_rows() {
        let g = Generator::new(2, 2, &[8], 3, &mut seeded(3)).unwrap();
        let ctx = [0.1, 0.2, -0.3, 0.4];
        let zs = [1.0, -1.0, 0.5, 0.0];
        let batch = g.generate_batch(&ctx, &zs).unwrap();
        for r in 0..2 {
            let single = g.generate(&ctx[r * 2..r * 2 + 2], &zs[r * 2..r * 2 + 2]).unwrap();
            for (a, b) in single.iter().zip(&batch[r * 3..r * 3 + 3]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn section_roundtrip() {
        let g = Generator::new(3, 2, &[5], 4, &mut seeded(4)).unwrap();
        assert_eq!(Generator::from_section(&g.to_section().unwrap()).unwrap(), g);
    }

    #[test]
    fn k_g_zero_rejected() {
        let cfg = GanConfig {
            k_g: 0,
            ..GanConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_learning_rate_freezes_generator() {
        let disc = MlpModel::new(&[4, 8, 8, 1], OutputHead::Sigmoid, &mut seeded(5)).unwrap();
        let mut g = Generator::new(2, 2, &[8], 2, &mut seeded(6)).unwrap();
        let before = g.clone();
        let cfg = GanConfig {
            learning_rate: 0.0,
            ..GanConfig::default()
        };
        let mut adam = AdamState::new(g.net().param_count(), cfg.adam());
        let critic = SampledModel::with_mask(&disc, sample_mask(0.1, &disc.dropout_shapes(), &mut seeded(7)).unwrap());
        let ctx = [0.6, 0.8];
        for _ in 0..5 {
            generator_step(&mut g, &mut adam, &critic, &[&ctx[..]], 16, true, ActionMap::Embedding, &mut seeded(8)).unwrap();
        }
        assert_eq!(g, before);
    }

    #[test]
    fn k_equal_n_is_exhaustive() {
        let arms = random_unit_vectors(30, 2, 9);
        let index = ArmIndex::build(arms.chunks(2).enumerate().map(|(i, v)| (i as u64, v)), HnswParams::default()).unwrap();
        let disc = MlpModel::new(&[4, 8, 8, 1], OutputHead::Sigmoid, &mut seeded(10)).unwrap();
        let critic = SampledModel::with_mask(&disc, sample_mask(0.0, &disc.dropout_shapes(), &mut seeded(0)).unwrap());
        let g = Generator::new(2, 2, &[8], 2, &mut seeded(11)).unwrap();
        let ctx = [0.0, 1.0];
        let sel = select_arm_gan(&g, &critic, &ctx, &index, 30, &mut seeded(12)).unwrap();
        let mut best = (0u64, f64::NEG_INFINITY);
        for (i, a) in arms.chunks(2).enumerate() {
            let s = critic.score(&ctx, a).unwrap();
            if s > best.1 {
                best = (i as u64, s);
            }
        }
        assert_eq!(sel.arm_id, best.0);
    }

    #[test]
    fn unit_interval_range() {
        for t in 0..100 {
            let a = t as f64 * 0.1;
            let v = unit_interval(&[a.cos(), a.sin()]);
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(ActionMap::UnitInterval.apply(&[1.0, 0.0]), vec![0.5]);
        assert_eq!(ActionMap::UnitInterval.apply(&[0.0, 1.0]), vec![0.75]);
    }

    #[test]
    fn unit_interval_pull_back_matches_differences() {
        let e = [0.6, -0.3];
        let g = ActionMap::UnitInterval.pull_back(&e, &[1.0]);
        let h = 1e-6;
        for i in 0..2 {
            let (mut p, mut m) = (e, e);
            p[i] += h;
            m[i] -= h;
            let fd = (unit_interval(&p) - unit_interval(&m)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }
}
