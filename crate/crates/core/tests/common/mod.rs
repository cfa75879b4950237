//! Criterion checks shared by the acceptance target and the integration tests.
#![allow(dead_code)]

use std::time::Instant;

use rand::Rng;

use nbandit::ann::{random_unit_vectors, ArmIndex, HnswParams};
use nbandit::env::{eval_h, HFunction};
use nbandit::fastbandit::{select_arm_fast, AscentConfig};
use nbandit::gan::{generator_step, ActionMap, GanConfig, Generator};
use nbandit::harness::{measure_latency, run_experiment_to, ExperimentConfig, PolicyName, ServeMode};
use nbandit::nn::{sample_mask, AdamConfig, AdamState, MlpModel, OutputHead};
use nbandit::policy::{
    train_reward_model, ts_draw, ArmScorer, CovarianceMode, CovarianceState, HistoryTriplet,
    TrainConfig,
};
use nbandit::rng::seeded;
use nbandit::Result;

#[derive(Debug, Clone)]
pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_model<R: Rng>(rng: &mut R) -> MlpModel {
    let d_in = rng.random_range(2..7);
    let h1 = rng.random_range(2..9);
    let h2 = rng.random_range(2..9);
    let head = if rng.random_bool(0.5) {
        OutputHead::Sigmoid
    } else {
        OutputHead::Identity
    };
    MlpModel::new(&[d_in, h1, h2, 1], head, rng).unwrap()
}

/// Worst relative error of both backward passes against central differences
/// (step 1e-5) over `cases` random models, inputs and dropout masks.
pub fn gradient_max_error(cases: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let model = random_model(&mut rng);
        let x: Vec<f64> = (0..model.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mask = (case % 2 == 1).then(|| sample_mask(0.2, &model.dropout_shapes(), &mut rng).unwrap());
        let cache = model.forward(&x, mask.as_ref()).unwrap();
        let (gp, gx) = model.backward_both(&cache, &[1.0]).unwrap();
        let f = |m: &MlpModel, x: &[f64]| m.predict_value(x, mask.as_ref()).unwrap();

        let theta = model.params();
        let mut probe = model.clone();
        for (i, &g) in gp.values.iter().enumerate() {
            let mut t = theta.clone();
            t[i] += h;
            probe.set_params(&t).unwrap();
            let up = f(&probe, &x);
            t[i] -= 2.0 * h;
            probe.set_params(&t).unwrap();
            let down = f(&probe, &x);
            worst = worst.max(rel_err(g, (up - down) / (2.0 * h)));
        }
        for (i, &g) in gx.iter().enumerate() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            worst = worst.max(rel_err(g, (f(&model, &xp) - f(&model, &xm)) / (2.0 * h)));
        }
    }
    worst
}

pub fn check_gradients() -> Check {
    let start = Instant::now();
    let err = gradient_max_error(100, 17);
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        err < 1e-4 && secs < 10.0,
        format!("max relative error {err:.2e} over 100 cases in {secs:.2}s"),
    )
}

fn dense_inverse(z: &[f64], p: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(p, p, z).try_inverse().expect("Z is invertible")
}

/// (max |gᵀZ⁻¹g - explicit|, max |Z⁻¹ - inv(Z)|) after `updates` rank-one
/// updates of a dense covariance with `p` parameters.
pub fn ucb_algebra_errors(p: usize, updates: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let mut cov = CovarianceState::new(CovarianceMode::Dense, p, 1.0, 1.0, 8).unwrap();
    for _ in 0..updates {
        let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        cov.update(&g).unwrap();
    }
    let inv = dense_inverse(&cov.z_dense(), p);
    let mut form_err: f64 = 0.0;
    for _ in 0..20 {
        let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv = nalgebra::DVector::from_vec(g.clone());
        let explicit = gv.dot(&(&inv * &gv));
        form_err = form_err.max((cov.quadratic_form(&g).unwrap() - explicit).abs());
    }
    let maintained = cov.z_inverse().unwrap();
    let drift = inv
        .transpose()
        .iter()
        .zip(maintained)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (form_err, drift)
}

pub fn check_ucb_algebra() -> Check {
    let (form, drift) = ucb_algebra_errors(100, 50, 23);
    Check::new(
        form < 1e-8 && drift < 1e-6,
        format!("p=100, 50 updates: quadratic-form error {form:.2e}, inverse drift {drift:.2e}"),
    )
}

pub struct AnnQuality {
    pub recall: f64,
    pub distance_ratio: f64,
}

fn unit_index(n: usize, dim: usize, seed: u64) -> ArmIndex {
    let data = random_unit_vectors(n, dim, seed);
    ArmIndex::build(data.chunks(dim).enumerate().map(|(i, v)| (i as u64, v)), HnswParams::default()).unwrap()
}

/// Recall@1 and mean approx/exact distance ratio of `queries` random unit
/// queries against an index of `n` random unit vectors.
pub fn ann_quality(index: &ArmIndex, queries: usize, seed: u64) -> AnnQuality {
    let dim = index.dim();
    let qs = random_unit_vectors(queries, dim, seed);
    let mut hits = 0;
    let mut ratio = 0.0;
    for q in qs.chunks(dim) {
        let approx = index.query_knn(q, 1).unwrap()[0];
        let exact = index.exact_knn(q, 1)[0];
        if approx.id == exact.id {
            hits += 1;
        }
        ratio += if exact.distance > 0.0 {
            approx.distance / exact.distance
        } else {
            1.0
        };
    }
    AnnQuality {
        recall: hits as f64 / queries as f64,
        distance_ratio: ratio / queries as f64,
    }
}

pub fn mean_distance_computations(index: &ArmIndex, queries: usize, seed: u64) -> f64 {
    let dim = index.dim();
    let qs = random_unit_vectors(queries, dim, seed);
    let total: usize = qs
        .chunks(dim)
        .map(|q| index.query_with_stats(q, 1).unwrap().1.distance_computations)
        .sum();
    total as f64 / queries as f64
}

pub fn check_ann() -> Check {
    let start = Instant::now();
    let small = unit_index(10_000, 8, 1);
    let q = ann_quality(&small, 1000, 2);
    let c_small = mean_distance_computations(&small, 1000, 3);
    drop(small);
    let large = unit_index(100_000, 8, 4);
    let q_large = ann_quality(&large, 200, 5);
    let c_large = mean_distance_computations(&large, 1000, 3);
    let secs = start.elapsed().as_secs_f64();
    let growth = c_large / c_small;
    Check::new(
        q.recall >= 0.95 && q.distance_ratio <= 1.05 && growth < 4.0 && secs < 120.0,
        format!(
            "recall@1 {:.3}, distance ratio {:.4}, distance computations {c_small:.0} -> {c_large:.0} ({growth:.2}x, \
             recall at 1e5 {:.3}), {secs:.1}s",
            q.recall, q.distance_ratio, q_large.recall
        ),
    )
}

/// Reward model fitted to noiseless h2 on `arms` with random contexts.
pub fn fit_h2_model(arms: &[f64], dim: usize, samples: usize, seed: u64) -> MlpModel {
    let mut rng = seeded(seed);
    let n = arms.len() / dim;
    let contexts = random_unit_vectors(samples, dim, seed ^ 0xc0);
    let batch: Vec<HistoryTriplet> = contexts
        .chunks(dim)
        .map(|x| {
            let a = &arms[rng.random_range(0..n) * dim..][..dim];
            HistoryTriplet::new(x.to_vec(), a.to_vec(), eval_h(HFunction::H2, x, a).unwrap()).unwrap()
        })
        .collect();
    let model = MlpModel::new(&[2 * dim, 32, 32, 1], OutputHead::Identity, &mut rng).unwrap();
    let mut adam = AdamState::new(model.param_count(), AdamConfig::default());
    let cfg = TrainConfig {
        iterations: 3000,
        ..TrainConfig::default()
    };
    train_reward_model(&model, &batch, &mut adam, &cfg, &mut rng).unwrap().0
}

/// Fraction of trials where the FastBandit arm scores within 5% of the
/// exhaustive maximum under the same posterior sample.
pub fn fastbandit_near_optimal_rate(cfg: &AscentConfig, trials: usize, seed: u64) -> f64 {
    let (n, dim) = (100, 4);
    let arms = random_unit_vectors(n, dim, seed);
    let model = fit_h2_model(&arms, dim, 2000, seed + 1);
    let mut index = ArmIndex::build(arms.chunks(dim).enumerate().map(|(i, v)| (i as u64, v)), HnswParams::default())
        .unwrap();
    index.set_ef_search(n);
    let contexts = random_unit_vectors(trials, dim, seed + 2);
    let mut good = 0;
    for (t, x) in contexts.chunks(dim).enumerate() {
        let mut rng = seeded(seed.wrapping_mul(1000) + t as u64);
        let sample = ts_draw(&model, 0.1, &mut rng).unwrap();
        let sel = select_arm_fast(&sample, x, &index, cfg, rng.random()).unwrap();
        let best = sample.score_many(x, &arms, dim).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
        if sel.score >= best - 0.05 * best.abs() {
            good += 1;
        }
    }
    good as f64 / trials as f64
}

/// Runs with iterates re-projected onto the unit sphere, where the reward
/// model was trained; the unprojected default is reported alongside.
pub fn check_fastbandit() -> Check {
    let projected = AscentConfig {
        project: true,
        ..AscentConfig::default()
    };
    let rate = fastbandit_near_optimal_rate(&projected, 100, 31);
    let free = fastbandit_near_optimal_rate(&AscentConfig::default(), 100, 31);
    Check::new(
        rate >= 0.9,
        format!(
            "h2, N=100, d=4, R=10, I=30, projected ascent: within 0.95x of exhaustive max in {:.0}% of 100 trials \
             (unprojected: {:.0}%)",
            rate * 100.0,
            free * 100.0
        ),
    )
}

/// A concave bump over 2-D embeddings peaking at the context's direction
/// rotated by a fixed angle.
pub struct BumpCritic {
    pub sharpness: f64,
}

impl BumpCritic {
    fn center(context: &[f64]) -> [f64; 2] {
        let (s, c) = 0.7f64.sin_cos();
        [c * context[0] - s * context[1], s * context[0] + c * context[1]]
    }
}

impl ArmScorer for BumpCritic {
    fn score(&self, context: &[f64], arm: &[f64]) -> Result<f64> {
        let c = Self::center(context);
        let d2 = (arm[0] - c[0]).powi(2) + (arm[1] - c[1]).powi(2);
        Ok((-self.sharpness * d2).exp())
    }

    fn score_with_arm_grad(&self, context: &[f64], arm: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = Self::center(context);
        let v = self.score(context, arm)?;
        let g = (0..2).map(|i| -2.0 * self.sharpness * (arm[i] - c[i]) * v).collect();
        Ok((v, g))
    }

    fn is_probability(&self) -> bool {
        true
    }
}

/// Trains a generator against the frozen bump critic and returns it with
/// the 2-D contexts it was trained on.
pub fn train_against_bump(steps: usize, seed: u64) -> (Generator, BumpCritic, Vec<Vec<f64>>) {
    let mut rng = seeded(seed);
    let critic = BumpCritic { sharpness: 2.0 };
    let gcfg = GanConfig {
        hidden: vec![16, 16],
        learning_rate: 5e-3,
        ..GanConfig::default()
    };
    let mut gen = Generator::new(2, gcfg.noise_dim, &gcfg.hidden, 2, &mut rng).unwrap();
    let mut adam = AdamState::new(gen.net().param_count(), gcfg.adam());
    let contexts: Vec<Vec<f64>> = random_unit_vectors(64, 2, seed + 1).chunks(2).map(|c| c.to_vec()).collect();
    let refs: Vec<&[f64]> = contexts.iter().map(|c| &c[..]).collect();
    for _ in 0..steps {
        generator_step(&mut gen, &mut adam, &critic, &refs, gcfg.minibatch, true, ActionMap::Embedding, &mut rng)
            .unwrap();
    }
    (gen, critic, contexts)
}

/// Fraction of noise draws whose mean critic score over the training
/// contexts reaches 0.9x the mean grid maximum (100 arms on the circle).
pub fn gan_bump_rate(draws: usize, seed: u64) -> f64 {
    let (gen, critic, contexts) = train_against_bump(3000, seed);
    let grid: Vec<f64> = (0..100)
        .flat_map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 100.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let grid_max: Vec<f64> = contexts
        .iter()
        .map(|x| critic.score_many(x, &grid, 2).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut rng = seeded(seed + 7);
    let mut good = 0;
    for _ in 0..draws {
        let z = gen.sample_noise(&mut rng);
        let (mut got, mut best) = (0.0, 0.0);
        for (x, m) in contexts.iter().zip(&grid_max) {
            got += critic.score(x, &gen.generate(x, &z).unwrap()).unwrap();
            best += m;
        }
        if got >= 0.9 * best {
            good += 1;
        }
    }
    good as f64 / draws as f64
}

pub fn check_gan_generator() -> Check {
    let start = Instant::now();
    let rate = gan_bump_rate(100, 41);
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        rate >= 0.8 && secs < 300.0,
        format!("{:.0}% of z draws reach 0.9x grid max, {secs:.1}s", rate * 100.0),
    )
}

/// Cumulative reward of `cfg` at the end of the run.
pub fn cumulative_reward(cfg: &ExperimentConfig) -> f64 {
    run_experiment_to(cfg, std::io::sink()).unwrap().cumulative_reward
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn median_over_seeds(json: &str, policy: PolicyName, seeds: u64) -> f64 {
    let rewards = (1..=seeds)
        .map(|seed| {
            let mut cfg = ExperimentConfig::from_json(json).unwrap();
            cfg.policy = policy;
            cfg.seed = seed;
            cumulative_reward(&cfg)
        })
        .collect();
    median(rewards)
}

pub fn regret_config(function: &str) -> String {
    format!(
        r#"{{"environment": {{"kind": "synthetic", "function": "{function}", "arms": 1000, "dim": 4}},
            "policy": "random", "rounds": 2000, "batch_size": 200, "seed": 1,
            "model": {{"hidden": [64, 64]}}}}"#
    )
}

pub fn check_regret() -> Check {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for h in ["h2", "h3"] {
        let json = regret_config(h);
        let random = median_over_seeds(&json, PolicyName::Random, 5);
        let linear = median_over_seeds(&json, PolicyName::LinearTs, 5);
        parts.push(format!("{h}: random {random:.0}, linear-ts {linear:.0}"));
        for p in [PolicyName::ExhaustTs, PolicyName::FastTs, PolicyName::GanTs] {
            let r = median_over_seeds(&json, p, 5);
            let (vr, vl) = (r / random, r / linear);
            pass &= vr >= 1.5 && vl >= 1.1;
            parts.push(format!("{p} {r:.0} ({vr:.2}x random, {vl:.2}x linear)"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 1200.0;
    Check::new(pass, format!("{}; {secs:.0}s", parts.join(", ")))
}

pub fn latency_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"environment": {"kind": "synthetic", "function": "h2", "arms": 10000, "dim": 8},
            "policy": "exhaust-ts", "rounds": 2000, "batch_size": 500, "seed": 1}"#,
    )
    .unwrap()
}

pub fn mean_latency(policy: PolicyName, mode: ServeMode) -> f64 {
    let mut cfg = latency_config();
    cfg.policy = policy;
    measure_latency(&cfg, mode, 100).unwrap().0.mean_ns
}

pub fn check_latency() -> Check {
    let exhaust = mean_latency(PolicyName::ExhaustTs, ServeMode::Single);
    let fast = mean_latency(PolicyName::FastTs, ServeMode::Single);
    let gan = mean_latency(PolicyName::GanTs, ServeMode::Single);
    let gan_batch = mean_latency(PolicyName::GanTs, ServeMode::Batch);
    let ok = 2.0 * gan <= fast && 2.0 * fast <= exhaust && 2.0 * gan_batch <= gan;
    Check::new(
        ok,
        format!(
            "N=1e4 mean ns: gan {gan:.0} < fast {fast:.0} < exhaust {exhaust:.0} ({:.1}x, {:.1}x); \
             gan batch {gan_batch:.0} vs single ({:.2}x)",
            fast / gan,
            exhaust / fast,
            gan / gan_batch
        ),
    )
}

pub const CONTINUUM_CONFIG: &str = r#"{"environment": {"kind": "continuum", "grid": 1000},
    "policy": "gan-ts", "rounds": 2000, "batch_size": 200, "seed": 1,
    "model": {"hidden": [64, 64]}}"#;

pub fn check_continuum() -> Check {
    let gan = median_over_seeds(CONTINUUM_CONFIG, PolicyName::GanTs, 5);
    let linear = median_over_seeds(CONTINUUM_CONFIG, PolicyName::LinearTs, 5);
    Check::new(gan > linear, format!("median cumulative reward gan-ts {gan:.1} vs linear-ts {linear:.1}"))
}

pub fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let mut out = Vec::new();
    run_experiment_to(cfg, &mut out).unwrap();
    out
}

pub fn check_determinism() -> Check {
    let mut all = true;
    let mut names = Vec::new();
    for p in [
        PolicyName::Random,
        PolicyName::LinearTs,
        PolicyName::ExhaustUcb,
        PolicyName::FastTs,
        PolicyName::GanTs,
    ] {
        let mut cfg = ExperimentConfig::from_json(
            r#"{"environment": {"kind": "synthetic", "function": "h3", "arms": 200, "dim": 4},
                "policy": "random", "rounds": 300, "batch_size": 100, "seed": 9,
                "train": {"iterations": 100}, "gan": {"iterations": 100}}"#,
        )
        .unwrap();
        cfg.policy = p;
        let same = csv_bytes(&cfg) == csv_bytes(&cfg);
        all &= same;
        names.push(format!("{p} {}", if same { "identical" } else { "DIFFERS" }));
    }
    Check::new(all, names.join(", "))
}
