mod common;

use std::time::Instant;

use proptest::prelude::*;
use rand::Rng;

use nbandit::nn::{sample_mask, MlpModel, OutputHead};
use nbandit::rng::seeded;

#[test]
fn both_backward_passes_match_finite_differences() {
    let start = Instant::now();
    let err = common::gradient_max_error(100, 3);
    assert!(err < 1e-4, "max relative error {err:e}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn expectation_mode_matches_mask_average() {
    let mut rng = seeded(12);
    let model = MlpModel::new(&[6, 8, 8, 1], OutputHead::Sigmoid, &mut rng).unwrap();
    let shapes = model.dropout_shapes();
    for _ in 0..5 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let plain = model.predict_value(&x, None).unwrap();
        let mean = (0..10_000)
            .map(|_| {
                let mask = sample_mask(0.1, &shapes, &mut rng).unwrap();
                model.predict_value(&x, Some(&mask)).unwrap()
            })
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - plain).abs() <= 0.02 * plain.abs(), "{mean} vs {plain}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigmoid_head_stays_in_unit_interval(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut rng = seeded(seed);
        let model = MlpModel::new(&[3, 5, 4, 1], OutputHead::Sigmoid, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let v = model.predict_value(&x, None).unwrap();
        prop_assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn forward_and_backward_leave_the_model_alone(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let model = MlpModel::new(&[4, 6, 6, 1], OutputHead::Identity, &mut rng).unwrap();
        let before = model.clone();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = model.forward(&x, None).unwrap();
        model.backward_both(&cache, &[1.0]).unwrap();
        prop_assert_eq!(model, before);
    }

    #[test]
    fn gradients_are_linear_in_upstream(seed in any::<u64>(), u in -5.0f64..5.0) {
        let mut rng = seeded(seed);
        let model = MlpModel::new(&[3, 4, 4, 1], OutputHead::Sigmoid, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = model.forward(&x, None).unwrap();
        let one = model.backward_input(&cache, &[1.0]).unwrap();
        let scaled = model.backward_input(&cache, &[u]).unwrap();
        for (a, b) in one.iter().zip(&scaled) {
            prop_assert!((a * u - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
