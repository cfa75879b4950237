//! Nearest-neighbor search over arm embeddings: the HNSW index used to snap
//! free embeddings onto real arms, a brute-force oracle, and the arm
//! embedding CSV format.

mod arms;
mod hnsw;

use rand_distr::{Distribution, StandardNormal};

pub use arms::{read_arm_embeddings, write_arm_embeddings, ArmSet};
pub use hnsw::{ArmIndex, HnswParams, QueryStats};

use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute-force `k` nearest neighbors over row-major `vectors`; equal
/// distances go to the lower id.
pub fn exact_knn(ids: &[u64], vectors: &[f64], dim: usize, q: &[f64], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<(f64, u64)> = vectors
        .chunks(dim)
        .zip(ids)
        .map(|(v, &id)| (squared_distance(q, v), id))
        .collect();
    let cmp = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all.into_iter()
        .map(|(d, id)| Neighbor {
            id,
            distance: d.sqrt(),
        })
        .collect()
}

/// Normalizes in place; returns false (leaving `v` untouched) for a zero vector.
pub fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// `n` i.i.d. standard-normal directions, normalized, row-major.
pub fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n * dim);
    while out.len() < n * dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if normalize(&mut v) {
            out.extend(v);
        }
    }
    out
}
