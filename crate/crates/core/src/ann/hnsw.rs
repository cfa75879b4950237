//! Hierarchical navigable small-world graph over arm embeddings.
//!
//! Euclidean metric, ties broken by lower arm id everywhere. Construction is
//! sequential in input order with level draws from a seeded stream, so an
//! index is a pure function of `(vectors, params)`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::Rng;

use super::{squared_distance, Neighbor};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HnswParams {
    /// Max neighbors per node on upper layers (layer 0 allows `2 * m`).
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 100,
            seed: 0x5eed,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("HNSW m must be >= 2, got {}", self.m)));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(Error::Config("HNSW ef values must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    dist: f64,
    id: u64,
    node: u32,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

struct Visited {
    words: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Marks `i`; returns true if it was not yet marked.
    fn insert(&mut self, i: u32) -> bool {
        let (w, b) = ((i / 64) as usize, i % 64);
        let bit = 1u64 << b;
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        fresh
    }
}

/// Query statistics, for complexity measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub distance_computations: usize,
}

#[derive(Debug, Clone)]
pub struct ArmIndex {
    params: HnswParams,
    dim: usize,
    ids: Vec<u64>,
    vectors: Vec<f64>,
    /// links[node][layer]
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
    lookup: HashMap<u64, u32>,
}

impl ArmIndex {
    /// Builds an index over `(id, vector)` pairs. All vectors must share one
    /// dimensionality and ids must be unique.
    pub fn build<'v, I>(vectors: I, params: HnswParams) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, &'v [f64])>,
    {
        params.validate()?;
        let mut index = Self {
            params,
            dim: 0,
            ids: Vec::new(),
            vectors: Vec::new(),
            links: Vec::new(),
            entry: None,
            max_level: 0,
            lookup: HashMap::new(),
        };
        for (id, v) in vectors {
            if index.ids.is_empty() {
                index.dim = v.len();
                if v.is_empty() {
                    return Err(Error::Contract("zero-dimensional arm embedding".into()));
                }
            } else if v.len() != index.dim {
                return Err(Error::DimensionMismatch {
                    what: "arm embedding",
                    expected: index.dim,
                    got: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Contract(format!("arm {id} has non-finite entries")));
            }
            if index.lookup.insert(id, index.ids.len() as u32).is_some() {
                return Err(Error::DuplicateId(id));
            }
            index.ids.push(id);
            index.vectors.extend_from_slice(v);
        }
        let n = index.ids.len();
        let mut rng = seeded(params.seed);
        let level_mult = 1.0 / (params.m as f64).ln();
        let levels: Vec<usize> = (0..n)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                (-u.ln() * level_mult).floor() as usize
            })
            .collect();
        index.links = levels.iter().map(|&l| vec![Vec::new(); l + 1]).collect();
        let mut visited = Visited::new(n);
        for node in 0..n as u32 {
            index.insert(node, levels[node as usize], &mut visited);
        }
        index.repair_connectivity(&mut visited);
        Ok(index)
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn set_ef_search(&mut self, ef: usize) {
        self.params.ef_search = ef.max(1);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Row-major embeddings in insertion order.
    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vector(&self, id: u64) -> Option<&[f64]> {
        self.lookup.get(&id).map(|&n| self.node_vector(n))
    }

    fn node_vector(&self, node: u32) -> &[f64] {
        let i = node as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn cand(&self, q: &[f64], node: u32, counter: &mut usize) -> Cand {
        *counter += 1;
        Cand {
            dist: squared_distance(q, self.node_vector(node)),
            id: self.ids[node as usize],
            node,
        }
    }

    /// Best-first beam search on one layer. Returns up to `ef` nodes, nearest
    /// first.
    fn search_layer(
        &self,
        q: &[f64],
        entries: &[Cand],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
        counter: &mut usize,
    ) -> Vec<Cand> {
        let mut frontier: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        for &e in entries {
            if visited.insert(e.node) {
                frontier.push(Reverse(e));
                best.push(e);
                if best.len() > ef {
                    best.pop();
                }
            }
        }
        while let Some(Reverse(c)) = frontier.pop() {
            if best.len() >= ef {
                if let Some(worst) = best.peek() {
                    if c > *worst {
                        break;
                    }
                }
            }
            for &nb in &self.links[c.node as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let e = self.cand(q, nb, counter);
                if best.len() < ef || best.peek().is_some_and(|w| e < *w) {
                    frontier.push(Reverse(e));
                    best.push(e);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Keeps a candidate only if it is closer to the base than to every
    /// neighbor already kept. `candidates` must be sorted nearest first.
    fn select_neighbors(&self, candidates: &[Cand], m: usize) -> Vec<Cand> {
        let mut kept: Vec<Cand> = Vec::with_capacity(m);
        for &c in candidates {
            if kept.len() >= m {
                break;
            }
            let cv = self.node_vector(c.node);
            let diverse = kept
                .iter()
                .all(|r| squared_distance(cv, self.node_vector(r.node)) > c.dist);
            if diverse {
                kept.push(c);
            }
        }
        kept
    }

    fn insert(&mut self, node: u32, level: usize, visited: &mut Visited) {
        let Some(entry) = self.entry else {
            self.entry = Some(node);
            self.max_level = level;
            return;
        };
        let q = self.node_vector(node).to_vec();
        let mut counter = 0;
        let mut eps = vec![self.cand(&q, entry, &mut counter)];
        for layer in ((level + 1)..=self.max_level).rev() {
            visited.clear();
            eps = self.search_layer(&q, &eps, 1, layer, visited, &mut counter);
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            visited.clear();
            let found = self.search_layer(&q, &eps, self.params.ef_construction, layer, visited, &mut counter);
            let chosen = self.select_neighbors(&found, self.params.m);
            self.links[node as usize][layer] = chosen.iter().map(|c| c.node).collect();
            let cap = self.max_links(layer);
            for c in &chosen {
                let nb = c.node as usize;
                self.links[nb][layer].push(node);
                if self.links[nb][layer].len() > cap {
                    let base = self.node_vector(c.node).to_vec();
                    let mut cands: Vec<Cand> = self.links[nb][layer]
                        .iter()
                        .map(|&x| self.cand(&base, x, &mut counter))
                        .collect();
                    cands.sort();
                    let pruned = self.select_neighbors(&cands, cap);
                    self.links[nb][layer] = pruned.iter().map(|c| c.node).collect();
                }
            }
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node);
        }
    }

    fn reachable_from_entry(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if let Some(e) = self.entry {
            let mut queue = VecDeque::from([e]);
            seen[e as usize] = true;
            while let Some(n) = queue.pop_front() {
                for &nb in &self.links[n as usize][0] {
                    if !seen[nb as usize] {
                        seen[nb as usize] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
        seen
    }

    /// Links any node that neighbor pruning left unreachable at layer 0 to its
    /// nearest reachable node.
    fn repair_connectivity(&mut self, visited: &mut Visited) {
        let Some(entry) = self.entry else { return };
        let mut reach = self.reachable_from_entry();
        let mut counter = 0;
        for node in 0..self.len() as u32 {
            if reach[node as usize] {
                continue;
            }
            let q = self.node_vector(node).to_vec();
            visited.clear();
            let start = [self.cand(&q, entry, &mut counter)];
            let found = self.search_layer(&q, &start, self.params.ef_construction, 0, visited, &mut counter);
            let anchor = found
                .iter()
                .find(|c| c.node != node && reach[c.node as usize])
                .map(|c| c.node)
                .unwrap_or(entry);
            self.links[anchor as usize][0].push(node);
            self.links[node as usize][0].push(anchor);
            let mut queue = VecDeque::from([node]);
            reach[node as usize] = true;
            while let Some(n) = queue.pop_front() {
                for &nb in &self.links[n as usize][0] {
                    if !reach[nb as usize] {
                        reach[nb as usize] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
    }

    /// Whether every node is reachable from the entry point at layer 0.
    pub fn is_connected(&self) -> bool {
        self.reachable_from_entry().iter().all(|&r| r)
    }

    fn query_inner(&self, q: &[f64], k: usize, visited: &mut Visited, stats: &mut QueryStats) -> Result<Vec<Neighbor>> {
        let entry = self.entry.ok_or(Error::EmptyIndex)?;
        if k == 0 {
            return Err(Error::Contract("k must be >= 1".into()));
        }
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "query",
                expected: self.dim,
                got: q.len(),
            });
        }
        let counter = &mut stats.distance_computations;
        let mut eps = vec![self.cand(q, entry, counter)];
        for layer in (1..=self.max_level).rev() {
            visited.clear();
            eps = self.search_layer(q, &eps, 1, layer, visited, counter);
        }
        visited.clear();
        let ef = self.params.ef_search.max(k);
        let found = self.search_layer(q, &eps, ef, 0, visited, counter);
        Ok(found
            .into_iter()
            .take(k)
            .map(|c| Neighbor {
                id: c.id,
                distance: c.dist.sqrt(),
            })
            .collect())
    }

    /// `k` approximate nearest arms, nearest first.
    pub fn query_knn(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.query_with_stats(q, k).map(|(r, _)| r)
    }

    pub fn query_with_stats(&self, q: &[f64], k: usize) -> Result<(Vec<Neighbor>, QueryStats)> {
        let mut stats = QueryStats::default();
        let mut visited = Visited::new(self.len());
        let r = self.query_inner(q, k, &mut visited, &mut stats)?;
        Ok((r, stats))
    }

    /// Several queries (row-major) sharing one scratch buffer.
    pub fn query_batch(&self, queries: &[f64], k: usize) -> Result<Vec<Vec<Neighbor>>> {
        if self.dim == 0 {
            return Err(Error::EmptyIndex);
        }
        let mut visited = Visited::new(self.len());
        let mut stats = QueryStats::default();
        queries
            .chunks(self.dim)
            .map(|q| self.query_inner(q, k, &mut visited, &mut stats))
            .collect()
    }

    /// Brute-force ground truth over the stored vectors.
    pub fn exact_knn(&self, q: &[f64], k: usize) -> Vec<Neighbor> {
        super::exact_knn(&self.ids, &self.vectors, self.dim, q, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::random_unit_vectors;

    fn index_of(n: usize, dim: usize, seed: u64, params: HnswParams) -> (Vec<f64>, ArmIndex) {
        let data = random_unit_vectors(n, dim, seed);
        let index = ArmIndex::build(
            data.chunks(dim).enumerate().map(|(i, v)| (i as u64, v)),
            params,
        )
        .unwrap();
        (data, index)
    }

    #[test]
    fn empty_index_errors_on_query() {
        let index = ArmIndex::build(std::iter::empty(), HnswParams::default()).unwrap();
        assert!(index.is_empty());
        assert!(matches!(index.query_knn(&[0.0, 1.0], 1), Err(Error::EmptyIndex)));
    }

    #[test]
    fn singleton_answers_everything() {
        let v = [0.6, 0.8];
        let index = ArmIndex::build([(42u64, &v[..])], HnswParams::default()).unwrap();
        for q in [[1.0, 0.0], [-3.0, 2.0]] {
            assert_eq!(index.query_knn(&q, 1).unwrap()[0].id, 42);
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let v = [1.0, 0.0];
        let r = ArmIndex::build([(1u64, &v[..]), (1u64, &v[..])], HnswParams::default());
        assert!(matches!(r, Err(Error::DuplicateId(1))));
    }

    #[test]
    fn mixed_dims_rejected() {
        let (a, b) = ([1.0, 0.0], [1.0, 0.0, 0.0]);
        let r = ArmIndex::build([(1u64, &a[..]), (2u64, &b[..])], HnswParams::default());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn k_equal_n_returns_all() {
        let (_, index) = index_of(300, 4, 1, HnswParams::default());
        let mut got: Vec<u64> = index.query_knn(&[0.5, 0.5, 0.5, 0.5], 300).unwrap().iter().map(|n| n.id).collect();
        got.sort_unstable();
        assert_eq!(got, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn stored_vector_found_at_zero_distance() {
        let params = HnswParams {
            ef_search: 500,
            ..HnswParams::default()
        };
        let (data, index) = index_of(500, 8, 2, params);
        for i in (0..500).step_by(7) {
            let hit = &index.query_knn(&data[i * 8..(i + 1) * 8], 1).unwrap()[0];
            assert_eq!(hit.id, i as u64);
            assert_eq!(hit.distance, 0.0);
        }
    }

    #[test]
    fn connected_and_deterministic() {
        let (_, a) = index_of(2000, 4, 3, HnswParams::default());
        let (_, b) = index_of(2000, 4, 3, HnswParams::default());
        assert!(a.is_connected());
        assert_eq!(a.links, b.links);
    }

    #[test]
    fn ties_prefer_lower_id() {
        let (a, b) = ([1.0, 0.0], [-1.0, 0.0]);
        let index = ArmIndex::build([(9u64, &a[..]), (3u64, &b[..])], HnswParams::default()).unwrap();
        let r = index.query_knn(&[0.0, 0.5], 2).unwrap();
        assert_eq!(r[0].id, 3);
        assert_eq!(r[1].id, 9);
    }

    #[test]
    fn batch_matches_single() {
        let (data, index) = index_of(1000, 4, 5, HnswParams::default());
        let qs = &data[..40];
        let batch = index.query_batch(qs, 3).unwrap();
        for (q, b) in qs.chunks(4).zip(&batch) {
            assert_eq!(&index.query_knn(q, 3).unwrap(), b);
        }
    }
}
