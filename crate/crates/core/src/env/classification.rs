//! Multilabel classification as a bandit: classes are arms, the reward is 1
//! iff the chosen class is among the instance's labels.
//!
//! Dataset lines: `label[,label...]<TAB>idx:val idx:val ...`, 0-based
//! feature indices. Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::{check_arm, Environment, RewardKind};
use crate::ann::{random_unit_vectors, ArmSet};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, Stream, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub labels: Vec<usize>,
    pub features: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub instances: Vec<SparseInstance>,
    pub num_classes: usize,
    pub num_features: usize,
}

impl SparseDataset {
    pub fn from_instances(instances: Vec<SparseInstance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Contract("dataset has no instances".into()));
        }
        let num_classes = instances
            .iter()
            .flat_map(|i| i.labels.iter())
            .max()
            .map_or(0, |m| m + 1);
        let num_features = instances
            .iter()
            .flat_map(|i| i.features.iter().map(|f| f.0))
            .max()
            .map_or(0, |m| m + 1);
        if num_classes == 0 {
            return Err(Error::Contract("dataset has no labels".into()));
        }
        Ok(Self {
            instances,
            num_classes,
            num_features: num_features.max(1),
        })
    }

    pub fn dense(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.num_features];
        for &(j, v) in &self.instances[i].features {
            x[j] = v;
        }
        x
    }
}

pub fn load_sparse_dataset(path: impl AsRef<Path>) -> Result<SparseDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut instances = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let raw = raw.trim_end();
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let (labels_part, feats_part) = raw.split_once('\t').unwrap_or((raw, ""));
        let mut labels = BTreeSet::new();
        for l in labels_part.split(',').map(str::trim).filter(|l| !l.is_empty()) {
            labels.insert(l.parse::<usize>().map_err(|e| err(line, format!("label {l:?}: {e}")))?);
        }
        let mut features = Vec::new();
        for tok in feats_part.split_whitespace() {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(line, format!("feature {tok:?} is not idx:val")))?;
            let i: usize = i.parse().map_err(|e| err(line, format!("feature index {i:?}: {e}")))?;
            let v: f64 = v.parse().map_err(|e| err(line, format!("feature value {v:?}: {e}")))?;
            if !v.is_finite() {
                return Err(err(line, format!("non-finite feature value {v}")));
            }
            features.push((i, v));
        }
        instances.push(SparseInstance {
            labels: labels.into_iter().collect(),
            features,
        });
    }
    if instances.is_empty() {
        return Err(err(0, "no instances".into()));
    }
    SparseDataset::from_instances(instances).map_err(|e| err(0, e.to_string()))
}

pub fn write_sparse_dataset(path: impl AsRef<Path>, data: &SparseDataset) -> Result<()> {
    let mut out = String::new();
    for inst in &data.instances {
        let labels: Vec<String> = inst.labels.iter().map(|l| l.to_string()).collect();
        out.push_str(&labels.join(","));
        out.push('\t');
        for (k, (i, v)) in inst.features.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{i}:{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    data: SparseDataset,
    arms: ArmSet,
    order: Vec<usize>,
    cursor: usize,
    shuffle: StreamRng,
    current: Option<usize>,
}

impl ClassificationEnv {
    /// Arms are the classes. Without explicit embeddings each class gets a
    /// random unit vector of `embed_dim`. Instances are served in a shuffled
    /// order, reshuffled after each pass.
    pub fn new(data: SparseDataset, arms: Option<ArmSet>, embed_dim: usize, seed: u64) -> Result<Self> {
        let arms = match arms {
            Some(a) => {
                if a.len() < data.num_classes {
                    return Err(Error::Config(format!(
                        "{} arm embeddings for {} classes",
                        a.len(),
                        data.num_classes
                    )));
                }
                a
            }
            None => ArmSet::from_rows(
                embed_dim,
                random_unit_vectors(data.num_classes, embed_dim, child_seed(seed, Stream::Environment, 0)),
            )?,
        };
        let mut shuffle = stream_rng(seed, Stream::Environment, 1);
        let mut order: Vec<usize> = (0..data.instances.len()).collect();
        order.shuffle(&mut shuffle);
        Ok(Self {
            data,
            arms,
            order,
            cursor: 0,
            shuffle,
            current: None,
        })
    }

    fn current(&self) -> Result<&SparseInstance> {
        self.current
            .map(|i| &self.data.instances[i])
            .ok_or_else(|| Error::Contract("no current context; call next_context first".into()))
    }
}

impl Environment for ClassificationEnv {
    fn context_dim(&self) -> usize {
        self.data.num_features
    }

    fn arms(&self) -> &ArmSet {
        &self.arms
    }

    fn reward_kind(&self) -> RewardKind {
        RewardKind::Binary
    }

    fn next_context(&mut self) -> Result<Vec<f64>> {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.shuffle);
            self.cursor = 0;
        }
        let i = self.order[self.cursor];
        self.cursor += 1;
        self.current = Some(i);
        Ok(self.data.dense(i))
    }

    fn reward(&mut self, arm: usize) -> Result<f64> {
        self.expected_reward(arm)
    }

    fn expected_reward(&self, arm: usize) -> Result<f64> {
        check_arm(arm, self.arms.len())?;
        Ok(if self.current()?.labels.binary_search(&arm).is_ok() { 1.0 } else { 0.0 })
    }

    fn best_arm(&self) -> Result<(usize, f64)> {
        Ok(match self.current()?.labels.first() {
            Some(&l) => (l, 1.0),
            None => (0, 0.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_sparse_dataset(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn toy_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        let data = SparseDataset::from_instances(vec![
            SparseInstance {
                labels: vec![0, 2],
                features: vec![(0, 1.5), (3, -0.25)],
            },
            SparseInstance {
                labels: vec![1],
                features: vec![(1, 2.0)],
            },
        ])
        .unwrap();
        write_sparse_dataset(&p, &data).unwrap();
        assert_eq!(load_sparse_dataset(&p).unwrap(), data);
        assert_eq!(data.num_classes, 3);
        assert_eq!(data.num_features, 4);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        std::fs::write(&p, "0\t1:1\n1,x\t2:3\n").unwrap();
        assert!(matches!(load_sparse_dataset(&p), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&p, "0\t1:1\n\n1\t2-3\n").unwrap();
        assert!(matches!(load_sparse_dataset(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn reward_is_label_membership() {
        let data = SparseDataset::from_instances(vec![SparseInstance {
            labels: vec![1, 3],
            features: vec![(0, 1.0)],
        }])
        .unwrap();
        let mut env = ClassificationEnv::new(data, None, 8, 1).unwrap();
        env.next_context().unwrap();
        let r: Vec<f64> = (0..4).map(|a| env.reward(a).unwrap()).collect();
        assert_eq!(r, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(env.best_arm().unwrap(), (1, 1.0));
        assert!(env.reward(4).is_err());
    }
}
