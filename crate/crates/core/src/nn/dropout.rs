use rand::Rng;

use crate::error::{Error, Result};

/// One frozen set of inverted-dropout masks, one vector per dropout site.
///
/// Entries are either 0 or `1/(1-rate)`. Drawing a mask once and reusing it
/// for every arm in a round turns a dropout network into one posterior sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    rate: f64,
    sites: Vec<(usize, Vec<f64>)>,
}

impl DropoutMask {
    pub fn from_sites(rate: f64, sites: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        validate_rate(rate)?;
        Ok(Self { rate, sites })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sites(&self) -> &[(usize, Vec<f64>)] {
        &self.sites
    }

    pub fn for_site(&self, layer: usize) -> Option<&[f64]> {
        self.sites
            .iter()
            .find(|(s, _)| *s == layer)
            .map(|(_, v)| v.as_slice())
    }
}

fn validate_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Draws i.i.d. Bernoulli(1 - rate) keep decisions scaled by `1/(1-rate)`.
/// `shapes` lists `(site layer, length)` pairs, usually
/// [`MlpModel::dropout_shapes`](super::MlpModel::dropout_shapes).
pub fn sample_mask<R: Rng + ?Sized>(
    rate: f64,
    shapes: &[(usize, usize)],
    rng: &mut R,
) -> Result<DropoutMask> {
    validate_rate(rate)?;
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let sites = shapes
        .iter()
        .map(|&(site, len)| {
            let values = (0..len)
                .map(|_| {
                    if rate == 0.0 || rng.random::<f64>() < keep {
                        scale
                    } else {
                        0.0
                    }
                })
                .collect();
            (site, values)
        })
        .collect();
    Ok(DropoutMask { rate, sites })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_rate_is_all_ones() {
        let m = sample_mask(0.0, &[(0, 16), (1, 4)], &mut seeded(1)).unwrap();
        assert!(m.sites().iter().all(|(_, v)| v.iter().all(|&x| x == 1.0)));
    }

    #[test]
    fn entries_are_zero_or_scaled() {
        let m = sample_mask(0.25, &[(0, 1000)], &mut seeded(2)).unwrap();
        let scale = 1.0 / 0.75;
        assert!(m.for_site(0).unwrap().iter().all(|&x| x == 0.0 || x == scale));
    }

    #[test]
    fn mean_is_one_by_law_of_large_numbers() {
        let m = sample_mask(0.5, &[(0, 100_000)], &mut seeded(3)).unwrap();
        let v = m.for_site(0).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn same_seed_same_mask() {
        let a = sample_mask(0.3, &[(0, 32), (1, 32)], &mut seeded(9)).unwrap();
        let b = sample_mask(0.3, &[(0, 32), (1, 32)], &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_rate_of_one() {
        assert!(sample_mask(1.0, &[(0, 2)], &mut seeded(0)).is_err());
        assert!(sample_mask(-0.1, &[(0, 2)], &mut seeded(0)).is_err());
    }
}
