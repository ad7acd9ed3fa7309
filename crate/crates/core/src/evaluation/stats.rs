use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noisy fitness of one assignment: mean goal difference, its standard error
/// and the number of games behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_games: u64,
}

impl FitnessEstimate {
    pub fn new(mean: f64, se: f64, n_games: u64) -> Result<Self> {
        if !mean.is_finite() || !se.is_finite() || se < 0.0 {
            return Err(Error::config(format!(
                "invalid estimate: mean {mean}, se {se}"
            )));
        }
        if n_games == 0 {
            return Err(Error::config("estimate needs at least one game"));
        }
        Ok(FitnessEstimate { mean, se, n_games })
    }

    /// A noise-free value.
    pub fn exact(mean: f64) -> Self {
        FitnessEstimate {
            mean,
            se: 0.0,
            n_games: 1,
        }
    }

    /// With a single sample the standard error is set to zero by convention.
    pub fn se_is_degenerate(&self) -> bool {
        self.n_games == 1
    }
}

/// Streaming count/mean/sum-of-squared-deviations, mergeable in any grouping
/// (Chan et al. pairwise update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Result<FitnessEstimate> {
        match self.n {
            0 => Err(Error::EmptyBatch),
            1 => Ok(FitnessEstimate {
                mean: self.mean,
                se: 0.0,
                n_games: 1,
            }),
            n => {
                let var = (self.m2 / (n - 1) as f64).max(0.0);
                Ok(FitnessEstimate {
                    mean: self.mean,
                    se: (var / n as f64).sqrt(),
                    n_games: n,
                })
            }
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Per-game samples per chunk; chunks are reduced in index order.
pub(crate) const CHUNK: usize = 1024;

/// Mean and standard error (sample deviation with `n - 1`, divided by
/// `sqrt(n)`) of per-game goal differences.
pub fn aggregate(samples: &[f64]) -> Result<FitnessEstimate> {
    samples
        .chunks(CHUNK)
        .map(|c| c.iter().copied().collect::<Moments>())
        .fold(Moments::default(), Moments::merge)
        .estimate()
}

/// Whether two estimates differ by more than `tau` times the larger
/// standard error.
pub fn significant_difference(a: &FitnessEstimate, b: &FitnessEstimate, tau: f64) -> bool {
    (a.mean - b.mean).abs() > tau * a.se.max(b.se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook two-pass computation.
    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let se = if xs.len() > 1 {
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        (mean, se)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || a == b
    }

    #[test]
    fn aggregate_examples() {
        let e = aggregate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((e.se - 0.57735).abs() < 5e-6);
        assert_eq!(e.n_games, 3);

        let e = aggregate(&[5.0; 4]).unwrap();
        assert_eq!((e.mean, e.se), (5.0, 0.0));

        let e = aggregate(&[-2.5]).unwrap();
        assert_eq!((e.mean, e.se, e.n_games), (-2.5, 0.0, 1));
        assert!(e.se_is_degenerate());

        assert!(matches!(aggregate(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn gaussian_se_calibration() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2000);
        let normal = Normal::new(-4.17, 2.03).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let e = aggregate(&xs).unwrap();
        let expected = 2.03 / 2000f64.sqrt();
        assert!((expected - 0.0454).abs() < 1e-4);
        assert!((e.se - expected).abs() < 0.1 * expected, "se {}", e.se);
    }

    #[test]
    fn significance_examples() {
        let est = |m, s| FitnessEstimate {
            mean: m,
            se: s,
            n_games: 1000,
        };
        assert!(significant_difference(
            &est(-3.89289, 0.061798),
            &est(-3.96985, 0.064817),
            1.0
        ));
        assert!(!significant_difference(
            &est(-3.69539, 0.058036),
            &est(-3.72417, 0.059761),
            1.0
        ));
        let a = est(-1.0, 0.1);
        assert!(!significant_difference(&a, &a, 1.0));
    }

    proptest! {
        #[test]
        fn aggregate_matches_two_pass(xs in prop::collection::vec(-50.0f64..50.0, 1..5000)) {
            let e = aggregate(&xs).unwrap();
            let (m, s) = two_pass(&xs);
            // absolute tolerance on the data scale; means near zero defeat relative checks
            prop_assert!((e.mean - m).abs() < 1e-12 * 50.0, "{} vs {}", e.mean, m);
            prop_assert!(close(e.se, s, 1e-12) || (e.se - s).abs() < 1e-15, "{} vs {}", e.se, s);
        }

        #[test]
        fn significance_symmetric_and_monotone(
            m1 in -5.0f64..0.0, m2 in -5.0f64..0.0, s1 in 0.0f64..0.2, s2 in 0.0f64..0.2,
            t1 in 0.01f64..4.0, t2 in 0.01f64..4.0,
        ) {
            let a = FitnessEstimate { mean: m1, se: s1, n_games: 10 };
            let b = FitnessEstimate { mean: m2, se: s2, n_games: 10 };
            prop_assert_eq!(significant_difference(&a, &b, t1), significant_difference(&b, &a, t1));
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            if significant_difference(&a, &b, hi) {
                prop_assert!(significant_difference(&a, &b, lo));
            }
        }
    }
}
