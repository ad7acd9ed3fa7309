use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perm::Assignment;
use crate::seed;

use super::landscape::Landscape;
use super::stats::{Moments, CHUNK};
use super::{FitnessEstimate, Oracle};

/// Per-game goal differences drawn i.i.d. from `N(true_fitness(x), sigma^2)`.
///
/// Samples are generated in fixed-size chunks, each with its own derived
/// seed, so chunks can be drawn on any number of threads and reduced in index
/// order without changing the result.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    landscape: Arc<dyn Landscape>,
    sigma: f64,
}

impl SyntheticOracle {
    pub fn new(landscape: Arc<dyn Landscape>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(SyntheticOracle { landscape, sigma })
    }

    pub fn landscape(&self) -> &Arc<dyn Landscape> {
        &self.landscape
    }
}

impl Oracle for SyntheticOracle {
    fn id(&self) -> String {
        format!("synthetic:{}:{:?}", self.sigma, self.landscape)
    }

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate> {
        if n_games == 0 {
            return Err(Error::EmptyBatch);
        }
        let mu = self.landscape.true_fitness(x)?;
        let normal =
            Normal::new(mu, self.sigma).map_err(|e| Error::config(format!("noise model: {e}")))?;
        let base = seed::for_evaluation(seed, x, n_games);
        let chunk = CHUNK as u64;
        let n_chunks = n_games.div_ceil(chunk);
        let parts: Vec<Moments> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::for_chunk(base, c));
                let len = chunk.min(n_games - c * chunk);
                (0..len)
                    .map(|_| normal.sample(&mut rng))
                    .collect::<Moments>()
            })
            .collect();
        parts
            .into_iter()
            .fold(Moments::default(), Moments::merge)
            .estimate()
    }
}
