//! The noisy objective boundary.
//!
//! Every oracle maps `(assignment, game budget, seed)` to a
//! [`FitnessEstimate`]. Oracles must be callable from several threads at once.

pub mod landscape;
pub mod pool;
pub mod replay;
pub mod stats;
pub mod subprocess;
pub mod synthetic;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::perm::Assignment;

pub use landscape::{ExactOracle, Landscape, LandscapeSpec, TargetLandscape};
pub use pool::PoolOracle;
pub use replay::{ReplayFixture, ReplayOracle};
pub use stats::{aggregate, significant_difference, FitnessEstimate, Moments};
pub use subprocess::{CommandSpec, SubprocessOracle};
pub use synthetic::SyntheticOracle;

pub trait Oracle: Send + Sync + std::fmt::Debug {
    /// Stable identity, used as part of cache keys.
    fn id(&self) -> String;

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate>;
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate> {
        (**self).evaluate(x, n_games, seed)
    }
}

/// Memoizes estimates per `(oracle id, assignment, game budget)`.
#[derive(Debug)]
pub struct CachedOracle {
    inner: Arc<dyn Oracle>,
    id: String,
    cache: Mutex<HashMap<(Assignment, u64), FitnessEstimate>>,
    fresh_games: AtomicU64,
    fresh_evaluations: AtomicU64,
}

impl CachedOracle {
    pub fn new(inner: Arc<dyn Oracle>) -> Self {
        let id = inner.id();
        CachedOracle {
            inner,
            id,
            cache: Mutex::new(HashMap::new()),
            fresh_games: AtomicU64::new(0),
            fresh_evaluations: AtomicU64::new(0),
        }
    }

    /// Returns the estimate and whether it came from the cache.
    pub fn evaluate_cached(
        &self,
        x: &Assignment,
        n_games: u64,
        seed: u64,
    ) -> Result<(FitnessEstimate, bool)> {
        let key = (x.clone(), n_games);
        if let Some(e) = self.lock().get(&key) {
            return Ok((*e, true));
        }
        let e = self.inner.evaluate(x, n_games, seed)?;
        let mut cache = self.lock();
        if let Some(prev) = cache.get(&key) {
            // another worker finished first
            return Ok((*prev, true));
        }
        cache.insert(key, e);
        self.fresh_games.fetch_add(n_games, Ordering::Relaxed);
        self.fresh_evaluations.fetch_add(1, Ordering::Relaxed);
        Ok((e, false))
    }

    pub fn lookup(&self, x: &Assignment, n_games: u64) -> Option<FitnessEstimate> {
        self.lock().get(&(x.clone(), n_games)).copied()
    }

    /// Games requested by non-cached evaluations.
    pub fn fresh_games(&self) -> u64 {
        self.fresh_games.load(Ordering::Relaxed)
    }

    pub fn fresh_evaluations(&self) -> u64 {
        self.fresh_evaluations.load(Ordering::Relaxed)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<(Assignment, u64), FitnessEstimate>> {
        self.cache.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Oracle for CachedOracle {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate> {
        self.evaluate_cached(x, n_games, seed).map(|(e, _)| e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolMemberSpec {
    pub oracle: OracleSpec,
    pub weight: f64,
}

/// Declarative oracle configuration, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    Synthetic {
        landscape: LandscapeSpec,
    },
    Exact {
        landscape: LandscapeSpec,
    },
    Pool {
        members: Vec<PoolMemberSpec>,
    },
    /// Fixture path, relative to the configuration file.
    Replay {
        fixture: PathBuf,
    },
    Subprocess(CommandSpec),
}

impl OracleSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Arc<dyn Oracle>> {
        Ok(match self {
            OracleSpec::Synthetic { landscape } => {
                Arc::new(SyntheticOracle::new(landscape.build()?, landscape.sigma)?)
            }
            OracleSpec::Exact { landscape } => Arc::new(ExactOracle::new(landscape.build()?)),
            OracleSpec::Pool { members } => Arc::new(PoolOracle::new(
                members
                    .iter()
                    .map(|m| Ok((m.oracle.build(base_dir)?, m.weight)))
                    .collect::<Result<Vec<_>>>()?,
            )?),
            OracleSpec::Replay { fixture } => {
                let path = base_dir.join(fixture);
                Arc::new(ReplayOracle::new(
                    path.display().to_string(),
                    ReplayFixture::load(&path)?,
                ))
            }
            OracleSpec::Subprocess(cmd) => Arc::new(SubprocessOracle::new(cmd.clone())),
        })
    }
}
