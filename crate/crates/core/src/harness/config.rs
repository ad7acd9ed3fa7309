//! Run configuration, read from JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annealer::{Phase2Config, TemperatureSchedule};
use crate::climber::{InductionScope, Phase1Config};
use crate::error::{Error, Result};
use crate::evaluation::OracleSpec;
use crate::perm::{Assignment, Element};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Settings {
    pub n_games: u64,
    pub n_games_baseline: u64,
    pub tau: f64,
    pub element_order: Option<Vec<Element>>,
    pub induction_scope: InductionScope,
}

impl Default for Phase1Settings {
    fn default() -> Self {
        let d = Phase1Config::default();
        Phase1Settings {
            n_games: d.n_games,
            n_games_baseline: d.n_games_baseline,
            tau: d.tau,
            element_order: None,
            induction_scope: d.scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase2Settings {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    pub pool_size: usize,
    pub n_games_hi: u64,
    /// One assignment per line; replaces the sampling proposer.
    pub script_moves: Option<PathBuf>,
}

impl Default for Phase2Settings {
    fn default() -> Self {
        let d = Phase2Config::default();
        Phase2Settings {
            t0: d.schedule.t0,
            dt: d.schedule.dt,
            steps: d.schedule.steps,
            pool_size: d.pool_size,
            n_games_hi: d.n_games_hi,
            script_moves: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub initial: Assignment,
    pub oracle: OracleSpec,
    /// Oracle for the second phase; defaults to `oracle`.
    #[serde(default)]
    pub phase2_oracle: Option<OracleSpec>,
    /// Master seed. Required before a run, possibly supplied on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub phase1: Phase1Settings,
    #[serde(default)]
    pub phase2: Phase2Settings,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn new(initial: Assignment, oracle: OracleSpec, seed: u64) -> Self {
        RunConfig {
            initial,
            oracle,
            phase2_oracle: None,
            seed: Some(seed),
            phase1: Phase1Settings::default(),
            phase2: Phase2Settings::default(),
            out: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("bad run configuration: {e}")))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::config("a master seed is required (config `seed` or --seed)"))
    }

    pub fn schedule(&self) -> TemperatureSchedule {
        TemperatureSchedule {
            t0: self.phase2.t0,
            dt: self.phase2.dt,
            steps: self.phase2.steps,
        }
    }

    pub fn phase1_config(&self) -> Result<Phase1Config> {
        Ok(Phase1Config {
            n_games: self.phase1.n_games,
            n_games_baseline: self.phase1.n_games_baseline,
            tau: self.phase1.tau,
            element_order: self.phase1.element_order.clone(),
            scope: self.phase1.induction_scope,
            seed: self.seed()?,
        })
    }

    /// Phase-2 settings; test ids are filled in by the runner.
    pub fn phase2_config(&self) -> Result<Phase2Config> {
        Ok(Phase2Config {
            schedule: self.schedule(),
            pool_size: self.phase2.pool_size,
            n_games_hi: self.phase2.n_games_hi,
            seed: self.seed()?,
            start_test_id: None,
            first_test_id: 0,
        })
    }

    /// Checks everything that can be checked without evaluating anything.
    pub fn validate(&self) -> Result<()> {
        self.phase1_config()?.validate(&self.initial)?;
        self.phase2_config()?.validate()?;
        Ok(())
    }
}
