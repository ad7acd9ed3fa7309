//! Second phase: annealing over insertion moves, steered by the induced
//! constraints.
//!
//! The start is re-evaluated at a high game budget. Each step proposes an
//! insertion neighbour that does not add violations, evaluates it, and accepts
//! it if better or with Boltzmann probability `exp(-delta / T)` otherwise.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintGraph, TestId};
use crate::error::{Error, Result};
use crate::evaluation::{FitnessEstimate, Oracle};
use crate::perm::{Assignment, MoveDescriptor};
use crate::seed;
use crate::trace::{AnnealNote, Decision, Marker, TraceRecord};

/// Linear schedule `T_k = t0 - k * dt` for `k < steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        TemperatureSchedule {
            t0: 0.10,
            dt: 0.01,
            steps: 10,
        }
    }
}

impl TemperatureSchedule {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        let s = TemperatureSchedule { t0, dt, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::config(format!("t0 must be > 0, got {}", self.t0)));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be >= 0, got {}", self.dt)));
        }
        let last = self.t0 - self.steps.saturating_sub(1) as f64 * self.dt;
        if last.is_nan() || last <= 0.0 {
            return Err(Error::config(format!(
                "schedule reaches T = {last} at step {}; need t0 - (steps - 1) * dt > 0",
                self.steps.saturating_sub(1)
            )));
        }
        Ok(())
    }

    pub fn temperature_at(&self, k: usize) -> Result<f64> {
        if k >= self.steps {
            return Err(Error::config(format!(
                "step {k} is outside a {}-step schedule",
                self.steps
            )));
        }
        Ok(self.t0 - k as f64 * self.dt)
    }
}

/// `1` if the candidate is no worse, else `exp(-(f_current - f_candidate) / t)`.
pub fn acceptance_probability(f_current: f64, f_candidate: f64, t: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidTemperature(t));
    }
    let delta = f_current - f_candidate;
    Ok(if delta <= 0.0 {
        1.0
    } else {
        (-delta / t).exp()
    })
}

pub trait Proposer {
    fn propose(
        &mut self,
        current: &Assignment,
        graph: &ConstraintGraph,
    ) -> Result<(MoveDescriptor, Assignment)>;
}

/// Samples `pool_size` insertion neighbours, drops those with more violations
/// than the current state, and returns a least-violating survivor.
#[derive(Debug, Clone)]
pub struct TournamentProposer {
    pool_size: usize,
    max_retries: usize,
    rng: ChaCha8Rng,
}

impl TournamentProposer {
    pub fn new(pool_size: usize, seed: u64) -> Result<Self> {
        if pool_size == 0 {
            return Err(Error::config("pool size must be >= 1"));
        }
        Ok(TournamentProposer {
            pool_size,
            max_retries: 16,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_max_retries(mut self, n: usize) -> Self {
        self.max_retries = n;
        self
    }

    fn pick_min(
        &mut self,
        scored: Vec<(usize, &(MoveDescriptor, Assignment))>,
    ) -> Option<(MoveDescriptor, Assignment)> {
        let min = scored.iter().map(|(v, _)| *v).min()?;
        let ties: Vec<_> = scored.into_iter().filter(|(v, _)| *v == min).collect();
        ties.choose(&mut self.rng).map(|(_, c)| (*c).clone())
    }
}

impl Proposer for TournamentProposer {
    fn propose(
        &mut self,
        current: &Assignment,
        graph: &ConstraintGraph,
    ) -> Result<(MoveDescriptor, Assignment)> {
        let neighbours = current.insertion_neighbors();
        let limit = graph.violations(current)?;
        for _ in 0..self.max_retries {
            let pool: Vec<_> = neighbours
                .choose_multiple(&mut self.rng, self.pool_size)
                .collect();
            let mut survivors = Vec::with_capacity(pool.len());
            for c in pool {
                let v = graph.violations(&c.1)?;
                if v <= limit {
                    survivors.push((v, c));
                }
            }
            if let Some(pick) = self.pick_min(survivors) {
                return Ok(pick);
            }
        }
        let scored = neighbours
            .iter()
            .map(|c| Ok((graph.violations(&c.1)?, c)))
            .collect::<Result<Vec<_>>>()?;
        self.pick_min(scored)
            .ok_or_else(|| Error::InvalidAssignment(format!("`{current}` has no neighbours")))
    }
}

/// Replays a fixed candidate sequence. Each candidate must be one insertion
/// move away from the state it is proposed from.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProposer {
    moves: VecDeque<Assignment>,
}

impl ScriptedProposer {
    pub fn new(moves: impl IntoIterator<Item = Assignment>) -> Self {
        ScriptedProposer {
            moves: moves.into_iter().collect(),
        }
    }

    /// One assignment per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut moves = VecDeque::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            moves.push_back(
                t.parse()
                    .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?,
            );
        }
        Ok(ScriptedProposer { moves })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn remaining(&self) -> usize {
        self.moves.len()
    }
}

impl Proposer for ScriptedProposer {
    fn propose(
        &mut self,
        current: &Assignment,
        _graph: &ConstraintGraph,
    ) -> Result<(MoveDescriptor, Assignment)> {
        let next = self
            .moves
            .pop_front()
            .ok_or_else(|| Error::config("scripted move list is exhausted"))?;
        match current.insertion_diff(&next)? {
            Some(mv) => Ok((mv, next)),
            None => Err(Error::InvalidAssignment(format!(
                "scripted candidate `{next}` is not one insertion move from `{current}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Config {
    pub schedule: TemperatureSchedule,
    pub pool_size: usize,
    pub n_games_hi: u64,
    /// Master seed; proposer and acceptance streams are derived from it.
    pub seed: u64,
    /// Test id of the start in an earlier phase, if any.
    pub start_test_id: Option<TestId>,
    /// Id given to the first fresh record.
    pub first_test_id: TestId,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Phase2Config {
            schedule: TemperatureSchedule::default(),
            pool_size: 8,
            n_games_hi: 16_000,
            seed: 0,
            start_test_id: None,
            first_test_id: 0,
        }
    }
}

impl Phase2Config {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.pool_size == 0 {
            return Err(Error::config("pool size must be >= 1"));
        }
        if self.n_games_hi == 0 {
            return Err(Error::config("phase-2 game budget must be >= 1"));
        }
        Ok(())
    }

    pub fn tournament(&self) -> Result<TournamentProposer> {
        TournamentProposer::new(self.pool_size, seed::derive(self.seed, seed::PROPOSER))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealState {
    pub current: Assignment,
    pub current_estimate: FitnessEstimate,
    pub current_violations: usize,
    pub best: Assignment,
    pub best_estimate: FitnessEstimate,
    pub best_test_id: TestId,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct Phase2Result {
    pub best: Assignment,
    pub best_estimate: FitnessEstimate,
    pub best_test_id: TestId,
    pub start_estimate: FitnessEstimate,
    pub final_state: AnnealState,
    pub trace: Vec<TraceRecord>,
    /// Violations of the current state after each step, starting value first.
    pub violations: Vec<usize>,
    pub evaluations_used: usize,
    pub games_used: u64,
    pub next_test_id: TestId,
}

/// Runs the annealing phase from `start`.
pub fn run_phase2(
    start: &Assignment,
    oracle: &dyn Oracle,
    graph: &ConstraintGraph,
    cfg: &Phase2Config,
    proposer: &mut dyn Proposer,
) -> Result<Phase2Result> {
    cfg.validate()?;
    let oracle_seed = seed::derive(cfg.seed, seed::ORACLE);
    let mut accept_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, seed::ACCEPTANCE));
    let mut trace: Vec<TraceRecord> = Vec::with_capacity(cfg.schedule.steps + 1);
    let fail = |trace: &Vec<TraceRecord>, e: Error| Error::Stage {
        stage: "phase 2",
        partial_trace: trace.clone(),
        source: Box::new(e),
    };

    let mut next_id = cfg.first_test_id;
    let start_id = match cfg.start_test_id {
        Some(id) => id,
        None => {
            next_id += 1;
            cfg.first_test_id
        }
    };
    let start_est = oracle
        .evaluate(start, cfg.n_games_hi, oracle_seed)
        .map_err(|e| fail(&trace, e))?;
    let mut rec = TraceRecord::new(start_id, 2, start.clone(), &start_est);
    rec.reevaluates = cfg.start_test_id;
    rec.marker = Marker::Star;
    trace.push(rec);

    let mut s = AnnealState {
        current: start.clone(),
        current_estimate: start_est,
        current_violations: graph.violations(start)?,
        best: start.clone(),
        best_estimate: start_est,
        best_test_id: start_id,
        step: 0,
    };
    let mut violations = vec![s.current_violations];

    for k in 0..cfg.schedule.steps {
        s.step = k;
        let t = cfg.schedule.temperature_at(k)?;
        let (_, cand) = proposer
            .propose(&s.current, graph)
            .map_err(|e| fail(&trace, e))?;
        let cand_v = graph.violations(&cand)?;
        let est = oracle
            .evaluate(&cand, cfg.n_games_hi, oracle_seed)
            .map_err(|e| fail(&trace, e))?;
        let id = next_id;
        next_id += 1;

        let delta = s.current_estimate.mean - est.mean;
        let (decision, probability) = if cand_v > s.current_violations {
            (Decision::RejectedInfeasible, 0.0)
        } else if delta <= 0.0 {
            (Decision::Improved, 1.0)
        } else {
            let p = acceptance_probability(s.current_estimate.mean, est.mean, t)?;
            let u: f64 = accept_rng.random();
            if u < p {
                (Decision::AcceptedWorse, p)
            } else {
                (Decision::RejectedWorse, p)
            }
        };

        let mut rec = TraceRecord::new(id, 2, cand.clone(), &est);
        rec.anneal = Some(AnnealNote {
            step: k,
            temperature: t,
            delta,
            probability,
            decision,
            violations: cand_v,
        });
        rec.marker = match decision {
            Decision::AcceptedWorse => Marker::AcceptedWorse,
            Decision::RejectedWorse => Marker::RejectedWorse,
            _ => Marker::None,
        };
        if matches!(decision, Decision::Improved | Decision::AcceptedWorse) {
            if est.mean > s.best_estimate.mean {
                s.best = cand.clone();
                s.best_estimate = est;
                s.best_test_id = id;
                rec.marker = Marker::Star;
            }
            s.current = cand;
            s.current_estimate = est;
            s.current_violations = cand_v;
        }
        violations.push(s.current_violations);
        trace.push(rec);
    }

    Ok(Phase2Result {
        best: s.best.clone(),
        best_estimate: s.best_estimate,
        best_test_id: s.best_test_id,
        start_estimate: start_est,
        evaluations_used: trace.len(),
        games_used: trace.len() as u64 * cfg.n_games_hi,
        final_state: s,
        trace,
        violations,
        next_test_id: next_id,
    })
}
