//! End-to-end check of the shipped reference fixtures.
//!
//! Phase 1 runs against `table1_2.replay`; phase 2 runs against
//! `table3.replay` with candidates taken from `table3.moves`. The outcome is
//! diffed against the reference constraint set, brackets, optima and
//! acceptance probabilities.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annealer::{run_phase2, Phase2Config, ScriptedProposer};
use crate::climber::{run_phase1, Phase1Config};
use crate::constraint::{ConstraintGraph, TestId};
use crate::error::{Error, Result};
use crate::evaluation::{ReplayFixture, ReplayOracle};
use crate::perm::{Assignment, Element};
use crate::trace::{Decision, TraceRecord};

/// Master seed whose acceptance draws accept test 39 and reject tests 41 and 45.
pub const REPLAY_SEED: u64 = 1;

pub const INITIAL: &str = "11 2 3 10 9 6 4 5 7 8";
pub const PHASE1_BEST: &str = "2 3 5 4 8 10 11 9 6 7";
pub const PHASE1_MEAN: f64 = -3.12261;
pub const PHASE2_BEST: &str = "5 4 2 3 7 6 8 10 11 9";
pub const PHASE2_MEAN: f64 = -2.95471;

pub const CONSTRAINTS: [(Element, Element); 12] = [
    (10, 11),
    (11, 9),
    (2, 3),
    (3, 10),
    (3, 6),
    (6, 10),
    (4, 10),
    (5, 4),
    (4, 7),
    (7, 10),
    (4, 8),
    (8, 10),
];

/// Below-gate pairs as `(fitter order, tests)`.
pub const BRACKETS: [((Element, Element), (TestId, TestId)); 4] = [
    ((10, 2), (6, 7)),
    ((9, 6), (3, 11)),
    ((3, 4), (17, 18)),
    ((3, 5), (21, 22)),
];

/// `(test id, probability, decision)` for the worse candidates.
pub const ACCEPTANCE: [(TestId, f64, Decision); 3] = [
    (39, 0.90833, Decision::AcceptedWorse),
    (41, 0.25340, Decision::RejectedWorse),
    (45, 0.36825, Decision::RejectedWorse),
];

/// Value listed for test 41 in the reference table.
pub const LISTED_TEST41: f64 = 0.31854;

pub const TOLERANCE: f64 = 5e-6;

pub const PHASE1_EVALUATIONS: usize = 36;
pub const PHASE2_EVALUATIONS: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub phase1: ReplayFixture,
    pub phase2: ReplayFixture,
    pub moves: String,
}

impl FixtureSet {
    /// Reads `table1_2.replay`, `table3.replay` and `table3.moves` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(FixtureSet {
            phase1: ReplayFixture::load(&dir.join("table1_2.replay"))?,
            phase2: ReplayFixture::load(&dir.join("table3.replay"))?,
            moves: std::fs::read_to_string(dir.join("table3.moves")).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("table3.moves: {e}")))
            })?,
        })
    }

    /// The fixtures compiled into the crate.
    pub fn shipped() -> Self {
        FixtureSet {
            phase1: ReplayFixture::parse(include_str!("../../fixtures/table1_2.replay"))
                .expect("shipped fixture parses"),
            phase2: ReplayFixture::parse(include_str!("../../fixtures/table3.replay"))
                .expect("shipped fixture parses"),
            moves: include_str!("../../fixtures/table3.moves").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub constraints_match: bool,
    pub values_match: bool,
    /// Named differences from the reference outcome.
    pub mismatches: Vec<String>,
    /// Known inconsistencies in the reference data itself.
    pub discrepancies: Vec<String>,
    pub constraints: Vec<String>,
    pub phase1_best: Assignment,
    pub phase1_mean: f64,
    pub phase2_best: Assignment,
    pub phase2_mean: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl ReplayReport {
    pub fn all_match(&self) -> bool {
        self.constraints_match && self.values_match
    }
}

fn a(s: &str) -> Assignment {
    s.parse().expect("reference assignments are valid")
}

pub fn replay_verify(fx: &FixtureSet) -> Result<ReplayReport> {
    let mut mismatches = Vec::new();
    let mut discrepancies = Vec::new();

    let o1 = ReplayOracle::new("table1_2", fx.phase1.clone());
    let p1cfg = Phase1Config {
        seed: REPLAY_SEED,
        ..Default::default()
    };
    let p1 = run_phase1(&a(INITIAL), &o1, ConstraintGraph::new(), &p1cfg)?;

    let got: BTreeSet<_> = p1.graph.edges().map(|c| c.key()).collect();
    let want: BTreeSet<_> = CONSTRAINTS.into_iter().collect();
    for (u, v) in want.difference(&got) {
        mismatches.push(format!("missing constraint {u} < {v}"));
    }
    for (u, v) in got.difference(&want) {
        mismatches.push(format!("unexpected constraint {u} < {v}"));
    }
    let got_b: BTreeSet<_> = p1
        .not_induced()
        .map(|s| (s.note.constraint.key(), s.tests()))
        .collect();
    let want_b: BTreeSet<_> = BRACKETS.into_iter().collect();
    for ((u, v), t) in want_b.difference(&got_b) {
        mismatches.push(format!("missing bracket [{u} < {v}] at tests {t:?}"));
    }
    for ((u, v), t) in got_b.difference(&want_b) {
        mismatches.push(format!("unexpected bracket [{u} < {v}] at tests {t:?}"));
    }
    let constraints_match = mismatches.is_empty();

    let mut values = Vec::new();
    if p1.best != a(PHASE1_BEST) || (p1.best_estimate.mean - PHASE1_MEAN).abs() > TOLERANCE {
        values.push(format!(
            "phase-1 best `{}` at {} (expected `{PHASE1_BEST}` at {PHASE1_MEAN})",
            p1.best, p1.best_estimate.mean
        ));
    }
    if p1.evaluations_used != PHASE1_EVALUATIONS {
        values.push(format!(
            "phase 1 evaluated {} assignments (expected {PHASE1_EVALUATIONS})",
            p1.evaluations_used
        ));
    }

    let o2 = ReplayOracle::new("table3", fx.phase2.clone());
    let p2cfg = Phase2Config {
        seed: REPLAY_SEED,
        start_test_id: Some(p1.best_test_id),
        first_test_id: p1.next_test_id,
        ..Default::default()
    };
    let mut proposer = ScriptedProposer::parse(&fx.moves)?;
    let p2 = run_phase2(&p1.best, &o2, &p1.graph, &p2cfg, &mut proposer)?;

    if p2.best != a(PHASE2_BEST) || (p2.best_estimate.mean - PHASE2_MEAN).abs() > TOLERANCE {
        values.push(format!(
            "phase-2 best `{}` at {} (expected `{PHASE2_BEST}` at {PHASE2_MEAN})",
            p2.best, p2.best_estimate.mean
        ));
    }
    if p2.evaluations_used != PHASE2_EVALUATIONS {
        values.push(format!(
            "phase 2 evaluated {} assignments (expected {PHASE2_EVALUATIONS})",
            p2.evaluations_used
        ));
    }
    for (id, p, decision) in ACCEPTANCE {
        match p2
            .trace
            .iter()
            .find(|r| r.test_id == id)
            .and_then(|r| r.anneal)
        {
            Some(n) => {
                if (n.probability - p).abs() > TOLERANCE || n.decision != decision {
                    values.push(format!(
                        "test {id}: probability {:.5} {:?} (expected {p} {decision:?})",
                        n.probability, n.decision
                    ));
                }
                if id == 41 && (n.probability - LISTED_TEST41).abs() > TOLERANCE {
                    discrepancies.push(format!(
                        "test 41: exp(-{:.5}/{:.2}) = {:.5}; the reference table lists \
                         {LISTED_TEST41}, which matches the previous step's temperature 0.06",
                        n.delta, n.temperature, n.probability
                    ));
                }
            }
            None => values.push(format!("test {id}: no annealing record")),
        }
    }
    let values_match = values.is_empty();
    mismatches.extend(values);

    Ok(ReplayReport {
        constraints_match,
        values_match,
        mismatches,
        discrepancies,
        constraints: p1
            .graph
            .edges()
            .map(|c| format!("{} < {}", c.before, c.after))
            .collect(),
        phase1_best: p1.best,
        phase1_mean: p1.best_estimate.mean,
        phase2_best: p2.best,
        phase2_mean: p2.best_estimate.mean,
        trace: p1.trace.into_iter().chain(p2.trace).collect(),
    })
}
