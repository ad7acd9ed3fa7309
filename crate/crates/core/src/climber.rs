//! First phase: insertion-sweep hill climbing with constraint induction.
//!
//! Each element in turn is swept through ranks `1, 2, ...` of the incumbent.
//! A sweep stops at the first interior peak (the element's own rank counts as
//! left context), and the adjacent-transposition pairs around the sweep's best
//! rank are turned into ranking constraints when their fitness gap clears the
//! noise threshold.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintGraph, Evidence, RankConstraint, TestId};
use crate::error::{Error, Result};
use crate::evaluation::{significant_difference, FitnessEstimate, Oracle};
use crate::perm::{Assignment, Element};
use crate::seed;
use crate::trace::{InductionNote, InductionOutcome, Marker, TraceRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InductionScope {
    /// The two pairs around the sweep's best rank.
    #[default]
    Flanking,
    /// Every consecutive pair of tested ranks.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Config {
    pub n_games: u64,
    /// Budget for the initial assignment.
    pub n_games_baseline: u64,
    pub tau: f64,
    /// Defaults to the order of appearance in the initial assignment.
    pub element_order: Option<Vec<Element>>,
    pub scope: InductionScope,
    /// Master seed; the oracle seed is derived from it.
    pub seed: u64,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            n_games: 1000,
            n_games_baseline: 2000,
            tau: 1.0,
            element_order: None,
            scope: InductionScope::Flanking,
            seed: 0,
        }
    }
}

impl Phase1Config {
    pub fn validate(&self, x0: &Assignment) -> Result<()> {
        if self.n_games == 0 || self.n_games_baseline == 0 {
            return Err(Error::config("phase-1 game budgets must be >= 1"));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if let Some(order) = &self.element_order {
            let mut a = order.clone();
            let mut b = x0.as_slice().to_vec();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(Error::config(
                    "element_order must list every element of the initial assignment once",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestedPoint {
    pub assignment: Assignment,
    pub estimate: FitnessEstimate,
    pub test_id: TestId,
    /// Evaluated during this sweep, as opposed to reused.
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepState {
    pub element: Element,
    pub baseline: Assignment,
    /// Rank of the element in the baseline.
    pub home_rank: usize,
    pub tested: BTreeMap<usize, TestedPoint>,
    /// Rank whose evaluation triggered the peak-stop rule.
    pub stop_rank: Option<usize>,
    pub best_rank: usize,
}

impl SweepState {
    pub fn best(&self) -> &TestedPoint {
        &self.tested[&self.best_rank]
    }

    /// Highest-mean rank among those evaluated fresh in this sweep.
    pub fn best_fresh_rank(&self) -> Option<usize> {
        argmax(self.tested.iter().filter(|(_, p)| p.fresh))
    }
}

fn argmax<'a>(it: impl Iterator<Item = (&'a usize, &'a TestedPoint)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&r, p) in it {
        if best.is_none_or(|(_, m)| p.estimate.mean > m) {
            best = Some((r, p.estimate.mean));
        }
    }
    best.map(|(r, _)| r)
}

/// One comparison between consecutive sweep ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub element: Element,
    pub ranks: (usize, usize),
    pub note: InductionNote,
}

impl Submission {
    pub fn tests(&self) -> (TestId, TestId) {
        self.note
            .constraint
            .evidence
            .expect("submissions always carry evidence")
            .tests
    }
}

#[derive(Debug, Clone)]
pub struct Phase1Result {
    pub best: Assignment,
    pub best_estimate: FitnessEstimate,
    pub best_test_id: TestId,
    pub graph: ConstraintGraph,
    pub trace: Vec<TraceRecord>,
    pub sweeps: Vec<SweepState>,
    pub submissions: Vec<Submission>,
    /// Fresh evaluations performed.
    pub evaluations_used: usize,
    pub games_used: u64,
    /// Next free test id.
    pub next_test_id: TestId,
}

impl Phase1Result {
    pub fn not_induced(&self) -> impl Iterator<Item = &Submission> {
        self.submissions
            .iter()
            .filter(|s| s.note.outcome == InductionOutcome::NotInduced)
    }
}

/// Phase state shared across sweeps. `memo` spans budget tiers.
struct Climber<'a> {
    oracle: &'a dyn Oracle,
    cfg: &'a Phase1Config,
    oracle_seed: u64,
    memo: HashMap<Assignment, (FitnessEstimate, TestId)>,
    trace: Vec<TraceRecord>,
    record_index: HashMap<TestId, usize>,
    next_id: TestId,
    running_max: f64,
    games: u64,
}

impl<'a> Climber<'a> {
    fn evaluate(
        &mut self,
        x: &Assignment,
        n_games: u64,
    ) -> Result<(FitnessEstimate, TestId, bool)> {
        if let Some(&(e, id)) = self.memo.get(x) {
            return Ok((e, id, false));
        }
        let est = self
            .oracle
            .evaluate(x, n_games, self.oracle_seed)
            .map_err(|e| self.stage_error(e))?;
        let id = self.next_id;
        self.next_id += 1;
        self.games += n_games;
        self.memo.insert(x.clone(), (est, id));
        let mut rec = TraceRecord::new(id, 1, x.clone(), &est);
        if !self.trace.is_empty() && est.mean > self.running_max {
            rec.marker = Marker::Star;
        }
        self.running_max = self.running_max.max(est.mean);
        self.record_index.insert(id, self.trace.len());
        self.trace.push(rec);
        Ok((est, id, true))
    }

    fn stage_error(&self, e: Error) -> Error {
        Error::Stage {
            stage: "phase 1",
            partial_trace: self.trace.clone(),
            source: Box::new(e),
        }
    }

    fn sweep(&mut self, element: Element, baseline: &Assignment) -> Result<SweepState> {
        let n = baseline.len();
        let home_rank = baseline.rank_of(element)?.get();
        let mut tested: BTreeMap<usize, TestedPoint> = BTreeMap::new();
        let mut stop_rank = None;
        for r in 1..=n {
            let x = baseline.insertion_move(element, r)?;
            let (estimate, test_id, fresh) = self.evaluate(&x, self.cfg.n_games)?;
            tested.insert(
                r,
                TestedPoint {
                    assignment: x,
                    estimate,
                    test_id,
                    fresh,
                },
            );
            if r >= 2 && peak_behind(&tested, r, home_rank) {
                stop_rank = Some(r);
                break;
            }
        }
        let best_rank = argmax(tested.iter()).expect("at least one rank tested");
        Ok(SweepState {
            element,
            baseline: baseline.clone(),
            home_rank,
            tested,
            stop_rank,
            best_rank,
        })
    }

    fn annotate(&mut self, sub: &Submission) {
        let (a, b) = sub.tests();
        if let Some(&i) = self.record_index.get(&a.max(b)) {
            self.trace[i].inductions.push(sub.note.clone());
        }
    }
}

/// Peak-stop rule: having just evaluated rank `r`, stop if `r - 1` is a local
/// peak, i.e. `mean(r) < mean(r - 1)` and either `r - 1` is the element's own
/// rank or `mean(r - 2) < mean(r - 1)`.
fn peak_behind(tested: &BTreeMap<usize, TestedPoint>, r: usize, home_rank: usize) -> bool {
    let m = |k: usize| tested[&k].estimate.mean;
    let prev = r - 1;
    if m(r) >= m(prev) {
        return false;
    }
    prev == home_rank || (prev >= 2 && m(prev - 1) < m(prev))
}

/// Evaluates insertions of `element` into `baseline` at ascending ranks until
/// the peak-stop rule fires. Previously evaluated assignments are reused.
pub fn run_sweep(
    element: Element,
    baseline: &Assignment,
    baseline_estimate: FitnessEstimate,
    oracle: &dyn Oracle,
    cfg: &Phase1Config,
) -> Result<SweepState> {
    let mut c = Climber {
        oracle,
        cfg,
        oracle_seed: seed::derive(cfg.seed, seed::ORACLE),
        memo: HashMap::new(),
        trace: Vec::new(),
        record_index: HashMap::new(),
        next_id: 1,
        running_max: baseline_estimate.mean,
        games: 0,
    };
    c.memo.insert(baseline.clone(), (baseline_estimate, 0));
    c.sweep(element, baseline)
}

fn compare(s: &SweepState, lo: usize, hi: usize, tau: f64) -> Option<(RankConstraint, bool)> {
    let a = s.tested.get(&lo)?;
    let b = s.tested.get(&hi)?;
    let winner = if b.estimate.mean > a.estimate.mean {
        b
    } else {
        a
    };
    let gap = (a.estimate.mean - b.estimate.mean).abs();
    let threshold = tau * a.estimate.se.max(b.estimate.se);
    let ids = (a.test_id.min(b.test_id), a.test_id.max(b.test_id));
    let before = winner.assignment.as_slice()[lo - 1];
    let after = winner.assignment.as_slice()[lo];
    let c = RankConstraint::new(before, after).with_evidence(Evidence {
        tests: ids,
        gap,
        threshold,
    });
    Some((c, significant_difference(&a.estimate, &b.estimate, tau)))
}

/// Turns the neighbourhood of a finished sweep into constraint submissions.
///
/// Under [`InductionScope::Flanking`] the pairs `(best - 1, best)` and
/// `(best, best + 1)` are considered. Below-threshold pairs flanking the
/// best freshly evaluated rank are also reported as not induced, but never
/// submitted to the graph.
pub fn induce_from_sweep(
    s: &SweepState,
    graph: &mut ConstraintGraph,
    tau: f64,
    scope: InductionScope,
) -> Result<Vec<Submission>> {
    let flank = |r: usize| [(r.saturating_sub(1), r), (r, r + 1)];
    let primary: Vec<(usize, usize)> = match scope {
        InductionScope::Flanking => flank(s.best_rank).to_vec(),
        InductionScope::AllPairs => s.tested.keys().map(|&r| (r, r + 1)).collect(),
    };
    let mut out = Vec::new();
    for &(lo, hi) in &primary {
        if lo == 0 {
            continue;
        }
        let Some((c, significant)) = compare(s, lo, hi, tau) else {
            continue;
        };
        let outcome = if significant {
            graph.try_add(c.clone())?.into()
        } else {
            InductionOutcome::NotInduced
        };
        out.push(Submission {
            element: s.element,
            ranks: (lo, hi),
            note: InductionNote {
                constraint: c,
                outcome,
            },
        });
    }
    if let Some(f) = s.best_fresh_rank().filter(|&f| f != s.best_rank) {
        for (lo, hi) in flank(f) {
            if lo == 0 || primary.contains(&(lo, hi)) {
                continue;
            }
            if let Some((c, false)) = compare(s, lo, hi, tau) {
                out.push(Submission {
                    element: s.element,
                    ranks: (lo, hi),
                    note: InductionNote {
                        constraint: c,
                        outcome: InductionOutcome::NotInduced,
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Sweeps every element once, inducing constraints along the way.
pub fn run_phase1(
    x0: &Assignment,
    oracle: &dyn Oracle,
    graph: ConstraintGraph,
    cfg: &Phase1Config,
) -> Result<Phase1Result> {
    cfg.validate(x0)?;
    let mut graph = graph;
    for &e in x0.as_slice() {
        graph.add_node(e);
    }
    let mut c = Climber {
        oracle,
        cfg,
        oracle_seed: seed::derive(cfg.seed, seed::ORACLE),
        memo: HashMap::new(),
        trace: Vec::new(),
        record_index: HashMap::new(),
        next_id: 0,
        running_max: f64::NEG_INFINITY,
        games: 0,
    };
    let (e0, id0, _) = c.evaluate(x0, cfg.n_games_baseline)?;
    let mut incumbent = (x0.clone(), e0, id0);

    let order = cfg
        .element_order
        .clone()
        .unwrap_or_else(|| x0.as_slice().to_vec());
    let mut sweeps = Vec::with_capacity(order.len());
    let mut submissions = Vec::new();
    for element in order {
        let s = c.sweep(element, &incumbent.0)?;
        let subs = induce_from_sweep(&s, &mut graph, cfg.tau, cfg.scope)?;
        for sub in &subs {
            c.annotate(sub);
        }
        submissions.extend(subs);
        let best = s.best();
        if best.estimate.mean > incumbent.1.mean {
            incumbent = (best.assignment.clone(), best.estimate, best.test_id);
        }
        sweeps.push(s);
    }

    Ok(Phase1Result {
        best: incumbent.0,
        best_estimate: incumbent.1,
        best_test_id: incumbent.2,
        graph,
        evaluations_used: c.trace.len(),
        games_used: c.games,
        next_test_id: c.next_id,
        trace: c.trace,
        sweeps,
        submissions,
    })
}
