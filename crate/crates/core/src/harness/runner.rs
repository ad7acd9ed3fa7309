//! Two-phase runs and their output files.
//!
//! An output directory receives `trace.jsonl`, `trace.csv`,
//! `constraints.edges`, `constraints.dot` and `summary.json`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::annealer::{run_phase2, Phase2Result, Proposer, ScriptedProposer};
use crate::climber::{run_phase1, Phase1Result};
use crate::constraint::{ConstraintGraph, TestId};
use crate::error::{Error, Result};
use crate::evaluation::Oracle;
use crate::perm::Assignment;
use crate::trace::{self, TraceRecord, TraceWriter};

use super::config::RunConfig;
use super::dag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub best: Assignment,
    pub best_mean: f64,
    pub best_se: f64,
    pub best_test_id: TestId,
    pub best_violations: usize,
    pub phase1_best: Assignment,
    pub phase1_mean: f64,
    pub constraints: Vec<String>,
    pub not_induced: usize,
    pub phase1_evaluations: usize,
    pub phase2_evaluations: usize,
    /// Games over non-cached evaluations.
    pub phase1_games: u64,
    pub phase2_games: u64,
    pub total_games: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub phase1: Phase1Result,
    pub phase2: Phase2Result,
    pub summary: RunSummary,
}

impl Experiment {
    pub fn trace(&self) -> impl Iterator<Item = &TraceRecord> {
        self.phase1.trace.iter().chain(&self.phase2.trace)
    }
}

fn build_oracles(cfg: &RunConfig) -> Result<(Arc<dyn Oracle>, Arc<dyn Oracle>)> {
    let o1 = cfg.oracle.build(&cfg.base_dir)?;
    let o2 = match &cfg.phase2_oracle {
        Some(spec) => spec.build(&cfg.base_dir)?,
        None => o1.clone(),
    };
    Ok((o1, o2))
}

/// Runs both phases. With `out`, traces are written as each phase finishes,
/// including the partial trace of a failing phase.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<Experiment> {
    cfg.validate()?;
    let started = Instant::now();
    let p1cfg = cfg.phase1_config()?;
    let mut p2cfg = cfg.phase2_config()?;
    let mut proposer: Box<dyn Proposer> = match &cfg.phase2.script_moves {
        Some(p) => Box::new(ScriptedProposer::load(&cfg.resolve(p))?),
        None => Box::new(p2cfg.tournament()?),
    };
    let (o1, o2) = build_oracles(cfg)?;

    let mut writer = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(TraceWriter::create(&dir.join("trace.jsonl"))?)
        }
        None => None,
    };
    let mut persist = |records: &[TraceRecord]| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            w.write_all(records)?;
        }
        Ok(())
    };
    let persist_partial = |e: Error, persist: &mut dyn FnMut(&[TraceRecord]) -> Result<()>| {
        if let Error::Stage { partial_trace, .. } = &e {
            let _ = persist(partial_trace);
        }
        e
    };

    let p1 = run_phase1(&cfg.initial, o1.as_ref(), ConstraintGraph::new(), &p1cfg)
        .map_err(|e| persist_partial(e, &mut persist))?;
    persist(&p1.trace)?;

    p2cfg.start_test_id = Some(p1.best_test_id);
    p2cfg.first_test_id = p1.next_test_id;
    let p2 = run_phase2(&p1.best, o2.as_ref(), &p1.graph, &p2cfg, proposer.as_mut())
        .map_err(|e| persist_partial(e, &mut persist))?;
    persist(&p2.trace)?;

    let phase1_games = p1.games_used;
    let summary = RunSummary {
        seed: p1cfg.seed,
        best: p2.best.clone(),
        best_mean: p2.best_estimate.mean,
        best_se: p2.best_estimate.se,
        best_test_id: p2.best_test_id,
        best_violations: p1.graph.violations(&p2.best)?,
        phase1_best: p1.best.clone(),
        phase1_mean: p1.best_estimate.mean,
        constraints: edge_strings(&p1.graph),
        not_induced: p1.not_induced().count(),
        phase1_evaluations: p1.evaluations_used,
        phase2_evaluations: p2.evaluations_used,
        phase1_games,
        phase2_games: p2.games_used,
        total_games: phase1_games + p2.games_used,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    let exp = Experiment {
        phase1: p1,
        phase2: p2,
        summary,
    };
    if let Some(dir) = out {
        write_outputs(&exp, dir)?;
    }
    Ok(exp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub seed: u64,
    pub best: Assignment,
    pub best_mean: f64,
    pub best_se: f64,
    pub best_test_id: TestId,
    pub best_violations: usize,
    pub constraints: Vec<String>,
    pub evaluations: usize,
    pub games: u64,
}

fn write_phase(
    dir: &Path,
    records: &[TraceRecord],
    graph: &ConstraintGraph,
    summary: &PhaseSummary,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    TraceWriter::create(&dir.join("trace.jsonl"))?.write_all(records)?;
    std::fs::write(dir.join("trace.csv"), trace::to_csv(records))?;
    std::fs::write(dir.join("constraints.edges"), graph.to_edge_list())?;
    dag::export_dag(graph, &dir.join("constraints.dot"), false)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(summary)? + "\n",
    )?;
    Ok(())
}

fn edge_strings(g: &ConstraintGraph) -> Vec<String> {
    g.edges()
        .map(|c| format!("{} < {}", c.before, c.after))
        .collect()
}

/// Runs the first phase alone.
pub fn run_phase1_only(
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<(Phase1Result, PhaseSummary)> {
    cfg.validate()?;
    let p1cfg = cfg.phase1_config()?;
    let (o1, _) = build_oracles(cfg)?;
    let p1 = run_phase1(&cfg.initial, o1.as_ref(), ConstraintGraph::new(), &p1cfg)?;
    let summary = PhaseSummary {
        seed: p1cfg.seed,
        best: p1.best.clone(),
        best_mean: p1.best_estimate.mean,
        best_se: p1.best_estimate.se,
        best_test_id: p1.best_test_id,
        best_violations: p1.graph.violations(&p1.best)?,
        constraints: edge_strings(&p1.graph),
        evaluations: p1.evaluations_used,
        games: p1.games_used,
    };
    if let Some(dir) = out {
        write_phase(dir, &p1.trace, &p1.graph, &summary)?;
    }
    Ok((p1, summary))
}

/// Runs the second phase alone from `start` under `graph`.
pub fn run_phase2_only(
    cfg: &RunConfig,
    graph: &ConstraintGraph,
    start: &Assignment,
    out: Option<&Path>,
) -> Result<(Phase2Result, PhaseSummary)> {
    cfg.validate()?;
    let p2cfg = cfg.phase2_config()?;
    let mut proposer: Box<dyn Proposer> = match &cfg.phase2.script_moves {
        Some(p) => Box::new(ScriptedProposer::load(&cfg.resolve(p))?),
        None => Box::new(p2cfg.tournament()?),
    };
    let (_, o2) = build_oracles(cfg)?;
    let p2 = run_phase2(start, o2.as_ref(), graph, &p2cfg, proposer.as_mut())?;
    let summary = PhaseSummary {
        seed: p2cfg.seed,
        best: p2.best.clone(),
        best_mean: p2.best_estimate.mean,
        best_se: p2.best_estimate.se,
        best_test_id: p2.best_test_id,
        best_violations: graph.violations(&p2.best)?,
        constraints: edge_strings(graph),
        evaluations: p2.evaluations_used,
        games: p2.games_used,
    };
    if let Some(dir) = out {
        write_phase(dir, &p2.trace, graph, &summary)?;
    }
    Ok((p2, summary))
}

/// Writes everything except `trace.jsonl`, which the run streams.
fn write_outputs(exp: &Experiment, dir: &Path) -> Result<()> {
    let records: Vec<TraceRecord> = exp.trace().cloned().collect();
    std::fs::write(dir.join("trace.csv"), trace::to_csv(&records))?;
    std::fs::write(
        dir.join("constraints.edges"),
        exp.phase1.graph.to_edge_list(),
    )?;
    dag::export_dag(&exp.phase1.graph, &dir.join("constraints.dot"), false)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&exp.summary)? + "\n",
    )?;
    Ok(())
}
