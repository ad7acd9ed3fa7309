//! DOT export of induced constraint graphs.

use std::path::Path;

use crate::constraint::ConstraintGraph;
use crate::error::Result;
use crate::trace::{InductionOutcome, TraceRecord};

/// DOT text for the transitive reduction, or for every core edge with `full`.
pub fn dag_text(graph: &ConstraintGraph, full: bool) -> String {
    if full {
        graph.to_dot()
    } else {
        graph.transitive_reduction().to_dot()
    }
}

pub fn export_dag(graph: &ConstraintGraph, path: &Path, full: bool) -> Result<()> {
    std::fs::write(path, dag_text(graph, full))?;
    Ok(())
}

/// Rebuilds the graph from the `added` induction notes of a trace.
pub fn graph_from_trace(records: &[TraceRecord]) -> Result<ConstraintGraph> {
    let mut g = ConstraintGraph::new();
    if let Some(first) = records.first() {
        for &e in first.assignment.as_slice() {
            g.add_node(e);
        }
    }
    let mut added: Vec<_> = records
        .iter()
        .flat_map(|r| &r.inductions)
        .filter(|n| n.outcome == InductionOutcome::Added)
        .map(|n| n.constraint.clone())
        .collect();
    // notes sit on the later test of their pair; restore induction order
    added.sort_by_key(|c| c.evidence.map(|e| e.tests));
    for c in added {
        g.try_add(c)?;
    }
    Ok(g)
}
