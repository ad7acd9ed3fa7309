//! Exhaustive search over small permutation spaces.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraint::ConstraintGraph;
use crate::error::{Error, Result};
use crate::evaluation::Landscape;
use crate::perm::{Assignment, Element};

/// Largest size searched exhaustively (9! = 362880 candidates).
pub const MAX_N: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteResult {
    pub best: Assignment,
    pub mean: f64,
    /// Candidates evaluated: all permutations, or all linear extensions of the graph.
    pub candidates: u64,
}

/// Maximizes the landscape over every permutation, or over the linear
/// extensions of `graph` when given. Ties go to the lexicographically
/// smallest assignment.
pub fn brute_force_optimum(
    landscape: &dyn Landscape,
    graph: Option<&ConstraintGraph>,
) -> Result<BruteResult> {
    let elements = landscape.elements();
    let n = elements.len();
    if n > MAX_N {
        return Err(Error::config(format!(
            "exhaustive search over {n} elements is refused (limit {MAX_N}); \
             use the two-phase optimizer instead"
        )));
    }
    let mut preds: BTreeMap<Element, BTreeSet<Element>> =
        elements.iter().map(|&e| (e, BTreeSet::new())).collect();
    if let Some(g) = graph {
        for c in g.edges() {
            for e in [c.before, c.after] {
                if !preds.contains_key(&e) {
                    return Err(Error::ElementNotFound(e));
                }
            }
            preds.get_mut(&c.after).expect("checked").insert(c.before);
        }
    }

    let mut search = Search {
        landscape,
        preds: &preds,
        prefix: Vec::with_capacity(n),
        placed: BTreeSet::new(),
        best: None,
        candidates: 0,
    };
    search.run(&elements)?;
    let (best, mean) = search
        .best
        .ok_or_else(|| Error::config("the constraint graph admits no assignment"))?;
    Ok(BruteResult {
        best,
        mean,
        candidates: search.candidates,
    })
}

struct Search<'a> {
    landscape: &'a dyn Landscape,
    preds: &'a BTreeMap<Element, BTreeSet<Element>>,
    prefix: Vec<Element>,
    placed: BTreeSet<Element>,
    best: Option<(Assignment, f64)>,
    candidates: u64,
}

impl Search<'_> {
    /// Depth-first in ascending element order, so leaves arrive lexicographically.
    fn run(&mut self, elements: &[Element]) -> Result<()> {
        if self.prefix.len() == elements.len() {
            let x = Assignment::new(self.prefix.clone())?;
            let f = self.landscape.true_fitness(&x)?;
            self.candidates += 1;
            if self.best.as_ref().is_none_or(|(_, b)| f > *b) {
                self.best = Some((x, f));
            }
            return Ok(());
        }
        for &e in elements {
            if self.placed.contains(&e) || !self.preds[&e].is_subset(&self.placed) {
                continue;
            }
            self.placed.insert(e);
            self.prefix.push(e);
            self.run(elements)?;
            self.prefix.pop();
            self.placed.remove(&e);
        }
        Ok(())
    }
}
