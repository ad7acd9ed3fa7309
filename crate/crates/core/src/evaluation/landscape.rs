//! Hidden fitness landscapes for synthetic and exact oracles.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{Assignment, Element};

use super::{FitnessEstimate, Oracle};

/// A noise-free objective over assignments (higher is better).
pub trait Landscape: Send + Sync + std::fmt::Debug {
    fn true_fitness(&self, x: &Assignment) -> Result<f64>;

    /// The element set the landscape is defined over, in a canonical order.
    fn elements(&self) -> Vec<Element>;
}

/// `mu(x) = -sum_e w_e * |rank_x(e) - rank_target(e)|`, maximal (zero) at the
/// target permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLandscape {
    target: Assignment,
    weights: BTreeMap<Element, f64>,
}

impl TargetLandscape {
    pub fn new(target: Assignment, weights: BTreeMap<Element, f64>) -> Result<Self> {
        if let Some(e) = weights.keys().find(|&&e| !target.contains(e)) {
            return Err(Error::config(format!(
                "weight given for element {e} which is not in the target"
            )));
        }
        if let Some((e, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::config(format!(
                "weight {w} for element {e} must be > 0"
            )));
        }
        let weights = target
            .as_slice()
            .iter()
            .map(|&e| (e, weights.get(&e).copied().unwrap_or(1.0)))
            .collect();
        Ok(TargetLandscape { target, weights })
    }

    pub fn uniform(target: Assignment) -> Self {
        Self::new(target, BTreeMap::new()).expect("no weights to validate")
    }

    pub fn target(&self) -> &Assignment {
        &self.target
    }

    pub fn weight(&self, e: Element) -> f64 {
        self.weights[&e]
    }
}

impl Landscape for TargetLandscape {
    fn true_fitness(&self, x: &Assignment) -> Result<f64> {
        if x.len() != self.target.len() {
            return Err(Error::IncompatibleAssignments(format!(
                "`{x}` has {} elements, landscape has {}",
                x.len(),
                self.target.len()
            )));
        }
        let ranks = x.rank_table();
        let mut total = 0.0;
        for (r, &e) in self.target.as_slice().iter().enumerate() {
            let got = *ranks.get(&e).ok_or(Error::ElementNotFound(e))?;
            total += self.weights[&e] * (got as f64 - (r + 1) as f64).abs();
        }
        Ok(0.0 - total)
    }

    fn elements(&self) -> Vec<Element> {
        let mut v = self.target.as_slice().to_vec();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandscapeKind {
    TargetDisplacement,
}

/// Landscape document: `{"kind": "target-displacement", "target": [...],
/// "weights": {"3": 0.5}, "sigma": 1.9}`. Missing weights default to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub kind: LandscapeKind,
    pub target: Vec<Element>,
    #[serde(default)]
    pub weights: BTreeMap<Element, f64>,
    /// Per-game noise standard deviation.
    #[serde(default)]
    pub sigma: f64,
}

impl LandscapeSpec {
    pub fn build(&self) -> Result<Arc<dyn Landscape>> {
        match self.kind {
            LandscapeKind::TargetDisplacement => Ok(Arc::new(TargetLandscape::new(
                Assignment::new(self.target.clone())?,
                self.weights.clone(),
            )?)),
        }
    }
}

/// Returns the landscape value with zero standard error.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    landscape: Arc<dyn Landscape>,
}

impl ExactOracle {
    pub fn new(landscape: Arc<dyn Landscape>) -> Self {
        ExactOracle { landscape }
    }

    pub fn landscape(&self) -> &Arc<dyn Landscape> {
        &self.landscape
    }
}

impl Oracle for ExactOracle {
    fn id(&self) -> String {
        format!("exact:{:?}", self.landscape)
    }

    fn evaluate(&self, x: &Assignment, _n_games: u64, _seed: u64) -> Result<FitnessEstimate> {
        Ok(FitnessEstimate::exact(self.landscape.true_fitness(x)?))
    }
}
