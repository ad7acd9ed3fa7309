use std::sync::Arc;

use crate::error::{Error, Result};
use crate::perm::Assignment;
use crate::seed;

use super::{FitnessEstimate, Oracle};

/// Weighted average over a pool of opponents.
///
/// `mean = sum(w_k * mean_k) / sum(w)`, `se = sqrt(sum((w_k / sum(w))^2 * se_k^2))`,
/// treating the members as independent.
#[derive(Debug, Clone)]
pub struct PoolOracle {
    members: Vec<(Arc<dyn Oracle>, f64)>,
}

impl PoolOracle {
    pub fn new(members: Vec<(Arc<dyn Oracle>, f64)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("opponent pool is empty"));
        }
        if let Some((_, w)) = members.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config(format!("pool weight {w} must be > 0")));
        }
        Ok(PoolOracle { members })
    }
}

/// Combines member estimates with the given weights.
pub fn combine(parts: &[(FitnessEstimate, f64)]) -> Result<FitnessEstimate> {
    if parts.is_empty() {
        return Err(Error::config("opponent pool is empty"));
    }
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    let mean = parts.iter().map(|(e, w)| w * e.mean).sum::<f64>() / total;
    let var: f64 = parts
        .iter()
        .map(|(e, w)| (w / total).powi(2) * e.se * e.se)
        .sum();
    Ok(FitnessEstimate {
        mean,
        se: var.sqrt(),
        n_games: parts.iter().map(|(e, _)| e.n_games).sum(),
    })
}

impl Oracle for PoolOracle {
    fn id(&self) -> String {
        let inner: Vec<String> = self
            .members
            .iter()
            .map(|(o, w)| format!("{w}*{}", o.id()))
            .collect();
        format!("pool[{}]", inner.join(","))
    }

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate> {
        let parts = self
            .members
            .iter()
            .enumerate()
            .map(|(k, (o, w))| {
                let s = seed::derive(seed, &format!("pool-{k}"));
                Ok((o.evaluate(x, n_games, s)?, *w))
            })
            .collect::<Result<Vec<_>>>()?;
        combine(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Returns a fixed estimate for every assignment.
    #[derive(Debug)]
    struct Fixed(FitnessEstimate);

    impl Oracle for Fixed {
        fn id(&self) -> String {
            format!("fixed:{:?}", self.0)
        }
        fn evaluate(&self, _: &Assignment, _: u64, _: u64) -> Result<FitnessEstimate> {
            Ok(self.0)
        }
    }

    fn fixed(mean: f64, se: f64) -> Arc<dyn Oracle> {
        Arc::new(Fixed(FitnessEstimate {
            mean,
            se,
            n_games: 1000,
        }))
    }

    fn x() -> Assignment {
        "1 2 3".parse().unwrap()
    }

    #[test]
    fn weighted_mean() {
        let p = PoolOracle::new(vec![(fixed(-1.0, 0.0), 1.0), (fixed(-3.0, 0.0), 3.0)]).unwrap();
        assert_eq!(p.evaluate(&x(), 10, 0).unwrap().mean, -2.5);
    }

    #[test]
    fn single_member_is_identity() {
        let p = PoolOracle::new(vec![(fixed(-1.25, 0.04), 2.0)]).unwrap();
        let e = p.evaluate(&x(), 1000, 0).unwrap();
        assert_eq!((e.mean, e.se, e.n_games), (-1.25, 0.04, 1000));
    }

    #[test]
    fn four_benchmarks_equal_weight() {
        let members = [-0.030105, -0.016525, -1.01404, -2.39538]
            .into_iter()
            .map(|m| (fixed(m, 0.03), 1.0))
            .collect();
        let e = PoolOracle::new(members)
            .unwrap()
            .evaluate(&x(), 2000, 0)
            .unwrap();
        assert!((e.mean - (-0.864)).abs() < 5e-4, "{}", e.mean);
    }

    #[test]
    fn identical_members_scale_se() {
        let k = 4;
        let members = (0..k).map(|_| (fixed(-2.0, 0.08), 1.0)).collect();
        let e = PoolOracle::new(members)
            .unwrap()
            .evaluate(&x(), 10, 0)
            .unwrap();
        assert_eq!(e.mean, -2.0);
        assert!((e.se - 0.08 / (k as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn configuration_errors() {
        assert!(PoolOracle::new(vec![]).is_err());
        assert!(PoolOracle::new(vec![(fixed(0.0, 0.0), 0.0)]).is_err());
        assert!(combine(&[]).is_err());
    }
}
