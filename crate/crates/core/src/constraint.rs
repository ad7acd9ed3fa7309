//! The induced partial order over element ranks.
//!
//! Every core edge `before -> after` reads "`before` should be ranked ahead of
//! `after`". The core edge set is kept acyclic; edges already implied by
//! reachability are acknowledged but held in a side list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{Assignment, Element};

/// Identifier of an evaluated test within a run.
pub type TestId = u64;

/// Why a constraint was induced: the two tests compared, their mean gap and
/// the noise threshold the gap had to clear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub tests: (TestId, TestId),
    pub gap: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConstraint {
    pub before: Element,
    pub after: Element,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

impl RankConstraint {
    pub fn new(before: Element, after: Element) -> Self {
        RankConstraint {
            before,
            after,
            evidence: None,
        }
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence = Some(evidence);
        self
    }

    pub fn key(&self) -> (Element, Element) {
        (self.before, self.after)
    }
}

impl fmt::Display for RankConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} < {}", self.before, self.after)?;
        if let Some(ev) = &self.evidence {
            write!(
                f,
                " # {},{} gap={} thr={}",
                ev.tests.0, ev.tests.1, ev.gap, ev.threshold
            )?;
        }
        Ok(())
    }
}

impl FromStr for RankConstraint {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let (body, comment) = match line.split_once('#') {
            Some((b, c)) => (b, Some(c.trim())),
            None => (line, None),
        };
        let (before, after) = body
            .split_once('<')
            .ok_or_else(|| Error::parse(0, format!("expected `i < j`, got `{line}`")))?;
        let elem = |s: &str| {
            s.trim()
                .parse::<Element>()
                .map_err(|_| Error::parse(0, format!("`{}` is not an element id", s.trim())))
        };
        let mut c = RankConstraint::new(elem(before)?, elem(after)?);
        if let Some(comment) = comment.filter(|c| !c.is_empty()) {
            c.evidence = Some(parse_evidence(comment)?);
        }
        Ok(c)
    }
}

fn parse_evidence(s: &str) -> Result<Evidence> {
    let bad = || Error::parse(0, format!("malformed evidence `{s}`"));
    let mut parts = s.split_whitespace();
    let (a, b) = parts
        .next()
        .and_then(|t| t.split_once(','))
        .ok_or_else(bad)?;
    let tests = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let mut gap = None;
    let mut threshold = None;
    for kv in parts {
        match kv.split_once('=') {
            Some(("gap", v)) => gap = v.parse().ok(),
            Some(("thr", v)) => threshold = v.parse().ok(),
            _ => return Err(bad()),
        }
    }
    Ok(Evidence {
        tests,
        gap: gap.ok_or_else(bad)?,
        threshold: threshold.ok_or_else(bad)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AddOutcome {
    Added,
    Duplicate,
    /// Already implied by reachability; kept out of the core set.
    Redundant,
    /// The reverse order is already implied; the graph is unchanged.
    CycleRejected,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintGraph {
    nodes: BTreeSet<Element>,
    edges: BTreeMap<(Element, Element), RankConstraint>,
    redundant: Vec<RankConstraint>,
    /// Strict descendants of every node.
    reach: BTreeMap<Element, BTreeSet<Element>>,
}

impl ConstraintGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(nodes: impl IntoIterator<Item = Element>) -> Self {
        let mut g = Self::new();
        for n in nodes {
            g.add_node(n);
        }
        g
    }

    pub fn add_node(&mut self, n: Element) {
        self.nodes.insert(n);
        self.reach.entry(n).or_default();
    }

    pub fn nodes(&self) -> &BTreeSet<Element> {
        &self.nodes
    }

    /// Core edges in numeric `(before, after)` order.
    pub fn edges(&self) -> impl Iterator<Item = &RankConstraint> {
        self.edges.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, before: Element, after: Element) -> bool {
        self.edges.contains_key(&(before, after))
    }

    pub fn redundant(&self) -> &[RankConstraint] {
        &self.redundant
    }

    /// True if a directed path `from ~> to` exists (strict, so `from != to`).
    pub fn reaches(&self, from: Element, to: Element) -> bool {
        self.reach.get(&from).is_some_and(|d| d.contains(&to))
    }

    pub fn try_add(&mut self, c: RankConstraint) -> Result<AddOutcome> {
        if c.before == c.after {
            return Err(Error::InvalidConstraint(format!(
                "self-loop on element {}",
                c.before
            )));
        }
        if let Some(ev) = &c.evidence {
            if ev.gap.is_nan() || ev.gap <= 0.0 {
                return Err(Error::InvalidConstraint(format!(
                    "fitness gap must be positive, got {}",
                    ev.gap
                )));
            }
        }
        if self.edges.contains_key(&c.key()) {
            return Ok(AddOutcome::Duplicate);
        }
        if self.reaches(c.after, c.before) {
            return Ok(AddOutcome::CycleRejected);
        }
        if self.reaches(c.before, c.after) {
            if !self.redundant.iter().any(|r| r.key() == c.key()) {
                self.redundant.push(c);
            }
            return Ok(AddOutcome::Redundant);
        }

        let (u, v) = c.key();
        self.add_node(u);
        self.add_node(v);
        let mut gained: BTreeSet<Element> = self.reach[&v].clone();
        gained.insert(v);
        let sources: Vec<Element> = self
            .reach
            .iter()
            .filter(|(&a, d)| a == u || d.contains(&u))
            .map(|(&a, _)| a)
            .collect();
        for a in sources {
            self.reach
                .get_mut(&a)
                .expect("source is a node")
                .extend(gained.iter().copied());
        }
        self.edges.insert(c.key(), c);
        Ok(AddOutcome::Added)
    }

    fn check_covers(&self, x: &Assignment) -> Result<BTreeMap<Element, usize>> {
        let ranks = x.rank_table();
        if let Some(missing) = self.nodes.iter().find(|n| !ranks.contains_key(n)) {
            return Err(Error::IncompatibleAssignments(format!(
                "graph element {missing} does not occur in `{x}`"
            )));
        }
        Ok(ranks)
    }

    /// Core edges whose order is reversed in `x`.
    pub fn violated<'a>(&'a self, x: &Assignment) -> Result<Vec<&'a RankConstraint>> {
        let ranks = self.check_covers(x)?;
        Ok(self
            .edges
            .values()
            .filter(|c| ranks[&c.before] > ranks[&c.after])
            .collect())
    }

    pub fn violations(&self, x: &Assignment) -> Result<usize> {
        Ok(self.violated(x)?.len())
    }

    pub fn satisfies(&self, x: &Assignment) -> Result<bool> {
        Ok(self.violations(x)? == 0)
    }

    /// Minimal edge set with the same reachability relation. Evidence on the
    /// surviving edges is preserved; the redundant side list is dropped.
    pub fn transitive_reduction(&self) -> ConstraintGraph {
        let mut out = ConstraintGraph::with_nodes(self.nodes.iter().copied());
        let implied = |u: Element, v: Element| {
            self.edges
                .keys()
                .filter(|&&(a, w)| a == u && w != v)
                .any(|&(_, w)| self.reaches(w, v))
        };
        for c in self.edges.values() {
            if !implied(c.before, c.after) {
                out.edges.insert(c.key(), c.clone());
            }
        }
        out.reach = self.reach.clone();
        out
    }

    /// Linear extensions sampled by repeatedly picking a uniformly random
    /// element among those whose predecessors are all placed.
    pub fn topological_orders_sample(&self, k: usize, seed: u64) -> Result<Vec<Assignment>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let mut indegree: BTreeMap<Element, usize> =
                self.nodes.iter().map(|&n| (n, 0)).collect();
            for &(_, v) in self.edges.keys() {
                *indegree.get_mut(&v).expect("edge endpoint is a node") += 1;
            }
            let mut order = Vec::with_capacity(self.nodes.len());
            while !indegree.is_empty() {
                let ready: Vec<Element> = indegree
                    .iter()
                    .filter(|(_, &d)| d == 0)
                    .map(|(&n, _)| n)
                    .collect();
                let &pick = ready.choose(&mut rng).expect("core edges are acyclic");
                indegree.remove(&pick);
                for &(u, v) in self.edges.keys() {
                    if u == pick {
                        *indegree.get_mut(&v).expect("successor still pending") -= 1;
                    }
                }
                order.push(pick);
            }
            out.push(Assignment::new(order)?);
        }
        Ok(out)
    }

    /// Number of linear extensions of the partial order over `nodes`.
    pub fn count_linear_extensions(&self) -> Result<u64> {
        let nodes: Vec<Element> = self.nodes.iter().copied().collect();
        if nodes.len() > 24 {
            return Err(Error::config(format!(
                "linear-extension counting supports at most 24 elements, got {}",
                nodes.len()
            )));
        }
        let index: BTreeMap<Element, usize> =
            nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut preds = vec![0u32; nodes.len()];
        for &(u, v) in self.edges.keys() {
            preds[index[&v]] |= 1 << index[&u];
        }
        let full = (1usize << nodes.len()) - 1;
        let mut ways = vec![0u64; full + 1];
        ways[0] = 1;
        for mask in 0..full {
            if ways[mask] == 0 {
                continue;
            }
            for (i, &p) in preds.iter().enumerate() {
                if mask & (1 << i) == 0 && (p as usize) & !mask == 0 {
                    ways[mask | (1 << i)] += ways[mask];
                }
            }
        }
        Ok(ways[full])
    }

    /// DOT rendering of the core edges; nodes and edges in numeric order.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph constraints {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  {n};");
        }
        for &(u, v) in self.edges.keys() {
            let _ = writeln!(s, "  {u} -> {v};");
        }
        s.push_str("}\n");
        s
    }

    /// One `i < j # a,b gap=G thr=T` line per core edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for c in self.edges.values() {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    /// Parses an edge list. Blank lines and lines starting with `#` are skipped.
    /// Any line that would close a cycle is an error.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut g = ConstraintGraph::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let c: RankConstraint = t.parse().map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(i + 1, message),
                other => other,
            })?;
            if g.try_add(c)? == AddOutcome::CycleRejected {
                return Err(Error::parse(i + 1, format!("`{t}` closes a cycle")));
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::perm::Assignment;
    use proptest::prelude::*;

    /// The twelve constraints induced by the first-phase trace.
    pub(crate) const G12: [(Element, Element); 12] = [
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

    pub(crate) fn g12() -> ConstraintGraph {
        let mut g = ConstraintGraph::with_nodes(2..=11);
        for (u, v) in G12 {
            assert_eq!(
                g.try_add(RankConstraint::new(u, v)).unwrap(),
                AddOutcome::Added
            );
        }
        g
    }

    fn a(s: &str) -> Assignment {
        s.parse().unwrap()
    }

    /// Floyd–Warshall style closure over an explicit edge list.
    fn closure(nodes: &[Element], edges: &[(Element, Element)]) -> BTreeSet<(Element, Element)> {
        let mut r: BTreeSet<(Element, Element)> = edges.iter().copied().collect();
        for &k in nodes {
            for &i in nodes {
                for &j in nodes {
                    if r.contains(&(i, k)) && r.contains(&(k, j)) {
                        r.insert((i, j));
                    }
                }
            }
        }
        r
    }

    #[test]
    fn try_add_examples() {
        let mut g = ConstraintGraph::new();
        assert_eq!(
            g.try_add(RankConstraint::new(10, 11)).unwrap(),
            AddOutcome::Added
        );
        assert_eq!(
            g.try_add(RankConstraint::new(11, 9)).unwrap(),
            AddOutcome::Added
        );
        assert_eq!(
            g.try_add(RankConstraint::new(9, 10)).unwrap(),
            AddOutcome::CycleRejected
        );
        assert_eq!(
            g.try_add(RankConstraint::new(10, 11)).unwrap(),
            AddOutcome::Duplicate
        );
        assert_eq!(
            g.try_add(RankConstraint::new(10, 9)).unwrap(),
            AddOutcome::Redundant
        );
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.redundant().len(), 1);
        assert!(matches!(
            g.try_add(RankConstraint::new(4, 4)),
            Err(Error::InvalidConstraint(_))
        ));

        let mut g = ConstraintGraph::new();
        for (u, v) in [(2, 3), (3, 10), (10, 11), (11, 9)] {
            g.try_add(RankConstraint::new(u, v)).unwrap();
        }
        assert_eq!(
            g.try_add(RankConstraint::new(9, 2)).unwrap(),
            AddOutcome::CycleRejected
        );
        assert_eq!(
            g.try_add(RankConstraint::new(3, 9)).unwrap(),
            AddOutcome::Redundant
        );
    }

    #[test]
    fn violations_against_g12() {
        let g = g12();
        assert_eq!(g.violations(&a("5 4 2 3 7 6 8 10 11 9")).unwrap(), 0);
        let x34 = a("2 3 5 4 8 10 11 9 6 7");
        let bad: Vec<_> = g.violated(&x34).unwrap().iter().map(|c| c.key()).collect();
        assert_eq!(bad, vec![(6, 10), (7, 10)]);
        assert!(g.satisfies(&a("5 4 2 3 7 6 8 10 11 9")).unwrap());
        assert!(!g.satisfies(&x34).unwrap());
        assert_eq!(ConstraintGraph::new().violations(&x34).unwrap(), 0);
        assert!(matches!(
            g.violations(&a("1 2 3")),
            Err(Error::IncompatibleAssignments(_))
        ));
    }

    #[test]
    fn reduction_examples() {
        let mut g = ConstraintGraph::new();
        for (u, v) in [(2, 3), (3, 10)] {
            g.try_add(RankConstraint::new(u, v)).unwrap();
        }
        // 2<10 arrives after the chain, so it is redundant at insertion time
        assert_eq!(
            g.try_add(RankConstraint::new(2, 10)).unwrap(),
            AddOutcome::Redundant
        );

        // insert the implied edge first so it lands in the core set
        let mut g = ConstraintGraph::new();
        for (u, v) in [(2, 10), (2, 3), (3, 10)] {
            g.try_add(RankConstraint::new(u, v)).unwrap();
        }
        assert_eq!(g.edge_count(), 3);
        let keys: Vec<_> = g.transitive_reduction().edges().map(|c| c.key()).collect();
        assert_eq!(keys, vec![(2, 3), (3, 10)]);

        assert!(ConstraintGraph::new().transitive_reduction().is_empty());
    }

    #[test]
    fn g12_reduction_drops_two_implied_edges() {
        // brute-force: an edge is implied iff removing it leaves the closure unchanged
        let nodes: Vec<Element> = (2..=11).collect();
        let full = closure(&nodes, &G12);
        let mut expected: Vec<(Element, Element)> = G12
            .iter()
            .copied()
            .filter(|e| {
                let rest: Vec<_> = G12.iter().copied().filter(|f| f != e).collect();
                closure(&nodes, &rest) != full
            })
            .collect();
        expected.sort();
        assert_eq!(expected.len(), 10);

        let red = g12().transitive_reduction();
        let got: Vec<_> = red.edges().map(|c| c.key()).collect();
        assert_eq!(got, expected);
        assert!(!red.contains(3, 10) && !red.contains(4, 10));
    }

    #[test]
    fn sampling_examples() {
        let mut chain = ConstraintGraph::new();
        chain.try_add(RankConstraint::new(1, 2)).unwrap();
        chain.try_add(RankConstraint::new(2, 3)).unwrap();
        for x in chain.topological_orders_sample(20, 3).unwrap() {
            assert_eq!(x, a("1 2 3"));
        }

        let g = g12();
        for x in g.topological_orders_sample(500, 11).unwrap() {
            assert_eq!(g.violations(&x).unwrap(), 0);
        }

        let free = ConstraintGraph::with_nodes(1..=3);
        let seen: BTreeSet<Assignment> = free
            .topological_orders_sample(200, 5)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(seen.len(), 6);

        assert_eq!(
            g.topological_orders_sample(7, 99).unwrap(),
            g.topological_orders_sample(7, 99).unwrap()
        );
    }

    #[test]
    fn counting_small_cases() {
        assert_eq!(
            ConstraintGraph::with_nodes(1..=4)
                .count_linear_extensions()
                .unwrap(),
            24
        );
        let mut chain = ConstraintGraph::with_nodes(1..=8);
        for i in 1..4 {
            chain.try_add(RankConstraint::new(i, i + 1)).unwrap();
        }
        assert_eq!(chain.count_linear_extensions().unwrap(), 40320 / 24);
    }

    #[test]
    fn edge_list_and_dot() {
        let c = RankConstraint::new(4, 10).with_evidence(Evidence {
            tests: (18, 19),
            gap: 0.11003,
            threshold: 0.060862,
        });
        let line = c.to_string();
        assert_eq!(line, "4 < 10 # 18,19 gap=0.11003 thr=0.060862");
        assert_eq!(line.parse::<RankConstraint>().unwrap(), c);
        assert_eq!(
            "3 < 6".parse::<RankConstraint>().unwrap(),
            RankConstraint::new(3, 6)
        );

        let g = g12();
        let back = ConstraintGraph::from_edge_list(&g.to_edge_list()).unwrap();
        let k1: Vec<_> = g.edges().map(|c| c.key()).collect();
        let k2: Vec<_> = back.edges().map(|c| c.key()).collect();
        assert_eq!(k1, k2);
        assert!(ConstraintGraph::from_edge_list("1 < 2\n2 < 1\n").is_err());

        let dot = ConstraintGraph::with_nodes([1, 2]).to_dot();
        assert_eq!(dot, "digraph constraints {\n  1;\n  2;\n}\n");
        let dot = g.to_dot();
        assert!(dot.contains("  10 -> 11;\n") && dot.contains("  5 -> 4;\n"));
        assert_eq!(dot.matches("->").count(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_edge_streams_stay_acyclic(stream in prop::collection::vec((1u32..12, 1u32..12), 0..200)) {
            let mut g = ConstraintGraph::new();
            for (u, v) in stream {
                if u == v { continue; }
                g.try_add(RankConstraint::new(u, v)).unwrap();
            }
            let nodes: Vec<Element> = g.nodes().iter().copied().collect();
            let keys: Vec<_> = g.edges().map(|c| c.key()).collect();
            let cl = closure(&nodes, &keys);
            prop_assert!(nodes.iter().all(|&n| !cl.contains(&(n, n))));
            // index agrees with brute-force closure
            for &u in &nodes { for &v in &nodes {
                prop_assert_eq!(g.reaches(u, v), cl.contains(&(u, v)));
            }}
            let red = g.transitive_reduction();
            let rkeys: Vec<_> = red.edges().map(|c| c.key()).collect();
            prop_assert_eq!(closure(&nodes, &rkeys), cl);
        }

        #[test]
        fn violations_monotone_and_linear_extension(
            stream in prop::collection::vec((1u32..8, 1u32..8), 0..30),
            perm in Just((1u32..8).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let x = Assignment::new(perm).unwrap();
            let mut g = ConstraintGraph::with_nodes(1..8);
            let mut last = 0;
            for (u, v) in stream {
                if u == v { continue; }
                g.try_add(RankConstraint::new(u, v)).unwrap();
                let now = g.violations(&x).unwrap();
                prop_assert!(now >= last);
                last = now;
            }
            // linear extension <=> closure-consistent order
            let ranks = x.rank_table();
            let nodes: Vec<Element> = (1..8).collect();
            let keys: Vec<_> = g.edges().map(|c| c.key()).collect();
            let consistent = closure(&nodes, &keys).iter().all(|(u, v)| ranks[u] < ranks[v]);
            prop_assert_eq!(g.satisfies(&x).unwrap(), consistent);
        }
    }
}
