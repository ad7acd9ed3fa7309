//! Assignments as permutations of element identifiers, rank queries and
//! insertion / adjacent-transposition moves.
//!
//! Ranks are 1-based throughout so traces can be compared against printed
//! tables without translation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque element identifier (a small positive integer).
pub type Element = u32;

/// 1-based position within an [`Assignment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rank(usize);

impl Rank {
    /// Validates `value` against an assignment of length `len`.
    pub fn new(value: usize, len: usize) -> Result<Self> {
        if value == 0 || value > len {
            return Err(Error::InvalidRank { rank: value, len });
        }
        Ok(Rank(value))
    }

    pub fn get(self) -> usize {
        self.0
    }

    fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    Insertion,
    AdjacentTransposition,
}

/// A single move: `element` travels from `from_rank` to `to_rank`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MoveDescriptor {
    pub kind: MoveKind,
    pub element: Element,
    pub from_rank: Rank,
    pub to_rank: Rank,
}

/// A candidate solution: every element appears exactly once.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    order: Vec<Element>,
}

impl Assignment {
    pub fn new(order: Vec<Element>) -> Result<Self> {
        if order.len() < 2 {
            return Err(Error::InvalidAssignment(format!(
                "need at least 2 elements, got {}",
                order.len()
            )));
        }
        let mut seen = order.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidAssignment(format!(
                "element {} appears more than once",
                w[0]
            )));
        }
        Ok(Assignment { order })
    }

    /// The identity order `1..=n`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new((1..=n as Element).collect())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[Element] {
        &self.order
    }

    pub fn contains(&self, e: Element) -> bool {
        self.order.contains(&e)
    }

    /// Element at a given rank.
    pub fn at(&self, r: Rank) -> Element {
        self.order[r.index()]
    }

    pub fn rank_of(&self, e: Element) -> Result<Rank> {
        self.order
            .iter()
            .position(|&x| x == e)
            .map(|i| Rank(i + 1))
            .ok_or(Error::ElementNotFound(e))
    }

    /// Element → rank lookup table for bulk queries.
    pub fn rank_table(&self) -> BTreeMap<Element, usize> {
        self.order
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i + 1))
            .collect()
    }

    /// Removes `e` and reinserts it so that it ends up at rank `r`.
    pub fn insertion_move(&self, e: Element, r: usize) -> Result<Assignment> {
        let to = Rank::new(r, self.len())?;
        let from = self.rank_of(e)?;
        let mut order = self.order.clone();
        order.remove(from.index());
        order.insert(to.index(), e);
        Ok(Assignment { order })
    }

    /// Applies a descriptor, checking that it matches this assignment.
    pub fn apply(&self, mv: &MoveDescriptor) -> Result<Assignment> {
        let from = self.rank_of(mv.element)?;
        if from != mv.from_rank {
            return Err(Error::InvalidAssignment(format!(
                "move expects element {} at rank {}, found at {}",
                mv.element, mv.from_rank, from
            )));
        }
        self.insertion_move(mv.element, mv.to_rank.get())
    }

    fn check_same_elements(&self, other: &Assignment) -> Result<()> {
        let mut a = self.order.clone();
        let mut b = other.order.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::IncompatibleAssignments(format!(
                "`{self}` and `{other}` do not share an element set"
            )));
        }
        Ok(())
    }

    /// If `other` equals `self` with one adjacent pair swapped at ranks
    /// `(r, r + 1)`, returns `((self[r], self[r + 1]), r)`.
    pub fn adjacent_transposition_diff(
        &self,
        other: &Assignment,
    ) -> Result<Option<((Element, Element), Rank)>> {
        self.check_same_elements(other)?;
        let diffs: Vec<usize> = (0..self.len())
            .filter(|&i| self.order[i] != other.order[i])
            .collect();
        match diffs.as_slice() {
            [i, j]
                if *j == i + 1
                    && self.order[*i] == other.order[*j]
                    && self.order[*j] == other.order[*i] =>
            {
                Ok(Some(((self.order[*i], self.order[*j]), Rank(i + 1))))
            }
            _ => Ok(None),
        }
    }

    /// If `other` is reachable from `self` by a single insertion move, returns
    /// the lexicographically smallest descriptor that produces it.
    pub fn insertion_diff(&self, other: &Assignment) -> Result<Option<MoveDescriptor>> {
        self.check_same_elements(other)?;
        if self == other {
            return Ok(None);
        }
        let mut best: Option<MoveDescriptor> = None;
        for &e in &self.order {
            let from = self.rank_of(e)?;
            let to = other.rank_of(e)?;
            if from == to {
                continue;
            }
            if &self.insertion_move(e, to.get())? == other {
                let mv = MoveDescriptor {
                    kind: MoveKind::Insertion,
                    element: e,
                    from_rank: from,
                    to_rank: to,
                };
                best = Some(best.map_or(mv, |b| b.min(mv)));
            }
        }
        Ok(best)
    }

    /// Every distinct assignment one insertion move away, each with the
    /// smallest descriptor that reaches it. Sorted by resulting assignment.
    pub fn insertion_neighbors(&self) -> Vec<(MoveDescriptor, Assignment)> {
        let n = self.len();
        let mut found: BTreeMap<Assignment, MoveDescriptor> = BTreeMap::new();
        for (i, &e) in self.order.iter().enumerate() {
            for to in 0..n {
                if to == i {
                    continue;
                }
                let mut order = self.order.clone();
                order.remove(i);
                order.insert(to, e);
                let mv = MoveDescriptor {
                    kind: MoveKind::Insertion,
                    element: e,
                    from_rank: Rank(i + 1),
                    to_rank: Rank(to + 1),
                };
                found
                    .entry(Assignment { order })
                    .and_modify(|d| *d = (*d).min(mv))
                    .or_insert(mv);
            }
        }
        found.into_iter().map(|(a, d)| (d, a)).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.order.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let order = s
            .split_whitespace()
            .map(|t| {
                t.parse::<Element>()
                    .map_err(|_| Error::InvalidAssignment(format!("`{t}` is not an element id")))
            })
            .collect::<Result<Vec<_>>>()?;
        Assignment::new(order)
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
