//! Replay fixtures: recorded `(mean, se, n)` per assignment.
//!
//! ```text
//! # dca-replay v1
//! 11 2 3 10 9 6 4 5 7 8 | -4.17144 | 0.045290 | 2000
//! ```
//!
//! Further lines starting with `#` are comments. A lookup for an assignment the
//! fixture does not contain is an error, never a fresh sample.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::perm::Assignment;

use super::{FitnessEstimate, Oracle};

pub const HEADER: &str = "# dca-replay v1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayFixture {
    records: Vec<(Assignment, FitnessEstimate)>,
    index: HashMap<Assignment, usize>,
}

impl ReplayFixture {
    pub fn from_records(records: Vec<(Assignment, FitnessEstimate)>) -> Result<Self> {
        let mut f = ReplayFixture::default();
        for (i, (x, e)) in records.into_iter().enumerate() {
            if f.index.insert(x.clone(), f.records.len()).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate assignment `{x}`")));
            }
            f.records.push((x, e));
        }
        Ok(f)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(Error::parse(1, format!("missing `{HEADER}` header"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split('|').map(str::trim).collect();
            let [x, mean, se, n] = fields.as_slice() else {
                return Err(Error::parse(i + 1, "expected `assignment | mean | se | n`"));
            };
            let num = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad {what} `{s}`")))
            };
            let n = n
                .parse::<u64>()
                .map_err(|_| Error::parse(i + 1, format!("bad game count `{n}`")))?;
            let est = FitnessEstimate::new(num(mean, "mean")?, num(se, "se")?, n)
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let x: Assignment = x
                .parse()
                .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
            records.push((x, est));
        }
        if records.is_empty() {
            return Err(Error::parse(1, "fixture has no records"));
        }
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::parse(&text)
    }

    /// Serializes with six significant digits, the precision of the source tables.
    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for (x, e) in &self.records {
            let _ = writeln!(
                s,
                "{x} | {} | {} | {}",
                format_sig6(e.mean),
                format_sig6(e.se),
                e.n_games
            );
        }
        s
    }

    pub fn get(&self, x: &Assignment) -> Option<&FitnessEstimate> {
        self.index.get(x).map(|&i| &self.records[i].1)
    }

    pub fn records(&self) -> &[(Assignment, FitnessEstimate)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mutable access for building perturbed fixtures.
    pub fn get_mut(&mut self, x: &Assignment) -> Option<&mut FitnessEstimate> {
        self.index.get(x).map(|&i| &mut self.records[i].1)
    }
}

/// Fixed six-significant-digit rendering, e.g. `-3.89289`, `0.0617980`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Clone)]
pub struct ReplayOracle {
    name: String,
    fixture: ReplayFixture,
}

impl ReplayOracle {
    pub fn new(name: impl Into<String>, fixture: ReplayFixture) -> Self {
        ReplayOracle {
            name: name.into(),
            fixture,
        }
    }

    pub fn fixture(&self) -> &ReplayFixture {
        &self.fixture
    }
}

impl Oracle for ReplayOracle {
    fn id(&self) -> String {
        format!("replay:{}", self.name)
    }

    fn evaluate(&self, x: &Assignment, _n_games: u64, _seed: u64) -> Result<FitnessEstimate> {
        self.fixture
            .get(x)
            .copied()
            .ok_or_else(|| Error::ReplayMiss(x.clone()))
    }
}
