//! Trace records: one line per evaluated test, JSON-encoded, plus a flat CSV
//! rendering for spreadsheets.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraint::{AddOutcome, RankConstraint, TestId};
use crate::error::{Error, Result};
use crate::evaluation::FitnessEstimate;
use crate::perm::Assignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InductionOutcome {
    Added,
    Duplicate,
    Redundant,
    CycleRejected,
    /// The gap did not clear the noise threshold (printed in brackets).
    NotInduced,
}

impl From<AddOutcome> for InductionOutcome {
    fn from(o: AddOutcome) -> Self {
        match o {
            AddOutcome::Added => InductionOutcome::Added,
            AddOutcome::Duplicate => InductionOutcome::Duplicate,
            AddOutcome::Redundant => InductionOutcome::Redundant,
            AddOutcome::CycleRejected => InductionOutcome::CycleRejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionNote {
    /// Ordered as in the fitter of the two compared assignments.
    pub constraint: RankConstraint,
    pub outcome: InductionOutcome,
}

impl std::fmt::Display for InductionNote {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = &self.constraint;
        match self.outcome {
            InductionOutcome::NotInduced => write!(f, "[{} < {}]", c.before, c.after),
            o => write!(f, "{} < {} ({})", c.before, c.after, kebab(&o)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Improved,
    AcceptedWorse,
    RejectedWorse,
    /// The candidate had more violations than the current state.
    RejectedInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealNote {
    pub step: usize,
    pub temperature: f64,
    /// `f_current - f_candidate`; positive means the candidate is worse.
    pub delta: f64,
    pub probability: f64,
    pub decision: Decision,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    #[default]
    None,
    /// New overall maximum.
    Star,
    AcceptedWorse,
    RejectedWorse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub test_id: TestId,
    pub phase: u8,
    pub assignment: Assignment,
    pub mean: f64,
    pub se: f64,
    pub n_games: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cached: bool,
    /// Set on the high-precision re-evaluation that opens the second phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reevaluates: Option<TestId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inductions: Vec<InductionNote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealNote>,
    #[serde(default)]
    pub marker: Marker,
}

impl TraceRecord {
    pub fn new(test_id: TestId, phase: u8, assignment: Assignment, est: &FitnessEstimate) -> Self {
        TraceRecord {
            test_id,
            phase,
            assignment,
            mean: est.mean,
            se: est.se,
            n_games: est.n_games,
            cached: false,
            reevaluates: None,
            inductions: Vec::new(),
            anneal: None,
            marker: Marker::None,
        }
    }

    pub fn estimate(&self) -> FitnessEstimate {
        FitnessEstimate {
            mean: self.mean,
            se: self.se,
            n_games: self.n_games,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

/// Appends records to a JSONL file, flushing after each one.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(TraceWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append_to(path: &Path) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TraceWriter {
            out: BufWriter::new(f),
        })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        writeln!(self.out, "{}", r.to_json_line())?;
        self.out.flush()?;
        Ok(())
    }

    pub fn write_all<'a>(&mut self, rs: impl IntoIterator<Item = &'a TraceRecord>) -> Result<()> {
        for r in rs {
            self.write(r)?;
        }
        Ok(())
    }
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut text = String::new();
    for line in BufReader::new(File::open(path)?).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_jsonl(&text)
}

pub const CSV_HEADER: &str =
    "test_id,phase,assignment,mean,se,n_games,cached,marker,inductions,temperature,delta,probability,decision";

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

pub fn to_csv(records: &[TraceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let inductions: Vec<String> = r.inductions.iter().map(|n| n.to_string()).collect();
        let (t, d, p, dec) = match &r.anneal {
            Some(a) => (
                a.temperature.to_string(),
                a.delta.to_string(),
                a.probability.to_string(),
                kebab(&a.decision),
            ),
            None => Default::default(),
        };
        let fields = [
            r.test_id.to_string(),
            r.phase.to_string(),
            r.assignment.to_string(),
            r.mean.to_string(),
            r.se.to_string(),
            r.n_games.to_string(),
            r.cached.to_string(),
            kebab(&r.marker),
            inductions.join("; "),
            t,
            d,
            p,
            dec,
        ];
        let line: Vec<String> = fields.iter().map(|f| csv_quote(f)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
