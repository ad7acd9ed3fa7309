//! External evaluator speaking line-delimited JSON over stdin/stdout.
//!
//! Request:  `{"assignment":[2,3,10,11,9,6,4,5,7,8],"games":1000,"seed":12345}`
//! Response: `{"mean":-3.89289,"se":0.061798,"n":1000}`
//!
//! Unknown response fields are ignored; missing fields are errors. The child
//! is started lazily, kept alive between requests, and restarted after any
//! failure. One request is in flight per child.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{Assignment, Element};

use super::{FitnessEstimate, Oracle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub assignment: Vec<Element>,
    pub games: u64,
    pub seed: u64,
}

impl Request {
    pub fn new(x: &Assignment, games: u64, seed: u64) -> Self {
        Request {
            assignment: x.as_slice().to_vec(),
            games,
            seed,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request is always serializable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

/// Parses one response line.
pub fn parse_response(line: &str) -> Result<FitnessEstimate> {
    let io_err = |message: String| Error::OracleIo {
        message,
        payload: line.to_string(),
    };
    let r: Response = serde_json::from_str(line.trim())
        .map_err(|e| io_err(format!("malformed response: {e}")))?;
    FitnessEstimate::new(r.mean, r.se, r.n).map_err(|e| io_err(e.to_string()))
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Per-request timeout in milliseconds.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    60_000
}

pub struct SubprocessOracle {
    spec: CommandSpec,
    running: Mutex<Option<Running>>,
}

impl std::fmt::Debug for SubprocessOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessOracle")
            .field("spec", &self.spec)
            .finish()
    }
}

impl SubprocessOracle {
    pub fn new(spec: CommandSpec) -> Self {
        SubprocessOracle {
            spec,
            running: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<Running> {
        let mut child = Command::new(&self.spec.program)
            .args(&self.spec.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::OracleIo {
                message: format!("cannot start `{}`: {e}", self.spec.program),
                payload: String::new(),
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
        })
    }

    fn round_trip(&self, running: &mut Running, request: &str) -> Result<FitnessEstimate> {
        let io = |message: String, payload: &str| Error::OracleIo {
            message,
            payload: payload.to_string(),
        };
        writeln!(running.stdin, "{request}")
            .and_then(|_| running.stdin.flush())
            .map_err(|e| io(format!("write to evaluator failed: {e}"), request))?;
        match running
            .lines
            .recv_timeout(Duration::from_millis(self.spec.timeout_ms))
        {
            Ok(Ok(line)) => parse_response(&line),
            Ok(Err(e)) => Err(io(format!("read from evaluator failed: {e}"), "")),
            Err(RecvTimeoutError::Timeout) => Err(io(
                format!("evaluator timed out after {} ms", self.spec.timeout_ms),
                request,
            )),
            Err(RecvTimeoutError::Disconnected) => {
                let status = running.child.wait().ok();
                Err(io(format!("evaluator exited ({status:?})"), request))
            }
        }
    }
}

impl Oracle for SubprocessOracle {
    fn id(&self) -> String {
        format!(
            "subprocess:{} {}",
            self.spec.program,
            self.spec.args.join(" ")
        )
    }

    fn evaluate(&self, x: &Assignment, n_games: u64, seed: u64) -> Result<FitnessEstimate> {
        let request = Request::new(x, n_games, seed).to_line();
        let mut guard = self.running.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let result = self.round_trip(guard.as_mut().expect("just spawned"), &request);
        if result.is_err() {
            *guard = None;
        }
        result
    }
}
