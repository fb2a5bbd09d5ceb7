//! Targets evaluated by an external process over a line protocol.
//!
//! Each request is the lowercase hex encoding of the genome followed by
//! `\n`; the child answers with one decimal tick per line, in order, and
//! must flush after every answer. The child is launched once and reused for
//! every evaluation. If a request fails (timeout, exit, closed pipe or
//! garbage output) the child is relaunched and the request retried once;
//! a second failure is handled by the configured [`FailurePolicy`].

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Target;
use crate::error::{Error, Result, TargetError};

pub const DEFAULT_PENALTY: f64 = -1e18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Abort the run with the underlying error.
    Error,
    /// Record this tick for the failed evaluation and keep going.
    Penalty(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubprocessTargetConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub timeout_ms: u64,
    pub failure_policy: FailurePolicy,
}

impl SubprocessTargetConfig {
    pub fn new(command: Vec<String>) -> Self {
        SubprocessTargetConfig {
            command,
            timeout_ms: 10_000,
            failure_policy: FailurePolicy::Error,
        }
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct SubprocessTarget {
    cfg: SubprocessTargetConfig,
    genome_len: usize,
    name: String,
    session: Mutex<Option<Session>>,
}

impl SubprocessTarget {
    pub fn new(cfg: SubprocessTargetConfig, genome_len: usize) -> Result<Self> {
        if cfg.command.is_empty() {
            return Err(Error::Config("subprocess command is empty".into()));
        }
        if cfg.timeout_ms == 0 {
            return Err(Error::Config(
                "subprocess timeout_ms must be positive".into(),
            ));
        }
        if let FailurePolicy::Penalty(v) = cfg.failure_policy {
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "penalty tick must be finite, got {v}"
                )));
            }
        }
        Ok(SubprocessTarget {
            name: format!("subprocess({})", cfg.command.join(" ")),
            cfg,
            genome_len,
            session: Mutex::new(None),
        })
    }

    fn launch(&self) -> Result<Session, TargetError> {
        let spawn_err = |source| TargetError::Spawn {
            command: self.cfg.command.join(" "),
            source,
        };
        let mut child = Command::new(&self.cfg.command[0])
            .args(&self.cfg.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(spawn_err)?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
        })
    }

    fn request(&self, session: &mut Session, line: &str) -> Result<f64, TargetError> {
        session
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| session.stdin.flush())
            .map_err(|e| TargetError::Crashed(e.to_string()))?;
        let reply = match session
            .lines
            .recv_timeout(Duration::from_millis(self.cfg.timeout_ms))
        {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(TargetError::Crashed(e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                return Err(TargetError::Timeout(self.cfg.timeout_ms))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(TargetError::Crashed("output stream closed".into()))
            }
        };
        parse_tick(&reply)
    }

    fn attempt(&self, slot: &mut Option<Session>, line: &str) -> Result<f64, TargetError> {
        if slot.is_none() {
            *slot = Some(self.launch()?);
        }
        let result = self.request(slot.as_mut().expect("session launched"), line);
        if result.is_err() {
            // protocol state is unknown after a failure
            *slot = None;
        }
        result
    }
}

/// Parses one response line as a finite decimal tick.
pub fn parse_tick(line: &str) -> Result<f64, TargetError> {
    let text = line.trim();
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(TargetError::Unparsable(text.to_string())),
    }
}

/// Request line for `genome`: lowercase hex plus LF.
pub fn encode_request(genome: &[u8]) -> String {
    let mut line = hex::encode(genome);
    line.push('\n');
    line
}

impl Target for SubprocessTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn genome_len(&self) -> usize {
        self.genome_len
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        let line = encode_request(genome);
        let mut slot = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let err = match self.attempt(&mut slot, &line) {
            Ok(tick) => return Ok(tick),
            Err(first) => {
                log::warn!("{}: {first}; relaunching", self.name);
                match self.attempt(&mut slot, &line) {
                    Ok(tick) => return Ok(tick),
                    Err(second) => second,
                }
            }
        };
        match self.cfg.failure_policy {
            FailurePolicy::Error => Err(err),
            FailurePolicy::Penalty(v) => {
                log::warn!("{}: {err}; recording penalty tick {v}", self.name);
                Ok(v)
            }
        }
    }
}
