//! External strategy processes driven over newline-delimited JSON.
//!
//! The engine writes one JSON object per line to the child's stdin and reads
//! one per line from its stdout:
//!
//! ```text
//! engine -> child  {"type":"init","columns":[...],"lookback":300}
//! child  -> engine {"ok":true}                  or {"ok":false,"error":"NameError: ..."}
//! engine -> child  {"type":"history","index":i,"values":[...]}   (warm-up bars, no reply)
//! engine -> child  {"type":"bar","index":i,"values":[...]}
//! child  -> engine {"signal":1,"position":0.5}
//! engine -> child  {"type":"end"}
//! ```
//!
//! Undefined values are sent as `null`. Anything the child prints on stderr is
//! kept for error classification.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::backtest::{Decision, Strategy, StrategyFailure};
use crate::factors::FactorFrame;

/// Outcome class of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "SUCCESS")]
    Success,
    SyntaxError,
    NameError,
    AttributeError,
    OtherError,
    Timeout,
    ProtocolError,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 7] = [
        ErrorKind::Success,
        ErrorKind::SyntaxError,
        ErrorKind::NameError,
        ErrorKind::AttributeError,
        ErrorKind::OtherError,
        ErrorKind::Timeout,
        ErrorKind::ProtocolError,
    ];

    /// The five reporting buckets: timeouts and protocol errors count as `OtherError`.
    pub const REPORTED: [ErrorKind; 5] = [
        ErrorKind::Success,
        ErrorKind::SyntaxError,
        ErrorKind::NameError,
        ErrorKind::AttributeError,
        ErrorKind::OtherError,
    ];

    pub fn reported(self) -> ErrorKind {
        match self {
            ErrorKind::Timeout | ErrorKind::ProtocolError => ErrorKind::OtherError,
            k => k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Success => "SUCCESS",
            ErrorKind::SyntaxError => "SyntaxError",
            ErrorKind::NameError => "NameError",
            ErrorKind::AttributeError => "AttributeError",
            ErrorKind::OtherError => "OtherError",
            ErrorKind::Timeout => "Timeout",
            ErrorKind::ProtocolError => "ProtocolError",
        }
    }

    pub fn is_success(self) -> bool {
        self == ErrorKind::Success
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a failure from the last non-empty stderr line.
pub fn classify_error(stderr: &str, _status: Option<i32>) -> ErrorKind {
    let last = stderr
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    for (token, kind) in [
        ("SyntaxError", ErrorKind::SyntaxError),
        ("NameError", ErrorKind::NameError),
        ("AttributeError", ErrorKind::AttributeError),
    ] {
        if last.contains(token) {
            return kind;
        }
    }
    ErrorKind::OtherError
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub command: Vec<String>,
    pub step_timeout_ms: u64,
    pub total_timeout_ms: u64,
    pub max_restarts: u32,
    /// Factor columns sent to the child in addition to raw OHLCV.
    pub factors: Vec<String>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            command: Vec::new(),
            step_timeout_ms: 5_000,
            total_timeout_ms: 600_000,
            max_restarts: 0,
            factors: Vec::new(),
        }
    }
}

impl AdapterConfig {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        AdapterConfig {
            command: command.into_iter().map(Into::into).collect(),
            ..AdapterConfig::default()
        }
    }

    pub fn step_timeout(&self) -> Duration {
        Duration::from_millis(self.step_timeout_ms)
    }

    pub fn total_timeout(&self) -> Duration {
        Duration::from_millis(self.total_timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("invalid adapter config: {0}")]
    Config(String),
    #[error("child failed to start: {message}")]
    SpawnFailure { message: String, stderr: String },
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("child exited ({status:?})")]
    ChildCrashed { status: Option<i32>, stderr: String },
    #[error("child reported {kind}: {message}")]
    Reported { kind: ErrorKind, message: String },
}

impl AdapterError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            AdapterError::Config(_) => ErrorKind::OtherError,
            AdapterError::SpawnFailure { stderr, .. } => classify_error(stderr, None),
            AdapterError::Timeout(_) => ErrorKind::Timeout,
            AdapterError::Protocol(_) => ErrorKind::ProtocolError,
            AdapterError::ChildCrashed { status, stderr } => classify_error(stderr, *status),
            AdapterError::Reported { kind, .. } => *kind,
        }
    }

    /// Human-readable detail, including captured stderr when there is any.
    pub fn diagnostic(&self) -> String {
        match self {
            AdapterError::SpawnFailure { stderr, .. } | AdapterError::ChildCrashed { stderr, .. }
                if !stderr.trim().is_empty() =>
            {
                format!("{self}\n{}", stderr.trim_end())
            }
            _ => self.to_string(),
        }
    }
}

impl From<AdapterError> for StrategyFailure {
    fn from(e: AdapterError) -> Self {
        StrategyFailure {
            kind: e.kind(),
            message: e.diagnostic(),
        }
    }
}

/// One live child process.
pub struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
    stderr_thread: Option<JoinHandle<()>>,
    step_timeout: Duration,
    deadline: Instant,
    acked: bool,
}

impl Session {
    fn spawn(config: &AdapterConfig, deadline: Instant) -> Result<Session, AdapterError> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| AdapterError::Config("empty command".into()))?;
        if config.step_timeout_ms == 0 || config.total_timeout_ms == 0 {
            return Err(AdapterError::Config("timeouts must be positive".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| AdapterError::SpawnFailure {
                message: format!("{program}: {e}"),
                stderr: String::new(),
            })?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let stderr = Arc::new(Mutex::new(String::new()));
        let mut pipe = child.stderr.take().expect("piped stderr");
        let sink = Arc::clone(&stderr);
        let stderr_thread = thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                sink.lock()
                    .expect("stderr buffer")
                    .push_str(&String::from_utf8_lossy(&buf[..n]));
            }
        });

        Ok(Session {
            stdin: child.stdin.take(),
            child,
            lines,
            stderr,
            stderr_thread: Some(stderr_thread),
            step_timeout: config.step_timeout(),
            deadline,
            acked: false,
        })
    }

    fn send(&mut self, msg: &Value) -> Result<(), AdapterError> {
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(self.crashed());
        };
        let mut line = msg.to_string();
        line.push('\n');
        if stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()).is_err() {
            return Err(self.crashed());
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Value, AdapterError> {
        let now = Instant::now();
        let wait = self.step_timeout.min(self.deadline.saturating_duration_since(now));
        match self.lines.recv_timeout(wait) {
            Ok(line) => serde_json::from_str(&line)
                .map_err(|_| AdapterError::Protocol(format!("reply is not JSON: {}", truncate(&line)))),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(AdapterError::Timeout(wait))
            }
            Err(RecvTimeoutError::Disconnected) => Err(self.crashed()),
        }
    }

    /// Waits briefly for the child to exit, then reports what it left on stderr.
    fn crashed(&mut self) -> AdapterError {
        let status = self.wait_for_exit(Duration::from_millis(2_000));
        if status.is_none() {
            self.kill();
        }
        if let Some(handle) = self.stderr_thread.take() {
            let _ = handle.join();
        }
        let stderr = self.stderr_text();
        let code = status.and_then(|s| s.code());
        if self.acked {
            AdapterError::ChildCrashed { status: code, stderr }
        } else {
            AdapterError::SpawnFailure {
                message: format!("exited before acknowledging (status {code:?})"),
                stderr,
            }
        }
    }

    fn wait_for_exit(&mut self, limit: Duration) -> Option<ExitStatus> {
        let until = Instant::now() + limit;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return Some(status),
                Ok(None) if Instant::now() < until => thread::sleep(Duration::from_millis(5)),
                _ => return None,
            }
        }
    }

    fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    pub fn stderr_text(&self) -> String {
        self.stderr.lock().expect("stderr buffer").clone()
    }

    /// Sends a warm-up bar. The child must not reply.
    pub fn history(&mut self, index: usize, values: &[f64]) -> Result<(), AdapterError> {
        self.send(&json!({"type": "history", "index": index, "values": nullable(values)}))
    }

    /// Sends one evaluated bar and waits for the decision.
    pub fn step(&mut self, index: usize, values: &[f64]) -> Result<Decision, AdapterError> {
        self.send(&json!({"type": "bar", "index": index, "values": nullable(values)}))?;
        let reply = self.recv()?;
        parse_decision(&reply)
    }

    /// Sends the end message and reaps the child.
    pub fn close(mut self) {
        let _ = self.send(&json!({"type": "end"}));
        self.stdin = None;
        if self.wait_for_exit(Duration::from_millis(500)).is_none() {
            self.kill();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.kill();
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(120).collect()
}

fn nullable(values: &[f64]) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|v| if v.is_finite() { Some(*v) } else { None })
        .collect()
}

/// Starts the child, sends the header and waits for its acknowledgement.
pub fn handshake(config: &AdapterConfig, columns: &[String], lookback: usize) -> Result<Session, AdapterError> {
    handshake_until(config, columns, lookback, Instant::now() + config.total_timeout())
}

fn handshake_until(
    config: &AdapterConfig,
    columns: &[String],
    lookback: usize,
    deadline: Instant,
) -> Result<Session, AdapterError> {
    let mut session = Session::spawn(config, deadline)?;
    session.send(&json!({"type": "init", "columns": columns, "lookback": lookback}))?;
    let reply = session.recv()?;
    match reply.get("ok").and_then(Value::as_bool) {
        Some(true) => {
            session.acked = true;
            Ok(session)
        }
        Some(false) => Err(reported(&reply)),
        None => Err(AdapterError::Protocol(format!(
            "malformed ack: {}",
            truncate(&reply.to_string())
        ))),
    }
}

fn reported(reply: &Value) -> AdapterError {
    let message = reply
        .get("error")
        .and_then(Value::as_str)
        .unwrap_or("unspecified error")
        .to_string();
    AdapterError::Reported {
        kind: classify_error(&message, None),
        message,
    }
}

/// Validates a decision reply. A reply carrying `"ok": false` is a reported failure.
pub fn parse_decision(reply: &Value) -> Result<Decision, AdapterError> {
    if reply.get("ok").and_then(Value::as_bool) == Some(false) {
        return Err(reported(reply));
    }
    let signal = reply
        .get("signal")
        .and_then(Value::as_i64)
        .ok_or_else(|| AdapterError::Protocol(format!("missing integer 'signal' in {reply}")))?;
    let position = reply
        .get("position")
        .and_then(Value::as_f64)
        .ok_or_else(|| AdapterError::Protocol(format!("missing numeric 'position' in {reply}")))?;
    if !matches!(signal, -1..=1) {
        return Err(AdapterError::Protocol(format!("signal {signal} not in {{-1, 0, 1}}")));
    }
    if !(0.0..=1.0).contains(&position) {
        return Err(AdapterError::Protocol(format!("position {position} not in [0, 1]")));
    }
    Ok(Decision {
        signal: signal as i8,
        position,
    })
}

/// A child process as a backtest strategy.
///
/// On a crash or timeout the child is restarted up to `max_restarts` times;
/// the new child gets a fresh handshake and the warm-up bars preceding the
/// failed step before the step is retried.
pub struct AdapterStrategy {
    config: AdapterConfig,
    session: Option<Session>,
    lookback: usize,
    restarts: u32,
    deadline: Option<Instant>,
}

impl AdapterStrategy {
    pub fn new(config: AdapterConfig) -> Self {
        AdapterStrategy {
            config,
            session: None,
            lookback: 0,
            restarts: 0,
            deadline: None,
        }
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn open(&mut self, frame: &FactorFrame, index: usize) -> Result<Session, AdapterError> {
        let deadline = *self
            .deadline
            .get_or_insert_with(|| Instant::now() + self.config.total_timeout());
        let mut session = handshake_until(&self.config, frame.names(), self.lookback, deadline)?;
        let first = (index + 1).saturating_sub(self.lookback);
        for i in first..index {
            session.history(i, &frame.row(i))?;
        }
        Ok(session)
    }
}

impl Strategy for AdapterStrategy {
    fn factors(&self) -> Vec<String> {
        self.config.factors.clone()
    }

    fn start(&mut self, frame: &FactorFrame, first: usize, lookback: usize) -> Result<(), StrategyFailure> {
        self.lookback = lookback;
        self.restarts = 0;
        self.deadline = None;
        self.session = Some(self.open(frame, first)?);
        Ok(())
    }

    fn decide(&mut self, frame: &FactorFrame, index: usize) -> Result<Decision, StrategyFailure> {
        loop {
            let session = self.session.as_mut().expect("start() must precede decide()");
            match session.step(index, &frame.row(index)) {
                Ok(d) => return Ok(d),
                Err(e @ (AdapterError::ChildCrashed { .. } | AdapterError::Timeout(_)))
                    if self.restarts < self.config.max_restarts =>
                {
                    self.restarts += 1;
                    self.session = None;
                    match self.open(frame, index) {
                        Ok(s) => self.session = Some(s),
                        Err(_) => return Err(e.into()),
                    }
                }
                Err(e) => {
                    self.session = None;
                    return Err(e.into());
                }
            }
        }
    }

    fn finish(&mut self) {
        if let Some(s) = self.session.take() {
            s.close();
        }
    }
}
