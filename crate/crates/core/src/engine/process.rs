use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{AnalysisRequest, AnalysisResponse};
use super::{parse_response_line, AnalysisEngine, EngineError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// An analysis engine running as a child process (`sh -c <command>`).
///
/// Requests are pipelined up to `max_in_flight` and answers are matched by
/// id, so the engine may reply out of order. If the process dies, it is
/// restarted once per batch and the unanswered requests are resent.
pub struct ProcessEngine {
    command: String,
    engine_id: String,
    timeout: Duration,
    max_in_flight: usize,
    proc: Option<Running>,
    requests: u64,
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

enum BatchFailure {
    Died,
    Fatal(EngineError),
}

impl ProcessEngine {
    pub fn spawn(command: &str) -> Result<Self, EngineError> {
        let mut engine = ProcessEngine {
            command: command.to_string(),
            engine_id: command.to_string(),
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: 8,
            proc: None,
            requests: 0,
        };
        engine.start()?;
        Ok(engine)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    /// Overrides the id used in cache keys (defaults to the command line).
    pub fn with_engine_id(mut self, id: impl Into<String>) -> Self {
        self.engine_id = id.into();
        self
    }

    fn start(&mut self) -> Result<(), EngineError> {
        self.proc = None;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(EngineError::Spawn)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::debug!("engine stderr: {line}");
            }
        });
        self.proc = Some(Running { child, stdin, lines: rx });
        Ok(())
    }

    fn run_batch(&mut self, batch: &[AnalysisRequest], answers: &mut HashMap<String, AnalysisResponse>) -> Result<(), BatchFailure> {
        let proc = self.proc.as_mut().ok_or(BatchFailure::Died)?;
        for req in batch.iter().filter(|r| !answers.contains_key(&r.id)) {
            let line = req.to_line();
            if writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush()).is_err() {
                return Err(BatchFailure::Died);
            }
            self.requests += 1;
        }
        let deadline = Instant::now() + self.timeout;
        while batch.iter().any(|r| !answers.contains_key(&r.id)) {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match proc.lines.recv_timeout(remaining) {
                Ok(l) => l,
                Err(RecvTimeoutError::Disconnected) => return Err(BatchFailure::Died),
                Err(RecvTimeoutError::Timeout) => {
                    let pending = batch.iter().find(|r| !answers.contains_key(&r.id)).expect("pending");
                    return Err(BatchFailure::Fatal(EngineError::Timeout {
                        query_id: pending.id.clone(),
                        secs: self.timeout.as_secs_f64(),
                    }));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp = parse_response_line(&line).map_err(BatchFailure::Fatal)?;
            if resp.is_during_search == Some(true) {
                continue;
            }
            if !batch.iter().any(|r| r.id == resp.id) {
                log::debug!("ignoring engine line for unknown id {:?}", resp.id);
                continue;
            }
            if let Some(message) = resp.error.clone() {
                return Err(BatchFailure::Fatal(EngineError::Engine { id: resp.id, message }));
            }
            answers.insert(resp.id.clone(), resp);
        }
        Ok(())
    }
}

impl AnalysisEngine for ProcessEngine {
    fn engine_id(&self) -> &str {
        &self.engine_id
    }

    fn analyze(&mut self, requests: &[AnalysisRequest]) -> Result<Vec<AnalysisResponse>, EngineError> {
        let mut out = Vec::with_capacity(requests.len());
        for batch in requests.chunks(self.max_in_flight) {
            let mut answers = HashMap::new();
            let mut restarted = false;
            loop {
                match self.run_batch(batch, &mut answers) {
                    Ok(()) => break,
                    Err(BatchFailure::Fatal(e)) => return Err(e),
                    Err(BatchFailure::Died) if !restarted => {
                        log::warn!("engine process died; restarting once");
                        restarted = true;
                        self.start()?;
                    }
                    Err(BatchFailure::Died) => {
                        self.proc = None;
                        return Err(EngineError::Crashed);
                    }
                }
            }
            out.extend(batch.iter().map(|r| answers.remove(&r.id).expect("answered")));
        }
        Ok(out)
    }

    fn requests_sent(&self) -> u64 {
        self.requests
    }
}
