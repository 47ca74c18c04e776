//! Client for external model processes speaking the stdio JSON protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use super::protocol::{
    parse_info_reply, parse_predict_reply, InfoRequest, PredictRequest, PredictionValue,
};
use super::{argmax, ModelError, Predictions};
use crate::dataset::TaskKind;

pub const DEFAULT_PROTOCOL_TIMEOUT: Duration = Duration::from_secs(30);

/// Connection to a child model process. Protocol access is serialized per
/// connection, so a fitted `ExternalModel` can be shared across workers.
pub struct ExternalModel {
    inner: Mutex<Connection>,
    task: TaskKind,
    n_features: usize,
    timeout: Duration,
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Spawns the command and performs the `info` handshake.
pub fn external_connect(command: &[String], timeout: Duration) -> Result<ExternalModel, ModelError> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| ModelError::InvalidSpec("external command must not be empty".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| ModelError::SpawnFailure { command: command.join(" "), source })?;

    let stdin = child.stdin.take().expect("stdin piped");
    let stdout = child.stdout.take().expect("stdout piped");
    let stderr = child.stderr.take().expect("stderr piped");

    // Reader thread feeds a channel so replies can be awaited with a timeout.
    let (tx, lines) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    // stderr is logged, never parsed
    std::thread::spawn(move || {
        for line in BufReader::new(stderr).lines() {
            match line {
                Ok(l) => log::warn!("external model stderr: {l}"),
                Err(_) => break,
            }
        }
    });

    let mut conn = Connection { child, stdin, lines, next_id: 0 };
    let id = conn.fresh_id();
    let line = conn.roundtrip(&serde_json::to_string(&InfoRequest { id, op: "info" }).unwrap(), timeout)?;
    let info = parse_info_reply(&line).map_err(ModelError::ProtocolViolation)?;
    if info.id != id {
        return Err(ModelError::ProtocolViolation(format!(
            "info reply id {} does not match request id {id}",
            info.id
        )));
    }
    if info.n_features == 0 {
        return Err(ModelError::ProtocolViolation("n_features must be >= 1".into()));
    }

    Ok(ExternalModel {
        inner: Mutex::new(conn),
        task: info.task,
        n_features: info.n_features,
        timeout,
    })
}

impl Connection {
    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn roundtrip(&mut self, request: &str, timeout: Duration) -> Result<String, ModelError> {
        self.stdin.write_all(request.as_bytes())?;
        self.stdin.write_all(b"\n")?;
        self.stdin.flush()?;
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(ModelError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(ModelError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ModelError::ProtocolViolation(
                "external model closed its output stream".into(),
            )),
        }
    }
}

impl ExternalModel {
    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Predictions, ModelError> {
        let mut conn = self.inner.lock().expect("external model lock poisoned");
        let id = conn.fresh_id();
        let request = serde_json::to_string(&PredictRequest { id, op: "predict", rows }).unwrap();
        let line = conn.roundtrip(&request, self.timeout)?;
        drop(conn);

        let reply = parse_predict_reply(&line).map_err(ModelError::ProtocolViolation)?;
        if reply.id != id {
            return Err(ModelError::ProtocolViolation(format!(
                "predict reply id {} does not match request id {id}",
                reply.id
            )));
        }
        if reply.predictions.len() != rows.len() {
            return Err(ModelError::ProtocolViolation(format!(
                "expected {} predictions, got {}",
                rows.len(),
                reply.predictions.len()
            )));
        }

        match self.task {
            TaskKind::Regression => {
                let mut out = Vec::with_capacity(reply.predictions.len());
                for p in reply.predictions {
                    match p {
                        PredictionValue::Scalar(v) if v.is_finite() => out.push(v),
                        other => {
                            return Err(ModelError::ProtocolViolation(format!(
                                "regression prediction must be a finite number, got {other:?}"
                            )))
                        }
                    }
                }
                Ok(Predictions::Regression(out))
            }
            TaskKind::Binclass | TaskKind::Multiclass => {
                let mut probs = Vec::with_capacity(reply.predictions.len());
                let mut width = None;
                for p in reply.predictions {
                    match p {
                        PredictionValue::Probs(row) => {
                            if row.is_empty() || row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                                return Err(ModelError::ProtocolViolation(
                                    "probabilities must lie in [0, 1]".into(),
                                ));
                            }
                            let sum: f64 = row.iter().sum();
                            if (sum - 1.0).abs() > 1e-9 {
                                return Err(ModelError::ProtocolViolation(format!(
                                    "probability row sums to {sum}, expected 1"
                                )));
                            }
                            match width {
                                None => width = Some(row.len()),
                                Some(w) if w != row.len() => {
                                    return Err(ModelError::ProtocolViolation(
                                        "inconsistent probability row widths".into(),
                                    ))
                                }
                                _ => {}
                            }
                            probs.push(row);
                        }
                        other => {
                            return Err(ModelError::ProtocolViolation(format!(
                                "classification prediction must be a probability array, got {other:?}"
                            )))
                        }
                    }
                }
                let labels = probs.iter().map(|p| argmax(p)).collect();
                Ok(Predictions::Classification { probs, labels })
            }
        }
    }
}
