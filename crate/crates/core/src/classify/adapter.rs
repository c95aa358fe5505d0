//! Client side of the external classifier protocol.
//!
//! The adapter writes `{"ready": true}` once, then answers each request line
//! `{"id": .., "text": ..}` with `{"id": .., "scores": [neg, neu, pos]}`.
//! Responses may arrive in any order; every id is answered exactly once.
//! Adapters are reached over a child process's standard streams
//! (`cmd:program args..`) or a TCP socket (`tcp://host:port`).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::Value;

use super::Prediction;
use crate::{Error, Result};

/// Allowed deviation of a response's scores from summing to 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdapterAddress {
    Command { program: String, args: Vec<String> },
    Tcp(String),
}

impl FromStr for AdapterAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            return Ok(AdapterAddress::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let mut parts = cmd.split_whitespace().map(String::from);
            let program = parts
                .next()
                .ok_or_else(|| Error::Config("adapter command is empty".into()))?;
            return Ok(AdapterAddress::Command {
                program,
                args: parts.collect(),
            });
        }
        Err(Error::Config(format!(
            "adapter address {s:?} must start with `cmd:` or `tcp://`"
        )))
    }
}

#[derive(Clone, Debug)]
pub struct AdapterOptions {
    pub batch_size: usize,
    /// Deadline for the ready line and for each batch.
    pub timeout: Duration,
    /// Concurrent connections; each is used sequentially.
    pub pool: usize,
}

impl Default for AdapterOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            timeout: Duration::from_secs(30),
            pool: 1,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: &'a str,
    text: &'a str,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    socket: Option<TcpStream>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(s) = &self.socket {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        if let Some(c) = &mut self.child {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

fn spawn_reader<R: std::io::Read + Send + 'static>(r: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(r).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

/// A protocol failure, carrying the payload that caused it.
#[derive(Debug)]
struct Violation(String);

impl Connection {
    fn open(addr: &AdapterAddress, timeout: Duration) -> Result<Self> {
        let mut conn = match addr {
            AdapterAddress::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Adapter(format!("cannot start {program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Connection {
                    writer: Box::new(stdin),
                    lines: spawn_reader(stdout),
                    child: Some(child),
                    socket: None,
                }
            }
            AdapterAddress::Tcp(host) => {
                let sock_addr = host
                    .to_socket_addrs()
                    .map_err(|e| Error::Adapter(format!("{host}: {e}")))?
                    .next()
                    .ok_or_else(|| Error::Adapter(format!("{host}: no address")))?;
                let stream = TcpStream::connect_timeout(&sock_addr, timeout)
                    .map_err(|e| Error::Adapter(format!("connect {host}: {e}")))?;
                let read = stream
                    .try_clone()
                    .map_err(|e| Error::Adapter(format!("{host}: {e}")))?;
                let write = stream
                    .try_clone()
                    .map_err(|e| Error::Adapter(format!("{host}: {e}")))?;
                Connection {
                    writer: Box::new(write),
                    lines: spawn_reader(read),
                    child: None,
                    socket: Some(stream),
                }
            }
        };
        let deadline = Instant::now() + timeout;
        let line = conn
            .next_line(deadline)
            .map_err(|v| Error::Adapter(format!("waiting for ready line: {}", v.0)))?;
        let ready = serde_json::from_str::<Value>(&line)
            .ok()
            .and_then(|v| v.get("ready").and_then(Value::as_bool))
            == Some(true);
        if !ready {
            return Err(Error::Adapter(format!("expected {{\"ready\": true}}, got {line:?}")));
        }
        Ok(conn)
    }

    fn next_line(&mut self, deadline: Instant) -> std::result::Result<String, Violation> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Violation(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Violation("timed out".into())),
            Err(RecvTimeoutError::Disconnected) => Err(Violation("adapter closed the stream".into())),
        }
    }

    fn run_batch(&mut self, batch: &[(String, String)], timeout: Duration) -> std::result::Result<Vec<Prediction>, Violation> {
        let mut payload = Vec::new();
        for (id, text) in batch {
            serde_json::to_writer(&mut payload, &Request { id, text }).expect("request serializes");
            payload.push(b'\n');
        }
        self.writer
            .write_all(&payload)
            .and_then(|_| self.writer.flush())
            .map_err(|e| Violation(format!("write failed: {e}")))?;

        // Responses may arrive in any order; hand them back in request order.
        let mut pending: HashMap<&str, usize> = batch.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
        let mut out: Vec<Option<Prediction>> = vec![None; batch.len()];
        let deadline = Instant::now() + timeout;
        while !pending.is_empty() {
            let line = self.next_line(deadline)?;
            let pred = parse_response(&line).map_err(|why| Violation(format!("{why}: {line}")))?;
            let Some(slot) = pending.remove(pred.post_id.as_str()) else {
                return Err(Violation(format!("unexpected or repeated id: {line}")));
            };
            out[slot] = Some(pred);
        }
        Ok(out.into_iter().flatten().collect())
    }
}

/// Validate one response line.
pub fn parse_response(line: &str) -> std::result::Result<Prediction, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON ({e})"))?;
    if let Some(err) = v.get("error") {
        return Err(format!("adapter reported error {err}"));
    }
    let id = v
        .get("id")
        .and_then(Value::as_str)
        .ok_or("missing string id")?;
    let scores = v
        .get("scores")
        .and_then(Value::as_array)
        .ok_or("missing scores array")?;
    if scores.len() != 3 {
        return Err(format!("expected 3 scores, got {}", scores.len()));
    }
    let mut s = [0.0; 3];
    for (slot, x) in s.iter_mut().zip(scores) {
        *slot = x.as_f64().ok_or("non-numeric score")?;
    }
    let sum: f64 = s.iter().sum();
    if s.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("scores {s:?} are not a probability triple"));
    }
    Prediction::from_scores(id, s).map_err(|e| e.to_string())
}

fn run_with_retry(
    addr: &AdapterAddress,
    opts: &AdapterOptions,
    conn: &mut Option<Connection>,
    batch: &[(String, String)],
) -> Result<Vec<Prediction>> {
    let mut last = String::new();
    for attempt in 0..2 {
        if conn.is_none() {
            *conn = Some(Connection::open(addr, opts.timeout)?);
        }
        match conn.as_mut().expect("connection open").run_batch(batch, opts.timeout) {
            Ok(preds) => return Ok(preds),
            Err(Violation(why)) => {
                log::warn!("adapter batch failed (attempt {}): {why}", attempt + 1);
                *conn = None;
                last = why;
            }
        }
    }
    Err(Error::Adapter(format!("batch failed after retry: {last}")))
}

/// Classify `(id, text)` pairs through an external adapter. Each failed
/// batch is retried once on a fresh connection.
pub fn classify_external(
    addr: &AdapterAddress,
    opts: &AdapterOptions,
    requests: &[(String, String)],
) -> Result<Vec<Prediction>> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let batches: Vec<&[(String, String)]> = requests.chunks(opts.batch_size.max(1)).collect();
    let pool = opts.pool.clamp(1, batches.len());

    let results: Vec<Result<BTreeMap<usize, Vec<Prediction>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..pool)
            .map(|worker| {
                let batches = &batches;
                s.spawn(move || {
                    let mut conn = None;
                    let mut done = BTreeMap::new();
                    for (i, batch) in batches.iter().enumerate().skip(worker).step_by(pool) {
                        done.insert(i, run_with_retry(addr, opts, &mut conn, batch)?);
                    }
                    Ok(done)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("adapter worker panicked"))
            .collect()
    });

    let mut by_batch = BTreeMap::new();
    for r in results {
        by_batch.extend(r?);
    }
    Ok(by_batch.into_values().flatten().collect())
}
