//! Stand-in external classifier speaking the adapter protocol on standard
//! streams. Used by the test suite and for trying the `external` backend
//! without a trained model.
//!
//! Flags:
//!   --scores A,B,C     answer every request with these scores
//!   --reverse          hold requests and answer each burst in reverse order
//!   --fail-once PATH   if PATH does not exist, create it and send one bogus
//!                      response before behaving

use std::hash::Hasher;
use std::io::{BufRead, Write};
use std::sync::mpsc;
use std::time::Duration;

use serde_json::{json, Value};

fn hashed_scores(text: &str) -> [f64; 3] {
    let mut h = fnv::FnvHasher::default();
    h.write(text.as_bytes());
    let x = h.finish();
    let raw = [(x & 0xffff) as f64 + 1.0, ((x >> 16) & 0xffff) as f64 + 1.0, ((x >> 32) & 0xffff) as f64 + 1.0];
    let sum: f64 = raw.iter().sum();
    raw.map(|v| v / sum)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut fixed: Option<[f64; 3]> = None;
    let mut reverse = false;
    let mut fail_marker: Option<String> = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--scores" => {
                let v: Vec<f64> = it
                    .next()
                    .expect("--scores needs a value")
                    .split(',')
                    .map(|s| s.parse().expect("numeric score"))
                    .collect();
                fixed = Some([v[0], v[1], v[2]]);
            }
            "--reverse" => reverse = true,
            "--fail-once" => fail_marker = Some(it.next().expect("--fail-once needs a path").clone()),
            other => {
                eprintln!("unknown flag {other}");
                std::process::exit(2);
            }
        }
    }
    let mut fail_now = match &fail_marker {
        Some(p) if !std::path::Path::new(p).exists() => {
            std::fs::write(p, b"failed once\n").expect("write marker");
            true
        }
        _ => false,
    };

    let (tx, rx) = mpsc::channel::<String>();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", json!({"ready": true})).unwrap();
    out.flush().unwrap();

    let mut held: Vec<String> = Vec::new();
    loop {
        let next = if reverse {
            rx.recv_timeout(Duration::from_millis(20))
        } else {
            rx.recv().map_err(|_| mpsc::RecvTimeoutError::Disconnected)
        };
        let line = match next {
            Ok(l) => l,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                for r in held.drain(..).rev() {
                    writeln!(out, "{r}").unwrap();
                }
                out.flush().unwrap();
                continue;
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        let response = match serde_json::from_str::<Value>(&line) {
            Ok(v) => match (v.get("id").and_then(Value::as_str), v.get("text").and_then(Value::as_str)) {
                (Some(id), Some(text)) if fail_now => {
                    fail_now = false;
                    let _ = (id, text);
                    json!({"id": "__bogus__", "scores": [1.0, 0.0, 0.0]})
                }
                (Some(id), Some(text)) => {
                    let scores = fixed.unwrap_or_else(|| hashed_scores(text));
                    json!({"id": id, "scores": scores})
                }
                (id, _) => json!({"id": id, "error": "request needs string id and text"}),
            },
            Err(e) => json!({"id": null, "error": format!("malformed request: {e}")}),
        };
        if reverse {
            held.push(response.to_string());
        } else {
            writeln!(out, "{response}").unwrap();
            out.flush().unwrap();
        }
    }
    for r in held.drain(..).rev() {
        writeln!(out, "{r}").unwrap();
    }
}
