//! Reference external model for the stdio JSON protocol.
//!
//! Serves as a protocol example and as the test fixture for the client.
//! Predictions are a fixed linear rule so tests can assert exact values:
//! regression returns the sum of the inputs; binclass returns
//! [1 - sigmoid(sum), sigmoid(sum)]; multiclass softmaxes (s, 2s, 0).
//!
//! Usage: featsel-stub-model --task regression --n-features 4 [--misbehave MODE]
//! Misbehave modes (for client error-path tests): id-offset, garbage, hang,
//! short.

use std::io::{BufRead, Write};

fn main() {
    let mut task = "regression".to_string();
    let mut n_features = 1usize;
    let mut misbehave = String::new();

    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--task" => {
                task = args[i + 1].clone();
                i += 2;
            }
            "--n-features" => {
                n_features = args[i + 1].parse().expect("--n-features takes a number");
                i += 2;
            }
            "--misbehave" => {
                misbehave = args[i + 1].clone();
                i += 2;
            }
            other => {
                eprintln!("unknown argument {other:?}");
                std::process::exit(1);
            }
        }
    }

    eprintln!("stub model ready: task={task} n_features={n_features}");

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        let request: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("bad request: {e}");
                continue;
            }
        };
        let id = request["id"].as_u64().unwrap_or(0);
        let op = request["op"].as_str().unwrap_or("");

        let reply_id = if misbehave == "id-offset" { id + 1 } else { id };
        let reply = match op {
            "info" => {
                serde_json::json!({ "id": reply_id, "task": task, "n_features": n_features })
            }
            "predict" => {
                if misbehave == "hang" {
                    // never answer predict requests
                    continue;
                }
                let rows = request["rows"].as_array().cloned().unwrap_or_default();
                let mut predictions = Vec::new();
                for row in &rows {
                    let sum: f64 = row
                        .as_array()
                        .map(|cells| cells.iter().filter_map(|c| c.as_f64()).sum())
                        .unwrap_or(0.0);
                    let value = match task.as_str() {
                        "regression" => serde_json::json!(sum),
                        "binclass" => {
                            let p1 = 1.0 / (1.0 + (-sum).exp());
                            serde_json::json!([1.0 - p1, p1])
                        }
                        _ => {
                            let logits = [sum, 2.0 * sum, 0.0];
                            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
                            let total: f64 = exps.iter().sum();
                            let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
                            serde_json::json!(probs)
                        }
                    };
                    predictions.push(value);
                }
                if misbehave == "short" && !predictions.is_empty() {
                    predictions.pop();
                }
                serde_json::json!({ "id": reply_id, "predictions": predictions })
            }
            other => {
                eprintln!("unknown op {other:?}");
                continue;
            }
        };

        let mut out = stdout.lock();
        if misbehave == "garbage" {
            writeln!(out, "this is not json").unwrap();
        } else {
            writeln!(out, "{reply}").unwrap();
        }
        out.flush().unwrap();
    }
}
