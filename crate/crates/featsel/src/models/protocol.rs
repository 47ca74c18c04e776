//! External model wire protocol: newline-delimited JSON over stdio.
//!
//! Requests carry strictly increasing ids and the child answers each request
//! with exactly one reply line echoing the id:
//!
//! ```text
//! -> {"id":1,"op":"info"}
//! <- {"id":1,"task":"regression","n_features":4}
//! -> {"id":2,"op":"predict","rows":[[1.0,2.0,3.0,4.0]]}
//! <- {"id":2,"predictions":[0.5]}
//! ```
//!
//! Regression predictions are reals; classification predictions are per-row
//! probability arrays. Anything on stderr is logged, never parsed.

use serde::{Deserialize, Serialize};

use crate::dataset::TaskKind;

#[derive(Debug, Serialize)]
pub struct InfoRequest {
    pub id: u64,
    pub op: &'static str,
}

#[derive(Debug, Serialize)]
pub struct PredictRequest<'a> {
    pub id: u64,
    pub op: &'static str,
    pub rows: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InfoReply {
    pub id: u64,
    pub task: TaskKind,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictReply {
    pub id: u64,
    pub predictions: Vec<PredictionValue>,
}

/// One prediction: a real for regression, a probability vector otherwise.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PredictionValue {
    Scalar(f64),
    Probs(Vec<f64>),
}

pub fn parse_info_reply(line: &str) -> Result<InfoReply, String> {
    serde_json::from_str(line).map_err(|e| format!("malformed info reply {line:?}: {e}"))
}

pub fn parse_predict_reply(line: &str) -> Result<PredictReply, String> {
    serde_json::from_str(line).map_err(|e| format!("malformed predict reply {line:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn info_reply_parses() {
        let r = parse_info_reply(r#"{"id":1,"task":"regression","n_features":4}"#).unwrap();
        assert_eq!(r, InfoReply { id: 1, task: TaskKind::Regression, n_features: 4 });
    }

    #[test]
    fn predict_reply_scalar_and_probs() {
        let r = parse_predict_reply(r#"{"id":2,"predictions":[1.5,-0.5]}"#).unwrap();
        assert_eq!(r.predictions.len(), 2);
        assert!(matches!(r.predictions[0], PredictionValue::Scalar(v) if v == 1.5));

        let r = parse_predict_reply(r#"{"id":3,"predictions":[[0.25,0.75]]}"#).unwrap();
        assert!(matches!(&r.predictions[0], PredictionValue::Probs(p) if p == &[0.25, 0.75]));
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(parse_info_reply("not json").is_err());
        assert!(parse_info_reply(r#"{"id":1}"#).is_err());
        assert!(parse_predict_reply(r#"{"id":true,"predictions":[]}"#).is_err());
    }

    #[test]
    fn request_serialization_shape() {
        let line = serde_json::to_string(&InfoRequest { id: 1, op: "info" }).unwrap();
        assert_eq!(line, r#"{"id":1,"op":"info"}"#);
        let line = serde_json::to_string(&PredictRequest {
            id: 2,
            op: "predict",
            rows: &[vec![1.0, 2.0]],
        })
        .unwrap();
        assert_eq!(line, r#"{"id":2,"op":"predict","rows":[[1.0,2.0]]}"#);
    }
}
