//! Game-theoretic feature selection for tabular data.
//!
//! Features are treated as players in a cooperative game whose characteristic
//! function is derived from a trained model's behaviour on hybrid inputs
//! (observed values for features inside a coalition, reference statistics for
//! the rest). Importance scores come from exact Shapley values, the CIS value,
//! Monte Carlo Shapley, the graph-restricted ShapG scheme, or permutation
//! feature importance. A diversity sampler keeps coalition evaluation
//! tractable on large datasets, and a pipeline ties everything together:
//! train an initial model, score features, drop the weak ones, retrain.
//!
//! The `featsel` binary exposes the pipeline as `sample` / `importance` /
//! `select` / `run` subcommands; see the crate README for the CLI and the
//! external-model wire protocol.

pub mod attribution;
pub mod cli;
pub mod dataset;
pub mod game;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod sampler;
