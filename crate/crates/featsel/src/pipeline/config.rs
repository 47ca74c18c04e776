//! Pipeline configuration: TOML file with per-module sections, flag
//! overrides on top, everything defaulted. Unknown keys are hard errors so
//! typos cannot silently corrupt an experiment.

use serde::{Deserialize, Serialize};

use super::select::SelectionRule;
use super::PipelineError;
use crate::attribution::{ImportanceMethod, DEFAULT_MAX_EXACT_PLAYERS};
use crate::dataset::{NumericStrategy, TaskKind};
use crate::game::{CfMethod, Metric};
use crate::models::{PredictorKind, PredictorSpec};
use crate::sampler::DEFAULT_SAMPLE_SIZE;

/// Library-level default for the ShapG collaborator-set threshold.
pub const DEFAULT_L_THRESHOLD: usize = 15;
/// Default Monte Carlo permutation budget per feature.
pub const DEFAULT_MC_PERMS: usize = 200;
/// Early-stopping patience for final training when a validation split exists.
pub const DEFAULT_PATIENCE: usize = 16;
/// Observation-count gate above which diversity sampling kicks in.
pub const DEFAULT_N_GATE: usize = 10_000;
/// Default retained fraction for top-q selection.
pub const DEFAULT_TOP_Q: f64 = 0.8;

/// Fully resolved pipeline configuration, echoed verbatim into run reports.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub initial_model: PredictorKind,
    pub final_model: PredictorKind,
    pub importance: ImportanceConfig,
    pub selection: SelectionRule,
    pub sampling: SamplingConfig,
    pub seeds: Vec<u64>,
    pub final_on_sample: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataConfig {
    pub path: String,
    pub target: String,
    pub task: TaskKind,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub numeric_reference: NumericStrategy,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceConfig {
    pub method: ImportanceMethod,
    pub char_fn: CfMethod,
    pub metric: Metric,
    pub l_threshold: usize,
    pub mc_perms: usize,
    pub pfi_repeats: usize,
    pub max_exact_players: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingConfig {
    pub n_gate: usize,
    pub s: usize,
    pub k: Option<usize>,
}

impl PipelineConfig {
    pub fn initial_spec(&self, seed: u64) -> PredictorSpec {
        PredictorSpec { kind: self.initial_model.clone(), task: self.data.task, seed }
    }

    pub fn final_spec(&self, seed: u64) -> PredictorSpec {
        PredictorSpec { kind: self.final_model.clone(), task: self.data.task, seed }
    }
}

// ---------------------------------------------------------------------------
// Raw TOML layer
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub data: RawData,
    #[serde(default)]
    pub model: RawModels,
    #[serde(default)]
    pub importance: RawImportance,
    #[serde(default)]
    pub selection: RawSelection,
    #[serde(default)]
    pub sampling: RawSampling,
    #[serde(default)]
    pub run: RawRun,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawData {
    pub path: Option<String>,
    pub target: Option<String>,
    pub task: Option<TaskKind>,
    pub train_fraction: Option<f64>,
    pub val_fraction: Option<f64>,
    pub numeric_reference: Option<NumericStrategy>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModels {
    #[serde(default)]
    pub initial: RawModel,
    #[serde(default)]
    pub r#final: RawModel,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub kind: Option<String>,
    pub lambda: Option<f64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub hidden_width: Option<usize>,
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawImportance {
    pub method: Option<String>,
    pub char_fn: Option<String>,
    pub metric: Option<String>,
    pub l_threshold: Option<usize>,
    pub mc_perms: Option<usize>,
    pub pfi_repeats: Option<usize>,
    pub max_exact_players: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSelection {
    pub top_q: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    pub n_gate: Option<usize>,
    pub s: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub seeds: Option<Vec<u64>>,
    pub final_on_sample: Option<bool>,
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }

    /// Resolves defaults and validates cross-field invariants.
    pub fn resolve(self) -> Result<PipelineConfig, PipelineError> {
        let invalid = |msg: String| PipelineError::InvalidConfig(msg);

        let path = self.data.path.ok_or_else(|| invalid("data.path is required".into()))?;
        let target = self.data.target.ok_or_else(|| invalid("data.target is required".into()))?;
        let task = self.data.task.ok_or_else(|| invalid("data.task is required".into()))?;
        let train_fraction = self.data.train_fraction.unwrap_or(0.8);
        let val_fraction = self.data.val_fraction.unwrap_or(0.1);
        let numeric_reference = self.data.numeric_reference.unwrap_or(NumericStrategy::Mean);

        let method = match self.importance.method.as_deref() {
            None => ImportanceMethod::Shapg,
            Some(s) => s.parse().map_err(invalid)?,
        };
        let metric = match self.importance.metric.as_deref() {
            Some(s) => s.parse().map_err(invalid)?,
            None => {
                if task == TaskKind::Regression {
                    Metric::R2
                } else {
                    Metric::Accuracy
                }
            }
        };
        if metric.is_regression() != (task == TaskKind::Regression) {
            return Err(invalid(format!("metric {metric} does not fit task {task}")));
        }
        let char_fn = match self.importance.char_fn.as_deref() {
            None | Some("sample-perf") => CfMethod::SamplePerf,
            Some("output") => CfMethod::ModelOutput,
            Some("global-perf") => CfMethod::GlobalPerf(metric),
            Some(other) => {
                return Err(invalid(format!(
                    "unknown char_fn {other:?} (expected output, sample-perf, global-perf)"
                )))
            }
        };

        let selection = match (self.selection.top_q, self.selection.threshold) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "selection.top_q and selection.threshold are mutually exclusive".into(),
                ))
            }
            (None, Some(t)) => SelectionRule::Threshold(t),
            (Some(q), None) => SelectionRule::TopQ(q),
            (None, None) => SelectionRule::TopQ(DEFAULT_TOP_Q),
        };
        if let SelectionRule::TopQ(q) = selection {
            if !(q > 0.0 && q <= 1.0) {
                return Err(invalid(format!("top_q must be in (0, 1], got {q}")));
            }
        }

        let s = self.sampling.s.unwrap_or(DEFAULT_SAMPLE_SIZE);
        if s == 0 {
            return Err(invalid("sampling.s must be >= 1".into()));
        }

        let seeds = self.run.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(invalid("run.seeds must not be empty".into()));
        }

        let initial_model = resolve_model(&self.model.initial, task, 8)?;
        let final_model = resolve_model(&self.model.r#final, task, 64)?;

        Ok(PipelineConfig {
            data: DataConfig { path, target, task, train_fraction, val_fraction, numeric_reference },
            initial_model,
            final_model,
            importance: ImportanceConfig {
                method,
                char_fn,
                metric,
                l_threshold: self.importance.l_threshold.unwrap_or(DEFAULT_L_THRESHOLD),
                mc_perms: self.importance.mc_perms.unwrap_or(DEFAULT_MC_PERMS),
                pfi_repeats: self.importance.pfi_repeats.unwrap_or(crate::attribution::DEFAULT_PFI_REPEATS),
                max_exact_players: self
                    .importance
                    .max_exact_players
                    .unwrap_or(DEFAULT_MAX_EXACT_PLAYERS),
            },
            selection,
            sampling: SamplingConfig {
                n_gate: self.sampling.n_gate.unwrap_or(DEFAULT_N_GATE),
                s,
                k: self.sampling.k,
            },
            seeds,
            final_on_sample: self.run.final_on_sample.unwrap_or(false),
        })
    }
}

fn resolve_model(
    raw: &RawModel,
    task: TaskKind,
    default_epochs: usize,
) -> Result<PredictorKind, PipelineError> {
    let default_kind = if task == TaskKind::Regression { "ridge" } else { "logistic" };
    let kind = raw.kind.as_deref().unwrap_or(default_kind);
    match kind {
        "ridge" => Ok(PredictorKind::Ridge { lambda: raw.lambda.unwrap_or(1e-3) }),
        "logistic" => Ok(PredictorKind::Logistic {
            lr: raw.lr.unwrap_or(0.1),
            epochs: raw.epochs.unwrap_or(default_epochs),
            batch: raw.batch.unwrap_or(32),
        }),
        "mlp" => Ok(PredictorKind::Mlp {
            hidden_width: raw.hidden_width.unwrap_or(32),
            lr: raw.lr.unwrap_or(0.05),
            epochs: raw.epochs.unwrap_or(default_epochs),
            batch: raw.batch.unwrap_or(32),
        }),
        "external" => {
            let command = raw.command.clone().unwrap_or_default();
            if command.is_empty() {
                return Err(PipelineError::InvalidConfig(
                    "external model needs a non-empty command".into(),
                ));
            }
            Ok(PredictorKind::External { command })
        }
        other => Err(PipelineError::InvalidConfig(format!(
            "unknown model kind {other:?} (expected ridge, logistic, mlp, external)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        "[data]\npath = \"d.csv\"\ntarget = \"y\"\ntask = \"regression\"\n"
    }

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = RawConfig::from_toml_str(minimal_toml()).unwrap().resolve().unwrap();
        assert_eq!(cfg.importance.method, ImportanceMethod::Shapg);
        assert_eq!(cfg.importance.char_fn, CfMethod::SamplePerf);
        assert_eq!(cfg.importance.metric, Metric::R2);
        assert_eq!(cfg.importance.l_threshold, DEFAULT_L_THRESHOLD);
        assert!(matches!(cfg.selection, SelectionRule::TopQ(q) if q == DEFAULT_TOP_Q));
        assert_eq!(cfg.sampling.n_gate, DEFAULT_N_GATE);
        assert_eq!(cfg.seeds, vec![0]);
        assert!(matches!(cfg.initial_model, PredictorKind::Ridge { .. }));
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let text = "[data]\npath = \"d.csv\"\ntarget = \"y\"\ntask = \"regression\"\ntypo_key = 1\n";
        assert!(RawConfig::from_toml_str(text).is_err());
        let text = "[dataa]\n";
        assert!(RawConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn threshold_and_top_q_are_exclusive() {
        let text = format!("{}\n[selection]\ntop_q = 0.5\nthreshold = 0.1\n", minimal_toml());
        let err = RawConfig::from_toml_str(&text).unwrap().resolve();
        assert!(matches!(err, Err(PipelineError::InvalidConfig(_))));
    }

    #[test]
    fn metric_task_mismatch_is_rejected() {
        let text = format!("{}\n[importance]\nmetric = \"accuracy\"\n", minimal_toml());
        assert!(RawConfig::from_toml_str(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn classification_defaults_to_logistic_accuracy() {
        let text = "[data]\npath = \"d.csv\"\ntarget = \"y\"\ntask = \"binclass\"\n";
        let cfg = RawConfig::from_toml_str(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.importance.metric, Metric::Accuracy);
        assert!(matches!(cfg.initial_model, PredictorKind::Logistic { epochs: 8, .. }));
        assert!(matches!(cfg.final_model, PredictorKind::Logistic { epochs: 64, .. }));
    }
}
