//! Machine-readable run reports.

use serde::Serialize;

use super::config::PipelineConfig;
use super::select::SelectionRule;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub config: PipelineConfig,
    pub seeds: Vec<SeedReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub sampling: SamplingNote,
    pub importance: serde_json::Value,
    pub selection: SelectionNote,
    /// Split the metrics below were computed on: test when present, else val,
    /// else train.
    pub evaluated_on: String,
    pub baseline_metric: f64,
    pub selected_metric: f64,
    /// (selected - baseline) / baseline; absent when the baseline is zero.
    pub relative_delta: Option<f64>,
    pub timings: Timings,
}

#[derive(Debug, Serialize)]
pub struct SamplingNote {
    /// False means the gate did not fire and importance ran on all rows.
    pub applied: bool,
    pub n_rows: usize,
    pub s: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct SelectionNote {
    pub rule: SelectionRule,
    pub mask: Vec<bool>,
    pub retained: Vec<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub initial_fit_s: f64,
    pub importance_s: f64,
    pub final_fit_s: f64,
    pub baseline_fit_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub baseline_metric: MeanStd,
    pub selected_metric: MeanStd,
    pub relative_delta: Option<MeanStd>,
    pub final_fit_s: MeanStd,
    pub baseline_fit_s: MeanStd,
}

#[derive(Debug, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Sample mean and standard deviation (ddof = 1); std is 0 for one value.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

impl RunReport {
    /// Zeroes every wall-time field. Two runs of the same config are
    /// byte-identical after this.
    pub fn zero_timings(&mut self) {
        for seed in &mut self.seeds {
            seed.timings = Timings::default();
        }
        self.aggregate.final_fit_s = MeanStd { mean: 0.0, std: 0.0 };
        self.aggregate.baseline_fit_s = MeanStd { mean: 0.0, std: 0.0 };
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_computation() {
        let ms = mean_std(&[1.0, 2.0, 3.0]);
        assert!((ms.mean - 2.0).abs() < 1e-12);
        assert!((ms.std - 1.0).abs() < 1e-12);
        let single = mean_std(&[5.0]);
        assert_eq!(single.std, 0.0);
    }
}
