//! The six-step selection pipeline: train an initial model on a
//! representative subset, score features, select, retrain, and compare
//! against a same-budget baseline — once per seed, aggregated across seeds.

pub mod config;
mod report;
mod select;

pub use config::{PipelineConfig, RawConfig};
pub use report::{mean_std, RunReport, SeedReport, REPORT_SCHEMA_VERSION};
pub use select::{select_features, SelectionMask, SelectionRule};

use std::time::Instant;

use thiserror::Error;

use crate::attribution::{
    build_feature_graph, cis_value, importance_over_sample, pfi, shapg, shapley_exact_with_limit,
    CoalitionMethod, ImportanceMethod, ImportanceScores,
};
use crate::dataset::{compute_reference_vector, load_csv, split, Dataset, SplitSpec};
use crate::game::{CfContext, CfMethod, CharacteristicFunction, CoalitionEval};
use crate::models::{fit, fit_with_options, FitOptions, Model};
use crate::sampler::diversity_sample;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty selection: threshold {threshold} is above the maximum score {max_score}")]
    EmptySelection { threshold: f64, max_score: f64 },
    #[error("pipeline step `{step}` failed: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn at_step<E: std::error::Error + Send + Sync + 'static>(
    step: &'static str,
) -> impl FnOnce(E) -> PipelineError {
    move |source| PipelineError::Step { step, source: Box::new(source) }
}

/// Runs the whole pipeline for every configured seed. Deterministic given the
/// config: reports differ only in wall-time fields across identical runs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let data = load_csv(&cfg.data.path, &cfg.data.target, cfg.data.task, None)
        .map_err(at_step("load"))?;

    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();

    let mut seed_reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        seed_reports.push(run_seed(cfg, &data, seed)?);
    }

    let baselines: Vec<f64> = seed_reports.iter().map(|r| r.baseline_metric).collect();
    let selected: Vec<f64> = seed_reports.iter().map(|r| r.selected_metric).collect();
    let deltas: Option<Vec<f64>> =
        seed_reports.iter().map(|r| r.relative_delta).collect::<Option<Vec<f64>>>();
    let final_times: Vec<f64> = seed_reports.iter().map(|r| r.timings.final_fit_s).collect();
    let baseline_times: Vec<f64> = seed_reports.iter().map(|r| r.timings.baseline_fit_s).collect();

    Ok(RunReport {
        schema: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        aggregate: report::Aggregate {
            baseline_metric: mean_std(&baselines),
            selected_metric: mean_std(&selected),
            relative_delta: deltas.as_deref().map(mean_std),
            final_fit_s: mean_std(&final_times),
            baseline_fit_s: mean_std(&baseline_times),
        },
        seeds: seed_reports,
    })
}

/// Standalone importance stage for the `importance` subcommand: gate, sample,
/// fit the initial model, score. No train/test split is carved out.
pub fn importance_only(
    cfg: &PipelineConfig,
    data: &Dataset,
    seed: u64,
) -> Result<ImportanceScores, PipelineError> {
    let gate_fired = data.n() > cfg.sampling.n_gate;
    let importance_data = if gate_fired {
        let s = cfg.sampling.s.min(data.n());
        let sample = diversity_sample(data, s, cfg.sampling.k, seed).map_err(at_step("sample"))?;
        data.subset(&sample.indices).map_err(at_step("sample"))?
    } else {
        data.clone()
    };
    let full_mask = vec![true; data.m()];
    let initial =
        fit(&cfg.initial_spec(seed), &importance_data, &full_mask).map_err(at_step("initial-fit"))?;
    compute_importance(cfg, &importance_data, data, &initial, seed)
}

fn run_seed(cfg: &PipelineConfig, data: &Dataset, seed: u64) -> Result<SeedReport, PipelineError> {
    let run_start = Instant::now();
    log::info!("seed {seed}: splitting {} rows", data.n());

    let spec = SplitSpec {
        train_fraction: cfg.data.train_fraction,
        val_fraction: cfg.data.val_fraction,
        seed,
    };
    let parts = split(data, &spec).map_err(at_step("split"))?;
    let train = &parts.train;

    // Step 3 gate: sample only when the training universe is large.
    let gate_fired = train.n() > cfg.sampling.n_gate;
    let (importance_data, sampling_note) = if gate_fired {
        let s = cfg.sampling.s.min(train.n());
        let sample =
            diversity_sample(train, s, cfg.sampling.k, seed).map_err(at_step("sample"))?;
        let subset = train.subset(&sample.indices).map_err(at_step("sample"))?;
        log::info!("seed {seed}: sampled {s} of {} rows in {} clusters", train.n(), sample.k);
        (
            subset,
            report::SamplingNote {
                applied: true,
                n_rows: train.n(),
                s: Some(sample.s),
                k: Some(sample.k),
            },
        )
    } else {
        log::info!("seed {seed}: sampling skipped ({} rows <= gate)", train.n());
        (
            train.clone(),
            report::SamplingNote { applied: false, n_rows: train.n(), s: None, k: None },
        )
    };

    // Step 2: initial model on the representative subset, limited budget.
    let t = Instant::now();
    let full_mask = vec![true; data.m()];
    let initial =
        fit(&cfg.initial_spec(seed), &importance_data, &full_mask).map_err(at_step("initial-fit"))?;
    let initial_fit_s = t.elapsed().as_secs_f64();

    // Step 4: importance scores on the importance universe.
    let t = Instant::now();
    let scores = compute_importance(cfg, &importance_data, train, &initial, seed)?;
    let importance_s = t.elapsed().as_secs_f64();

    // Step 5: selection.
    let mask = select_features(&scores, cfg.selection)?;
    log::info!("seed {seed}: retained {} of {} features", mask.retained_count(), data.m());

    // Step 6: final model on selected features, baseline on all, same budget.
    let final_train: &Dataset =
        if cfg.final_on_sample { &importance_data } else { train };
    let opts = FitOptions { val: parts.val.as_ref(), patience: Some(config::DEFAULT_PATIENCE) };

    let t = Instant::now();
    let final_model = fit_with_options(&cfg.final_spec(seed), final_train, &mask.mask, opts)
        .map_err(at_step("final-fit"))?;
    let final_fit_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let baseline_model = fit_with_options(&cfg.final_spec(seed), final_train, &full_mask, opts)
        .map_err(at_step("baseline-fit"))?;
    let baseline_fit_s = t.elapsed().as_secs_f64();

    let (eval_data, evaluated_on) = match (&parts.test, &parts.val) {
        (Some(test), _) => (test, "test"),
        (None, Some(val)) => (val, "val"),
        (None, None) => (train, "train"),
    };
    let baseline_metric = evaluate(cfg, &baseline_model, eval_data, &full_mask)?;
    let selected_metric = evaluate(cfg, &final_model, eval_data, &mask.mask)?;
    let relative_delta = if baseline_metric != 0.0 {
        Some((selected_metric - baseline_metric) / baseline_metric)
    } else {
        None
    };

    Ok(SeedReport {
        seed,
        sampling: sampling_note,
        importance: scores.to_json(),
        selection: report::SelectionNote {
            rule: mask.rule,
            mask: mask.mask.clone(),
            retained: mask.retained.clone(),
        },
        evaluated_on: evaluated_on.to_string(),
        baseline_metric,
        selected_metric,
        relative_delta,
        timings: report::Timings {
            initial_fit_s,
            importance_s,
            final_fit_s,
            baseline_fit_s,
            total_s: run_start.elapsed().as_secs_f64(),
        },
    })
}

/// Step 4 dispatch over the configured importance method.
fn compute_importance(
    cfg: &PipelineConfig,
    importance_data: &Dataset,
    reference_data: &Dataset,
    initial: &Model,
    seed: u64,
) -> Result<ImportanceScores, PipelineError> {
    let imp = &cfg.importance;
    if imp.method == ImportanceMethod::Pfi {
        return pfi(initial, importance_data, imp.metric, imp.pfi_repeats, seed)
            .map_err(at_step("importance"));
    }

    let reference = compute_reference_vector(reference_data, cfg.data.numeric_reference);
    let graph = if imp.method == ImportanceMethod::Shapg {
        Some(build_feature_graph(importance_data))
    } else {
        None
    };

    match imp.char_fn {
        CfMethod::GlobalPerf(_) => {
            let mut cf = CharacteristicFunction::new(
                imp.char_fn,
                initial,
                &reference,
                CfContext::Evaluation(importance_data),
            )
            .map_err(at_step("importance"))?;
            let players: Vec<usize> = (0..importance_data.m()).collect();
            let scores = match imp.method {
                ImportanceMethod::Shapley => {
                    shapley_exact_with_limit(&mut cf, &players, imp.max_exact_players)
                }
                ImportanceMethod::Cis => cis_value(&mut cf, &players),
                ImportanceMethod::Shapg => shapg(
                    &mut cf,
                    graph.as_ref().expect("graph built for shapg"),
                    imp.l_threshold,
                    imp.mc_perms,
                    seed,
                ),
                ImportanceMethod::Pfi => unreachable!("handled above"),
            }
            .map_err(at_step("importance"))?;
            let eval_count = cf.eval_count();
            Ok(ImportanceScores {
                method: imp.method,
                char_fn: Some(imp.char_fn),
                seed,
                feature_names: importance_data.feature_names(),
                scores,
                per_sample: None,
                eval_count,
            })
        }
        _ => {
            let method = match imp.method {
                ImportanceMethod::Shapley => {
                    CoalitionMethod::Shapley { max_players: imp.max_exact_players }
                }
                ImportanceMethod::Cis => CoalitionMethod::Cis,
                ImportanceMethod::Shapg => CoalitionMethod::Shapg {
                    graph: graph.as_ref().expect("graph built for shapg"),
                    l_threshold: imp.l_threshold,
                    mc_perms: imp.mc_perms,
                },
                ImportanceMethod::Pfi => unreachable!("handled above"),
            };
            let indices: Vec<usize> = (0..importance_data.n()).collect();
            importance_over_sample(
                &method,
                imp.char_fn,
                initial,
                importance_data,
                &indices,
                &reference,
                seed,
            )
            .map_err(at_step("importance"))
        }
    }
}

fn evaluate(
    cfg: &PipelineConfig,
    model: &Model,
    eval: &Dataset,
    mask: &[bool],
) -> Result<f64, PipelineError> {
    let rows = eval.rows_masked(mask);
    let preds = model.predict(&rows).map_err(at_step("evaluate"))?;
    cfg.importance.metric.compute(&preds, &eval.target().values).map_err(at_step("evaluate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use std::io::Write;

    /// y = 3 x0 - 2 x1 + 0.05 eps with one pure-noise column.
    fn write_linear_csv(path: &std::path::Path, n: usize) {
        let mut rng = stream_rng(99, "test/pipeline-data");
        let mut f = std::fs::File::create(path).unwrap();
        writeln!(f, "x0,x1,noise,y").unwrap();
        for _ in 0..n {
            let x0: f64 = rng.gen_range(-1.0..1.0);
            let x1: f64 = rng.gen_range(-1.0..1.0);
            let noise: f64 = rng.gen_range(-1.0..1.0);
            let eps: f64 = rng.gen_range(-1.0..1.0);
            let y = 3.0 * x0 - 2.0 * x1 + 0.05 * eps;
            writeln!(f, "{x0},{x1},{noise},{y}").unwrap();
        }
    }

    fn base_config(path: &std::path::Path, extra: &str) -> PipelineConfig {
        let text = format!(
            "[data]\npath = \"{}\"\ntarget = \"y\"\ntask = \"regression\"\n{extra}",
            path.display()
        );
        RawConfig::from_toml_str(&text).unwrap().resolve().unwrap()
    }

    #[test]
    fn q_one_selected_model_equals_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 120);
        let cfg = base_config(&csv, "[selection]\ntop_q = 1.0\n[importance]\nmethod = \"pfi\"\n");
        let report = run_pipeline(&cfg).unwrap();
        for seed in &report.seeds {
            assert_eq!(seed.baseline_metric, seed.selected_metric);
            assert_eq!(seed.relative_delta, Some(0.0));
        }
    }

    #[test]
    fn small_dataset_skips_sampling() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 100);
        let cfg = base_config(&csv, "");
        let report = run_pipeline(&cfg).unwrap();
        assert!(!report.seeds[0].sampling.applied);
        assert_eq!(report.seeds[0].sampling.s, None);
    }

    #[test]
    fn gate_triggers_sampling() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 300);
        let cfg = base_config(
            &csv,
            "[sampling]\nn_gate = 100\ns = 64\n[importance]\nmethod = \"pfi\"\n",
        );
        let report = run_pipeline(&cfg).unwrap();
        let note = &report.seeds[0].sampling;
        assert!(note.applied);
        assert_eq!(note.s, Some(64));
    }

    #[test]
    fn three_seeds_give_three_blocks_ordered_by_seed() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 90);
        let cfg = base_config(
            &csv,
            "[run]\nseeds = [2, 0, 1]\n[importance]\nmethod = \"pfi\"\n",
        );
        let report = run_pipeline(&cfg).unwrap();
        let got: Vec<u64> = report.seeds.iter().map(|s| s.seed).collect();
        assert_eq!(got, vec![0, 1, 2]);
        assert_eq!(report.seeds.len(), 3);
    }

    #[test]
    fn relative_delta_matches_raw_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 150);
        let cfg = base_config(&csv, "[selection]\ntop_q = 0.67\n");
        let report = run_pipeline(&cfg).unwrap();
        for seed in &report.seeds {
            let expected = (seed.selected_metric - seed.baseline_metric) / seed.baseline_metric;
            assert_eq!(seed.relative_delta, Some(expected));
        }
    }

    #[test]
    fn final_model_width_equals_mask_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        write_linear_csv(&csv, 100);
        let cfg = base_config(&csv, "[selection]\ntop_q = 0.67\n");
        let report = run_pipeline(&cfg).unwrap();
        let retained = report.seeds[0].selection.retained.len();
        let mask_count =
            report.seeds[0].selection.mask.iter().filter(|&&b| b).count();
        assert_eq!(retained, mask_count);
        assert_eq!(retained, 2); // round(0.67 * 3)
    }

    #[test]
    fn failures_name_their_step() {
        let cfg_missing = RawConfig::from_toml_str(
            "[data]\npath = \"/nonexistent/nope.csv\"\ntarget = \"y\"\ntask = \"regression\"\n",
        )
        .unwrap()
        .resolve()
        .unwrap();
        match run_pipeline(&cfg_missing) {
            Err(PipelineError::Step { step: "load", .. }) => {}
            other => panic!("expected load step failure, got {other:?}"),
        }
    }
}
