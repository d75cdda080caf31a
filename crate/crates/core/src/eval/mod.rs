//! Retrain-and-test evaluation of coresets over method x rate x repeat
//! grids, plus score-component ablations.

mod csv;
mod report;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelConfig};
use crate::dataset::{generate_dataset, read_dataset, Dataset, Split};
use crate::dynamics::{record_training, TrajectoryStore};
use crate::error::{Error, Result};
use crate::nn::{argmax, init_params, predict_all, train, Examples, ModelSpec, Parameters, TrainConfig};
use crate::rng::{derive_seed, tag};
use crate::scoring::{score_dataset, ComponentMask, ScoreTable};
use crate::selection::{select, Coreset, Method, SelectionConfig};

pub use csv::{ablation_csv, parse_results_csv};
pub use report::{render_report, REFERENCE_POINT};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub accuracy: f64,
    /// Accuracy on each class's test frames, by class index.
    pub per_class: Vec<f64>,
}

/// Top-1 accuracy of `params` on the test split.
pub fn test_accuracy(dataset: &Dataset, spec: &ModelSpec, params: &Parameters) -> Result<EvalOutcome> {
    let test = dataset.examples(Split::Test);
    if test.is_empty() {
        return Err(Error::invalid("test split is empty"));
    }
    let outs = predict_all(spec, params, &test);
    let c = dataset.num_classes();
    let mut hits = vec![0usize; c];
    let mut totals = vec![0usize; c];
    for (out, &y) in outs.iter().zip(&test.labels) {
        totals[y] += 1;
        if argmax(&out.probs) == y {
            hits[y] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    Ok(EvalOutcome {
        accuracy: correct as f64 / test.len() as f64,
        per_class: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
            .collect(),
    })
}

/// Trains a fresh model (initialized from `cfg.seed`) on the given train
/// ids, in ascending id order, and scores it on the test split.
pub fn train_and_eval(dataset: &Dataset, ids: &[u64], spec: &ModelSpec, cfg: &TrainConfig) -> Result<EvalOutcome> {
    if ids.is_empty() {
        return Err(Error::invalid("coreset is empty"));
    }
    if spec.frame_len != dataset.frame_len || spec.num_classes != dataset.num_classes() {
        return Err(Error::invalid("model spec does not match dataset shape"));
    }
    let wanted: HashSet<u64> = ids.iter().copied().collect();
    let mut frames: Vec<_> = dataset.train().filter(|f| wanted.contains(&f.sample_id)).collect();
    if frames.len() != wanted.len() {
        return Err(Error::invalid(format!(
            "{} coreset ids are not in the train split",
            wanted.len() - frames.len()
        )));
    }
    frames.sort_by_key(|f| f.sample_id);
    let mut data = Examples::new(spec.input_dim());
    for f in frames {
        data.push(&f.to_input(), f.label);
    }
    let (params, _) = train(spec, &data, cfg)?;
    test_accuracy(dataset, spec, &params)
}

/// Accuracy of a freshly initialized, untrained model.
pub fn untrained_accuracy(dataset: &Dataset, spec: &ModelSpec, seed: u64) -> Result<EvalOutcome> {
    test_accuracy(dataset, spec, &init_params(spec, seed)?)
}

/// Seed shared by selection and retraining in one grid cell.
pub fn cell_seed(base_seed: u64, method: Method, rate: f64, repeat: usize) -> u64 {
    derive_seed(base_seed, &[tag("cell"), tag(method.name()), rate.to_bits(), repeat as u64])
}

/// Seed of the trajectory recording pass.
pub fn record_seed(base_seed: u64) -> u64 {
    derive_seed(base_seed, &[tag("record")])
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset_path {
        Some(p) => read_dataset(p),
        None => generate_dataset(&cfg.dataset),
    }
}

/// Everything computed once per experiment: data, one recording pass with
/// the selection model, and its score table.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub select_spec: ModelSpec,
    pub eval_spec: ModelSpec,
    pub store: TrajectoryStore,
    pub scores: ScoreTable,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    prepare_with(cfg, dataset)
}

pub fn prepare_with(cfg: &ExperimentConfig, dataset: Dataset) -> Result<Prepared> {
    cfg.validate()?;
    let select_spec = cfg.selection_model(dataset.frame_len, dataset.num_classes())?;
    let eval_spec = cfg.evaluation_model(dataset.frame_len, dataset.num_classes())?;
    let store = record_training(&dataset, &select_spec, &cfg.record.with_seed(record_seed(cfg.base_seed)))?;
    let scores = score_dataset(&store, Some(cfg.beta))?;
    Ok(Prepared {
        dataset,
        select_spec,
        eval_spec,
        store,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub rate: f64,
    pub repeat: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    pub coreset_size: usize,
    pub coreset_digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rate: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single repeat.
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub class_names: Vec<String>,
    pub cells: Vec<CellResult>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl ResultTable {
    /// Means and standard deviations per (method, rate), in the order the
    /// cells first appear.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(Method, u64)> = Vec::new();
        let mut acc: BTreeMap<(Method, u64), Vec<f64>> = BTreeMap::new();
        for c in &self.cells {
            let key = (c.method, c.rate.to_bits());
            acc.entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(c.accuracy);
        }
        order
            .into_iter()
            .map(|key| {
                let v = &acc[&key];
                let (mean, std) = mean_std(v);
                SummaryRow {
                    method: key.0,
                    rate: f64::from_bits(key.1),
                    mean,
                    std,
                    n: v.len(),
                }
            })
            .collect()
    }

    pub fn mean(&self, method: Method, rate: f64) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|r| r.method == method && r.rate == rate)
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        csv::results_csv(self)
    }
}

fn cell_error(method: Method, rate: f64, repeat: usize, e: Error) -> Error {
    Error::Cell {
        method: method.name().to_string(),
        rate,
        repeat,
        source: Box::new(e),
    }
}

fn selection_config(cfg: &ExperimentConfig, method: Method, rate: f64, seed: u64) -> SelectionConfig {
    SelectionConfig {
        method,
        rate,
        tiers: cfg.tiers,
        class_balanced: cfg.class_balanced,
        snr_stratified: cfg.snr_stratified,
        seed,
    }
}

/// Coreset of one grid cell.
pub fn cell_coreset(cfg: &ExperimentConfig, prep: &Prepared, method: Method, rate: f64, repeat: usize) -> Result<Coreset> {
    let seed = cell_seed(cfg.base_seed, method, rate, repeat);
    select(&prep.scores, Some(&prep.store), &selection_config(cfg, method, rate, seed))
}

/// Runs every (method, rate, repeat) cell: select, retrain the evaluation
/// model with the cell seed, test. Cells run in parallel; output order is
/// methods, then rates, then repeats as listed in the config.
pub fn run_grid(cfg: &ExperimentConfig, prep: &Prepared) -> Result<ResultTable> {
    let mut keys = Vec::new();
    for &m in &cfg.methods {
        for &r in &cfg.rates {
            for k in 0..cfg.repeats {
                keys.push((m, r, k));
            }
        }
    }
    let cells = keys
        .par_iter()
        .map(|&(method, rate, repeat)| {
            let run = || -> Result<CellResult> {
                let seed = cell_seed(cfg.base_seed, method, rate, repeat);
                let coreset = cell_coreset(cfg, prep, method, rate, repeat)?;
                let out = train_and_eval(&prep.dataset, &coreset.indices, &prep.eval_spec, &cfg.retrain.with_seed(seed))?;
                Ok(CellResult {
                    method,
                    rate,
                    repeat,
                    seed,
                    accuracy: out.accuracy,
                    per_class: out.per_class,
                    coreset_size: coreset.len(),
                    coreset_digest: coreset.digest(),
                })
            };
            run().map_err(|e| cell_error(method, rate, repeat, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        class_names: prep.dataset.classes.iter().map(|c| c.name().to_string()).collect(),
        cells,
    })
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub prepared: Prepared,
    pub table: ResultTable,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let prepared = prepare(cfg)?;
    let table = run_grid(cfg, &prepared)?;
    Ok(Experiment { prepared, table })
}

/// Same grid with scores from `select_model` and retraining on `eval_model`.
pub fn cross_arch_experiment(cfg: &ExperimentConfig, select_model: ModelConfig, eval_model: ModelConfig) -> Result<Experiment> {
    let cfg = ExperimentConfig {
        select_model,
        eval_model,
        ..cfg.clone()
    };
    run_experiment(&cfg)
}

/// Provenance record written next to a results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub dataset_digest: String,
    pub select_model_digest: String,
    pub eval_model_digest: String,
    pub trajectory_digest: String,
    pub scores_digest: String,
    pub results_digest: String,
    pub cells: Vec<ManifestCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub method: Method,
    pub rate: f64,
    pub repeat: usize,
    pub seed: u64,
    pub coreset_size: usize,
    pub coreset_digest: String,
}

impl RunManifest {
    pub fn build(cfg: &ExperimentConfig, prep: &Prepared, results_csv: &str) -> RunManifest {
        Self::build_cells(cfg, prep, results_csv, Vec::new())
    }

    pub fn for_experiment(cfg: &ExperimentConfig, exp: &Experiment) -> RunManifest {
        let cells = exp
            .table
            .cells
            .iter()
            .map(|c| ManifestCell {
                method: c.method,
                rate: c.rate,
                repeat: c.repeat,
                seed: c.seed,
                coreset_size: c.coreset_size,
                coreset_digest: c.coreset_digest.clone(),
            })
            .collect();
        Self::build_cells(cfg, &exp.prepared, &exp.table.to_csv(), cells)
    }

    fn build_cells(cfg: &ExperimentConfig, prep: &Prepared, results_csv: &str, cells: Vec<ManifestCell>) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            config_digest: crate::digest::json_digest(cfg),
            dataset_digest: prep.dataset.digest(),
            select_model_digest: prep.select_spec.digest(),
            eval_model_digest: prep.eval_spec.digest(),
            trajectory_digest: prep.store.digest(),
            scores_digest: prep.scores.digest(),
            results_digest: crate::digest::sha256_hex(results_csv.as_bytes()),
            cells,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is serializable");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub mask: ComponentMask,
    pub rate: f64,
    pub repeat: usize,
    pub seed: u64,
    pub coreset_digest: String,
    pub accuracy: f64,
}

/// Tiered selection on each of the seven component subsets of the score,
/// with the seeds the main grid uses for `foqus`, then retraining.
pub fn run_ablation(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<AblationRow>> {
    let mut keys = Vec::new();
    for mask in ComponentMask::combinations() {
        for &rate in &cfg.rates {
            for repeat in 0..cfg.repeats {
                keys.push((mask, rate, repeat));
            }
        }
    }
    keys.par_iter()
        .map(|&(mask, rate, repeat)| {
            let run = || -> Result<AblationRow> {
                let seed = cell_seed(cfg.base_seed, Method::Foqus, rate, repeat);
                let scores = prep.scores.with_mask(mask)?;
                let coreset = select(&scores, None, &selection_config(cfg, Method::Foqus, rate, seed))?;
                let out = train_and_eval(&prep.dataset, &coreset.indices, &prep.eval_spec, &cfg.retrain.with_seed(seed))?;
                Ok(AblationRow {
                    mask,
                    rate,
                    repeat,
                    seed,
                    coreset_digest: coreset.digest(),
                    accuracy: out.accuracy,
                })
            };
            run().map_err(|e| cell_error(Method::Foqus, rate, repeat, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.2).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let mut seen = HashSet::new();
        for m in Method::ALL {
            for r in crate::config::DEFAULT_RATES.iter().chain(&[1.0, 0.5]) {
                for k in 0..10 {
                    assert!(seen.insert(cell_seed(0, m, *r, k)));
                }
            }
        }
        assert!(!seen.contains(&record_seed(0)));
    }
}
