//! Experiment runner: sweep selectors over prototype counts and
//! repetitions, embed the splits, classify, and emit CSV tables.
//!
//! Every repetition re-splits the dataset with a seed derived from the
//! master seed, runs each selector on the validation pool, embeds the train
//! and test splits against the selected prototypes, and records errors,
//! phase timings and measure-evaluation counts. Records are written
//! incrementally, so a crash loses at most one.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{select_fft, select_forward, select_kcentres, select_random};
use crate::dataset::{self, Dataset, SplitSpec};
use crate::dissim::{DissimilarityProvider, Measure};
use crate::dspace::{classify_1nn, classify_ldc, embed, error_rate, PrototypeSet};
use crate::error::{Error, Result};
use crate::fitness::{FitnessContext, FitnessKind};
use crate::ga::{run_ga, GaParams};
use crate::hashing::{train_pivots, DEFAULT_TRAIN_SAMPLE_CAP};

/// Where the experiment data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: String, label_column: String },
    Binary { path: String },
    Blobs { classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, label_column } => dataset::load_csv(path, label_column),
            DataSource::Binary { path } => dataset::load_binary(path),
            DataSource::Blobs { classes, per_class, dim, spread, seed } => {
                dataset::generate_blobs(*classes, *per_class, *dim, *spread, *seed)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    OneNn,
    Ldc,
}

impl Classifier {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1nn" | "1-nn" | "nn" => Ok(Classifier::OneNn),
            "ldc" => Ok(Classifier::Ldc),
            other => Err(Error::Config(format!("unknown classifier {other:?}; expected 1nn or ldc"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classifier::OneNn => "1nn",
            Classifier::Ldc => "ldc",
        }
    }
}

/// A selector to sweep, with the GA variants spelled out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorSpec {
    Random,
    Fft,
    Kcentres,
    Forward,
    Ga { fitness: FitnessKind, clustering: bool },
}

impl SelectorSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(SelectorSpec::Random),
            "fft" => Ok(SelectorSpec::Fft),
            "kcentres" | "kcenters" => Ok(SelectorSpec::Kcentres),
            "forward" | "fs" => Ok(SelectorSpec::Forward),
            "ga-mst" => Ok(SelectorSpec::Ga { fitness: FitnessKind::Mst, clustering: false }),
            "ga-mst-clust" => Ok(SelectorSpec::Ga { fitness: FitnessKind::Mst, clustering: true }),
            "ga-sup" => Ok(SelectorSpec::Ga { fitness: FitnessKind::Supervised, clustering: false }),
            "ga-sup-clust" => {
                Ok(SelectorSpec::Ga { fitness: FitnessKind::Supervised, clustering: true })
            }
            "ga-sup-lsh" => {
                Ok(SelectorSpec::Ga { fitness: FitnessKind::SupervisedLsh, clustering: false })
            }
            "ga-sup-lsh-clust" => {
                Ok(SelectorSpec::Ga { fitness: FitnessKind::SupervisedLsh, clustering: true })
            }
            other => Err(Error::Config(format!("unknown selector {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SelectorSpec::Random => "random".into(),
            SelectorSpec::Fft => "fft".into(),
            SelectorSpec::Kcentres => "kcentres".into(),
            SelectorSpec::Forward => "forward".into(),
            SelectorSpec::Ga { fitness, clustering } => {
                if *clustering {
                    format!("ga-{}-clust", fitness.name())
                } else {
                    format!("ga-{}", fitness.name())
                }
            }
        }
    }
}

/// Full description of a benchmark sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub measure: Measure,
    /// Split fractions; the seed field is ignored and re-derived per repetition.
    pub split: SplitSpec,
    pub selectors: Vec<SelectorSpec>,
    pub k_values: Vec<usize>,
    pub repetitions: usize,
    pub classifiers: Vec<Classifier>,
    /// Shared GA settings; the seed and clustering flag are overridden per run.
    pub ga: GaParams,
    pub pivot_count: usize,
    pub pivot_rounds: usize,
    pub kcentres_max_iters: usize,
    /// Ridge for the linear discriminant; None uses the trace-scaled default.
    pub ldc_reg: Option<f64>,
    /// Let classifier-training objects also serve as selection candidates.
    pub overlap_train_validation: bool,
    pub output_dir: Option<PathBuf>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// A runnable starting point for the given data source and seed.
    pub fn new(data: DataSource, master_seed: u64) -> Self {
        Self {
            data,
            measure: Measure::Euclidean,
            split: SplitSpec {
                validation_fraction: 0.8,
                train_fraction: 0.1,
                test_fraction: 0.1,
                seed: 0,
            },
            selectors: vec![SelectorSpec::Random],
            k_values: vec![10, 20, 30, 40],
            repetitions: 10,
            classifiers: vec![Classifier::OneNn],
            ga: GaParams::default(),
            pivot_count: 64,
            pivot_rounds: 10,
            kcentres_max_iters: 50,
            ldc_reg: None,
            overlap_train_validation: false,
            output_dir: None,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.selectors.is_empty() {
            return Err(Error::Config("at least one selector is required".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::Config("k values must be nonempty and positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("at least one classifier is required".into()));
        }
        if self.split.train_fraction == 0.0 || self.split.test_fraction == 0.0 {
            return Err(Error::Config(
                "train and test fractions must be positive to measure errors".into(),
            ));
        }
        self.split.validate()?;
        self.ga.validate()?;
        if self.pivot_count == 0 {
            return Err(Error::Config("pivot count must be positive".into()));
        }
        Ok(())
    }
}

/// One selection-plus-evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub selector: String,
    pub k: usize,
    pub repetition: usize,
    pub seed: u64,
    pub error_1nn: Option<f64>,
    pub error_ldc: Option<f64>,
    pub selection_seconds: f64,
    pub embedding_seconds: f64,
    pub classification_seconds: f64,
    /// Measure evaluations spent in the selection phase (including
    /// accelerator training for the hashed variants).
    pub measure_evals: u64,
    pub selected: Vec<usize>,
    pub fitness_trace: Vec<f64>,
    /// Selector failure, when one occurred; the sweep continues.
    pub error_message: Option<String>,
}

/// Aggregated view per (selector, k, classifier).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub selector: String,
    pub k: usize,
    pub classifier: String,
    pub runs: usize,
    pub mean_error: f64,
    /// Sample standard deviation (n-1 convention); zero for a single run.
    pub sd_error: f64,
    pub mean_selection_seconds: f64,
    pub mean_measure_evals: f64,
}

/// Deterministic seed derivation: one master seed, many independent streams.
fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(master ^ splitmix64(purpose.wrapping_add(1)) ^ splitmix64(index.wrapping_mul(0x9E37_79B9)))
}

struct RecordWriter {
    writer: Option<csv::Writer<BufWriter<File>>>,
}

impl RecordWriter {
    fn new(path: Option<&Path>) -> Result<Self> {
        let writer = match path {
            Some(path) => {
                let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
                w.write_record(RECORD_HEADER)?;
                w.flush()?;
                Some(w)
            }
            None => None,
        };
        Ok(Self { writer })
    }

    fn append(&mut self, record: &RunRecord) -> Result<()> {
        if let Some(w) = &mut self.writer {
            w.write_record(record_fields(record))?;
            w.flush()?;
        }
        Ok(())
    }
}

const RECORD_HEADER: [&str; 13] = [
    "selector",
    "k",
    "repetition",
    "seed",
    "error_1nn",
    "error_ldc",
    "selection_seconds",
    "embedding_seconds",
    "classification_seconds",
    "measure_evals",
    "selected",
    "fitness_trace",
    "error",
];

fn join_semicolon<T: ToString>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn record_fields(r: &RunRecord) -> Vec<String> {
    vec![
        r.selector.clone(),
        r.k.to_string(),
        r.repetition.to_string(),
        r.seed.to_string(),
        r.error_1nn.map(|e| e.to_string()).unwrap_or_default(),
        r.error_ldc.map(|e| e.to_string()).unwrap_or_default(),
        r.selection_seconds.to_string(),
        r.embedding_seconds.to_string(),
        r.classification_seconds.to_string(),
        r.measure_evals.to_string(),
        join_semicolon(&r.selected),
        join_semicolon(&r.fitness_trace),
        r.error_message.clone().unwrap_or_default(),
    ]
}

/// Write records to CSV in the harness schema.
pub fn write_records_csv(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = RecordWriter::new(Some(path.as_ref()))?;
    for record in records {
        writer.append(record)?;
    }
    Ok(())
}

/// Write a summary table to CSV.
pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "selector",
        "k",
        "classifier",
        "runs",
        "mean_error",
        "sd_error",
        "mean_selection_seconds",
        "mean_measure_evals",
    ])?;
    for row in rows {
        w.write_record([
            row.selector.clone(),
            row.k.to_string(),
            row.classifier.to_string(),
            row.runs.to_string(),
            row.mean_error.to_string(),
            row.sd_error.to_string(),
            row.mean_selection_seconds.to_string(),
            row.mean_measure_evals.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run the full sweep described by the config.
///
/// Returns one record per (selector, k, repetition), in that nesting order
/// with repetitions outermost. Everything except the timing columns is
/// reproducible bit for bit from the config and master seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let data = Arc::new(cfg.data.load()?);

    let mut manifest_path = None;
    let mut records_path = None;
    let mut summary_path = None;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        manifest_path = Some(dir.join("manifest.json"));
        records_path = Some(dir.join("records.csv"));
        summary_path = Some(dir.join("summary.csv"));
    }
    if let Some(path) = &manifest_path {
        let manifest = serde_json::json!({
            "config": cfg,
            "crate_version": env!("CARGO_PKG_VERSION"),
            "dataset_revision": format!("{:016x}", data.revision()),
            "n": data.n(),
            "q": data.q(),
            "classes": data.classes().len(),
        });
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.flush()?;
    }

    let mut writer = RecordWriter::new(records_path.as_deref())?;
    let mut records = Vec::new();
    for rep in 0..cfg.repetitions {
        let split_spec = SplitSpec {
            seed: derive_seed(cfg.master_seed, 1, rep as u64),
            ..cfg.split
        };
        let (validation_idx, train_idx, test_idx) = dataset::split_indices(&data, &split_spec)?;
        let candidates: Vec<usize> = if cfg.overlap_train_validation {
            let mut pool = validation_idx.clone();
            pool.extend_from_slice(&train_idx);
            pool.sort_unstable();
            pool
        } else {
            validation_idx.clone()
        };

        for (sel_idx, selector) in cfg.selectors.iter().enumerate() {
            for (k_idx, &k) in cfg.k_values.iter().enumerate() {
                let seed = derive_seed(
                    cfg.master_seed,
                    2,
                    ((rep * cfg.selectors.len() + sel_idx) * cfg.k_values.len() + k_idx) as u64,
                );
                let record = run_one(
                    cfg, &data, &candidates, &train_idx, &test_idx, *selector, k, rep, seed,
                )?;
                writer.append(&record)?;
                records.push(record);
            }
        }
    }

    if let Some(path) = &summary_path {
        write_summary_csv(&summarize(&records), path)?;
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    data: &Arc<Dataset>,
    candidates: &[usize],
    train_idx: &[usize],
    test_idx: &[usize],
    selector: SelectorSpec,
    k: usize,
    rep: usize,
    seed: u64,
) -> Result<RunRecord> {
    let provider = Arc::new(DissimilarityProvider::on_demand(data.clone(), cfg.measure)?);
    let mut record = RunRecord {
        selector: selector.name(),
        k,
        repetition: rep,
        seed,
        error_1nn: None,
        error_ldc: None,
        selection_seconds: 0.0,
        embedding_seconds: 0.0,
        classification_seconds: 0.0,
        measure_evals: 0,
        selected: Vec::new(),
        fitness_trace: Vec::new(),
        error_message: None,
    };

    let selector_params = SelectorParams {
        ga: cfg.ga,
        pivot_count: cfg.pivot_count,
        pivot_rounds: cfg.pivot_rounds,
        kcentres_max_iters: cfg.kcentres_max_iters,
    };
    let selection_started = Instant::now();
    let selected = run_selector(&provider, candidates, selector, k, seed, &selector_params);
    record.selection_seconds = selection_started.elapsed().as_secs_f64();
    record.measure_evals = provider.eval_count();
    let prototypes = match selected {
        Ok(p) => p,
        Err(e) => {
            record.error_message = Some(e.to_string());
            return Ok(record);
        }
    };
    record.selected = prototypes.indices.clone();
    record.fitness_trace = prototypes.fitness_trace.clone().unwrap_or_default();

    let embedding_started = Instant::now();
    let train_embedding = embed(&provider, train_idx, &prototypes)?;
    let test_embedding = embed(&provider, test_idx, &prototypes)?;
    record.embedding_seconds = embedding_started.elapsed().as_secs_f64();

    let train_labels: Vec<String> =
        train_idx.iter().map(|&i| data.label(i).to_string()).collect();
    let test_labels: Vec<String> =
        test_idx.iter().map(|&i| data.label(i).to_string()).collect();

    let classification_started = Instant::now();
    for classifier in &cfg.classifiers {
        let predictions = match classifier {
            Classifier::OneNn => classify_1nn(&train_embedding, &train_labels, &test_embedding)?,
            Classifier::Ldc => {
                classify_ldc(&train_embedding, &train_labels, &test_embedding, cfg.ldc_reg)?
            }
        };
        let error = error_rate(&predictions, &test_labels)?;
        match classifier {
            Classifier::OneNn => record.error_1nn = Some(error),
            Classifier::Ldc => record.error_ldc = Some(error),
        }
    }
    record.classification_seconds = classification_started.elapsed().as_secs_f64();
    Ok(record)
}

/// Selector settings shared by [`run_selector`] and the sweep config.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SelectorParams {
    pub ga: GaParams,
    pub pivot_count: usize,
    pub pivot_rounds: usize,
    pub kcentres_max_iters: usize,
}

impl Default for SelectorParams {
    fn default() -> Self {
        Self { ga: GaParams::default(), pivot_count: 64, pivot_rounds: 10, kcentres_max_iters: 50 }
    }
}

/// Run one selector over a candidate pool. The provider must own its
/// dataset (labels come from it) for the label-driven selectors.
///
/// For the hash-accelerated variants this trains a pivot table over the
/// pool (capped sample), encodes the dataset, and runs the search on it;
/// that one-time cost is part of the selection.
pub fn run_selector(
    provider: &Arc<DissimilarityProvider>,
    candidates: &[usize],
    selector: SelectorSpec,
    k: usize,
    seed: u64,
    params: &SelectorParams,
) -> Result<PrototypeSet> {
    let labels = || -> Result<Vec<String>> {
        provider
            .dataset()
            .map(|ds| ds.labels().to_vec())
            .ok_or_else(|| Error::Config("this selector needs a provider with labeled data".into()))
    };
    match selector {
        SelectorSpec::Random => select_random(candidates, k, seed),
        SelectorSpec::Fft => select_fft(provider, candidates, k, seed),
        SelectorSpec::Kcentres => {
            select_kcentres(provider, candidates, k, seed, params.kcentres_max_iters)
        }
        SelectorSpec::Forward => {
            let ctx = FitnessContext::new(provider.clone(), candidates.to_vec(), &labels()?)?;
            select_forward(&ctx, candidates, k)
        }
        SelectorSpec::Ga { fitness, clustering } => {
            let mut ctx = FitnessContext::new(provider.clone(), candidates.to_vec(), &labels()?)?;
            if fitness == FitnessKind::SupervisedLsh {
                let sample: Vec<usize> = if candidates.len() > DEFAULT_TRAIN_SAMPLE_CAP {
                    let step = candidates.len() / DEFAULT_TRAIN_SAMPLE_CAP + 1;
                    candidates.iter().step_by(step).copied().collect()
                } else {
                    candidates.to_vec()
                };
                let mut table = train_pivots(
                    provider,
                    &sample,
                    params.pivot_count.min(sample.len()),
                    derive_seed(seed, 7, 0),
                    params.pivot_rounds,
                )?;
                table.encode_all(provider)?;
                ctx = ctx.with_accelerator(Arc::new(table))?;
            }
            let ga_params = GaParams { seed, use_clustering: clustering, ..params.ga };
            run_ga(&ctx, fitness, &ga_params, candidates, k)
        }
    }
}

struct SummaryGroup {
    selector: String,
    k: usize,
    classifier: String,
    errors: Vec<f64>,
    selection_seconds: Vec<f64>,
    measure_evals: Vec<f64>,
}

/// Aggregate records per (selector, k, classifier), skipping failed runs.
///
/// Rows come back ordered by selector name, then k, then classifier name.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<SummaryGroup> = Vec::new();
    for record in records.iter().filter(|r| r.error_message.is_none()) {
        for (classifier, error) in [("1nn", record.error_1nn), ("ldc", record.error_ldc)] {
            let Some(error) = error else { continue };
            let group = match groups.iter_mut().find(|g| {
                g.selector == record.selector && g.k == record.k && g.classifier == classifier
            }) {
                Some(group) => group,
                None => {
                    groups.push(SummaryGroup {
                        selector: record.selector.clone(),
                        k: record.k,
                        classifier: classifier.to_string(),
                        errors: Vec::new(),
                        selection_seconds: Vec::new(),
                        measure_evals: Vec::new(),
                    });
                    groups.last_mut().unwrap()
                }
            };
            group.errors.push(error);
            group.selection_seconds.push(record.selection_seconds);
            group.measure_evals.push(record.measure_evals as f64);
        }
    }
    let mean = |values: &[f64]| values.iter().sum::<f64>() / values.len() as f64;
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|group| {
            let runs = group.errors.len();
            let mean_error = mean(&group.errors);
            let sd_error = if runs > 1 {
                (group
                    .errors
                    .iter()
                    .map(|e| (e - mean_error) * (e - mean_error))
                    .sum::<f64>()
                    / (runs as f64 - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            SummaryRow {
                selector: group.selector,
                k: group.k,
                classifier: group.classifier,
                runs,
                mean_error,
                sd_error,
                mean_selection_seconds: mean(&group.selection_seconds),
                mean_measure_evals: mean(&group.measure_evals),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.selector
            .cmp(&b.selector)
            .then(a.k.cmp(&b.k))
            .then(a.classifier.cmp(&b.classifier))
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            DataSource::Blobs { classes: 3, per_class: 30, dim: 2, spread: 0.4, seed: 5 },
            99,
        );
        cfg.split = SplitSpec {
            validation_fraction: 0.6,
            train_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        };
        cfg.selectors = vec![SelectorSpec::Random];
        cfg.k_values = vec![4];
        cfg.repetitions = 1;
        cfg.classifiers = vec![Classifier::OneNn];
        cfg
    }

    #[test]
    fn record_count_is_the_configured_product() {
        let mut cfg = tiny_config();
        cfg.selectors = vec![SelectorSpec::Random, SelectorSpec::Fft];
        cfg.k_values = vec![3, 5];
        cfg.repetitions = 2;
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        for r in &records {
            assert!(r.error_message.is_none());
            let e = r.error_1nn.unwrap();
            assert!((0.0..=1.0).contains(&e));
            assert_eq!(r.selected.len(), r.k);
        }
    }

    #[test]
    fn single_run_produces_single_record() {
        let records = run_experiment(&tiny_config()).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn reruns_reproduce_errors_and_selections() {
        let mut cfg = tiny_config();
        cfg.selectors = vec![
            SelectorSpec::Random,
            SelectorSpec::Ga { fitness: FitnessKind::Supervised, clustering: true },
        ];
        cfg.repetitions = 2;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.error_1nn, y.error_1nn);
            assert_eq!(x.selected, y.selected);
            assert_eq!(x.fitness_trace, y.fitness_trace);
            assert_eq!(x.seed, y.seed);
        }
    }

    #[test]
    fn summary_of_single_record_has_zero_sd() {
        let records = run_experiment(&tiny_config()).unwrap();
        let summary = summarize(&records);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].runs, 1);
        assert_eq!(summary[0].sd_error, 0.0);
        assert_eq!(summary[0].mean_error, records[0].error_1nn.unwrap());
    }

    #[test]
    fn summary_uses_sample_standard_deviation() {
        let base = RunRecord {
            selector: "random".into(),
            k: 5,
            repetition: 0,
            seed: 0,
            error_1nn: Some(0.2),
            error_ldc: None,
            selection_seconds: 1.0,
            embedding_seconds: 0.0,
            classification_seconds: 0.0,
            measure_evals: 10,
            selected: vec![1, 2, 3, 4, 5],
            fitness_trace: vec![],
            error_message: None,
        };
        let mut second = base.clone();
        second.repetition = 1;
        second.error_1nn = Some(0.4);
        second.measure_evals = 30;
        let summary = summarize(&[base, second]);
        assert_eq!(summary.len(), 1);
        let row = &summary[0];
        assert!((row.mean_error - 0.3).abs() < 1e-15);
        assert!((row.sd_error - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((row.mean_measure_evals - 20.0).abs() < 1e-12);
    }

    /// Independent re-computation of a larger summary.
    #[test]
    fn summary_matches_independent_recomputation() {
        let mut records = Vec::new();
        let errors = [0.1, 0.3, 0.2, 0.25, 0.15, 0.2, 0.05, 0.35, 0.3, 0.1];
        for (i, &e) in errors.iter().enumerate() {
            records.push(RunRecord {
                selector: "fft".into(),
                k: 10,
                repetition: i,
                seed: i as u64,
                error_1nn: Some(e),
                error_ldc: None,
                selection_seconds: 0.5,
                embedding_seconds: 0.0,
                classification_seconds: 0.0,
                measure_evals: 100,
                selected: vec![i],
                fitness_trace: vec![],
                error_message: None,
            });
        }
        let summary = summarize(&records);
        let mean: f64 = errors.iter().sum::<f64>() / 10.0;
        let variance: f64 =
            errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 9.0;
        assert_eq!(summary.len(), 1);
        assert!((summary[0].mean_error - mean).abs() < 1e-15);
        assert!((summary[0].sd_error - variance.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn failed_selector_is_recorded_without_aborting() {
        let mut cfg = tiny_config();
        // k larger than the validation pool: selection must fail per record.
        cfg.k_values = vec![4, 100];
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].error_message.is_none());
        assert!(records[1].error_message.is_some());
        let summary = summarize(&records);
        assert_eq!(summary.len(), 1, "failed record must not summarize");
    }

    /// With the overlap flag, classifier-training objects join the candidate
    /// pool, so a k larger than the validation split alone becomes feasible.
    #[test]
    fn overlap_flag_extends_the_candidate_pool() {
        let mut cfg = tiny_config();
        // 90 objects split 0.6/0.2/0.2: validation 54, train 18.
        cfg.k_values = vec![60];
        let records = run_experiment(&cfg).unwrap();
        assert!(records[0].error_message.is_some(), "54 candidates cannot supply 60");
        cfg.overlap_train_validation = true;
        let records = run_experiment(&cfg).unwrap();
        assert!(records[0].error_message.is_none(), "{:?}", records[0].error_message);
        assert_eq!(records[0].selected.len(), 60);
    }

    #[test]
    fn config_validation_catches_empty_lists() {
        let mut cfg = tiny_config();
        cfg.selectors.clear();
        assert!(matches!(cfg.validate().unwrap_err(), Error::Config(_)));
        let mut cfg = tiny_config();
        cfg.k_values = vec![0];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.split.test_fraction = 0.0;
        cfg.split.train_fraction = 0.4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn output_files_are_written_incrementally() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.output_dir = Some(dir.path().to_path_buf());
        cfg.repetitions = 2;
        let records = run_experiment(&cfg).unwrap();
        let records_text = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert_eq!(records_text.lines().count(), records.len() + 1);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("summary.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["n"], 90);
    }

    #[test]
    fn selector_parsing_round_trips() {
        for name in [
            "random",
            "fft",
            "kcentres",
            "forward",
            "ga-mst",
            "ga-mst-clust",
            "ga-sup",
            "ga-sup-clust",
            "ga-sup-lsh",
            "ga-sup-lsh-clust",
        ] {
            let spec = SelectorSpec::parse(name).unwrap();
            assert_eq!(spec.name(), name);
        }
        assert!(SelectorSpec::parse("tournament").is_err());
    }
}
