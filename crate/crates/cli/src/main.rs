//! Command-line runner for prototype selection experiments.
//!
//! Subcommands: `gen` writes synthetic class blobs, `select` runs one
//! selector over a dataset and emits a run manifest, `pivots` trains and
//! saves a pivot table, `bench` sweeps selectors over prototype counts and
//! repetitions and writes records/summary CSVs.
//!
//! On failure a machine-readable line `{"error": "..."}` goes to stderr and
//! the exit code is nonzero.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use protosel::{
    generate_blobs, load_binary, load_csv, run_experiment, run_selector, save_binary, save_csv,
    summarize, train_pivots, Classifier, DataSource, DissimilarityProvider, ExperimentConfig,
    GaParams, Measure, SelectorParams, SelectorSpec, SplitSpec,
};

#[derive(Parser)]
#[command(
    name = "protosel",
    version,
    about = "Prototype selection for dissimilarity-space classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic blob dataset
    Gen(GenArgs),
    /// Run one selector over a dataset and write a run manifest
    Select(SelectArgs),
    /// Train a pivot table and save it as JSON
    Pivots(PivotsArgs),
    /// Sweep selectors over k values and repetitions
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long = "per-class", default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Output format: csv or binary
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long = "label-column", default_value = "label")]
    label_column: String,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file (.csv with a label column, or the packed binary format)
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "label-column", default_value = "label")]
    label_column: String,
    /// euclidean, manhattan or minkowski:<p>
    #[arg(long, default_value = "euclidean")]
    measure: String,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// random | fft | kcentres | forward | ga-mst[-clust] | ga-sup[-clust] | ga-sup-lsh[-clust]
    #[arg(long)]
    selector: String,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    population: usize,
    #[arg(long, default_value_t = 0.5)]
    reproduction: f64,
    #[arg(long, default_value_t = 0.02)]
    mutation: f64,
    #[arg(long, default_value_t = 20)]
    generations: usize,
    #[arg(long = "kcentres-max-iters", default_value_t = 50)]
    kcentres_max_iters: usize,
    #[arg(long = "pivot-count", default_value_t = 64)]
    pivot_count: usize,
    #[arg(long = "pivot-rounds", default_value_t = 10)]
    pivot_rounds: usize,
    /// Run manifest path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PivotsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-rounds", default_value_t = 10)]
    max_rounds: usize,
    /// Cap on the training sample drawn from the dataset
    #[arg(long = "sample-cap", default_value_t = 10_000)]
    sample_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat key-value config file; CLI flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic data spec: classes,per_class,dim,spread,seed
    #[arg(long)]
    blobs: Option<String>,
    #[arg(long = "label-column")]
    label_column: Option<String>,
    #[arg(long)]
    measure: Option<String>,
    /// Comma-separated selector list
    #[arg(long)]
    selectors: Option<String>,
    /// Comma-separated prototype counts
    #[arg(long = "k-list")]
    k_list: Option<String>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Comma-separated subset of {1nn, ldc}
    #[arg(long)]
    classifiers: Option<String>,
    #[arg(long = "validation-fraction")]
    validation_fraction: Option<f64>,
    #[arg(long = "train-fraction")]
    train_fraction: Option<f64>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    reproduction: Option<f64>,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long = "pivot-count")]
    pivot_count: Option<usize>,
    #[arg(long = "pivot-rounds")]
    pivot_rounds: Option<usize>,
    #[arg(long = "kcentres-max-iters")]
    kcentres_max_iters: Option<usize>,
    #[arg(long = "ldc-reg")]
    ldc_reg: Option<f64>,
    /// Let classifier-training objects also serve as selection candidates
    #[arg(long)]
    overlap: bool,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Master seed (required: sweeps must be reproducible)
    #[arg(long)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Select(args) => run_select(args),
        Command::Pivots(args) => run_pivots(args),
        Command::Bench(args) => run_bench(args),
    };
    if let Err(e) = result {
        eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
        std::process::exit(1);
    }
}

fn load_dataset(args: &DataArgs) -> anyhow::Result<Arc<protosel::Dataset>> {
    let path = &args.data;
    let is_binary = path.extension().map(|e| e == "bin").unwrap_or(false);
    let ds = if is_binary {
        load_binary(path)
    } else {
        load_csv(path, &args.label_column)
    }
    .with_context(|| format!("loading {}", path.display()))?;
    Ok(Arc::new(ds))
}

fn run_gen(args: GenArgs) -> anyhow::Result<()> {
    let ds = generate_blobs(args.classes, args.per_class, args.dim, args.spread, args.seed)?;
    match args.format.as_str() {
        "csv" => save_csv(&ds, &args.out, &args.label_column)?,
        "binary" | "bin" => save_binary(&ds, &args.out)?,
        other => bail!("unknown format {other:?}; expected csv or binary"),
    }
    println!(
        "wrote {} objects x {} measurements ({} classes) to {}",
        ds.n(),
        ds.q(),
        ds.classes().len(),
        args.out.display()
    );
    Ok(())
}

fn run_select(args: SelectArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&args.data)?;
    let measure = Measure::parse(&args.data.measure)?;
    let provider = Arc::new(DissimilarityProvider::on_demand(ds.clone(), measure)?);
    let selector = SelectorSpec::parse(&args.selector)?;
    let candidates: Vec<usize> = (0..ds.n()).collect();
    let params = SelectorParams {
        ga: GaParams {
            population_size: args.population,
            reproduction_prob: args.reproduction,
            mutation_prob: args.mutation,
            generations: args.generations,
            use_clustering: false, // set per selector variant
            seed: args.seed,
        },
        pivot_count: args.pivot_count,
        pivot_rounds: args.pivot_rounds,
        kcentres_max_iters: args.kcentres_max_iters,
    };
    let started = Instant::now();
    let set = run_selector(&provider, &candidates, selector, args.k, args.seed, &params)?;
    let elapsed = started.elapsed().as_secs_f64();
    let manifest = serde_json::json!({
        "method": set.method,
        "k": args.k,
        "seed": args.seed,
        "measure": measure.name(),
        "dataset": {
            "path": args.data.data.display().to_string(),
            "n": ds.n(),
            "q": ds.q(),
            "classes": ds.classes().len(),
            "revision": format!("{:016x}", ds.revision()),
        },
        "params": params,
        "selected_indices": set.indices,
        "fitness_trace": set.fitness_trace,
        "selection_seconds": elapsed,
        "measure_evals": provider.eval_count(),
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("selected {} prototypes with {}; manifest at {}", args.k, set.method, path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run_pivots(args: PivotsArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&args.data)?;
    let measure = Measure::parse(&args.data.measure)?;
    let provider = Arc::new(DissimilarityProvider::on_demand(ds.clone(), measure)?);
    let sample: Vec<usize> = if ds.n() > args.sample_cap {
        let step = ds.n() / args.sample_cap + 1;
        (0..ds.n()).step_by(step).collect()
    } else {
        (0..ds.n()).collect()
    };
    let table = train_pivots(&provider, &sample, args.count, args.seed, args.max_rounds)?;
    table.save(&args.out)?;
    println!(
        "trained {} pivots over a sample of {} objects; table at {}",
        table.p(),
        sample.len(),
        args.out.display()
    );
    Ok(())
}

/// Parse a flat `key = value` config file: one pair per line, `#` comments.
fn parse_config_file(text: &str) -> anyhow::Result<HashMap<String, String>> {
    let mut pairs = HashMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", line_no + 1))?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

fn parse_blob_spec(spec: &str) -> anyhow::Result<DataSource> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        bail!("blob spec must be classes,per_class,dim,spread,seed; got {spec:?}");
    }
    Ok(DataSource::Blobs {
        classes: parts[0].parse().context("blob classes")?,
        per_class: parts[1].parse().context("blob per_class")?,
        dim: parts[2].parse().context("blob dim")?,
        spread: parts[3].parse().context("blob spread")?,
        seed: parts[4].parse().context("blob seed")?,
    })
}

fn run_bench(args: BenchArgs) -> anyhow::Result<()> {
    let file_pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_config_file(&text)?
        }
        None => HashMap::new(),
    };
    // Resolution order: built-in default, then config file, then CLI flag.
    let from_file = |key: &str| file_pairs.get(key).cloned();
    let parse_file = |key: &str| -> anyhow::Result<Option<f64>> {
        from_file(key)
            .map(|v| v.parse::<f64>().with_context(|| format!("config key {key}")))
            .transpose()
    };

    let label_column = args
        .label_column
        .or_else(|| from_file("label_column"))
        .unwrap_or_else(|| "label".to_string());
    let data = match (&args.data, &args.blobs) {
        (Some(_), Some(_)) => bail!("--data and --blobs are mutually exclusive"),
        (Some(path), None) => path_source(path, &label_column),
        (None, Some(spec)) => parse_blob_spec(spec)?,
        (None, None) => match (from_file("data"), from_file("blobs")) {
            (Some(_), Some(_)) => bail!("config sets both data and blobs"),
            (Some(path), None) => path_source(&PathBuf::from(path), &label_column),
            (None, Some(spec)) => parse_blob_spec(&spec)?,
            (None, None) => bail!("no dataset: pass --data, --blobs or a config entry"),
        },
    };

    let mut cfg = ExperimentConfig::new(data, args.seed);
    cfg.measure = Measure::parse(
        &args.measure.or_else(|| from_file("measure")).unwrap_or_else(|| "euclidean".into()),
    )?;
    let selectors_text = args
        .selectors
        .or_else(|| from_file("selectors"))
        .unwrap_or_else(|| "random".to_string());
    cfg.selectors = selectors_text
        .split(',')
        .map(|s| SelectorSpec::parse(s).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let k_text = args.k_list.or_else(|| from_file("k_list")).unwrap_or_else(|| "10,20,30,40".into());
    cfg.k_values = k_text
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("k value {s:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    cfg.repetitions = match args.repetitions {
        Some(r) => r,
        None => from_file("repetitions").map(|v| v.parse()).transpose()?.unwrap_or(10),
    };
    let classifier_text = args
        .classifiers
        .or_else(|| from_file("classifiers"))
        .unwrap_or_else(|| "1nn".to_string());
    cfg.classifiers = classifier_text
        .split(',')
        .map(|s| Classifier::parse(s).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    cfg.split = SplitSpec {
        validation_fraction: args
            .validation_fraction
            .or(parse_file("validation_fraction")?)
            .unwrap_or(0.8),
        train_fraction: args.train_fraction.or(parse_file("train_fraction")?).unwrap_or(0.1),
        test_fraction: args.test_fraction.or(parse_file("test_fraction")?).unwrap_or(0.1),
        seed: 0,
    };
    cfg.ga = GaParams {
        population_size: resolve_usize(args.population, &file_pairs, "population", 20)?,
        reproduction_prob: args.reproduction.or(parse_file("reproduction")?).unwrap_or(0.5),
        mutation_prob: args.mutation.or(parse_file("mutation")?).unwrap_or(0.02),
        generations: resolve_usize(args.generations, &file_pairs, "generations", 20)?,
        use_clustering: false,
        seed: 0,
    };
    cfg.pivot_count = resolve_usize(args.pivot_count, &file_pairs, "pivot_count", 64)?;
    cfg.pivot_rounds = resolve_usize(args.pivot_rounds, &file_pairs, "pivot_rounds", 10)?;
    cfg.kcentres_max_iters =
        resolve_usize(args.kcentres_max_iters, &file_pairs, "kcentres_max_iters", 50)?;
    cfg.ldc_reg = args.ldc_reg.or(parse_file("ldc_reg")?);
    cfg.overlap_train_validation = args.overlap
        || from_file("overlap").map(|v| v == "true" || v == "1").unwrap_or(false);
    cfg.output_dir = args
        .out_dir
        .or_else(|| from_file("out_dir").map(PathBuf::from));
    cfg.master_seed = args.seed;

    let started = Instant::now();
    let records = run_experiment(&cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    let failures = records.iter().filter(|r| r.error_message.is_some()).count();
    println!(
        "{} records in {elapsed:.1}s ({failures} failed runs)",
        records.len()
    );
    for row in summarize(&records) {
        println!(
            "{:<18} k={:<3} {:<4} mean_error={:.4} sd={:.4} selection={:.3}s evals={:.0}",
            row.selector,
            row.k,
            row.classifier,
            row.mean_error,
            row.sd_error,
            row.mean_selection_seconds,
            row.mean_measure_evals,
        );
    }
    if let Some(dir) = &cfg.output_dir {
        println!("records, summary and manifest written to {}", dir.display());
    }
    Ok(())
}

fn path_source(path: &std::path::Path, label_column: &str) -> DataSource {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        DataSource::Binary { path: path.display().to_string() }
    } else {
        DataSource::Csv { path: path.display().to_string(), label_column: label_column.to_string() }
    }
}

fn resolve_usize(
    flag: Option<usize>,
    file: &HashMap<String, String>,
    key: &str,
    default: usize,
) -> anyhow::Result<usize> {
    match flag {
        Some(v) => Ok(v),
        None => file
            .get(key)
            .map(|v| v.parse::<usize>().with_context(|| format!("config key {key}")))
            .transpose()
            .map(|v| v.unwrap_or(default)),
    }
}
