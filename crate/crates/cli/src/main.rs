use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use foqus_core::config::{load_config, ExperimentConfig};
use foqus_core::dataset::{generate_dataset, read_dataset, write_dataset, Split};
use foqus_core::dynamics::{read_store, record_training_with, write_store, RecordOptions};
use foqus_core::eval::{
    ablation_csv, cell_seed, parse_results_csv, prepare, prepare_with, record_seed, render_report, run_ablation,
    run_grid, train_and_eval, Experiment, RunManifest,
};
use foqus_core::jsonl::{read_text, write_atomic};
use foqus_core::nn::write_checkpoint;
use foqus_core::scoring::{read_scores, score_dataset, write_scores, ComponentMask};
use foqus_core::selection::{read_coreset, select, write_coreset, Method, SelectionConfig};

#[derive(Parser, Debug)]
#[command(name = "foqus", version, about = "Coreset selection from training dynamics for I/Q modulation data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the selection model and record per-sample training dynamics.
    Record {
        #[command(flatten)]
        common: Common,
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Number of recording epochs (overrides the config).
        #[arg(long)]
        epochs: Option<usize>,
        /// Also write the final model parameters here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compute per-sample scores from a trajectory file.
    Score {
        #[command(flatten)]
        common: Common,
        /// Trajectory file.
        #[arg(long)]
        traj: PathBuf,
        /// Dataset the trajectories came from; checked by digest if given.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Select a coreset.
    Select {
        #[command(flatten)]
        common: Common,
        /// Score table.
        #[arg(long)]
        scores: PathBuf,
        /// Trajectory file (needed by herding and kcenter).
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Split each class budget across SNR values.
        #[arg(long)]
        snr_stratified: bool,
    },
    /// Retrain on a coreset and report test accuracy.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Coreset file.
        #[arg(long)]
        coreset: PathBuf,
    },
    /// Run the full method x rate x repeat grid.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Use this dataset file instead of the configured one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Tiered selection on every subset of the score components.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Use this dataset file instead of the configured one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Summarize a results CSV.
    Report {
        /// Results CSV written by `experiment`.
        #[arg(long)]
        results: PathBuf,
        /// Write the summary here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Config file, or `default` for the shipped one.
    #[arg(long, default_value = "default")]
    config: String,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling rate in (0,1].
    #[arg(long)]
    rate: Option<f64>,
    /// Selection method.
    #[arg(long)]
    method: Option<Method>,
    /// Weight of the mean loss in the quality score.
    #[arg(long)]
    beta: Option<f64>,
    /// Tier draw proportions, e.g. 0.5,0.3,0.2.
    #[arg(long, value_delimiter = ',')]
    tiers: Option<Vec<f64>>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

impl Common {
    /// Config with command-line overrides applied and validated.
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config).with_context(|| format!("loading config `{}`", self.config))?;
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(r) = self.rate {
            cfg.rates = vec![r];
        }
        if let Some(m) = self.method {
            cfg.methods = vec![m];
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(t) = self.tiers()? {
            cfg.tiers = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn tiers(&self) -> Result<Option<[f64; 3]>> {
        match self.tiers.as_deref() {
            None => Ok(None),
            Some(&[a, b, c]) => Ok(Some([a, b, c])),
            Some(t) => bail!("--tiers takes 3 proportions, got {}", t.len()),
        }
    }

    fn out(&self) -> Result<&Path> {
        let out = self.out.as_deref().context("--out is required")?;
        check_writable(out, self.force)?;
        Ok(out)
    }
}

fn check_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("refusing to overwrite existing file {} (pass --force)", path.display());
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn gen_data(common: &Common) -> Result<()> {
    let out = common.out()?;
    let mut spec = load_config(&common.config)?.dataset;
    if let Some(s) = common.seed {
        spec.base_seed = s;
    }
    let ds = generate_dataset(&spec)?;
    write_dataset(out, &ds, common.force)?;
    eprintln!(
        "wrote {} ({} train, {} test frames)",
        out.display(),
        ds.count(Split::Train),
        ds.count(Split::Test)
    );
    Ok(())
}

fn record(common: &Common, data: &Path, epochs: Option<usize>, checkpoint: Option<&Path>) -> Result<()> {
    let out = common.out()?;
    if let Some(c) = checkpoint {
        check_writable(c, common.force)?;
    }
    let mut cfg = common.config()?;
    if let Some(e) = epochs {
        cfg.record.epochs = e;
    }
    let ds = read_dataset(data)?;
    let spec = cfg.selection_model(ds.frame_len, ds.num_classes())?;
    let seed = record_seed(cfg.base_seed);
    let train = cfg.record.with_seed(seed);
    let start = Instant::now();
    let (store, params) = record_training_with(&ds, &spec, &train, RecordOptions::default())?;
    write_store(out, &store, common.force)?;
    if let Some(c) = checkpoint {
        write_checkpoint(c, &spec, &params, seed, common.force)?;
    }
    let acc = store.accuracy_per_epoch();
    eprintln!(
        "recorded {} samples over {} epochs in {:.1}s (final train accuracy {:.4})",
        store.len(),
        store.meta.epochs,
        start.elapsed().as_secs_f64(),
        acc.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn score(common: &Common, traj: &Path, data: Option<&Path>) -> Result<()> {
    let out = common.out()?;
    let store = read_store(traj)?;
    if let Some(d) = data {
        store.verify_dataset(&read_dataset(d)?)?;
    }
    let table = score_dataset(&store, Some(common.config()?.beta))?;
    write_scores(out, &table, common.force)?;
    eprintln!("scored {} samples (beta {})", table.rows.len(), table.meta.beta);
    Ok(())
}

fn select_cmd(common: &Common, scores: &Path, traj: Option<&Path>, snr_stratified: bool) -> Result<()> {
    let out = common.out()?;
    let method = common.method.context("--method is required")?;
    let rate = common.rate.context("--rate is required")?;
    let cfg = SelectionConfig {
        tiers: common.tiers()?.unwrap_or(foqus_core::selection::EQUAL_TIERS),
        snr_stratified,
        ..SelectionConfig::new(method, rate, common.seed.unwrap_or(0))
    };
    cfg.validate()?;
    let table = read_scores(scores)?;
    let store = traj.map(read_store).transpose()?;
    if let Some(s) = &store {
        table.verify_store(s)?;
    }
    let coreset = select(&table, store.as_ref(), &cfg)?;
    write_coreset(out, &coreset, common.force)?;
    eprintln!("selected {} of {} samples with {method}", coreset.len(), table.rows.len());
    Ok(())
}

fn evaluate(common: &Common, data: &Path, coreset: &Path) -> Result<()> {
    if let Some(o) = &common.out {
        check_writable(o, common.force)?;
    }
    let cfg = common.config()?;
    let ds = read_dataset(data)?;
    let coreset = read_coreset(coreset)?;
    let spec = cfg.evaluation_model(ds.frame_len, ds.num_classes())?;
    let seed = common.seed.unwrap_or(coreset.manifest.config.seed);
    let outcome = train_and_eval(&ds, &coreset.indices, &spec, &cfg.retrain.with_seed(seed))?;
    println!("{}", outcome.accuracy);
    if let Some(o) = &common.out {
        let per_class: serde_json::Map<String, serde_json::Value> = ds
            .classes
            .iter()
            .zip(&outcome.per_class)
            .map(|(c, a)| (c.name().to_string(), (*a).into()))
            .collect();
        let json = serde_json::json!({
            "accuracy": outcome.accuracy,
            "per_class": per_class,
            "seed": seed,
            "coreset_digest": coreset.digest(),
            "dataset_digest": ds.digest(),
            "model_digest": spec.digest(),
        });
        write_atomic(o, format!("{json:#}\n").as_bytes(), common.force)?;
    }
    Ok(())
}

fn prepared(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<foqus_core::eval::Prepared> {
    let start = Instant::now();
    let prep = match data {
        Some(d) => prepare_with(cfg, read_dataset(d)?)?,
        None => prepare(cfg)?,
    };
    eprintln!(
        "recorded and scored {} training samples in {:.1}s",
        prep.store.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(prep)
}

fn experiment(common: &Common, data: Option<&Path>) -> Result<()> {
    let out = common.out()?;
    let manifest_path = sibling(out, ".manifest.json");
    check_writable(&manifest_path, common.force)?;
    let cfg = common.config()?;
    let prep = prepared(&cfg, data)?;
    let start = Instant::now();
    let table = run_grid(&cfg, &prep)?;
    eprintln!("ran {} cells in {:.1}s", table.cells.len(), start.elapsed().as_secs_f64());
    let exp = Experiment { prepared: prep, table };
    let csv = exp.table.to_csv();
    let manifest = RunManifest::for_experiment(&cfg, &exp);
    write_atomic(out, csv.as_bytes(), common.force)?;
    write_atomic(&manifest_path, manifest.to_json().as_bytes(), common.force)?;
    print!("{}", render_report(&exp.table));
    Ok(())
}

fn ablate(common: &Common, data: Option<&Path>) -> Result<()> {
    let out = common.out()?;
    let cfg = common.config()?;
    let prep = prepared(&cfg, data)?;
    let rows = run_ablation(&cfg, &prep)?;
    write_atomic(out, ablation_csv(&rows).as_bytes(), common.force)?;
    // The all-three rows must reproduce the main pipeline's coresets.
    for r in rows.iter().filter(|r| r.mask == ComponentMask::ALL) {
        let seed = cell_seed(cfg.base_seed, Method::Foqus, r.rate, r.repeat);
        let main = select(
            &prep.scores,
            None,
            &SelectionConfig {
                tiers: cfg.tiers,
                class_balanced: cfg.class_balanced,
                snr_stratified: cfg.snr_stratified,
                ..SelectionConfig::new(Method::Foqus, r.rate, seed)
            },
        )?;
        if main.digest() != r.coreset_digest {
            bail!("ablation with all components diverged from the main selection at rate {}", r.rate);
        }
    }
    eprintln!("wrote {} ablation runs to {}", rows.len(), out.display());
    Ok(())
}

fn report(results: &Path, out: Option<&Path>, force: bool) -> Result<()> {
    if let Some(o) = out {
        check_writable(o, force)?;
    }
    let text = read_text(results)?;
    let table = parse_results_csv(&results.display().to_string(), &text)?;
    let rendered = render_report(&table);
    match out {
        Some(o) => write_atomic(o, rendered.as_bytes(), force)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData { common } => gen_data(common),
        Command::Record {
            common,
            data,
            epochs,
            checkpoint,
        } => record(common, data, *epochs, checkpoint.as_deref()),
        Command::Score { common, traj, data } => score(common, traj, data.as_deref()),
        Command::Select {
            common,
            scores,
            traj,
            snr_stratified,
        } => select_cmd(common, scores, traj.as_deref(), *snr_stratified),
        Command::Evaluate { common, data, coreset } => evaluate(common, data, coreset),
        Command::Experiment { common, data } => experiment(common, data.as_deref()),
        Command::Ablate { common, data } => ablate(common, data.as_deref()),
        Command::Report { results, out, force } => report(results, out.as_deref(), *force),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
