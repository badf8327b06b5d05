use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gesture_uda::adversarial::{config_hash, Model, ModelConfig};
use gesture_uda::data::{self, Domain};
use gesture_uda::experiment::{self, DatasetSource, ExperimentConfig, FoldData, Method};
use gesture_uda::metrics::{self, MetricsReport};
use gesture_uda::params::Checkpoint;
use gesture_uda::synth::{self, GeneratorConfig};
use serde_json::json;

/// Simulator-to-real gesture recognition experiments.
#[derive(Parser)]
#[command(name = "gesture-uda", version)]
struct Cli {
    /// Root directory for all outputs.
    #[arg(long, env = "GESTURE_UDA_OUT", default_value = "runs", global = true)]
    out_root: PathBuf,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a paired simulator/real synthetic dataset.
    Generate(GenerateArgs),
    /// Train one method per fold and seed; writes checkpoints and logs.
    Train(ExpArgs),
    /// Evaluate checkpoints on a domain's test (or train) segments.
    Evaluate(EvaluateArgs),
    /// Compare all four methods on one dataset.
    Ablate(ExpArgs),
    /// Train the selected method for each λ and tabulate target accuracy.
    SweepLambda(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "combined")]
    preset: String,
    #[arg(long, default_value_t = 40)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    visual_dim: Option<usize>,
    /// Output directory name under the output root; defaults to the preset.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Clone)]
struct ExpArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with `simulator/` and `real/` tables (e.g. from `generate`).
    #[arg(long, conflicts_with = "preset")]
    data: Option<PathBuf>,
    /// Generate a synthetic dataset in memory instead of reading tables.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    max_scale: Option<usize>,
    #[arg(long)]
    subsets: Option<usize>,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    folds: Option<usize>,
    /// Folds to run (repeatable or comma-separated); all when omitted
    /// and the config does not restrict them.
    #[arg(long = "fold", value_delimiter = ',')]
    fold_indices: Option<Vec<usize>>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Run directory name under the output root.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// One or more checkpoints; reports are aggregated across them.
    #[arg(long, required = true, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    /// Dataset override; defaults to the dataset recorded in the checkpoint.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "real")]
    domain: String,
    /// Evaluate on the fold's training trials instead of its test trials.
    #[arg(long)]
    train_split: bool,
    /// Output directory name under the output root.
    #[arg(long, default_value = "evaluation")]
    name: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExpArgs,
    #[arg(long, value_delimiter = ',', default_values_t = experiment::SWEEP_LAMBDAS.to_vec())]
    lambdas: Vec<f64>,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.out_root;
    match cli.command {
        Command::Generate(a) => generate(&root, a),
        Command::Train(a) => train(&root, a),
        Command::Evaluate(a) => evaluate(&root, a),
        Command::Ablate(a) => ablate(&root, a),
        Command::SweepLambda(a) => sweep(&root, a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn generate(root: &Path, a: GenerateArgs) -> Result<()> {
    let shift = synth::preset(&a.preset)?;
    let mut generator = GeneratorConfig::default();
    if let Some(d) = a.visual_dim {
        generator.visual_dim = d;
    }
    let data = synth::generate_dataset(a.trials, &shift, &generator, a.seed)?;
    let dir = root.join(a.name.as_deref().unwrap_or(&a.preset));
    create_dir(&dir)?;
    data::write_dir(&dir.join(Domain::Simulator.name()), &data.simulator)?;
    data::write_dir(&dir.join(Domain::Real.name()), &data.real)?;
    let source = DatasetSource::Synthetic {
        preset: a.preset.clone(),
        trials: a.trials,
        seed: a.seed,
        generator: generator.clone(),
    };
    let manifest = json!({
        "config_hash": config_hash(&source),
        "dataset": source,
        "shift": shift,
        "segments": { "simulator": data.simulator.len(), "real": data.real.len() },
    });
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {} simulator and {} real segments to {}", data.simulator.len(), data.real.len(), dir.display());
    Ok(())
}

fn load_config(a: &ExpArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &a.data {
        cfg.dataset = DatasetSource::Tables { dir: dir.clone() };
    }
    if a.preset.is_some() || a.trials.is_some() || a.data_seed.is_some() {
        let (mut preset, mut trials, mut seed, generator) = match &cfg.dataset {
            DatasetSource::Synthetic {
                preset,
                trials,
                seed,
                generator,
            } => (preset.clone(), *trials, *seed, generator.clone()),
            DatasetSource::Tables { .. } => {
                if a.preset.is_none() {
                    bail!("--trials/--data-seed need a synthetic dataset (--preset)");
                }
                let d = ExperimentConfig::default();
                match d.dataset {
                    DatasetSource::Synthetic {
                        preset,
                        trials,
                        seed,
                        generator,
                    } => (preset, trials, seed, generator),
                    DatasetSource::Tables { .. } => unreachable!("default is synthetic"),
                }
            }
        };
        if let Some(p) = &a.preset {
            preset = p.clone();
        }
        if let Some(t) = a.trials {
            trials = t;
        }
        if let Some(s) = a.data_seed {
            seed = s;
        }
        cfg.dataset = DatasetSource::Synthetic {
            preset,
            trials,
            seed,
            generator,
        };
    }
    if let Some(m) = &a.method {
        cfg.method = Method::parse(m)?;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.lambda {
        cfg.train.lambda = v;
    }
    if let Some(v) = a.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = a.batch {
        cfg.train.batch_per_domain = v;
    }
    if let Some(v) = a.steps_per_epoch {
        cfg.train.steps_per_epoch = Some(v);
    }
    if let Some(v) = a.checkpoint_every {
        cfg.train.checkpoint_every = Some(v);
    }
    if let Some(v) = a.hidden {
        cfg.model.encoder.hidden_dim = v;
        cfg.model.fusion_dim = v;
        cfg.model.head_hidden = v;
    }
    if let Some(v) = a.max_scale {
        cfg.model.encoder.max_scale = v;
    }
    if let Some(v) = a.subsets {
        cfg.model.encoder.subsets_per_scale = v;
    }
    if let Some(v) = &a.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = &a.fold_indices {
        cfg.fold_indices = v.clone();
    }
    if let Some(n) = &a.name {
        cfg.output_dir = Some(PathBuf::from(n));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(root: &Path, cfg: &ExperimentConfig, default: &str) -> Result<PathBuf> {
    let dir = match &cfg.output_dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => root.join(d),
        None => root.join(default),
    };
    create_dir(&dir)?;
    write(&dir.join("config.json"), &serde_json::to_string_pretty(cfg)?)?;
    Ok(dir)
}

fn checkpoint_metadata(cfg: &ExperimentConfig, model: &Model, fold: usize, seed: u64, epoch: usize) -> serde_json::Value {
    json!({
        "experiment": cfg,
        "model": model.config,
        "fold": fold,
        "seed": seed,
        "epoch": epoch,
    })
}

fn train(root: &Path, a: ExpArgs) -> Result<()> {
    let cfg = load_config(&a)?;
    let hash = cfg.hash();
    let data = cfg.dataset.load()?;
    let split = experiment::split_for(&data, cfg.folds, cfg.split_seed)?;
    let dir = run_dir(root, &cfg, &format!("train-{}", cfg.method))?;
    let mut outcomes = Vec::new();
    for fold in cfg.folds_to_run() {
        let fd = FoldData::new(&data, &split, fold, cfg.method.encoding())?;
        for &seed in &cfg.seeds {
            let run = dir.join(format!("fold{fold}")).join(format!("seed{seed}"));
            create_dir(&run)?;
            log::info!("training {} fold {fold} seed {seed}", cfg.method);
            let out = experiment::run_once(&fd, cfg.method, &cfg.model, &cfg.train, fold, seed, |epoch, model| {
                let ck = Checkpoint::capture(model, &hash, checkpoint_metadata(&cfg, model, fold, seed, epoch));
                ck.save(&run.join(format!("checkpoint-epoch{epoch}.json")))
            })?;
            let ck = Checkpoint::capture(&out.model, &hash, checkpoint_metadata(&cfg, &out.model, fold, seed, cfg.train.epochs));
            ck.save(&run.join("checkpoint.json"))?;
            write(&run.join("train_log.csv"), &out.log.to_csv())?;
            write(&run.join("report_real.json"), &out.target_test.to_json()?)?;
            write(&run.join("report_simulator.json"), &out.source_test.to_json()?)?;
            outcomes.push(out);
        }
    }
    let real = metrics::aggregate(&outcomes.iter().map(|o| o.target_test.clone()).collect::<Vec<_>>())?;
    let sim = metrics::aggregate(&outcomes.iter().map(|o| o.source_test.clone()).collect::<Vec<_>>())?;
    let table = summary_table(&[("simulator", &sim), ("real", &real)]);
    write(&dir.join("summary.csv"), &table)?;
    print!("{table}");
    println!("config hash {hash}; outputs in {}", dir.display());
    Ok(())
}

fn summary_table(rows: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::from("domain,acc_mean,acc_std,pr_mean,pr_std,re_mean,re_std,ja_mean,ja_std,f1_mean,f1_std,runs\n");
    for (name, r) in rows {
        let (m, s) = (r.mean, r.std);
        out += &format!(
            "{name},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{}\n",
            100.0 * m.accuracy,
            100.0 * s.accuracy,
            100.0 * m.precision,
            100.0 * s.precision,
            100.0 * m.recall,
            100.0 * s.recall,
            100.0 * m.jaccard,
            100.0 * s.jaccard,
            100.0 * m.f1,
            100.0 * s.f1,
            r.seeds.len()
        );
    }
    out
}

fn evaluate(root: &Path, a: EvaluateArgs) -> Result<()> {
    let domain = Domain::parse(&a.domain)?;
    let mut reports = Vec::new();
    for path in &a.checkpoint {
        let ck = Checkpoint::load(path)?;
        let meta = &ck.metadata;
        let cfg: ExperimentConfig = serde_json::from_value(meta["experiment"].clone())
            .with_context(|| format!("{}: checkpoint lacks an experiment config", path.display()))?;
        if cfg.hash() != ck.config_hash {
            bail!("{}: config hash mismatch ({} recorded, {} computed)", path.display(), ck.config_hash, cfg.hash());
        }
        let model_cfg: ModelConfig = serde_json::from_value(meta["model"].clone()).context("checkpoint lacks a model config")?;
        let fold = meta["fold"].as_u64().context("checkpoint lacks a fold")? as usize;
        let seed = meta["seed"].as_u64().unwrap_or(0);
        let source = match &a.data {
            Some(dir) => DatasetSource::Tables { dir: dir.clone() },
            None => cfg.dataset.clone(),
        };
        let data = source.load()?;
        let split = experiment::split_for(&data, cfg.folds, cfg.split_seed)?;
        let fd = FoldData::new(&data, &split, fold, cfg.method.encoding())?;
        let mut model = Model::new(model_cfg)?;
        ck.restore(&mut model).with_context(|| format!("{} does not fit this model", path.display()))?;
        let segments = match (domain, a.train_split) {
            (Domain::Simulator, false) => &fd.source_test,
            (Domain::Simulator, true) => &fd.source_train,
            (Domain::Real, false) => &fd.target_test,
            (Domain::Real, true) => {
                // Labels were stripped for training; rebuild them.
                let (train, _) = split.partition(fold, &data.real);
                let prepared = train
                    .iter()
                    .map(|s| gesture_uda::adversarial::PreparedSegment::new(s, cfg.method.encoding()))
                    .collect::<gesture_uda::Result<Vec<_>>>()?;
                reports.push(eval_one(&model, &prepared, &cfg, seed)?);
                continue;
            }
        };
        if let Some(s) = segments.first() {
            if s.visual[0].len() != model.config.encoder.visual_dim {
                bail!("dataset visual dim {} does not match checkpoint {}", s.visual[0].len(), model.config.encoder.visual_dim);
            }
        }
        reports.push(eval_one(&model, segments, &cfg, seed)?);
    }
    let report = metrics::aggregate(&reports)?;
    let dir = root.join(&a.name);
    create_dir(&dir)?;
    write(&dir.join(format!("report_{}.json", domain.name())), &report.to_json()?)?;
    write(&dir.join(format!("confusion_{}.csv", domain.name())), &report.confusion_csv())?;
    print!("{}", summary_table(&[(domain.name(), &report)]));
    Ok(())
}

fn eval_one(model: &Model, segments: &[gesture_uda::adversarial::PreparedSegment], cfg: &ExperimentConfig, seed: u64) -> Result<MetricsReport> {
    let terms = cfg.method.terms();
    let lambda = if terms.visual { cfg.train.lambda } else { 1.0 };
    let mut r = metrics::evaluate(model, segments, lambda, terms.visual)?;
    r.seeds = vec![seed];
    Ok(r)
}

fn ablate(root: &Path, a: ExpArgs) -> Result<()> {
    let cfg = load_config(&a)?;
    let data = cfg.dataset.load()?;
    let dir = run_dir(root, &cfg, "ablation")?;
    let table = experiment::ablate(&data, &cfg)?;
    let csv = table.to_csv();
    write(&dir.join("ablation.csv"), &csv)?;
    write(&dir.join("ablation.json"), &serde_json::to_string_pretty(&table)?)?;
    print!("{csv}");
    println!("gains relative to {}; config hash {}", table.baseline, cfg.hash());
    Ok(())
}

fn sweep(root: &Path, a: SweepArgs) -> Result<()> {
    let cfg = load_config(&a.exp)?;
    let data = cfg.dataset.load()?;
    let dir = run_dir(root, &cfg, "lambda-sweep")?;
    let rows = experiment::sweep_lambda(&data, &cfg, &a.lambdas)?;
    let csv = experiment::sweep_csv(&rows);
    write(&dir.join("lambda_sweep.csv"), &csv)?;
    print!("{csv}");
    println!("method {}; config hash {}", cfg.method, cfg.hash());
    Ok(())
}
