//! Experiment wiring shared by the command-line runner and the acceptance
//! suite: method definitions, per-fold runs, ablations and λ sweeps.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adversarial::{Model, ModelConfig, PreparedSegment};
use crate::data::{make_folds, DatasetSplit, Domain, Segment};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::mdok::KinematicEncoding;
use crate::relation::EncoderConfig;
use crate::synth::{self, GeneratorConfig, PairedDataset};
use crate::train::{self, LossTerms, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Raw positions, no alignment.
    #[serde(rename = "baseline-position")]
    BaselinePosition,
    /// Unit direction vectors, no alignment.
    #[serde(rename = "baseline-direction")]
    BaselineDirection,
    /// Direction vectors with kinematic discriminator alignment.
    #[serde(rename = "mdok")]
    Mdok,
    /// Direction vectors, visual fusion, kinematic and fused alignment.
    #[serde(rename = "mdok+kvatt")]
    MdokKvatt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::BaselinePosition, Method::BaselineDirection, Method::Mdok, Method::MdokKvatt];

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::BaselinePosition => "baseline-position",
            Method::BaselineDirection => "baseline-direction",
            Method::Mdok => "mdok",
            Method::MdokKvatt => "mdok+kvatt",
        }
    }

    pub fn encoding(self) -> KinematicEncoding {
        match self {
            Method::BaselinePosition => KinematicEncoding::Position,
            _ => KinematicEncoding::Direction,
        }
    }

    pub fn terms(self) -> LossTerms {
        match self {
            Method::BaselinePosition | Method::BaselineDirection => LossTerms {
                kd: false,
                kvd: false,
                visual: false,
            },
            Method::Mdok => LossTerms {
                kd: true,
                kvd: false,
                visual: false,
            },
            Method::MdokKvatt => LossTerms {
                kd: true,
                kvd: true,
                visual: true,
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        preset: String,
        trials: usize,
        seed: u64,
        generator: GeneratorConfig,
    },
    /// A directory with `simulator/` and `real/` table sets.
    Tables { dir: PathBuf },
}

impl DatasetSource {
    pub fn load(&self) -> Result<PairedDataset> {
        match self {
            DatasetSource::Synthetic {
                preset,
                trials,
                seed,
                generator,
            } => synth::generate_dataset(*trials, &synth::preset(preset)?, generator, *seed),
            DatasetSource::Tables { dir } => Ok(PairedDataset {
                simulator: crate::data::load_dir(&dir.join("simulator"), Domain::Simulator)?,
                real: crate::data::load_dir(&dir.join("real"), Domain::Real)?,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: Method,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: usize,
    /// Which folds to run; all when empty.
    pub fold_indices: Vec<usize>,
    pub split_seed: u64,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: 64-wide encoders, 32 segments per domain per
    /// batch, 30 epochs.
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                preset: "combined".into(),
                trials: 30,
                seed: 0,
                generator: GeneratorConfig::default(),
            },
            method: Method::MdokKvatt,
            model: ModelConfig {
                encoder: EncoderConfig {
                    hidden_dim: 64,
                    max_scale: 10,
                    subsets_per_scale: 3,
                    kinematic_dim: crate::data::KIN_DIM,
                    visual_dim: GeneratorConfig::default().visual_dim,
                },
                fusion_dim: 64,
                head_hidden: 64,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                batch_per_domain: 32,
                epochs: 30,
                ..TrainConfig::default()
            },
            folds: 5,
            fold_indices: vec![0],
            split_seed: 0,
            seeds: vec![0, 1, 2],
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Single-core configuration used by the acceptance runs: 40 synthetic
    /// trials, 16-wide encoders over scales up to 5, 30 epochs at lr 3e-3,
    /// fold 0 of 5, seeds 0..3.
    pub fn compact(preset: &str, method: Method) -> Self {
        let mut c = ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                preset: preset.into(),
                trials: 40,
                seed: 0,
                generator: GeneratorConfig::default(),
            },
            method,
            ..ExperimentConfig::default()
        };
        c.model.encoder.hidden_dim = 16;
        c.model.encoder.max_scale = 5;
        c.model.fusion_dim = 16;
        c.model.head_hidden = 16;
        c.train.learning_rate = 3e-3;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list must not be empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("need at least 2 folds".into()));
        }
        if let Some(f) = self.fold_indices.iter().find(|&&f| f >= self.folds) {
            return Err(Error::Config(format!("fold {f} out of range for {} folds", self.folds)));
        }
        self.model.validate()?;
        self.train.validate()
    }

    pub fn hash(&self) -> String {
        crate::adversarial::config_hash(self)
    }

    pub fn folds_to_run(&self) -> Vec<usize> {
        if self.fold_indices.is_empty() {
            (0..self.folds).collect()
        } else {
            self.fold_indices.clone()
        }
    }
}

/// Train/test pools for one fold, encoded for one method.
pub struct FoldData {
    pub source_train: Vec<PreparedSegment>,
    pub target_train: Vec<PreparedSegment>,
    pub source_test: Vec<PreparedSegment>,
    pub target_test: Vec<PreparedSegment>,
}

fn prepare(segments: &[&Segment], encoding: KinematicEncoding, strip_labels: bool) -> Result<Vec<PreparedSegment>> {
    segments
        .iter()
        .map(|s| {
            let mut p = PreparedSegment::new(s, encoding)?;
            if strip_labels {
                p.gesture = None;
            }
            Ok(p)
        })
        .collect()
}

impl FoldData {
    /// Target training segments lose their labels; only the simulator side
    /// is supervised.
    pub fn new(data: &PairedDataset, split: &DatasetSplit, fold: usize, encoding: KinematicEncoding) -> Result<Self> {
        let (sim_train, sim_test) = split.partition(fold, &data.simulator);
        let (real_train, real_test) = split.partition(fold, &data.real);
        Ok(FoldData {
            source_train: prepare(&sim_train, encoding, false)?,
            target_train: prepare(&real_train, encoding, true)?,
            source_test: prepare(&sim_test, encoding, false)?,
            target_test: prepare(&real_test, encoding, false)?,
        })
    }
}

pub fn split_for(data: &PairedDataset, folds: usize, seed: u64) -> Result<DatasetSplit> {
    make_folds(&data.simulator, folds, seed)
}

/// Result of training one (method, fold, seed) combination.
pub struct RunOutcome {
    pub method: Method,
    pub fold: usize,
    pub seed: u64,
    pub model: Model,
    pub log: TrainLog,
    pub source_test: MetricsReport,
    pub target_test: MetricsReport,
}

pub fn run_once(
    fold_data: &FoldData,
    method: Method,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    fold: usize,
    seed: u64,
    on_checkpoint: impl FnMut(usize, &Model) -> Result<()>,
) -> Result<RunOutcome> {
    let mut mc = model_cfg.clone();
    mc.seed = seed;
    if let Some(s) = fold_data.source_train.first() {
        mc.encoder.visual_dim = s.visual[0].len();
    }
    let mut model = Model::new(mc)?;
    let tc = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    let terms = method.terms();
    let log = train::train(&mut model, &fold_data.source_train, &fold_data.target_train, &tc, terms, on_checkpoint)?;
    let lambda = if terms.visual { tc.lambda } else { 1.0 };
    let mut source_test = metrics::evaluate(&model, &fold_data.source_test, lambda, terms.visual)?;
    let mut target_test = metrics::evaluate(&model, &fold_data.target_test, lambda, terms.visual)?;
    source_test.seeds = vec![seed];
    target_test.seeds = vec![seed];
    Ok(RunOutcome {
        method,
        fold,
        seed,
        model,
        log,
        source_test,
        target_test,
    })
}

/// Aggregated outcome of one method across folds and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub lambda: f64,
    pub source_test: MetricsReport,
    pub target_test: MetricsReport,
}

/// Runs `method` over the configured folds and seeds.
pub fn run_method(data: &PairedDataset, cfg: &ExperimentConfig, method: Method) -> Result<(MethodSummary, Vec<RunOutcome>)> {
    cfg.validate()?;
    let split = split_for(data, cfg.folds, cfg.split_seed)?;
    let mut runs = Vec::new();
    for fold in cfg.folds_to_run() {
        let fd = FoldData::new(data, &split, fold, method.encoding())?;
        for &seed in &cfg.seeds {
            runs.push(run_once(&fd, method, &cfg.model, &cfg.train, fold, seed, |_, _| Ok(()))?);
        }
    }
    let summary = MethodSummary {
        method,
        lambda: cfg.train.lambda,
        source_test: metrics::aggregate(&runs.iter().map(|r| r.source_test.clone()).collect::<Vec<_>>())?,
        target_test: metrics::aggregate(&runs.iter().map(|r| r.target_test.clone()).collect::<Vec<_>>())?,
    };
    Ok((summary, runs))
}

/// One row of a method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub report: MetricsReport,
    /// Metric minus the baseline's metric (accuracy, precision, recall,
    /// jaccard, f1); zero for the baseline row itself.
    pub gains: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: Method,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn new(baseline: Method, results: Vec<(Method, MetricsReport)>) -> Result<Self> {
        let base = results
            .iter()
            .find(|(m, _)| *m == baseline)
            .map(|(_, r)| r.mean)
            .ok_or_else(|| Error::Config(format!("baseline {baseline} missing from results")))?;
        let rows = results
            .into_iter()
            .map(|(method, report)| {
                let m = report.mean;
                let gains = [
                    m.accuracy - base.accuracy,
                    m.precision - base.precision,
                    m.recall - base.recall,
                    m.jaccard - base.jaccard,
                    m.f1 - base.f1,
                ];
                ComparisonRow { method, report, gains }
            })
            .collect();
        Ok(ComparisonTable { baseline, rows })
    }

    pub fn row(&self, method: Method) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Delimited text with percentages: mean, std and gain per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,acc_mean,acc_std,acc_gain,pr_mean,pr_std,pr_gain,re_mean,re_std,re_gain,ja_mean,ja_std,ja_gain,f1_mean,f1_std,f1_gain\n",
        );
        for r in &self.rows {
            let m = r.report.mean;
            let s = r.report.std;
            let cells = [
                (m.accuracy, s.accuracy, r.gains[0]),
                (m.precision, s.precision, r.gains[1]),
                (m.recall, s.recall, r.gains[2]),
                (m.jaccard, s.jaccard, r.gains[3]),
                (m.f1, s.f1, r.gains[4]),
            ];
            out += r.method.name();
            for (mean, std, gain) in cells {
                out += &format!(",{:.2},{:.2},{:.2}", 100.0 * mean, 100.0 * std, 100.0 * gain);
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every method on the same data; gains are relative to the
/// position-vector baseline.
pub fn ablate(data: &PairedDataset, cfg: &ExperimentConfig) -> Result<ComparisonTable> {
    let mut results = Vec::new();
    for method in Method::ALL {
        let (summary, _) = run_method(data, cfg, method)?;
        results.push((method, summary.target_test));
    }
    ComparisonTable::new(Method::BaselinePosition, results)
}

pub const SWEEP_LAMBDAS: [f64; 4] = [0.2, 0.5, 0.7, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub report: MetricsReport,
}

/// Target accuracy of `cfg.method` for each λ.
pub fn sweep_lambda(data: &PairedDataset, cfg: &ExperimentConfig, values: &[f64]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.train.lambda = lambda;
            let (summary, _) = run_method(data, &c, cfg.method)?;
            Ok(SweepRow {
                lambda,
                acc_mean: summary.target_test.mean.accuracy,
                acc_std: summary.target_test.std.accuracy,
                report: summary.target_test,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,acc_mean,acc_std\n");
    for r in rows {
        out += &format!("{},{:.6},{:.6}\n", r.lambda, r.acc_mean, r.acc_std);
    }
    out
}
