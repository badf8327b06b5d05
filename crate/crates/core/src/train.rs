//! Adversarial training loop.

use serde::{Deserialize, Serialize};

use crate::adversarial::{compute_loss, BatchItem, Coupling, GradientReversal, LossBreakdown, Model, Objective, PreparedSegment};
use crate::data::{sample_batch, Domain};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::relation::{ScalePlan, SubsetMode};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the kinematic classifier in the class mixture.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_per_domain: usize,
    pub epochs: usize,
    /// Optimizer steps per epoch; defaults to one pass over the source pool.
    pub steps_per_epoch: Option<usize>,
    pub seed: u64,
    pub grl_beta: f64,
    /// Ramp the reversal coefficient from 0 to `grl_beta` over training
    /// with the usual `2 / (1 + exp(-10 p)) - 1` schedule.
    pub grl_warmup: bool,
    /// Call the checkpoint hook every this many epochs.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.8,
            learning_rate: 1e-3,
            batch_per_domain: 256,
            epochs: 30,
            steps_per_epoch: None,
            seed: 0,
            grl_beta: 0.5,
            grl_warmup: false,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_per_domain == 0 {
            return Err(Error::Config("batch_per_domain must be > 0".into()));
        }
        Ok(())
    }
}

/// Loss terms switched on for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossTerms {
    pub kd: bool,
    pub kvd: bool,
    pub visual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub classification: f64,
    pub kd: Option<f64>,
    pub kvd: Option<f64>,
    pub source_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub terms: LossTerms,
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// Delimited-text log; loss columns follow the active terms.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["epoch", "L_C"];
        if self.terms.kd {
            header.push("L_K-D");
        }
        if self.terms.kvd {
            header.push("L_KV-D");
        }
        header.push("source_acc");
        let mut out = header.join(",") + "\n";
        for e in &self.epochs {
            let mut row = vec![e.epoch.to_string(), format!("{:.6}", e.classification)];
            if let Some(v) = e.kd {
                row.push(format!("{v:.6}"));
            }
            if let Some(v) = e.kvd {
                row.push(format!("{v:.6}"));
            }
            row.push(format!("{:.6}", e.source_accuracy));
            out += &(row.join(",") + "\n");
        }
        out
    }
}

fn objective(cfg: &TrainConfig, terms: LossTerms, progress: f64) -> Objective {
    let beta = if cfg.grl_warmup {
        cfg.grl_beta * (2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0)
    } else {
        cfg.grl_beta
    };
    Objective {
        lambda: cfg.lambda,
        classification: true,
        kd: terms.kd,
        kvd: terms.kvd,
        visual: terms.visual,
        coupling: Coupling::Reversed(GradientReversal { beta }),
    }
}

/// Trains `model` in place on labeled `source` and unlabeled `target`
/// segments. `on_checkpoint(epoch, model)` fires at the configured cadence.
pub fn train(
    model: &mut Model,
    source: &[PreparedSegment],
    target: &[PreparedSegment],
    cfg: &TrainConfig,
    terms: LossTerms,
    mut on_checkpoint: impl FnMut(usize, &Model) -> Result<()>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if terms.kvd && !terms.visual {
        return Err(Error::Config("KV-D alignment needs the visual branch".into()));
    }
    if source.iter().any(|s| s.domain != Domain::Simulator || s.gesture.is_none()) {
        return Err(Error::TargetInClassification);
    }
    if target.iter().any(|s| s.domain != Domain::Real) {
        return Err(Error::Config("target pool contains simulator segments".into()));
    }
    let adversarial = terms.kd || terms.kvd;
    // Without alignment terms the target pool is never touched.
    let target_len = if adversarial { target.len() } else { source.len() };
    let steps = cfg
        .steps_per_epoch
        .unwrap_or_else(|| source.len().div_ceil(cfg.batch_per_domain))
        .max(1);
    let total_steps = (steps * cfg.epochs).max(1);
    let mut opt = Adam::new(&*model, cfg.learning_rate);
    let mut log = TrainLog {
        terms,
        epochs: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs {
        let mut acc = LossBreakdown::default();
        let (mut correct, mut seen) = (0usize, 0usize);
        for step in 0..steps {
            let global = (epoch * steps + step) as u64;
            let (si, ti) = sample_batch(source.len(), target_len, cfg.batch_per_domain, cfg.seed, global)?;
            let mut chosen: Vec<&PreparedSegment> = si.iter().map(|&i| &source[i]).collect();
            if adversarial {
                chosen.extend(ti.iter().map(|&i| &target[i]));
            }
            let plans: Vec<ScalePlan> = chosen
                .iter()
                .enumerate()
                .map(|(slot, s)| {
                    let seed = rng::derive_seed(cfg.seed, &[rng::label_id("plan"), global, slot as u64]);
                    model.plan(s, SubsetMode::Train(seed))
                })
                .collect::<Result<_>>()?;
            let items: Vec<BatchItem<'_>> = chosen
                .iter()
                .zip(&plans)
                .map(|(s, p)| BatchItem { segment: s, plan: p })
                .collect();
            let obj = objective(cfg, terms, global as f64 / total_steps as f64);
            let mut grad = model.zeros_like();
            let loss = compute_loss(model, &items, &obj, Some(&mut grad))?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    classification: loss.classification,
                    kd: loss.kd,
                    kvd: loss.kvd,
                });
            }
            opt.step(model, &grad);
            acc.classification += loss.classification / steps as f64;
            acc.kd += loss.kd / steps as f64;
            acc.kvd += loss.kvd / steps as f64;
            correct += loss.source_correct;
            seen += loss.source_count;
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            classification: acc.classification,
            kd: terms.kd.then_some(acc.kd),
            kvd: terms.kvd.then_some(acc.kvd),
            source_accuracy: if seen > 0 { correct as f64 / seen as f64 } else { 0.0 },
        };
        log::debug!(
            "epoch {} L_C={:.4} L_K-D={:?} L_KV-D={:?} acc={:.3}",
            entry.epoch,
            entry.classification,
            entry.kd,
            entry.kvd,
            entry.source_accuracy
        );
        log.epochs.push(entry);
        if let Some(every) = cfg.checkpoint_every {
            if every > 0 && (epoch + 1) % every == 0 {
                on_checkpoint(epoch + 1, model)?;
            }
        }
    }
    Ok(log)
}
