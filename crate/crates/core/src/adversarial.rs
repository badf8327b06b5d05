//! Gradient reversal, domain discriminators (KD over the kinematic feature,
//! KVD over the fused feature), gesture classifiers (KC, KVC) and the loss
//! terms tying them together.
//!
//! The full network for one segment:
//!
//! ```text
//! kin frames ─ N ─ R_k^s ─┬─ mean_s ─ F_k ─┬─ KC ──────── p^kc ─┐
//!                         │                 └─ GRL ─ KD         ├─ λ-mix ─ p^c
//! vis frames ─ M ─ R_v^s ─┴─ ⊙ ─ q^s ─ Σ_s ─ F_kvr ─┬─ KVC ─ p^kvc ─┘
//!                                                    └─ GRL ─ KVD
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Domain, Segment, NUM_GESTURES};
use crate::error::{Error, Result};
use crate::fusion::{self, FusionMode, ScaleProjections};
use crate::mdok::{encode_segment, KinematicEncoding};
use crate::params::{join, Linear, Params};
use crate::relation::{scale_plan, EncoderConfig, RelationCache, RelationEncoder, ScalePlan, SubsetMode};
use crate::rng;
use crate::tensor::{self, softmax, softmax_backward, Tensor};

/// Identity on the forward pass; scales gradients by `-beta` on the way back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientReversal {
    pub beta: f64,
}

impl Default for GradientReversal {
    fn default() -> Self {
        GradientReversal { beta: 0.5 }
    }
}

impl GradientReversal {
    pub fn apply<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        x
    }

    pub fn backprop(&self, g: &[f64]) -> Vec<f64> {
        g.iter().map(|v| -self.beta * v).collect()
    }
}

/// How discriminator gradients reach the feature extractors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    Reversed(GradientReversal),
    /// No reversal layer: discriminator gradients flow unchanged.
    Direct,
}

impl Coupling {
    fn backprop(&self, g: Vec<f64>) -> Vec<f64> {
        match self {
            Coupling::Reversed(grl) => grl.backprop(&g),
            Coupling::Direct => g,
        }
    }
}

/// Two-layer head `W2 tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

pub struct MlpCache {
    activation: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: Linear::new(input, hidden, rng),
            output: Linear::new(hidden, output, rng),
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let activation: Vec<f64> = self.hidden.forward(x).iter().map(|v| v.tanh()).collect();
        (self.output.forward(&activation), MlpCache { activation })
    }

    pub fn backward(&self, x: &[f64], cache: &MlpCache, d_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let da = self.output.backward(&cache.activation, d_out, &mut grad.output);
        let dz: Vec<f64> = da
            .iter()
            .zip(&cache.activation)
            .map(|(g, a)| g * (1.0 - a * a))
            .collect();
        self.hidden.backward(x, &dz, &mut grad.hidden)
    }
}

impl Params for Mlp {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.hidden.visit(&join(prefix, "l1"), out);
        self.output.visit(&join(prefix, "l2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.hidden.visit_mut(&join(prefix, "l1"), out);
        self.output.visit_mut(&join(prefix, "l2"), out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub fusion_mode: FusionMode,
    /// Width `F` of the fused multi-scale feature.
    pub fusion_dim: usize,
    pub head_hidden: usize,
    /// Initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            fusion_mode: FusionMode::Elementwise,
            fusion_dim: 256,
            head_hidden: 128,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.fusion_dim == 0 || self.head_hidden == 0 {
            return Err(Error::Config("fusion_dim and head_hidden must be > 0".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Short SHA-256 of a config's canonical JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("configs serialize");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    /// Kinematic encoder `N`.
    pub kinematic: RelationEncoder,
    /// Visual encoder `M`.
    pub visual: RelationEncoder,
    pub scale_maps: ScaleProjections,
    pub kd: Mlp,
    pub kvd: Mlp,
    pub kc: Mlp,
    pub kvc: Mlp,
}

impl Params for Model {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.kinematic.visit(&join(prefix, "kin_encoder"), out);
        self.visual.visit(&join(prefix, "vis_encoder"), out);
        self.scale_maps.visit(&join(prefix, "q"), out);
        self.kd.visit(&join(prefix, "kd"), out);
        self.kvd.visit(&join(prefix, "kvd"), out);
        self.kc.visit(&join(prefix, "kc"), out);
        self.kvc.visit(&join(prefix, "kvc"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.kinematic.visit_mut(&join(prefix, "kin_encoder"), out);
        self.visual.visit_mut(&join(prefix, "vis_encoder"), out);
        self.scale_maps.visit_mut(&join(prefix, "q"), out);
        self.kd.visit_mut(&join(prefix, "kd"), out);
        self.kvd.visit_mut(&join(prefix, "kvd"), out);
        self.kc.visit_mut(&join(prefix, "kc"), out);
        self.kvc.visit_mut(&join(prefix, "kvc"), out);
    }
}

/// A segment converted to encoder inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSegment {
    pub id: String,
    pub kinematic: Vec<Vec<f64>>,
    pub visual: Vec<Vec<f64>>,
    pub domain: Domain,
    pub gesture: Option<usize>,
}

impl PreparedSegment {
    pub fn new(segment: &Segment, encoding: KinematicEncoding) -> Result<Self> {
        let (kinematic, visual) = encode_segment(segment, encoding)?;
        Ok(PreparedSegment {
            id: segment.id(),
            kinematic,
            visual,
            domain: segment.domain,
            gesture: segment.gesture,
        })
    }

    pub fn len(&self) -> usize {
        self.kinematic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinematic.is_empty()
    }
}

/// A prepared segment together with the frame subsets used for it.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub segment: &'a PreparedSegment,
    pub plan: &'a ScalePlan,
}

/// Which loss terms are active and how the branches are wired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub lambda: f64,
    pub classification: bool,
    pub kd: bool,
    pub kvd: bool,
    /// Whether the visual encoder and fused branch (KVC/KVD) are used at all.
    pub visual: bool,
    pub coupling: Coupling,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            lambda: 0.8,
            classification: true,
            kd: true,
            kvd: true,
            visual: true,
            coupling: Coupling::Reversed(GradientReversal::default()),
        }
    }
}

impl Objective {
    /// Mixing weight of the kinematic classifier; 1 when the fused branch is off.
    pub fn effective_lambda(&self) -> f64 {
        if self.visual {
            self.lambda
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub classification: f64,
    pub kd: f64,
    pub kvd: f64,
    /// Source segments whose mixed prediction was correct.
    pub source_correct: usize,
    pub source_count: usize,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.classification + self.kd + self.kvd
    }

    pub fn is_finite(&self) -> bool {
        self.classification.is_finite() && self.kd.is_finite() && self.kvd.is_finite()
    }
}

struct ScaleForward {
    scale: usize,
    rk: Vec<f64>,
    kin_cache: RelationCache,
    rv: Vec<f64>,
    vis_cache: Option<RelationCache>,
}

/// Forward activations for one segment.
pub struct SegmentForward {
    scales: Vec<ScaleForward>,
    pub kinematic_feature: Vec<f64>,
    fused_per_scale: Vec<(usize, Vec<f64>)>,
    pub fused_feature: Option<Vec<f64>>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.seed, &[rng::label_id("model-init")]);
        let e = &config.encoder;
        let h = e.hidden_dim;
        let kinematic = RelationEncoder::new(e.kinematic_dim, h, &mut r);
        let visual = RelationEncoder::new(e.visual_dim, h, &mut r);
        let scale_maps = ScaleProjections::new(e.max_scale, config.fusion_mode.fused_dim(h), config.fusion_dim, &mut r);
        let kd = Mlp::new(h, config.head_hidden, 2, &mut r);
        let kvd = Mlp::new(config.fusion_dim, config.head_hidden, 2, &mut r);
        let kc = Mlp::new(h, config.head_hidden, NUM_GESTURES, &mut r);
        let kvc = Mlp::new(config.fusion_dim, config.head_hidden, NUM_GESTURES, &mut r);
        Ok(Model {
            config,
            kinematic,
            visual,
            scale_maps,
            kd,
            kvd,
            kc,
            kvc,
        })
    }

    pub fn zeros_like(&self) -> Model {
        let mut m = self.clone();
        m.zero();
        m
    }

    pub fn plan(&self, segment: &PreparedSegment, mode: SubsetMode) -> Result<ScalePlan> {
        let e = &self.config.encoder;
        scale_plan(segment.len(), e.max_scale, e.subsets_per_scale, mode)
    }

    pub fn forward(&self, item: BatchItem<'_>, visual: bool) -> Result<SegmentForward> {
        let seg = item.segment;
        if item.plan.is_empty() {
            return Err(Error::SegmentTooShort(seg.len()));
        }
        let mut scales = Vec::with_capacity(item.plan.len());
        let mut fk = vec![0.0; self.kinematic.output_dim()];
        let inv = 1.0 / item.plan.len() as f64;
        for (s, idx) in item.plan {
            let (rk, kin_cache) = self.kinematic.encode_relation(&seg.kinematic, idx)?;
            for (a, b) in fk.iter_mut().zip(&rk) {
                *a += inv * b;
            }
            let (rv, vis_cache) = if visual {
                let (rv, c) = self.visual.encode_relation(&seg.visual, idx)?;
                (rv, Some(c))
            } else {
                (Vec::new(), None)
            };
            scales.push(ScaleForward {
                scale: *s,
                rk,
                kin_cache,
                rv,
                vis_cache,
            });
        }
        let (fused_per_scale, fused_feature) = if visual {
            let per: Vec<(usize, Vec<f64>)> = scales
                .iter()
                .map(|sf| Ok((sf.scale, fusion::kv_relation_scale(&sf.rv, &sf.rk, self.config.fusion_mode)?)))
                .collect::<Result<_>>()?;
            let f = fusion::multi_scale_fuse(&per, &self.scale_maps)?;
            (per, Some(f))
        } else {
            (Vec::new(), None)
        };
        Ok(SegmentForward {
            scales,
            kinematic_feature: fk,
            fused_per_scale,
            fused_feature,
        })
    }

    /// Backpropagates gradients on `F_k` and `F_kvr` into the encoders and
    /// scale maps.
    fn backward_features(
        &self,
        item: BatchItem<'_>,
        fwd: &SegmentForward,
        d_fk: &[f64],
        d_fkvr: Option<&[f64]>,
        grad: &mut Model,
    ) {
        let inv = 1.0 / fwd.scales.len() as f64;
        let d_fused = d_fkvr.map(|d| fusion::multi_scale_fuse_backward(&fwd.fused_per_scale, &self.scale_maps, d, &mut grad.scale_maps));
        for (i, sf) in fwd.scales.iter().enumerate() {
            let mut d_rk: Vec<f64> = d_fk.iter().map(|v| v * inv).collect();
            if let (Some(dfs), Some(vc)) = (&d_fused, &sf.vis_cache) {
                let (d_rv, d_rk_fused) = fusion::kv_relation_scale_backward(&sf.rv, &sf.rk, &dfs[i], self.config.fusion_mode);
                tensor::add_into(&mut d_rk, &d_rk_fused);
                self.visual.backward(&item.segment.visual, vc, &d_rv, &mut grad.visual);
            }
            self.kinematic.backward(&item.segment.kinematic, &sf.kin_cache, &d_rk, &mut grad.kinematic);
        }
    }

    /// Mixed class distribution `p^c = λ p^kc + (1-λ) p^kvc`.
    pub fn predict_proba(&self, item: BatchItem<'_>, lambda: f64, visual: bool) -> Result<Vec<f64>> {
        let fwd = self.forward(item, visual)?;
        let p_kc = softmax(&self.kc.forward(&fwd.kinematic_feature).0);
        Ok(match &fwd.fused_feature {
            Some(f) => {
                let p_kvc = softmax(&self.kvc.forward(f).0);
                p_kc.iter().zip(&p_kvc).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect()
            }
            None => p_kc,
        })
    }
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Two-way cross-entropy of `logits` against `label` and its logit gradient
/// scaled by `weight`.
fn domain_ce(logits: &[f64], label: usize, weight: f64) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -p[label].ln();
    let grad = p
        .iter()
        .enumerate()
        .map(|(i, pi)| weight * (pi - if i == label { 1.0 } else { 0.0 }))
        .collect();
    (loss, grad)
}

/// Evaluates the active loss terms over `items` and, when `grad` is given,
/// accumulates their parameter gradients.
///
/// Classification averages over source items; each discriminator term
/// averages over all items.
pub fn compute_loss(model: &Model, items: &[BatchItem<'_>], obj: &Objective, mut grad: Option<&mut Model>) -> Result<LossBreakdown> {
    if obj.kvd && !obj.visual {
        return Err(Error::Config("KV-D loss requires the visual branch".into()));
    }
    if !(0.0..=1.0).contains(&obj.lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", obj.lambda)));
    }
    if obj.kd || obj.kvd {
        if !items.iter().any(|i| i.segment.domain == Domain::Simulator) {
            return Err(Error::MissingDomain("simulator"));
        }
        if !items.iter().any(|i| i.segment.domain == Domain::Real) {
            return Err(Error::MissingDomain("real"));
        }
    }
    let n_source = items.iter().filter(|i| i.segment.domain == Domain::Simulator).count();
    if obj.classification {
        if n_source == 0 {
            return Err(Error::MissingDomain("simulator"));
        }
        if items.iter().any(|i| i.segment.domain == Domain::Simulator && i.segment.gesture.is_none()) {
            return Err(Error::TargetInClassification);
        }
    }
    let lambda = obj.effective_lambda();
    let n_all = items.len() as f64;
    let mut out = LossBreakdown::default();

    for item in items {
        let fwd = model.forward(*item, obj.visual)?;
        let fk = &fwd.kinematic_feature;
        let mut d_fk = vec![0.0; fk.len()];
        let mut d_fkvr = fwd.fused_feature.as_ref().map(|f| vec![0.0; f.len()]);

        if obj.classification && item.segment.domain == Domain::Simulator {
            let y = item.segment.gesture.expect("checked above");
            let (kc_logits, kc_cache) = model.kc.forward(fk);
            let p_kc = softmax(&kc_logits);
            let kvc = fwd.fused_feature.as_ref().map(|f| {
                let (logits, cache) = model.kvc.forward(f);
                (softmax(&logits), cache)
            });
            let p_y = match &kvc {
                Some((p_kvc, _)) => lambda * p_kc[y] + (1.0 - lambda) * p_kvc[y],
                None => p_kc[y],
            };
            out.classification += -p_y.ln() / n_source as f64;
            let mixed: Vec<f64> = match &kvc {
                Some((p_kvc, _)) => p_kc.iter().zip(p_kvc).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
                None => p_kc.clone(),
            };
            out.source_count += 1;
            if argmax(&mixed) == y {
                out.source_correct += 1;
            }
            if let Some(g) = grad.as_deref_mut() {
                let coef = -1.0 / (p_y * n_source as f64);
                let mut dp = vec![0.0; NUM_GESTURES];
                dp[y] = lambda * coef;
                let dz = softmax_backward(&p_kc, &dp);
                tensor::add_into(&mut d_fk, &model.kc.backward(fk, &kc_cache, &dz, &mut g.kc));
                if let (Some((p_kvc, cache)), Some(f), Some(dst)) = (&kvc, &fwd.fused_feature, d_fkvr.as_mut()) {
                    let mut dp = vec![0.0; NUM_GESTURES];
                    dp[y] = (1.0 - lambda) * coef;
                    let dz = softmax_backward(p_kvc, &dp);
                    tensor::add_into(dst, &model.kvc.backward(f, cache, &dz, &mut g.kvc));
                }
            }
        }

        let d_label = item.segment.domain.label();
        if obj.kd {
            let (logits, cache) = model.kd.forward(grl_forward(obj, fk));
            let (loss, dz) = domain_ce(&logits, d_label, 1.0 / n_all);
            out.kd += loss / n_all;
            if let Some(g) = grad.as_deref_mut() {
                let dx = model.kd.backward(fk, &cache, &dz, &mut g.kd);
                tensor::add_into(&mut d_fk, &obj.coupling.backprop(dx));
            }
        }
        if obj.kvd {
            let f = fwd.fused_feature.as_ref().expect("visual branch active");
            let (logits, cache) = model.kvd.forward(grl_forward(obj, f));
            let (loss, dz) = domain_ce(&logits, d_label, 1.0 / n_all);
            out.kvd += loss / n_all;
            if let Some(g) = grad.as_deref_mut() {
                let dx = model.kvd.backward(f, &cache, &dz, &mut g.kvd);
                tensor::add_into(d_fkvr.as_mut().expect("visual"), &obj.coupling.backprop(dx));
            }
        }

        if let Some(g) = grad.as_deref_mut() {
            model.backward_features(*item, &fwd, &d_fk, d_fkvr.as_deref(), g);
        }
    }
    Ok(out)
}

fn grl_forward<'a>(obj: &Objective, x: &'a [f64]) -> &'a [f64] {
    match obj.coupling {
        Coupling::Reversed(grl) => grl.apply(x),
        Coupling::Direct => x,
    }
}

fn only(obj: &Objective, classification: bool, kd: bool, kvd: bool) -> Objective {
    Objective {
        classification,
        kd,
        kvd,
        ..*obj
    }
}

/// Mean domain cross-entropy of KD over a mixed-domain batch.
pub fn kd_loss(model: &Model, batch: &[BatchItem<'_>], obj: &Objective) -> Result<f64> {
    Ok(compute_loss(model, batch, &only(obj, false, true, false), None)?.kd)
}

/// Mean domain cross-entropy of KVD over a mixed-domain batch.
pub fn kvd_loss(model: &Model, batch: &[BatchItem<'_>], obj: &Objective) -> Result<f64> {
    let o = Objective {
        visual: true,
        ..only(obj, false, false, true)
    };
    Ok(compute_loss(model, batch, &o, None)?.kvd)
}

/// Mean cross-entropy of the λ-mixed class distribution over source segments.
pub fn classification_loss(model: &Model, source: &[BatchItem<'_>], obj: &Objective) -> Result<f64> {
    if source.iter().any(|i| i.segment.domain != Domain::Simulator || i.segment.gesture.is_none()) {
        return Err(Error::TargetInClassification);
    }
    Ok(compute_loss(model, source, &only(obj, true, false, false), None)?.classification)
}

/// All active terms and their gradient for one source/target batch pair.
pub fn total_loss(model: &Model, source: &[BatchItem<'_>], target: &[BatchItem<'_>], obj: &Objective) -> Result<(LossBreakdown, Model)> {
    if source.iter().any(|i| i.segment.domain != Domain::Simulator) {
        return Err(Error::TargetInClassification);
    }
    if target.iter().any(|i| i.segment.domain != Domain::Real) {
        return Err(Error::Config("target batch contains simulator segments".into()));
    }
    let items: Vec<BatchItem<'_>> = source.iter().chain(target).copied().collect();
    let mut grad = model.zeros_like();
    let loss = compute_loss(model, &items, obj, Some(&mut grad))?;
    Ok((loss, grad))
}
