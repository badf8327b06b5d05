//! Multi-scale temporal relation encoders.
//!
//! For every relation scale `s` a segment contributes `k` ordered frame
//! subsets of size `s`. Each subset is run through one bidirectional LSTM
//! per modality; the final forward and backward hidden states are
//! concatenated and projected to `hidden_dim`, and the `k` projections are
//! averaged into a single [`RelationFeature`] for that scale.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{join, Linear, Params};
use crate::rng;
use crate::tensor::{self, sigmoid, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden_dim: usize,
    pub max_scale: usize,
    pub subsets_per_scale: usize,
    pub kinematic_dim: usize,
    pub visual_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden_dim: 256,
            max_scale: 10,
            subsets_per_scale: 3,
            kinematic_dim: crate::data::KIN_DIM,
            visual_dim: 2048,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.subsets_per_scale == 0 || self.max_scale < 2 {
            return Err(Error::Config(format!(
                "encoder needs hidden_dim > 0, k >= 1 and max_scale >= 2 (got {}, {}, {})",
                self.hidden_dim, self.subsets_per_scale, self.max_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Kinematic,
    Visual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationFeature {
    pub scale: usize,
    pub modality: Modality,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetMode {
    /// Uniformly random ordered subsets drawn from the given seed.
    Train(u64),
    /// Evenly spaced, identical on every call.
    Eval,
}

/// Number of size-`s` subsets of `n` items, saturating at `cap + 1`.
fn binomial_capped(n: usize, s: usize, cap: usize) -> usize {
    let s = s.min(n - s);
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap + 1;
        }
    }
    acc as usize
}

fn all_subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..s).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..s).rev().find(|&i| cur[i] < n - s + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..s {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `k` strictly increasing index subsets of size `scale` from `0..len`.
///
/// When no more than `k` distinct subsets exist all of them are returned,
/// so e.g. `len == scale` always yields the single full subset.
pub fn sample_scale_indices(len: usize, scale: usize, k: usize, mode: SubsetMode) -> Result<Vec<Vec<usize>>> {
    if scale < 2 || scale > len {
        return Err(Error::InvalidScale { scale, len });
    }
    if binomial_capped(len, scale, k) <= k {
        return Ok(all_subsets(len, scale));
    }
    match mode {
        SubsetMode::Train(seed) => {
            let mut r = rng::stream(seed, &[rng::label_id("subsets"), len as u64, scale as u64]);
            Ok((0..k)
                .map(|_| {
                    let mut v = index::sample(&mut r, len, scale).into_vec();
                    v.sort_unstable();
                    v
                })
                .collect())
        }
        SubsetMode::Eval => {
            let mut out: Vec<Vec<usize>> = Vec::with_capacity(k);
            for r in 0..k {
                let phase = (r as f64 + 0.5) / k as f64;
                let subset: Vec<usize> = (0..scale)
                    .map(|j| (((j as f64 + phase) * len as f64) / scale as f64).floor() as usize)
                    .collect();
                if !out.contains(&subset) {
                    out.push(subset);
                }
            }
            Ok(out)
        }
    }
}

/// Active scales for a sequence of `len` frames: `2..=min(max_scale, len)`.
pub fn active_scales(len: usize, max_scale: usize) -> std::ops::RangeInclusive<usize> {
    2..=max_scale.min(len)
}

/// Subsets for every active scale of one sequence.
pub type ScalePlan = Vec<(usize, Vec<Vec<usize>>)>;

pub fn scale_plan(len: usize, max_scale: usize, k: usize, mode: SubsetMode) -> Result<ScalePlan> {
    if len < 2 {
        return Err(Error::SegmentTooShort(len));
    }
    active_scales(len, max_scale)
        .map(|s| {
            let m = match mode {
                SubsetMode::Train(seed) => SubsetMode::Train(rng::derive_seed(seed, &[s as u64])),
                SubsetMode::Eval => SubsetMode::Eval,
            };
            Ok((s, sample_scale_indices(len, s, k, m)?))
        })
        .collect()
}

/// Single-direction LSTM with gate order (input, forget, cell, output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        Lstm {
            w_ih: Tensor::uniform(&[4 * hidden, input], bound, rng),
            w_hh: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            bias: Tensor::uniform(&[4 * hidden], bound, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    /// Runs over `inputs` in order; returns the final hidden state and the
    /// per-step cache for [`Lstm::backward`].
    fn forward<'x>(&self, inputs: impl Iterator<Item = &'x [f64]>) -> (Vec<f64>, Vec<LstmStep>) {
        let h = self.hidden();
        let mut h_t = vec![0.0; h];
        let mut c_t = vec![0.0; h];
        let mut steps = Vec::new();
        for x in inputs {
            let mut z = self.bias.data.clone();
            tensor::matvec_acc(&self.w_ih, x, &mut z);
            tensor::matvec_acc(&self.w_hh, &h_t, &mut z);
            let i: Vec<f64> = z[..h].iter().map(|v| sigmoid(*v)).collect();
            let f: Vec<f64> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
            let g: Vec<f64> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * h..].iter().map(|v| sigmoid(*v)).collect();
            let c: Vec<f64> = (0..h).map(|j| f[j] * c_t[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
            steps.push(LstmStep {
                h_prev: std::mem::replace(&mut h_t, h_new),
                c_prev: std::mem::replace(&mut c_t, c),
                i,
                f,
                g,
                o,
                tanh_c,
            });
        }
        (h_t, steps)
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Inputs are data, so no input gradient is produced.
    fn backward(&self, inputs: &[&[f64]], steps: &[LstmStep], dh_final: &[f64], grad: &mut Lstm) {
        let h = self.hidden();
        let mut dh = dh_final.to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for (x, st) in inputs.iter().zip(steps).rev() {
            for j in 0..h {
                let d_o = dh[j] * st.tanh_c[j];
                let dcj = dc[j] + dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]);
                let di = dcj * st.g[j];
                let dg = dcj * st.i[j];
                let df = dcj * st.c_prev[j];
                dc[j] = dcj * st.f[j];
                dz[j] = di * st.i[j] * (1.0 - st.i[j]);
                dz[h + j] = df * st.f[j] * (1.0 - st.f[j]);
                dz[2 * h + j] = dg * (1.0 - st.g[j] * st.g[j]);
                dz[3 * h + j] = d_o * st.o[j] * (1.0 - st.o[j]);
            }
            tensor::outer_acc(&mut grad.w_ih, &dz, x);
            tensor::outer_acc(&mut grad.w_hh, &dz, &st.h_prev);
            tensor::add_into(&mut grad.bias.data, &dz);
            dh.iter_mut().for_each(|v| *v = 0.0);
            tensor::matvec_t_acc(&self.w_hh, &dz, &mut dh);
        }
    }
}

impl Params for Lstm {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((join(prefix, "w_ih"), &self.w_ih));
        out.push((join(prefix, "w_hh"), &self.w_hh));
        out.push((join(prefix, "bias"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((join(prefix, "w_ih"), &mut self.w_ih));
        out.push((join(prefix, "w_hh"), &mut self.w_hh));
        out.push((join(prefix, "bias"), &mut self.bias));
    }
}

/// Shared bidirectional encoder for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEncoder {
    pub forward: Lstm,
    pub backward: Lstm,
    pub projection: Linear,
}

/// Forward state kept for one subset.
struct SubsetCache {
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
    concat: Vec<f64>,
}

/// Forward state of one [`RelationEncoder::encode_relation`] call.
pub struct RelationCache {
    indices: Vec<Vec<usize>>,
    subsets: Vec<SubsetCache>,
}

impl RelationEncoder {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        RelationEncoder {
            forward: Lstm::new(input, hidden, rng),
            backward: Lstm::new(input, hidden, rng),
            projection: Linear::new(2 * hidden, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.output_dim()
    }

    /// Encodes the sub-sequences selected by `indices` and averages them.
    pub fn encode_relation(&self, frames: &[Vec<f64>], indices: &[Vec<usize>]) -> Result<(Vec<f64>, RelationCache)> {
        if indices.is_empty() {
            return Err(Error::Config("encode_relation needs at least one subset".into()));
        }
        let mut out = vec![0.0; self.output_dim()];
        let mut subsets = Vec::with_capacity(indices.len());
        let w = 1.0 / indices.len() as f64;
        for idx in indices {
            let mut seq: Vec<&[f64]> = Vec::with_capacity(idx.len());
            for &i in idx {
                let f = frames.get(i).ok_or(Error::InvalidScale { scale: i + 1, len: frames.len() })?;
                if f.len() != self.input_dim() {
                    return Err(Error::Dimension {
                        expected: self.input_dim(),
                        got: f.len(),
                        context: "relation encoder input",
                    });
                }
                seq.push(f);
            }
            let (hf, fwd) = self.forward.forward(seq.iter().copied());
            let (hb, bwd) = self.backward.forward(seq.iter().rev().copied());
            let mut concat = hf;
            concat.extend_from_slice(&hb);
            let y = self.projection.forward(&concat);
            for (o, v) in out.iter_mut().zip(&y) {
                *o += w * v;
            }
            subsets.push(SubsetCache { fwd, bwd, concat });
        }
        Ok((
            out,
            RelationCache {
                indices: indices.to_vec(),
                subsets,
            },
        ))
    }

    pub fn backward(&self, frames: &[Vec<f64>], cache: &RelationCache, d_out: &[f64], grad: &mut RelationEncoder) {
        let w = 1.0 / cache.indices.len() as f64;
        let dy: Vec<f64> = d_out.iter().map(|v| v * w).collect();
        let h = self.forward.hidden();
        for (idx, sc) in cache.indices.iter().zip(&cache.subsets) {
            let d_concat = self.projection.backward(&sc.concat, &dy, &mut grad.projection);
            let seq: Vec<&[f64]> = idx.iter().map(|&i| frames[i].as_slice()).collect();
            self.forward.backward(&seq, &sc.fwd, &d_concat[..h], &mut grad.forward);
            let rev: Vec<&[f64]> = seq.iter().rev().copied().collect();
            self.backward.backward(&rev, &sc.bwd, &d_concat[h..], &mut grad.backward);
        }
    }

    /// One feature per active scale, using the subsets in `plan`.
    pub fn encode_all_scales(
        &self,
        frames: &[Vec<f64>],
        plan: &ScalePlan,
        modality: Modality,
    ) -> Result<BTreeMap<usize, RelationFeature>> {
        plan.iter()
            .map(|(s, idx)| {
                let (values, _) = self.encode_relation(frames, idx)?;
                Ok((
                    *s,
                    RelationFeature {
                        scale: *s,
                        modality,
                        values,
                    },
                ))
            })
            .collect()
    }
}

impl Params for RelationEncoder {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.forward.visit(&join(prefix, "fwd"), out);
        self.backward.visit(&join(prefix, "bwd"), out);
        self.projection.visit(&join(prefix, "proj"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.forward.visit_mut(&join(prefix, "fwd"), out);
        self.backward.visit_mut(&join(prefix, "bwd"), out);
        self.projection.visit_mut(&join(prefix, "proj"), out);
    }
}
