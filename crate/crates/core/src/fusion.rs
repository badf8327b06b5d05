//! Kinematic-visual co-occurrence fusion.
//!
//! At every relation scale the visual and kinematic relation features are
//! combined into a co-occurrence vector, mapped to a common width by a
//! per-scale fully connected layer, and the mapped vectors are summed over
//! scales.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{join, Linear, Params};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FusionMode {
    /// Componentwise product `Rv ⊙ Rk`.
    #[default]
    #[serde(rename = "elementwise")]
    Elementwise,
    /// `(<Rv, Rk> / dim) · [Rv; Rk]`.
    #[serde(rename = "scalar-attention")]
    ScalarAttention,
}

impl FusionMode {
    /// Width of the per-scale fused vector for relation features of `dim`.
    pub fn fused_dim(self, dim: usize) -> usize {
        match self {
            FusionMode::Elementwise => dim,
            FusionMode::ScalarAttention => 2 * dim,
        }
    }
}

pub fn kv_relation_scale(rv: &[f64], rk: &[f64], mode: FusionMode) -> Result<Vec<f64>> {
    if rv.len() != rk.len() {
        return Err(Error::Dimension {
            expected: rv.len(),
            got: rk.len(),
            context: "kinematic vs visual relation feature",
        });
    }
    Ok(match mode {
        FusionMode::Elementwise => rv.iter().zip(rk).map(|(a, b)| a * b).collect(),
        FusionMode::ScalarAttention => {
            let alpha = tensor::dot(rv, rk) / rv.len() as f64;
            rv.iter().chain(rk).map(|v| alpha * v).collect()
        }
    })
}

/// Returns `(dL/dRv, dL/dRk)`.
pub fn kv_relation_scale_backward(rv: &[f64], rk: &[f64], d_out: &[f64], mode: FusionMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        FusionMode::Elementwise => (
            d_out.iter().zip(rk).map(|(g, b)| g * b).collect(),
            d_out.iter().zip(rv).map(|(g, a)| g * a).collect(),
        ),
        FusionMode::ScalarAttention => {
            let n = rv.len();
            let alpha = tensor::dot(rv, rk) / n as f64;
            let d_alpha = tensor::dot(&d_out[..n], rv) + tensor::dot(&d_out[n..], rk);
            let drv = (0..n).map(|i| alpha * d_out[i] + d_alpha * rk[i] / n as f64).collect();
            let drk = (0..n).map(|i| alpha * d_out[n + i] + d_alpha * rv[i] / n as f64).collect();
            (drv, drk)
        }
    }
}

/// Per-scale maps `q^s` for scales `2..=max_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProjections {
    pub maps: Vec<Linear>,
}

impl ScaleProjections {
    pub fn new<R: Rng + ?Sized>(max_scale: usize, input: usize, output: usize, rng: &mut R) -> Self {
        ScaleProjections {
            maps: (2..=max_scale).map(|_| Linear::new(input, output, rng)).collect(),
        }
    }

    pub fn get(&self, scale: usize) -> Option<&Linear> {
        scale.checked_sub(2).and_then(|i| self.maps.get(i))
    }

    pub fn get_mut(&mut self, scale: usize) -> Option<&mut Linear> {
        scale.checked_sub(2).and_then(move |i| self.maps.get_mut(i))
    }

    pub fn output_dim(&self) -> usize {
        self.maps[0].output_dim()
    }
}

impl Params for ScaleProjections {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, m) in self.maps.iter().enumerate() {
            m.visit(&join(prefix, &format!("s{}", i + 2)), out);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (i, m) in self.maps.iter_mut().enumerate() {
            m.visit_mut(&join(prefix, &format!("s{}", i + 2)), out);
        }
    }
}

/// `Σ_s q^s(fused_s)` over the scales present.
pub fn multi_scale_fuse(per_scale: &[(usize, Vec<f64>)], projections: &ScaleProjections) -> Result<Vec<f64>> {
    if per_scale.is_empty() {
        return Err(Error::Config("multi-scale fusion needs at least one scale".into()));
    }
    let mut out = vec![0.0; projections.output_dim()];
    for (s, v) in per_scale {
        let q = projections.get(*s).ok_or(Error::MissingProjection(*s))?;
        if q.input_dim() != v.len() {
            return Err(Error::Dimension {
                expected: q.input_dim(),
                got: v.len(),
                context: "scale projection input",
            });
        }
        tensor::add_into(&mut out, &q.forward(v));
    }
    Ok(out)
}

/// Gradient of [`multi_scale_fuse`]: accumulates into `grad` and returns
/// `dL/dfused_s` for each scale, in input order.
pub fn multi_scale_fuse_backward(
    per_scale: &[(usize, Vec<f64>)],
    projections: &ScaleProjections,
    d_out: &[f64],
    grad: &mut ScaleProjections,
) -> Vec<Vec<f64>> {
    per_scale
        .iter()
        .map(|(s, v)| {
            let q = projections.get(*s).expect("checked in forward");
            q.backward(v, d_out, grad.get_mut(*s).expect("same layout"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn one_hot_cases() {
        let e1 = one_hot(4, 0);
        let e2 = one_hot(4, 1);
        assert_eq!(kv_relation_scale(&e1, &e2, FusionMode::Elementwise).unwrap(), vec![0.0; 4]);
        assert_eq!(kv_relation_scale(&e1, &e1, FusionMode::Elementwise).unwrap(), e1);
        assert!(kv_relation_scale(&e1, &[1.0], FusionMode::Elementwise).is_err());
    }

    #[test]
    fn elementwise_matches_componentwise_oracle() {
        let mut r = rng::stream(8, &[]);
        let a: Vec<f64> = (0..256).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..256).map(|_| r.random_range(-1.0..1.0)).collect();
        let out = kv_relation_scale(&a, &b, FusionMode::Elementwise).unwrap();
        for i in 0..256 {
            assert_eq!(out[i], a[i] * b[i]);
        }
    }

    #[test]
    fn scalar_attention_scales_concatenation() {
        let out = kv_relation_scale(&[1.0, 2.0], &[3.0, 0.0], FusionMode::ScalarAttention).unwrap();
        assert_eq!(out, vec![1.5, 3.0, 4.5, 0.0]);
    }

    #[test]
    fn single_identity_scale_passes_through() {
        let q = ScaleProjections { maps: vec![Linear::identity(3)] };
        let v = vec![0.5, -1.0, 2.0];
        assert_eq!(multi_scale_fuse(&[(2, v.clone())], &q).unwrap(), v);
    }

    #[test]
    fn zero_maps_annihilate() {
        let q = ScaleProjections { maps: vec![Linear::zeros(3, 4), Linear::zeros(3, 4)] };
        let out = multi_scale_fuse(&[(2, vec![1.0; 3]), (3, vec![-2.0; 3])], &q).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn missing_projection_is_an_error() {
        let q = ScaleProjections { maps: vec![Linear::zeros(3, 4)] };
        assert!(matches!(multi_scale_fuse(&[(3, vec![1.0; 3])], &q), Err(Error::MissingProjection(3))));
    }

    #[test]
    fn three_scales_match_affine_then_sum() {
        let mut r = rng::stream(21, &[]);
        let q = ScaleProjections::new(4, 3, 2, &mut r);
        let inputs: Vec<(usize, Vec<f64>)> = (2..=4).map(|s| (s, (0..3).map(|_| r.random_range(-1.0..1.0)).collect())).collect();
        let out = multi_scale_fuse(&inputs, &q).unwrap();
        let mut expect = [0.0; 2];
        for (s, v) in &inputs {
            let m = &q.maps[s - 2];
            for (o, e) in expect.iter_mut().enumerate() {
                *e += m.bias.data[o] + (0..3).map(|j| m.weight.data[o * 3 + j] * v[j]).sum::<f64>();
            }
        }
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_backward_matches_finite_differences() {
        let mut r = rng::stream(4, &[]);
        for mode in [FusionMode::Elementwise, FusionMode::ScalarAttention] {
            let rv: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
            let rk: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..mode.fused_dim(5)).map(|_| r.random_range(-1.0..1.0)).collect();
            let f = |a: &[f64], b: &[f64]| tensor::dot(&kv_relation_scale(a, b, mode).unwrap(), &w);
            let (drv, drk) = kv_relation_scale_backward(&rv, &rk, &w, mode);
            for i in 0..5 {
                let mut p = rv.clone();
                p[i] += 1e-6;
                let mut m = rv.clone();
                m[i] -= 1e-6;
                assert!(((f(&p, &rk) - f(&m, &rk)) / 2e-6 - drv[i]).abs() < 1e-8);
                let mut p = rk.clone();
                p[i] += 1e-6;
                let mut m = rk.clone();
                m[i] -= 1e-6;
                assert!(((f(&rv, &p) - f(&rv, &m)) / 2e-6 - drk[i]).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn elementwise_is_linear_in_each_argument(
            pair in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..32),
            a in -4.0f64..4.0,
        ) {
            let rv: Vec<f64> = pair.iter().map(|p| p.0).collect();
            let rk: Vec<f64> = pair.iter().map(|p| p.1).collect();
            let scaled: Vec<f64> = rv.iter().map(|v| a * v).collect();
            let base = kv_relation_scale(&rv, &rk, FusionMode::Elementwise).unwrap();
            let lhs = kv_relation_scale(&scaled, &rk, FusionMode::Elementwise).unwrap();
            for (x, y) in lhs.iter().zip(&base) {
                prop_assert!((x - a * y).abs() < 1e-9);
            }
        }

        #[test]
        fn elementwise_support(
            pair in prop::collection::vec((prop_oneof![Just(0.0), -3.0f64..3.0], prop_oneof![Just(0.0), -3.0f64..3.0]), 1..32),
        ) {
            let rv: Vec<f64> = pair.iter().map(|p| p.0).collect();
            let rk: Vec<f64> = pair.iter().map(|p| p.1).collect();
            let out = kv_relation_scale(&rv, &rk, FusionMode::Elementwise).unwrap();
            for i in 0..out.len() {
                if rv[i] == 0.0 || rk[i] == 0.0 {
                    prop_assert_eq!(out[i], 0.0);
                }
            }
        }
    }
}
