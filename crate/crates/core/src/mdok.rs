//! Motion-direction kinematic preprocessing: end-effector positions are
//! replaced by unit relative direction vectors between consecutive frames,
//! which removes any dependence on absolute placement and on path length.

use serde::{Deserialize, Serialize};

use crate::data::{ArmState, Segment, KIN_DIM};
use crate::error::{Error, Result};

/// Below this norm a step counts as stationary.
pub const DIRECTION_EPS: f64 = 1e-8;
pub const GRIP_MIN: f64 = 30.0;
pub const GRIP_MAX: f64 = 100.0;

pub fn relative_direction(p_t: [f64; 3], p_next: [f64; 3]) -> [f64; 3] {
    [p_next[0] - p_t[0], p_next[1] - p_t[1], p_next[2] - p_t[2]]
}

/// `d / |d|`, or the zero vector when `|d| < DIRECTION_EPS`.
pub fn unit_normalize(d: [f64; 3]) -> [f64; 3] {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if n < DIRECTION_EPS {
        [0.0; 3]
    } else {
        [d[0] / n, d[1] / n, d[2] / n]
    }
}

/// Maps the raw 30..100 gripper reading onto [0, 1], clamping outliers.
pub fn normalize_gripper(raw: f64) -> f64 {
    ((raw - GRIP_MIN) / (GRIP_MAX - GRIP_MIN)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdokArm {
    pub direction: [f64; 3],
    pub orientation: [f64; 3],
    pub gripper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdokFrame {
    pub left: MdokArm,
    pub right: MdokArm,
}

impl MdokFrame {
    pub fn to_values(&self) -> [f64; KIN_DIM] {
        let mut out = [0.0; KIN_DIM];
        for (chunk, arm) in out.chunks_exact_mut(7).zip([&self.left, &self.right]) {
            chunk[..3].copy_from_slice(&arm.direction);
            chunk[3..6].copy_from_slice(&arm.orientation);
            chunk[6] = arm.gripper;
        }
        out
    }
}

fn arm_step(now: &ArmState, next: &ArmState) -> MdokArm {
    MdokArm {
        direction: unit_normalize(relative_direction(now.position, next.position)),
        orientation: now.orientation,
        gripper: normalize_gripper(now.gripper),
    }
}

/// One frame per consecutive pair: frame `t` carries the direction
/// `t -> t+1` with the orientation and gripper of frame `t`. Output length
/// is `T - 1`.
pub fn transform_segment(segment: &Segment) -> Result<Vec<MdokFrame>> {
    let k = &segment.kinematics;
    if k.len() < 2 {
        return Err(Error::SegmentTooShort(k.len()));
    }
    Ok(k.windows(2)
        .map(|w| MdokFrame {
            left: arm_step(&w[0].left, &w[1].left),
            right: arm_step(&w[0].right, &w[1].right),
        })
        .collect())
}

/// How kinematics are presented to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KinematicEncoding {
    /// Absolute positions (the ablation baseline).
    Position,
    /// Unit relative direction vectors.
    Direction,
}

/// Encoder-ready kinematic and visual sequences, both of length `T - 1`.
/// The last frame is dropped in both encodings so the two line up.
pub fn encode_segment(segment: &Segment, encoding: KinematicEncoding) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let kin: Vec<Vec<f64>> = match encoding {
        KinematicEncoding::Direction => transform_segment(segment)?
            .iter()
            .map(|f| f.to_values().to_vec())
            .collect(),
        KinematicEncoding::Position => {
            if segment.len() < 2 {
                return Err(Error::SegmentTooShort(segment.len()));
            }
            segment.kinematics[..segment.len() - 1]
                .iter()
                .map(|f| {
                    let mut v = f.to_values();
                    v[6] = normalize_gripper(v[6]);
                    v[13] = normalize_gripper(v[13]);
                    v.to_vec()
                })
                .collect()
        }
    };
    let vis = segment.visual[..segment.len() - 1]
        .iter()
        .map(|v| v.0.clone())
        .collect();
    Ok((kin, vis))
}
