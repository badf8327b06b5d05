//! Paired simulator/real peg-transfer style trial generator with
//! controllable domain shift.
//!
//! A trial is a list of transfer cycles. Each cycle moves one object from a
//! source peg on one side of the board to a target peg on the other side
//! using seven motion primitives (one per gesture class). The script is
//! domain independent; [`generate_trial`] renders it into either domain,
//! applying the [`ShiftConfig`] geometry and sensor changes to the real
//! domain only.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ArmState, Domain, KinematicFrame, Segment, VisualFeature, NUM_GESTURES};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

pub const GESTURE_NAMES: [&str; NUM_GESTURES] = [
    "approach", "grasp", "lift", "transfer", "exchange", "place", "release",
];

pub const APPROACH: usize = 0;
pub const GRASP: usize = 1;
pub const LIFT: usize = 2;
pub const TRANSFER: usize = 3;
pub const EXCHANGE: usize = 4;
pub const PLACE: usize = 5;
pub const RELEASE: usize = 6;

pub const BOARD_CENTER: [f64; 3] = [0.5, 0.0, 0.0];
const HOME: [[f64; 3]; 2] = [[0.40, 0.18, 0.16], [0.40, -0.18, 0.16]];
const PEG_X: [f64; 3] = [0.44, 0.50, 0.56];
const PEG_Y: f64 = 0.08;
const GRIP_OPEN: f64 = 100.0;
const GRIP_CLOSED: f64 = 30.0;
const SCENE_DIM: usize = 19;

/// Real-domain visual feature corruption `v' = A v + b + noise`.
///
/// `A = I + gain · G` and `b = bias · h` where `G` (entries N(0, 1/dim)) and
/// `h` (entries N(0, 1)) are drawn once from `seed` for a given feature
/// dimension, so a config fully determines the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisShift {
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl VisShift {
    pub const IDENTITY: VisShift = VisShift {
        gain: 0.0,
        bias: 0.0,
        noise_sigma: 0.0,
        seed: 0,
    };

    pub fn is_identity(&self) -> bool {
        self.gain == 0.0 && self.bias == 0.0 && self.noise_sigma == 0.0
    }

    /// The affine map `(A, b)` for features of dimension `dim`.
    pub fn materialize(&self, dim: usize) -> (Tensor, Vec<f64>) {
        let mut r = rng::stream(self.seed, &[rng::label_id("vis-shift"), dim as u64]);
        let mut a = Tensor::zeros(&[dim, dim]);
        let sd = 1.0 / (dim as f64).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                let g: f64 = StandardNormal.sample(&mut r);
                a.data[i * dim + j] = if i == j { 1.0 } else { 0.0 } + self.gain * sd * g;
            }
        }
        let b = (0..dim)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut r);
                self.bias * g
            })
            .collect::<Vec<f64>>();
        (a, b)
    }
}

/// Simulator-to-real shift applied when rendering the real domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    /// Added to every real-domain position.
    pub translation_offset: [f64; 3],
    /// Scales every real-domain position about the board center.
    pub scale_factor: f64,
    /// In-plane rotation (radians) of the board about its center: pegs and
    /// the hand-over point move, robot home poses do not. Wrist yaw follows
    /// the board orientation.
    pub tilt_angle: f64,
    /// Per-axis Gaussian noise on real-domain positions.
    pub kin_noise_sigma: f64,
    pub vis_shift: VisShift,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig::IDENTITY
    }
}

impl ShiftConfig {
    pub const IDENTITY: ShiftConfig = ShiftConfig {
        translation_offset: [0.0; 3],
        scale_factor: 1.0,
        tilt_angle: 0.0,
        kin_noise_sigma: 0.0,
        vis_shift: VisShift::IDENTITY,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor > 0.0) {
            return Err(Error::Config(format!(
                "scale_factor must be > 0, got {}",
                self.scale_factor
            )));
        }
        if !(self.kin_noise_sigma >= 0.0) || !(self.vis_shift.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 5] = ["none", "translation", "scale", "tilt", "combined"];

/// Named shift configurations.
///
/// * `none`: identity.
/// * `translation`: offset (0.2, -0.1, 0.05).
/// * `scale`: factor 1.3 about the board center.
/// * `tilt`: board rotated 0.15 rad.
/// * `combined`: all of the above plus visual feature corruption.
pub fn preset(name: &str) -> Result<ShiftConfig> {
    let translation = [0.2, -0.1, 0.05];
    let cfg = match name {
        "none" => ShiftConfig::IDENTITY,
        "translation" => ShiftConfig {
            translation_offset: translation,
            ..ShiftConfig::IDENTITY
        },
        "scale" => ShiftConfig {
            scale_factor: 1.3,
            ..ShiftConfig::IDENTITY
        },
        "tilt" => ShiftConfig {
            tilt_angle: 0.15,
            ..ShiftConfig::IDENTITY
        },
        "combined" => ShiftConfig {
            translation_offset: translation,
            scale_factor: 1.3,
            tilt_angle: 0.15,
            kin_noise_sigma: 0.02,
            vis_shift: VisShift {
                gain: 0.3,
                bias: 0.3,
                noise_sigma: 0.2,
                seed: 17,
            },
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Operator hesitation: a back-and-forth wobble superimposed on the
/// active arm(s) for the whole primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hesitation {
    pub direction: [f64; 3],
    pub amplitude: f64,
    /// Oscillation cycles over the primitive.
    pub cycles: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Arm that picks the object (0 left, 1 right); the other arm receives it.
    pub mover: usize,
    pub source_peg: usize,
    pub target_peg: usize,
    pub hesitation: Option<Hesitation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub gesture: usize,
    pub duration: usize,
    pub params: MotionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub steps: Vec<ScriptStep>,
}

impl GestureScript {
    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            if s.gesture >= NUM_GESTURES {
                return Err(Error::UnknownGesture(s.gesture as i64));
            }
            if s.duration < 2 {
                return Err(Error::SegmentTooShort(s.duration));
            }
            if s.params.mover > 1 || s.params.source_peg >= PEG_X.len() || s.params.target_peg >= PEG_X.len() {
                return Err(Error::Config("motion params out of range".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub visual_dim: usize,
    pub cycles_per_trial: usize,
    pub min_duration: usize,
    pub max_duration: usize,
    pub hesitation_prob: f64,
    pub hesitation_amplitude: f64,
    /// Seed of the fixed scene-to-feature projection shared by both domains.
    pub scene_seed: u64,
    /// Wrist roll (rad) applied while carrying the object to and from the
    /// handover point.
    pub handover_roll: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            visual_dim: 16,
            cycles_per_trial: 2,
            min_duration: 4,
            max_duration: 7,
            hesitation_prob: 0.8,
            hesitation_amplitude: 0.06,
            scene_seed: 2021,
            handover_roll: 0.2,
        }
    }
}

/// Canonical transfer script with randomized pegs, durations and hesitation.
pub fn random_script(cfg: &GeneratorConfig, seed: u64) -> GestureScript {
    let mut r = rng::stream(seed, &[rng::label_id("script")]);
    let mut mover = r.random_range(0..2usize);
    let mut source_peg = r.random_range(0..PEG_X.len());
    let mut steps = Vec::with_capacity(cfg.cycles_per_trial * NUM_GESTURES);
    for _ in 0..cfg.cycles_per_trial {
        let target_peg = r.random_range(0..PEG_X.len());
        for gesture in 0..NUM_GESTURES {
            let duration = r.random_range(cfg.min_duration.max(2)..=cfg.max_duration.max(cfg.min_duration.max(2)));
            let hesitation = if r.random_bool(cfg.hesitation_prob.clamp(0.0, 1.0)) {
                Some(Hesitation {
                    direction: random_unit(&mut r),
                    amplitude: cfg.hesitation_amplitude * r.random_range(0.7..1.3),
                    cycles: r.random_range(1.5..3.0),
                    phase: r.random_range(0.0..std::f64::consts::TAU),
                })
            } else {
                None
            };
            steps.push(ScriptStep {
                gesture,
                duration,
                params: MotionParams {
                    mover,
                    source_peg,
                    target_peg,
                    hesitation,
                },
            });
        }
        // The object now sits on the other side; the next cycle brings it back.
        mover = 1 - mover;
        source_peg = target_peg;
    }
    GestureScript { steps }
}

fn random_unit(r: &mut Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(r),
            StandardNormal.sample(r),
            StandardNormal.sample(r),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Cubic ease-in/out on `[0, 1]`.
pub fn ease(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn lerp3(a: [f64; 3], b: [f64; 3], w: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w, a[2] + (b[2] - a[2]) * w]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Side of the board an arm works on: +1 left (positive y), -1 right.
fn side(arm: usize) -> f64 {
    if arm == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Board {
    rotation: f64,
}

impl Board {
    fn place(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.rotation.sin_cos();
        let dx = p[0] - BOARD_CENTER[0];
        let dy = p[1] - BOARD_CENTER[1];
        [BOARD_CENTER[0] + c * dx - s * dy, BOARD_CENTER[1] + s * dx + c * dy, p[2]]
    }

    fn peg(&self, arm_side: usize, idx: usize) -> [f64; 3] {
        self.place([PEG_X[idx], side(arm_side) * PEG_Y, 0.0])
    }

    fn handover(&self, arm: usize) -> [f64; 3] {
        self.place([BOARD_CENTER[0], side(arm) * 0.025, 0.12])
    }
}

#[derive(Debug, Clone, Copy)]
struct SceneFrame {
    arms: [ArmState; 2],
    object: [f64; 3],
    held: [bool; 2],
    source: [f64; 3],
    target: [f64; 3],
}

/// Renders a script into segments for one domain. Identical `(script,
/// seed)` renders identical simulator trials; the real trial differs only
/// through `shift`.
pub fn generate_trial(
    trial_id: &str,
    script: &GestureScript,
    domain: Domain,
    shift: &ShiftConfig,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<Vec<Segment>> {
    script.validate()?;
    shift.validate()?;
    let real = domain == Domain::Real;
    let board = Board {
        rotation: if real { shift.tilt_angle } else { 0.0 },
    };

    // Per-trial operator/robot idiosyncrasies, shared by both domains.
    let mut r = rng::stream(seed, &[rng::label_id("trial-style")]);
    let grip_closed = [GRIP_CLOSED + r.random_range(0.0..8.0), GRIP_CLOSED + r.random_range(0.0..8.0)];
    let base_orientation = [
        [0.3 + r.random_range(-0.05..0.05), -0.6 + r.random_range(-0.05..0.05), r.random_range(-0.05..0.05)],
        [-0.3 + r.random_range(-0.05..0.05), -0.6 + r.random_range(-0.05..0.05), r.random_range(-0.05..0.05)],
    ];

    let mut scene_frames: Vec<(usize, SceneFrame)> = Vec::new();
    let mut pos = HOME;
    let mut grip = [GRIP_OPEN, GRIP_OPEN];
    let mut roll = [0.0, 0.0];
    let mut object = [0.0; 3];
    let mut first = true;

    for step in &script.steps {
        let p = step.params;
        let a = p.mover;
        let b = 1 - a;
        let source = board.peg(a, p.source_peg);
        let target = board.peg(b, p.target_peg);
        if first || step.gesture == APPROACH {
            object = add3(source, [0.0, 0.0, 0.03]);
            first = false;
        }

        let start_pos = pos;
        let start_grip = grip;
        let start_roll = roll;
        let mut end_pos = pos;
        let mut end_grip = grip;
        let mut end_roll = roll;
        // Arms driven by this primitive (used for hesitation).
        let mut active = [false, false];
        match step.gesture {
            APPROACH => {
                end_pos[a] = add3(source, [0.0, 0.0, 0.04]);
                end_grip[a] = GRIP_OPEN;
                active[a] = true;
            }
            GRASP => {
                end_grip[a] = grip_closed[a];
                active[a] = true;
            }
            LIFT => {
                end_pos[a] = add3(pos[a], [0.0, 0.0, 0.07]);
                active[a] = true;
            }
            TRANSFER => {
                end_pos[a] = board.handover(a);
                end_roll[a] = side(a) * cfg.handover_roll;
                active[a] = true;
            }
            EXCHANGE => {
                end_pos[b] = board.handover(b);
                end_grip[b] = grip_closed[b];
                end_grip[a] = GRIP_OPEN;
                end_roll[b] = -side(b) * cfg.handover_roll;
                end_roll[a] = 0.0;
                active[b] = true;
            }
            PLACE => {
                end_pos[b] = add3(target, [0.0, 0.0, 0.08]);
                end_roll[b] = 0.0;
                active[b] = true;
            }
            RELEASE => {
                end_grip[b] = GRIP_OPEN;
                active[b] = true;
            }
            _ => unreachable!("validated"),
        }

        let d = step.duration;
        for t in 0..d {
            let u = (t + 1) as f64 / d as f64;
            let w = ease(u);
            let mut arms = [ArmState {
                position: [0.0; 3],
                orientation: [0.0; 3],
                gripper: 0.0,
            }; 2];
            for arm in 0..2 {
                let mut position = lerp3(start_pos[arm], end_pos[arm], w);
                if let (true, Some(h)) = (active[arm], p.hesitation) {
                    let osc = h.amplitude * (std::f64::consts::TAU * h.cycles * u + h.phase).sin()
                        * (1.0 - (2.0 * u - 1.0).powi(4));
                    position = add3(position, [h.direction[0] * osc, h.direction[1] * osc, h.direction[2] * osc]);
                }
                let r_roll = start_roll[arm] + (end_roll[arm] - start_roll[arm]) * w;
                let o = base_orientation[arm];
                arms[arm] = ArmState {
                    position,
                    orientation: [o[0] + board.rotation, o[1], o[2] + r_roll],
                    gripper: start_grip[arm] + (end_grip[arm] - start_grip[arm]) * w,
                };
            }
            // The object follows whichever gripper holds it.
            let holder = match step.gesture {
                LIFT | TRANSFER => Some(a),
                EXCHANGE if u < 1.0 => Some(a),
                EXCHANGE | PLACE => Some(b),
                GRASP if u >= 1.0 => Some(a),
                _ => None,
            };
            let held = [holder == Some(0), holder == Some(1)];
            if let Some(h) = holder {
                object = add3(arms[h].position, [0.0, 0.0, -0.01]);
            } else if step.gesture == RELEASE {
                object = add3(target, [0.0, 0.0, 0.03]);
            }
            scene_frames.push((
                step.gesture,
                SceneFrame {
                    arms,
                    object,
                    held,
                    source,
                    target,
                },
            ));
        }
        pos = end_pos;
        grip = end_grip;
        roll = end_roll;
    }

    // Whole-scene geometric transform and sensor noise for the real domain.
    let transform = |p: [f64; 3]| -> [f64; 3] {
        if !real {
            return p;
        }
        let mut q = [0.0; 3];
        for i in 0..3 {
            q[i] = BOARD_CENTER[i] + shift.scale_factor * (p[i] - BOARD_CENTER[i]) + shift.translation_offset[i];
        }
        q
    };
    let mut noise_rng = rng::stream(seed, &[rng::label_id("kin-noise")]);
    let kin_noise = Normal::new(0.0, shift.kin_noise_sigma.max(0.0)).expect("sigma >= 0");
    let projection = scene_projection(cfg.visual_dim, cfg.scene_seed);
    let vis = if real && !shift.vis_shift.is_identity() {
        Some(shift.vis_shift.materialize(cfg.visual_dim))
    } else {
        None
    };
    let mut vis_rng = rng::stream(seed, &[rng::label_id("vis-noise")]);
    let vis_noise = Normal::new(0.0, shift.vis_shift.noise_sigma.max(0.0)).expect("sigma >= 0");

    let mut labels = Vec::with_capacity(scene_frames.len());
    let mut kin = Vec::with_capacity(scene_frames.len());
    let mut visual = Vec::with_capacity(scene_frames.len());
    for (gesture, mut sf) in scene_frames {
        // The camera sees the physical scene; offset and scale act on the
        // kinematic frame only.
        let mut v = render_features(&projection, &sf);
        for arm in sf.arms.iter_mut() {
            arm.position = transform(arm.position);
        }
        if let Some((a, b)) = &vis {
            let mut out = b.clone();
            crate::tensor::matvec_acc(a, &v, &mut out);
            for o in out.iter_mut() {
                *o += vis_noise.sample(&mut vis_rng);
            }
            v = out;
        }

        let mut frame = KinematicFrame {
            left: sf.arms[0],
            right: sf.arms[1],
        };
        if real && shift.kin_noise_sigma > 0.0 {
            for arm in [&mut frame.left, &mut frame.right] {
                for c in arm.position.iter_mut() {
                    *c += kin_noise.sample(&mut noise_rng);
                }
            }
        }
        labels.push(gesture);
        kin.push(frame);
        visual.push(VisualFeature(v));
    }

    let mut segments = Vec::new();
    let mut start = 0usize;
    for step in &script.steps {
        let end = start + step.duration;
        segments.push(Segment::new(
            trial_id,
            start as i64,
            Some(step.gesture),
            domain,
            kin[start..end].to_vec(),
            visual[start..end].to_vec(),
        )?);
        start = end;
    }
    debug_assert_eq!(start, labels.len());
    Ok(segments)
}

/// Fixed random linear map from scene state to visual features.
fn scene_projection(dim: usize, seed: u64) -> Tensor {
    let mut r = rng::stream(seed, &[rng::label_id("scene-projection"), dim as u64]);
    let sd = 1.0 / (SCENE_DIM as f64).sqrt();
    let mut t = Tensor::zeros(&[dim, SCENE_DIM]);
    for x in t.data.iter_mut() {
        let g: f64 = StandardNormal.sample(&mut r);
        *x = sd * g;
    }
    t
}

fn render_features(projection: &Tensor, sf: &SceneFrame) -> Vec<f64> {
    let rel = |p: [f64; 3]| [10.0 * (p[0] - BOARD_CENTER[0]), 10.0 * (p[1] - BOARD_CENTER[1]), 10.0 * (p[2] - BOARD_CENTER[2])];
    let mut state = Vec::with_capacity(SCENE_DIM);
    for arm in &sf.arms {
        state.extend_from_slice(&rel(arm.position));
    }
    for arm in &sf.arms {
        state.push((arm.gripper - GRIP_CLOSED) / (GRIP_OPEN - GRIP_CLOSED));
    }
    state.extend_from_slice(&rel(sf.object));
    state.push(if sf.held[0] { 1.0 } else { 0.0 });
    state.push(if sf.held[1] { 1.0 } else { 0.0 });
    state.extend_from_slice(&rel(sf.source));
    state.extend_from_slice(&rel(sf.target));
    debug_assert_eq!(state.len(), SCENE_DIM);
    let mut out = vec![0.0; projection.rows()];
    crate::tensor::matvec_acc(projection, &state, &mut out);
    out
}

/// A paired dataset: trial `i` of both domains is rendered from the same
/// script and seed.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub simulator: Vec<Segment>,
    pub real: Vec<Segment>,
}

pub fn trial_name(i: usize) -> String {
    format!("T{i:03}")
}

pub fn generate_dataset(
    n_trials: usize,
    shift: &ShiftConfig,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<PairedDataset> {
    let mut simulator = Vec::new();
    let mut real = Vec::new();
    for i in 0..n_trials {
        let trial_seed = rng::derive_seed(seed, &[rng::label_id("trial"), i as u64]);
        let script = random_script(cfg, trial_seed);
        let id = trial_name(i);
        simulator.extend(generate_trial(&id, &script, Domain::Simulator, shift, cfg, trial_seed)?);
        real.extend(generate_trial(&id, &script, Domain::Real, shift, cfg, trial_seed)?);
    }
    Ok(PairedDataset { simulator, real })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GeneratorConfig {
        GeneratorConfig::default()
    }

    fn pair(shift: &ShiftConfig, seed: u64) -> (Vec<Segment>, Vec<Segment>) {
        let script = random_script(&cfg(), seed);
        (
            generate_trial("t", &script, Domain::Simulator, shift, &cfg(), seed).unwrap(),
            generate_trial("t", &script, Domain::Real, shift, &cfg(), seed).unwrap(),
        )
    }

    #[test]
    fn identity_shift_renders_identical_domains() {
        let (sim, real) = pair(&preset("none").unwrap(), 5);
        for (s, r) in sim.iter().zip(&real) {
            assert_eq!(s.kinematics, r.kinematics);
            assert_eq!(s.visual, r.visual);
            assert_eq!(s.gesture, r.gesture);
        }
    }

    #[test]
    fn translation_shift_is_exact_offset() {
        let shift = preset("translation").unwrap();
        let (sim, real) = pair(&shift, 9);
        for (s, r) in sim.iter().zip(&real) {
            for (fs, fr) in s.kinematics.iter().zip(&r.kinematics) {
                for (a, b) in fs.arms().iter().zip(fr.arms()) {
                    for i in 0..3 {
                        assert!((b.position[i] - a.position[i] - shift.translation_offset[i]).abs() < 1e-12);
                    }
                    assert_eq!(a.orientation, b.orientation);
                    assert_eq!(a.gripper, b.gripper);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let shift = preset("combined").unwrap();
        let a = generate_dataset(3, &shift, &cfg(), 4).unwrap();
        let b = generate_dataset(3, &shift, &cfg(), 4).unwrap();
        assert_eq!(a.simulator, b.simulator);
        assert_eq!(a.real, b.real);
    }

    #[test]
    fn script_rejects_bad_gesture() {
        let mut script = random_script(&cfg(), 1);
        script.steps[0].gesture = 9;
        let err = generate_trial("t", &script, Domain::Simulator, &ShiftConfig::IDENTITY, &cfg(), 1);
        assert!(matches!(err, Err(Error::UnknownGesture(9))));
    }

    #[test]
    fn presets_are_documented() {
        assert_eq!(preset("none").unwrap(), ShiftConfig::IDENTITY);
        let t = preset("translation").unwrap();
        assert_eq!(t.translation_offset, [0.2, -0.1, 0.05]);
        assert_eq!(t.scale_factor, 1.0);
        let c = preset("combined").unwrap();
        assert_eq!(c.scale_factor, 1.3);
        assert_eq!(c.tilt_angle, 0.15);
        assert!(!c.vis_shift.is_identity());
        let err = preset("bogus").unwrap_err().to_string();
        assert!(err.contains("translation") && err.contains("combined"));
    }

    #[test]
    fn every_class_appears() {
        let d = generate_dataset(5, &ShiftConfig::IDENTITY, &cfg(), 0).unwrap();
        assert!(d.simulator.len() >= 70);
        let mut seen = [false; NUM_GESTURES];
        for s in &d.simulator {
            seen[s.gesture.unwrap()] = true;
        }
        assert!(seen.iter().all(|&x| x));
    }
}
