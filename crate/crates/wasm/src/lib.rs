//! Browser bindings. Each exported function takes plain values and returns
//! a JSON string; the `*_json` Rust functions behind them are usable natively.

use gesture_uda::data::Domain;
use gesture_uda::mdok::{encode_segment, KinematicEncoding};
use gesture_uda::metrics::report_from_predictions;
use gesture_uda::synth::{self, GeneratorConfig, GESTURE_NAMES};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn one_trial(preset: &str, seed: u64) -> gesture_uda::Result<(Vec<gesture_uda::data::Segment>, Vec<gesture_uda::data::Segment>)> {
    let shift = synth::preset(preset)?;
    let cfg = GeneratorConfig::default();
    let script = synth::random_script(&cfg, seed);
    let sim = synth::generate_trial("demo", &script, Domain::Simulator, &shift, &cfg, seed)?;
    let real = synth::generate_trial("demo", &script, Domain::Real, &shift, &cfg, seed)?;
    Ok((sim, real))
}

/// Left/right arm paths of one trial in both domains, with per-frame labels.
pub fn trajectory_json(preset: &str, seed: u64) -> Result<String, String> {
    let (sim, real) = one_trial(preset, seed).map_err(|e| e.to_string())?;
    let path = |segs: &[gesture_uda::data::Segment], arm: usize| -> Vec<[f64; 3]> {
        segs.iter()
            .flat_map(|s| s.kinematics.iter().map(move |f| f.arms()[arm].position))
            .collect()
    };
    let labels: Vec<usize> = sim
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.gesture.unwrap_or(0), s.len()))
        .collect();
    Ok(json!({
        "gestures": GESTURE_NAMES,
        "labels": labels,
        "simulator": { "left": path(&sim, 0), "right": path(&sim, 1) },
        "real": { "left": path(&real, 0), "right": path(&real, 1) },
    })
    .to_string())
}

/// Per-segment largest absolute difference between corresponding simulator
/// and real frames, for raw positions and for direction encodings.
pub fn invariance_json(preset: &str, seed: u64) -> Result<String, String> {
    let (sim, real) = one_trial(preset, seed).map_err(|e| e.to_string())?;
    let gap = |enc: KinematicEncoding, s: &gesture_uda::data::Segment, r: &gesture_uda::data::Segment| -> Result<f64, String> {
        let (a, _) = encode_segment(s, enc).map_err(|e| e.to_string())?;
        let (b, _) = encode_segment(r, enc).map_err(|e| e.to_string())?;
        Ok(a.iter()
            .zip(&b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max))
    };
    let mut rows = Vec::new();
    for (s, r) in sim.iter().zip(&real) {
        rows.push(json!({
            "gesture": GESTURE_NAMES[s.gesture.unwrap_or(0)],
            "frames": s.len(),
            "position_gap": gap(KinematicEncoding::Position, s, r)?,
            "direction_gap": gap(KinematicEncoding::Direction, s, r)?,
        }));
    }
    Ok(json!({ "preset": preset, "segments": rows }).to_string())
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| format!("not a class index: `{t}`")))
        .collect()
}

/// Macro metrics and confusion matrix for comma-separated label lists.
pub fn metrics_json(labels: &str, predictions: &str) -> Result<String, String> {
    let y = parse_list(labels)?;
    let p = parse_list(predictions)?;
    let r = report_from_predictions(&y, &p, gesture_uda::data::NUM_GESTURES).map_err(|e| e.to_string())?;
    r.to_json().map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn trajectory(preset: &str, seed: u32) -> Result<String, JsError> {
    trajectory_json(preset, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn invariance(preset: &str, seed: u32) -> Result<String, JsError> {
    invariance_json(preset, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn metrics(labels: &str, predictions: &str) -> Result<String, JsError> {
    metrics_json(labels, predictions).map_err(|e| JsError::new(&e))
}
