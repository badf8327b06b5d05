//! Segment data model, CSV table ingestion, trial-level folds and
//! balanced two-domain batch sampling.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const NUM_GESTURES: usize = 7;
pub const KIN_DIM: usize = 14;
pub const ARM_DIM: usize = 7;

/// Kinematic table columns after `trial_id,frame`.
pub const KIN_COLUMNS: [&str; KIN_DIM] = [
    "l_x", "l_y", "l_z", "l_yaw", "l_pitch", "l_roll", "l_grip", "r_x", "r_y", "r_z", "r_yaw",
    "r_pitch", "r_roll", "r_grip",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub position: [f64; 3],
    /// (yaw, pitch, roll) in radians.
    pub orientation: [f64; 3],
    /// Raw gripper reading, nominally 30..=100.
    pub gripper: f64,
}

impl ArmState {
    fn from_slice(v: &[f64]) -> Self {
        ArmState {
            position: [v[0], v[1], v[2]],
            orientation: [v[3], v[4], v[5]],
            gripper: v[6],
        }
    }

    fn write_to(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(&self.position);
        out[3..6].copy_from_slice(&self.orientation);
        out[6] = self.gripper;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicFrame {
    pub left: ArmState,
    pub right: ArmState,
}

impl KinematicFrame {
    pub fn from_values(v: &[f64; KIN_DIM]) -> Self {
        KinematicFrame {
            left: ArmState::from_slice(&v[..ARM_DIM]),
            right: ArmState::from_slice(&v[ARM_DIM..]),
        }
    }

    pub fn to_values(&self) -> [f64; KIN_DIM] {
        let mut out = [0.0; KIN_DIM];
        self.left.write_to(&mut out[..ARM_DIM]);
        self.right.write_to(&mut out[ARM_DIM..]);
        out
    }

    pub fn arms(&self) -> [&ArmState; 2] {
        [&self.left, &self.right]
    }

    pub fn is_finite(&self) -> bool {
        self.to_values().iter().all(|v| v.is_finite())
    }
}

/// One frame's precomputed image embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualFeature(pub Vec<f64>);

impl VisualFeature {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "simulator")]
    Simulator,
    #[serde(rename = "real")]
    Real,
}

impl Domain {
    /// Domain label used by the discriminators: 0 simulator, 1 real.
    pub fn label(self) -> usize {
        match self {
            Domain::Simulator => 0,
            Domain::Real => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Simulator => "simulator",
            Domain::Real => "real",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simulator" | "sim" | "source" => Ok(Domain::Simulator),
            "real" | "target" => Ok(Domain::Real),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A run of consecutive frames sharing one gesture label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub trial_id: String,
    /// Half-open frame index range within the trial.
    pub frame_range: (i64, i64),
    pub gesture: Option<usize>,
    pub domain: Domain,
    pub kinematics: Vec<KinematicFrame>,
    pub visual: Vec<VisualFeature>,
}

impl Segment {
    pub fn new(
        trial_id: impl Into<String>,
        start_frame: i64,
        gesture: Option<usize>,
        domain: Domain,
        kinematics: Vec<KinematicFrame>,
        visual: Vec<VisualFeature>,
    ) -> Result<Self> {
        let trial_id = trial_id.into();
        if kinematics.len() < 2 {
            return Err(Error::SegmentTooShort(kinematics.len()));
        }
        if kinematics.len() != visual.len() {
            return Err(Error::Ingest {
                trial: trial_id,
                frame: start_frame,
                reason: format!(
                    "{} kinematic frames vs {} visual frames",
                    kinematics.len(),
                    visual.len()
                ),
            });
        }
        if let Some(g) = gesture {
            if g >= NUM_GESTURES {
                return Err(Error::UnknownGesture(g as i64));
            }
        }
        let vis_dim = visual[0].dim();
        for (i, (k, v)) in kinematics.iter().zip(&visual).enumerate() {
            let frame = start_frame + i as i64;
            if !k.is_finite() {
                return Err(Error::Ingest {
                    trial: trial_id,
                    frame,
                    reason: "non-finite kinematic value".into(),
                });
            }
            if v.dim() != vis_dim || v.0.iter().any(|x| !x.is_finite()) {
                return Err(Error::Ingest {
                    trial: trial_id,
                    frame,
                    reason: "visual feature has inconsistent dimension or non-finite entries".into(),
                });
            }
        }
        let end = start_frame + kinematics.len() as i64;
        Ok(Segment {
            trial_id,
            frame_range: (start_frame, end),
            gesture,
            domain,
            kinematics,
            visual,
        })
    }

    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.domain, self.trial_id, self.frame_range.0)
    }

    pub fn len(&self) -> usize {
        self.kinematics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinematics.is_empty()
    }

    pub fn visual_dim(&self) -> usize {
        self.visual[0].dim()
    }

    /// Copy with the gesture label removed, as seen by an unsupervised learner.
    pub fn unlabeled(&self) -> Segment {
        Segment {
            gesture: None,
            ..self.clone()
        }
    }
}

/// Maximal runs of identical labels: `(start, end_exclusive, label)`.
pub fn label_runs<T: PartialEq + Copy>(labels: &[T]) -> Vec<(usize, usize, T)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            runs.push((start, i, labels[start]));
            start = i;
        }
    }
    runs
}

struct TableRow {
    trial: String,
    frame: i64,
    values: Vec<f64>,
}

fn read_table<R: Read>(reader: R, name: &str, width: Option<usize>) -> Result<Vec<TableRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let trial = rec.get(0).unwrap_or_default().to_string();
        let frame: i64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Ingest {
                trial: trial.clone(),
                frame: -1,
                reason: format!("{name} table: unparseable frame index"),
            })?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Ingest {
                trial: trial.clone(),
                frame,
                reason: format!("{name} table: {e}"),
            })?;
        if let Some(w) = width {
            if values.len() != w {
                return Err(Error::Ingest {
                    trial,
                    frame,
                    reason: format!("{name} table: expected {w} values, got {}", values.len()),
                });
            }
        }
        rows.push(TableRow {
            trial,
            frame,
            values,
        });
    }
    Ok(rows)
}

type FrameMap = HashMap<(String, i64), Vec<f64>>;

fn index_rows(rows: Vec<TableRow>, name: &str) -> Result<FrameMap> {
    let mut map = HashMap::with_capacity(rows.len());
    for r in rows {
        let key = (r.trial, r.frame);
        if map.contains_key(&key) {
            return Err(Error::Ingest {
                trial: key.0,
                frame: key.1,
                reason: format!("duplicate row in {name} table"),
            });
        }
        map.insert(key, r.values);
    }
    Ok(map)
}

/// Builds segments from the three aligned tables of one domain.
///
/// Segments are maximal runs of identical gesture label within each trial,
/// in frame order. Single-frame runs cannot be represented and are dropped
/// with a warning.
pub fn load_trials<K: Read, F: Read, L: Read>(
    kinematics: K,
    features: F,
    labels: L,
    domain: Domain,
) -> Result<Vec<Segment>> {
    let kin = index_rows(read_table(kinematics, "kinematics", Some(KIN_DIM))?, "kinematics")?;
    let feat_rows = read_table(features, "features", None)?;
    let label_rows = read_table(labels, "labels", Some(1))?;

    let vis_dim = feat_rows.first().map(|r| r.values.len()).unwrap_or(0);
    for r in &feat_rows {
        if r.values.len() != vis_dim {
            return Err(Error::Ingest {
                trial: r.trial.clone(),
                frame: r.frame,
                reason: format!("feature width {} differs from {vis_dim}", r.values.len()),
            });
        }
    }
    let feats = index_rows(feat_rows, "features")?;

    // Trials in order of first appearance in the label table.
    let mut trial_order: Vec<String> = Vec::new();
    let mut per_trial: HashMap<String, Vec<(i64, usize)>> = HashMap::new();
    for r in label_rows {
        let raw = r.values[0];
        if raw.fract() != 0.0 || raw < 0.0 || raw >= NUM_GESTURES as f64 {
            return Err(Error::UnknownGesture(raw as i64));
        }
        let entry = per_trial.entry(r.trial.clone()).or_insert_with(|| {
            trial_order.push(r.trial.clone());
            Vec::new()
        });
        entry.push((r.frame, raw as usize));
    }

    let labeled = per_trial.values().map(Vec::len).sum::<usize>();
    if labeled != kin.len() || labeled != feats.len() {
        // Name the first frame present in one modality but not the others.
        let mut keys: Vec<&(String, i64)> = kin.keys().chain(feats.keys()).collect();
        keys.sort();
        for key in keys {
            let in_labels = per_trial
                .get(&key.0)
                .is_some_and(|v| v.iter().any(|(f, _)| *f == key.1));
            if !in_labels || !kin.contains_key(key) || !feats.contains_key(key) {
                return Err(Error::Ingest {
                    trial: key.0.clone(),
                    frame: key.1,
                    reason: "frame missing from one of the kinematics/features/labels tables"
                        .into(),
                });
            }
        }
    }

    let mut segments = Vec::new();
    for trial in &trial_order {
        let mut frames = per_trial.remove(trial).unwrap_or_default();
        frames.sort_by_key(|(f, _)| *f);
        let labels: Vec<usize> = frames.iter().map(|(_, g)| *g).collect();
        for (start, end, gesture) in label_runs(&labels) {
            let mut kf = Vec::with_capacity(end - start);
            let mut vf = Vec::with_capacity(end - start);
            for &(frame, _) in &frames[start..end] {
                let key = (trial.clone(), frame);
                let k = kin.get(&key).ok_or_else(|| Error::Ingest {
                    trial: trial.clone(),
                    frame,
                    reason: "no kinematics row for labeled frame".into(),
                })?;
                let v = feats.get(&key).ok_or_else(|| Error::Ingest {
                    trial: trial.clone(),
                    frame,
                    reason: "no feature row for labeled frame".into(),
                })?;
                let arr: [f64; KIN_DIM] = k.as_slice().try_into().expect("width checked");
                kf.push(KinematicFrame::from_values(&arr));
                vf.push(VisualFeature(v.clone()));
            }
            match Segment::new(trial.clone(), frames[start].0, Some(gesture), domain, kf, vf) {
                Ok(seg) => segments.push(seg),
                Err(Error::SegmentTooShort(_)) => {
                    log::warn!(
                        "dropping single-frame run in trial {trial} at frame {} (T >= 2 required)",
                        frames[start].0
                    );
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(segments)
}

/// Reads `kinematics.csv`, `features.csv` and `labels.csv` from `dir`.
pub fn load_dir(dir: &Path, domain: Domain) -> Result<Vec<Segment>> {
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::open(&p).map_err(|e| Error::io(p, e))
    };
    load_trials(
        open("kinematics.csv")?,
        open("features.csv")?,
        open("labels.csv")?,
        domain,
    )
}

/// Writes segments back out as the three tables `load_trials` reads.
pub fn write_tables<K: Write, F: Write, L: Write>(
    segments: &[Segment],
    kinematics: K,
    features: F,
    labels: L,
) -> Result<()> {
    let mut kw = csv::Writer::from_writer(kinematics);
    let mut fw = csv::Writer::from_writer(features);
    let mut lw = csv::Writer::from_writer(labels);

    let mut header = vec!["trial_id".to_string(), "frame".to_string()];
    header.extend(KIN_COLUMNS.iter().map(|s| s.to_string()));
    kw.write_record(&header)?;
    let vis_dim = segments.first().map(Segment::visual_dim).unwrap_or(0);
    let mut header = vec!["trial_id".to_string(), "frame".to_string()];
    header.extend((0..vis_dim).map(|i| format!("f{i}")));
    fw.write_record(&header)?;
    lw.write_record(["trial_id", "frame", "gesture"])?;

    for seg in segments {
        for (i, (k, v)) in seg.kinematics.iter().zip(&seg.visual).enumerate() {
            let frame = (seg.frame_range.0 + i as i64).to_string();
            let mut rec = vec![seg.trial_id.clone(), frame.clone()];
            rec.extend(k.to_values().iter().map(|x| x.to_string()));
            kw.write_record(&rec)?;
            let mut rec = vec![seg.trial_id.clone(), frame.clone()];
            rec.extend(v.0.iter().map(|x| x.to_string()));
            fw.write_record(&rec)?;
            let g = seg.gesture.map(|g| g.to_string()).unwrap_or_default();
            lw.write_record([seg.trial_id.as_str(), frame.as_str(), g.as_str()])?;
        }
    }
    kw.flush().map_err(|e| Error::io("kinematics table", e))?;
    fw.flush().map_err(|e| Error::io("features table", e))?;
    lw.flush().map_err(|e| Error::io("labels table", e))?;
    Ok(())
}

pub fn write_dir(dir: &Path, segments: &[Segment]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| Error::io(p, e))
    };
    write_tables(
        segments,
        create("kinematics.csv")?,
        create("features.csv")?,
        create("labels.csv")?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentIndexEntry {
    pub id: String,
    pub trial: String,
    pub start: i64,
    pub end: i64,
    pub label: Option<usize>,
    pub domain: Domain,
}

pub fn segment_index(segments: &[Segment]) -> Vec<SegmentIndexEntry> {
    segments
        .iter()
        .map(|s| SegmentIndexEntry {
            id: s.id(),
            trial: s.trial_id.clone(),
            start: s.frame_range.0,
            end: s.frame_range.1,
            label: s.gesture,
            domain: s.domain,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub train_trials: Vec<String>,
    pub test_trials: Vec<String>,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl DatasetSplit {
    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }

    /// Splits any segment list (e.g. the other domain of a paired dataset)
    /// by the trial partition of `fold`.
    pub fn partition<'a>(&self, fold: usize, segments: &'a [Segment]) -> (Vec<&'a Segment>, Vec<&'a Segment>) {
        let test: BTreeSet<&str> = self.folds[fold]
            .test_trials
            .iter()
            .map(String::as_str)
            .collect();
        segments
            .iter()
            .partition(|s| !test.contains(s.trial_id.as_str()))
    }
}

/// Trial-level k-fold partition; deterministic under `seed`.
pub fn make_folds(segments: &[Segment], k: usize, seed: u64) -> Result<DatasetSplit> {
    let trials: BTreeSet<&str> = segments.iter().map(|s| s.trial_id.as_str()).collect();
    if k < 2 || trials.len() < k {
        return Err(Error::TooFewTrials {
            trials: trials.len(),
            folds: k,
        });
    }
    let mut trials: Vec<&str> = trials.into_iter().collect();
    trials.shuffle(&mut rng::stream(seed, &[rng::label_id("folds")]));

    let mut parts: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, t) in trials.iter().enumerate() {
        parts[i % k].push(t.to_string());
    }
    for p in &mut parts {
        p.sort();
    }

    let folds = (0..k)
        .map(|i| {
            let test_trials = parts[i].clone();
            let mut train_trials: Vec<String> = parts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, p)| p.iter().cloned())
                .collect();
            train_trials.sort();
            let test_set: BTreeSet<&str> = test_trials.iter().map(String::as_str).collect();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for s in segments {
                if test_set.contains(s.trial_id.as_str()) {
                    test.push(s.id());
                } else {
                    train.push(s.id());
                }
            }
            Fold {
                train_trials,
                test_trials,
                train,
                test,
            }
        })
        .collect();
    Ok(DatasetSplit { seed, folds })
}

/// Draws `n_per_domain` pool indices from each pool; without replacement
/// when the pool is large enough, with replacement otherwise. A pure
/// function of `(pool sizes, n, seed, step)`.
pub fn sample_batch(
    source_len: usize,
    target_len: usize,
    n_per_domain: usize,
    seed: u64,
    step: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if source_len == 0 {
        return Err(Error::EmptyPool("source"));
    }
    if target_len == 0 {
        return Err(Error::EmptyPool("target"));
    }
    let draw = |len: usize, stream: u64| {
        let mut r = rng::stream(seed, &[rng::label_id("batch"), step, stream]);
        if n_per_domain <= len {
            index::sample(&mut r, len, n_per_domain).into_vec()
        } else {
            (0..n_per_domain).map(|_| r.random_range(0..len)).collect()
        }
    };
    Ok((draw(source_len, 0), draw(target_len, 1)))
}
