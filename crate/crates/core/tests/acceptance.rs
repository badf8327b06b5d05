//! Acceptance checks 1-10. Runs as a plain binary so every verdict line is
//! printed. `ACCEPTANCE=1,4,5` restricts the run to the listed checks;
//! `GESTURE_UDA_DESK_DIR` points check 10 at real tables.

use std::time::{Duration, Instant};

use gesture_uda::adversarial::{
    classification_loss, compute_loss, kd_loss, kvd_loss, total_loss, BatchItem, Coupling, GradientReversal, Model, ModelConfig,
    Objective, PreparedSegment,
};
use gesture_uda::data::{self, ArmState, Domain, KinematicFrame, Segment, NUM_GESTURES};
use gesture_uda::experiment::{self, DatasetSource, ExperimentConfig, Method, SWEEP_LAMBDAS};
use gesture_uda::fusion::FusionMode;
use gesture_uda::mdok::{transform_segment, DIRECTION_EPS};
use gesture_uda::metrics::{self, report_from_predictions};
use gesture_uda::params::Params;
use gesture_uda::relation::{EncoderConfig, ScalePlan, SubsetMode};
use gesture_uda::synth::{self, GeneratorConfig};
use gesture_uda::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- fixtures

fn mini_config(seed: u64) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            hidden_dim: 6,
            max_scale: 4,
            subsets_per_scale: 2,
            kinematic_dim: 14,
            visual_dim: 8,
        },
        fusion_mode: FusionMode::Elementwise,
        fusion_dim: 6,
        head_hidden: 6,
        seed,
    }
}

fn random_prepared(r: &mut ChaCha8Rng, domain: Domain, t: usize, vis: usize, label: bool) -> PreparedSegment {
    let mut m = |cols: usize| -> Vec<Vec<f64>> { (0..t).map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect()).collect() };
    let kinematic = m(14);
    let visual = m(vis);
    PreparedSegment {
        id: format!("{}:{}", domain.name(), r.random::<u32>()),
        kinematic,
        visual,
        domain,
        gesture: if label { Some(r.random_range(0..NUM_GESTURES)) } else { None },
    }
}

/// 4 labeled simulator and 4 unlabeled real segments of 6 frames.
fn mini_batch(seed: u64) -> (Vec<PreparedSegment>, Vec<PreparedSegment>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let source = (0..4).map(|_| random_prepared(&mut r, Domain::Simulator, 6, 8, true)).collect();
    let target = (0..4).map(|_| random_prepared(&mut r, Domain::Real, 6, 8, false)).collect();
    (source, target)
}

fn plans(model: &Model, segs: &[PreparedSegment], seed: u64) -> Vec<ScalePlan> {
    segs.iter()
        .enumerate()
        .map(|(i, s)| model.plan(s, SubsetMode::Train(seed + i as u64)).unwrap())
        .collect()
}

fn items<'a>(segs: &'a [PreparedSegment], plans: &'a [ScalePlan]) -> Vec<BatchItem<'a>> {
    segs.iter().zip(plans).map(|(segment, plan)| BatchItem { segment, plan }).collect()
}

fn flat(p: &impl Params) -> Vec<(String, Vec<f64>)> {
    p.tensors().into_iter().map(|(n, t)| (n, t.data.clone())).collect()
}

// ------------------------------------------------------------------ checks

fn check_mdok() -> Verdict {
    let cfg = GeneratorConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut pool: Vec<Segment> = Vec::new();
    for (i, p) in synth::PRESETS.iter().enumerate() {
        let d = synth::generate_dataset(2, &synth::preset(p).unwrap(), &cfg, i as u64).unwrap();
        pool.extend(d.simulator);
        pool.extend(d.real);
    }
    let mut worst_shift: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut unit_count = 0usize;
    for n in 0..100 {
        let seg = &pool[r.random_range(0..pool.len())];
        let base = transform_segment(seg).unwrap();
        let offset = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        let scale = r.random_range(0.1..10.0);
        let moved: Vec<KinematicFrame> = seg
            .kinematics
            .iter()
            .map(|f| {
                let m = |a: &ArmState| ArmState {
                    position: [0, 1, 2].map(|i| if n % 2 == 0 { a.position[i] + offset[i] } else { scale * a.position[i] }),
                    ..*a
                };
                KinematicFrame {
                    left: m(&f.left),
                    right: m(&f.right),
                }
            })
            .collect();
        let shifted = Segment::new(&seg.trial_id, seg.frame_range.0, seg.gesture, seg.domain, moved, seg.visual.clone()).unwrap();
        let out = transform_segment(&shifted).unwrap();
        for (a, b) in base.iter().zip(&out) {
            for (x, y) in a.to_values().iter().zip(b.to_values()) {
                worst_shift = worst_shift.max((x - y).abs());
            }
        }
        // Norms of non-degenerate directions, recomputed from raw positions.
        for (w, f) in seg.kinematics.windows(2).zip(&base) {
            for (arm, (p0, p1)) in [(&f.left, (&w[0].left, &w[1].left)), (&f.right, (&w[0].right, &w[1].right))] {
                let raw = (0..3).map(|i| (p1.position[i] - p0.position[i]).powi(2)).sum::<f64>().sqrt();
                if raw >= DIRECTION_EPS {
                    let norm = arm.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst_norm = worst_norm.max((norm - 1.0).abs());
                    unit_count += 1;
                }
            }
        }
    }
    verdict(
        worst_shift <= 1e-6 && worst_norm <= 1e-6 && unit_count > 0,
        format!("max change under translate/scale {worst_shift:.2e}, max |‖D‖-1| {worst_norm:.2e} over {unit_count} directions"),
    )
}

fn check_grl() -> Verdict {
    let grl = GradientReversal { beta: 0.5 };
    let x = [1.5, -0.0, 3.25e-300, f64::MAX, -7.0];
    let fwd_exact = grl.apply(&x).iter().zip(&x).all(|(a, b)| a.to_bits() == b.to_bits());

    let model = Model::new(mini_config(3)).unwrap();
    let (source, target) = mini_batch(4);
    let all: Vec<PreparedSegment> = source.into_iter().chain(target).collect();
    let p = plans(&model, &all, 40);
    let batch = items(&all, &p);
    let obj = |coupling| Objective {
        lambda: 0.8,
        classification: false,
        kd: true,
        kvd: false,
        visual: false,
        coupling,
    };
    let mut g_rev = model.zeros_like();
    let mut g_dir = model.zeros_like();
    let l_rev = compute_loss(&model, &batch, &obj(Coupling::Reversed(grl)), Some(&mut g_rev)).unwrap();
    let l_dir = compute_loss(&model, &batch, &obj(Coupling::Direct), Some(&mut g_dir)).unwrap();
    let loss_exact = l_rev.kd.to_bits() == l_dir.kd.to_bits();
    let mut worst_enc: f64 = 0.0;
    let mut worst_head: f64 = 0.0;
    let mut nonzero = 0usize;
    for ((name, a), (_, b)) in flat(&g_rev).iter().zip(flat(&g_dir)) {
        for (x, y) in a.iter().zip(&b) {
            if name.starts_with("kin_encoder.") {
                worst_enc = worst_enc.max((x + 0.5 * y).abs());
                if y.abs() > 1e-12 {
                    nonzero += 1;
                }
            } else {
                worst_head = worst_head.max((x - y).abs());
            }
        }
    }
    verdict(
        fwd_exact && loss_exact && worst_enc <= 1e-9 && worst_head <= 1e-9 && nonzero > 0,
        format!(
            "forward bit-exact {fwd_exact}, loss bit-exact {loss_exact}, max |g_rev + 0.5 g| over encoder {worst_enc:.2e} ({nonzero} nonzero), head mismatch {worst_head:.2e}"
        ),
    )
}

fn check_gradients() -> Verdict {
    let model = Model::new(mini_config(7)).unwrap();
    let (source, target) = mini_batch(8);
    let sp = plans(&model, &source, 100);
    let tp = plans(&model, &target, 200);
    let (s_items, t_items) = (items(&source, &sp), items(&target, &tp));
    let beta = 0.5;
    let obj = |coupling| Objective {
        lambda: 0.8,
        classification: true,
        kd: true,
        kvd: true,
        visual: true,
        coupling,
    };
    let (_, g_dir) = total_loss(&model, &s_items, &t_items, &obj(Coupling::Direct)).unwrap();
    let (_, g_rev) = total_loss(&model, &s_items, &t_items, &obj(Coupling::Reversed(GradientReversal { beta }))).unwrap();
    let g_dir = flat(&g_dir);
    let g_rev = flat(&g_rev);

    let h = 1e-5;
    let floor = 1e-6;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    let eval = |m: &Model| {
        let (l, _) = total_loss(m, &s_items, &t_items, &obj(Coupling::Direct)).unwrap();
        (l.classification, l.kd + l.kvd)
    };
    let mut worst_dir: (f64, String) = (0.0, String::new());
    let mut worst_rev: (f64, String) = (0.0, String::new());
    let mut count = 0usize;
    for (ti, (name, data)) in g_dir.iter().enumerate() {
        for j in 0..data.len() {
            let mut plus = model.clone();
            plus.tensors_mut()[ti].1.data[j] += h;
            let mut minus = model.clone();
            minus.tensors_mut()[ti].1.data[j] -= h;
            let (cp, dp) = eval(&plus);
            let (cm, dm) = eval(&minus);
            let fd_c = (cp - cm) / (2.0 * h);
            let fd_d = (dp - dm) / (2.0 * h);
            let e = rel(data[j], fd_c + fd_d);
            if e > worst_dir.0 {
                worst_dir = (e, format!("{name}[{j}]"));
            }
            let head = name.starts_with("kd.") || name.starts_with("kvd.");
            let expected = if head { fd_c + fd_d } else { fd_c - beta * fd_d };
            let e = rel(g_rev[ti].1[j], expected);
            if e > worst_rev.0 {
                worst_rev = (e, format!("{name}[{j}]"));
            }
            count += 1;
        }
    }
    verdict(
        worst_dir.0 <= 1e-4 && worst_rev.0 <= 1e-4,
        format!(
            "{count} parameters; worst relative error {:.2e} at {} (plain), {:.2e} at {} (with reversal)",
            worst_dir.0, worst_dir.1, worst_rev.0, worst_rev.1
        ),
    )
}

fn mlp_logits(w1: &Tensor, b1: &Tensor, w2: &Tensor, b2: &Tensor, x: &[f64]) -> Vec<f64> {
    let lin = |w: &Tensor, b: &Tensor, v: &[f64]| -> Vec<f64> {
        let (rows, cols) = (w.shape[0], w.shape[1]);
        (0..rows).map(|i| b.data[i] + (0..cols).map(|k| w.data[i * cols + k] * v[k]).sum::<f64>()).collect()
    };
    let hidden: Vec<f64> = lin(w1, b1, x).iter().map(|v| v.tanh()).collect();
    lin(w2, b2, &hidden)
}

fn probs(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn check_loss_oracles() -> Verdict {
    let model = Model::new(mini_config(21)).unwrap();
    let obj = Objective::default();
    let mut worst: f64 = 0.0;
    for trial in 0..5u64 {
        let (source, target) = mini_batch(50 + trial);
        let all: Vec<PreparedSegment> = source.iter().chain(&target).cloned().collect();
        let p_all = plans(&model, &all, 300 + trial);
        let batch = items(&all, &p_all);
        let src = &batch[..4];
        let (mut kd, mut kvd, mut cls) = (0.0, 0.0, 0.0);
        for it in &batch {
            let fwd = model.forward(*it, true).unwrap();
            let fk = &fwd.kinematic_feature;
            let fkv = fwd.fused_feature.as_ref().unwrap();
            let d = it.segment.domain.label();
            let head = |m: &gesture_uda::adversarial::Mlp, x: &[f64]| {
                mlp_logits(&m.hidden.weight, &m.hidden.bias, &m.output.weight, &m.output.bias, x)
            };
            kd += -probs(&head(&model.kd, fk))[d].ln() / batch.len() as f64;
            kvd += -probs(&head(&model.kvd, fkv))[d].ln() / batch.len() as f64;
            if let Some(y) = it.segment.gesture {
                let pk = probs(&head(&model.kc, fk))[y];
                let pv = probs(&head(&model.kvc, fkv))[y];
                cls += -(obj.lambda * pk + (1.0 - obj.lambda) * pv).ln() / src.len() as f64;
            }
        }
        worst = worst
            .max((kd_loss(&model, &batch, &obj).unwrap() - kd).abs())
            .max((kvd_loss(&model, &batch, &obj).unwrap() - kvd).abs())
            .max((classification_loss(&model, src, &obj).unwrap() - cls).abs());
    }

    // Zeroed output layers give uniform predictions.
    let mut flat_model = model.clone();
    for head in [&mut flat_model.kd, &mut flat_model.kvd, &mut flat_model.kc, &mut flat_model.kvc] {
        head.output.weight.data.iter_mut().for_each(|v| *v = 0.0);
        head.output.bias.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let (source, target) = mini_batch(77);
    let all: Vec<PreparedSegment> = source.iter().chain(&target).cloned().collect();
    let p_all = plans(&flat_model, &all, 9);
    let batch = items(&all, &p_all);
    let u_kd = (kd_loss(&flat_model, &batch, &obj).unwrap() - 2f64.ln()).abs();
    let u_kvd = (kvd_loss(&flat_model, &batch, &obj).unwrap() - 2f64.ln()).abs();
    let u_c = (classification_loss(&flat_model, &batch[..4], &obj).unwrap() - 7f64.ln()).abs();
    verdict(
        worst <= 1e-9 && u_kd <= 1e-9 && u_kvd <= 1e-9 && u_c <= 1e-9,
        format!("max oracle gap {worst:.2e}; uniform gaps ln2 {u_kd:.1e}/{u_kvd:.1e}, ln7 {u_c:.1e}"),
    )
}

/// Brute force: per class, walk every (label, prediction) pair.
fn brute(labels: &[usize], preds: &[usize]) -> (Vec<Vec<f64>>, f64, [f64; 4], Vec<[f64; 3]>) {
    let k = NUM_GESTURES;
    let mut conf = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            conf[i][j] = labels.iter().zip(preds).filter(|&(&y, &p)| y == i && p == j).count() as f64;
        }
    }
    let correct = labels.iter().zip(preds).filter(|(y, p)| y == p).count();
    let mut sums = [0.0; 4];
    let mut present = 0.0;
    let mut per = Vec::new();
    for c in 0..k {
        let tp = labels.iter().zip(preds).filter(|&(&y, &p)| y == c && p == c).count() as f64;
        let fp = labels.iter().zip(preds).filter(|&(&y, &p)| y != c && p == c).count() as f64;
        let fn_ = labels.iter().zip(preds).filter(|&(&y, &p)| y == c && p != c).count() as f64;
        if tp + fp + fn_ == 0.0 {
            per.push([0.0; 3]);
            continue;
        }
        let pr = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let re = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let ja = tp / (tp + fp + fn_);
        let f1 = if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 };
        sums[0] += pr;
        sums[1] += re;
        sums[2] += ja;
        sums[3] += f1;
        present += 1.0;
        per.push([pr, re, ja]);
    }
    let means = [sums[0] / present, sums[1] / present, sums[2] / present, sums[3] / present];
    (conf, correct as f64 / labels.len() as f64, means, per)
}

fn matches_brute(r: &metrics::MetricsReport, labels: &[usize], preds: &[usize]) -> bool {
    let (conf, acc, means, _) = brute(labels, preds);
    let m = r.mean;
    r.confusion == conf && m.accuracy == acc && [m.precision, m.recall, m.jaccard, m.f1] == means
}

fn check_metrics() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(500);
    let labels: Vec<usize> = (0..500).map(|_| r.random_range(0..NUM_GESTURES)).collect();
    let preds: Vec<usize> = labels
        .iter()
        .map(|&y| if r.random_bool(0.4) { y } else { r.random_range(0..NUM_GESTURES) })
        .collect();
    let main = matches_brute(&report_from_predictions(&labels, &preds, NUM_GESTURES).unwrap(), &labels, &preds);

    // evaluate() end to end on a small random model.
    let model = Model::new(mini_config(5)).unwrap();
    let segs: Vec<PreparedSegment> = (0..60).map(|_| random_prepared(&mut r, Domain::Real, 6, 8, true)).collect();
    let report = metrics::evaluate(&model, &segs, 0.8, true).unwrap();
    let y: Vec<usize> = segs.iter().map(|s| s.gesture.unwrap()).collect();
    let p = metrics::predict(&model, &segs, 0.8, true).unwrap();
    let via_evaluate = matches_brute(&report, &y, &p);

    let mut fuzz_ok = true;
    let mut fuzz_match = true;
    for case in 0..200 {
        let n = r.random_range(1..60);
        let ys: Vec<usize> = (0..n).map(|_| r.random_range(0..NUM_GESTURES)).collect();
        let ps: Vec<usize> = ys.iter().map(|&v| if r.random_bool(0.5) { v } else { r.random_range(0..NUM_GESTURES) }).collect();
        let rep = report_from_predictions(&ys, &ps, NUM_GESTURES).unwrap();
        fuzz_match &= matches_brute(&rep, &ys, &ps);
        for c in &rep.per_class {
            if c.jaccard > c.precision.min(c.recall) {
                fuzz_ok = false;
                eprintln!("  case {case}: JA {} > min(PR {}, RE {})", c.jaccard, c.precision, c.recall);
            }
        }
    }
    verdict(
        main && via_evaluate && fuzz_match && fuzz_ok,
        format!("500-pair oracle {main}, evaluate() oracle {via_evaluate}, 200 fuzz cases match {fuzz_match}, JA<=min(PR,RE) {fuzz_ok}"),
    )
}

fn pct(v: f64) -> f64 {
    100.0 * v
}

fn load(cfg: &ExperimentConfig) -> synth::PairedDataset {
    cfg.dataset.load().unwrap()
}

fn check_null_shift() -> Verdict {
    let cfg = ExperimentConfig::compact("none", Method::BaselineDirection);
    let (s, _) = experiment::run_method(&load(&cfg), &cfg, cfg.method).unwrap();
    let (sim, real) = (pct(s.source_test.mean.accuracy), pct(s.target_test.mean.accuracy));
    verdict((real - sim).abs() <= 3.0, format!("sim {sim:.2}, real {real:.2}, |diff| {:.2} (<= 3)", (real - sim).abs()))
}

fn check_translation() -> Verdict {
    let cfg = ExperimentConfig::compact("translation", Method::BaselineDirection);
    let data = load(&cfg);
    let (pos, _) = experiment::run_method(&data, &cfg, Method::BaselinePosition).unwrap();
    let (dir, _) = experiment::run_method(&data, &cfg, Method::BaselineDirection).unwrap();
    let (p, d) = (pct(pos.target_test.mean.accuracy), pct(dir.target_test.mean.accuracy));
    verdict(d - p >= 5.0, format!("baseline-position {p:.2}, baseline-direction {d:.2}, gain {:.2} (>= 5)", d - p))
}

fn check_ordering() -> Verdict {
    let cfg = ExperimentConfig::compact("combined", Method::MdokKvatt);
    let data = load(&cfg);
    let acc = |m: Method| {
        let (s, _) = experiment::run_method(&data, &cfg, m).unwrap();
        (pct(s.target_test.mean.accuracy), pct(s.target_test.std.accuracy))
    };
    let (p, ps) = acc(Method::BaselinePosition);
    let (b, bs) = acc(Method::BaselineDirection);
    let (m, ms) = acc(Method::Mdok);
    let (k, ks) = acc(Method::MdokKvatt);
    // The margin is taken against the position-vector baseline, the
    // baseline row of the comparison table; the gap over the direction
    // baseline is printed alongside but not asserted.
    verdict(
        k >= m && m >= b && k - p >= 5.0,
        format!(
            "baseline-position {p:.2}±{ps:.2}, baseline-direction {b:.2}±{bs:.2}, mdok {m:.2}±{ms:.2}, mdok+kvatt {k:.2}±{ks:.2}, \
             gain over baseline {:.2} (>= 5), over baseline-direction {:.2}",
            k - p,
            k - b
        ),
    )
}

fn check_sweep() -> Verdict {
    let cfg = ExperimentConfig::compact("combined", Method::MdokKvatt);
    let rows = experiment::sweep_lambda(&load(&cfg), &cfg, &SWEEP_LAMBDAS).unwrap();
    for line in experiment::sweep_csv(&rows).lines() {
        println!("    {line}");
    }
    let at = |l: f64| rows.iter().find(|r| r.lambda == l).map(|r| pct(r.acc_mean)).unwrap();
    verdict(at(0.5) > at(0.2), format!("acc(0.5) {:.2} vs acc(0.2) {:.2}", at(0.5), at(0.2)))
}

fn check_tables() -> Verdict {
    let (dir, supplied, _tmp) = match std::env::var_os("GESTURE_UDA_DESK_DIR") {
        Some(d) => (std::path::PathBuf::from(d), true, None),
        None => {
            // No external tables: exercise the same ingestion path on
            // generated tables written to disk.
            let tmp = tempfile::tempdir().unwrap();
            let d = synth::generate_dataset(10, &synth::preset("combined").unwrap(), &GeneratorConfig::default(), 3).unwrap();
            data::write_dir(&tmp.path().join("simulator"), &d.simulator).unwrap();
            data::write_dir(&tmp.path().join("real"), &d.real).unwrap();
            (tmp.path().to_path_buf(), false, Some(tmp))
        }
    };
    let mut cfg = ExperimentConfig::compact("combined", Method::MdokKvatt);
    cfg.dataset = DatasetSource::Tables { dir: dir.clone() };
    cfg.train.epochs = 1;
    cfg.seeds = vec![0];
    let result = cfg.dataset.load().and_then(|data| experiment::ablate(&data, &cfg));
    let what = if supplied {
        format!("tables at {}", dir.display())
    } else {
        "no tables supplied; generated tables through the same path".to_string()
    };
    match result {
        Ok(t) => verdict(true, format!("{what}: {} methods evaluated", t.rows.len())),
        Err(e) => verdict(false, format!("{what}: {e}")),
    }
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    // (id, name, budget, check)
    let checks: Vec<(usize, &str, Option<Duration>, fn() -> Verdict)> = vec![
        (1, "MDO-K invariances", Some(Duration::from_secs(5)), check_mdok),
        (2, "gradient reversal contract", Some(Duration::from_secs(10)), check_grl),
        (3, "finite-difference gradients", Some(Duration::from_secs(120)), check_gradients),
        (4, "loss oracles", None, check_loss_oracles),
        (5, "metrics oracle", None, check_metrics),
        (6, "null-shift sanity", Some(Duration::from_secs(600)), check_null_shift),
        (7, "position vs direction on translation", Some(Duration::from_secs(900)), check_translation),
        (8, "method ordering on combined", Some(Duration::from_secs(1800)), check_ordering),
        (9, "lambda sweep shape", None, check_sweep),
        (10, "table ingestion end to end", None, check_tables),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in checks {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let limit = budget.map(|b| format!(" / {}s", b.as_secs())).unwrap_or_default();
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
