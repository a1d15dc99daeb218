//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N: pass` line. Tolerances and runtime budgets are pinned in
//! the assertions rather than shared constants so a change to any of them
//! shows up in review.

use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liftkit::attribution::{aggregate_saliency, saliency_with, LinearSurrogate, Normalization};
use liftkit::evalkit::{
    ablation_sweep, catalog_csv, confusion, evaluate, filter_compare, grid_search, metrics,
    subset_name, DataSources, GridAxes, SweepConfig,
};
use liftkit::fusion_filters::{
    ekf_step, mahony_step, quat_rotate, EkfState, FilterKind, MahonyState, Quaternion,
    DEFAULT_MAHONY_KI, DEFAULT_MAHONY_KP,
};
use liftkit::imu_core::{
    apply_placement_fix, apply_time_offset, axis_aligned_rotations, epoch_to_frame,
    estimate_time_offset, Frame, PlacementFix, Recording, SensorId,
};
use liftkit::liftnet::{forward, gradients, init_model, input_gradient, loss, GradientTarget};
use liftkit::synthgen::{default_template, generate_corpus, CorpusMode};
use liftkit::windowing::{balance, slice_windows, Label, SliceConfig, Window};
use liftkit::{derive_seed, Model, ModelConfig, TrainConfig, GRAVITY};

fn assert_within(elapsed: Duration, budget_s: u64, what: &str) {
    assert!(
        elapsed <= Duration::from_secs(budget_s),
        "{what} took {elapsed:?}, budget {budget_s} s"
    );
}

/// Criterion 1: the closed-form metrics agree with a brute-force tally on
/// 1000 random score/label vectors. Counts exact, ratios within 1e-12.
#[test]
fn criterion_1_metric_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let threshold = rng.gen_range(0.05..0.95);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<Label> = (0..n)
            .map(|_| if rng.gen::<bool>() { Label::Lift } else { Label::NonLift })
            .collect();

        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0, 0, 0);
        for (s, l) in scores.iter().zip(&labels) {
            match (*s >= threshold, l) {
                (true, Label::Lift) => tp += 1,
                (true, Label::NonLift) => fp += 1,
                (false, Label::NonLift) => tn += 1,
                (false, Label::Lift) => fn_ += 1,
            }
        }
        let cm = confusion(&scores, &labels, threshold).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.tn, cm.fn_), (tp, fp, tn, fn_), "case {case}");

        let m = metrics(&cm);
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let accuracy = ratio(tp + tn, n);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        assert!((m.accuracy - accuracy).abs() <= 1e-12, "case {case} accuracy");
        assert!((m.precision - precision).abs() <= 1e-12, "case {case} precision");
        assert!((m.recall - recall).abs() <= 1e-12, "case {case} recall");
        assert!((m.f1 - f1).abs() <= 1e-12, "case {case} f1");
    }
    assert_within(start.elapsed(), 5, "metric oracle");
    println!("criterion 1 (metric oracle): pass");
}

fn random_window(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

fn tiny_model(seed: u64) -> Model {
    let mut cfg = ModelConfig::new(4, 2, seed);
    cfg.lstm_hidden = 3;
    cfg.dense_widths = vec![2];
    init_model(&cfg).unwrap()
}

/// Relative error with a 1e-3 floor on the denominator, so near-zero
/// gradients are compared absolutely (1e-4 relative means 1e-7 absolute)
/// instead of amplifying finite-difference roundoff.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Criterion 2: analytic batch-loss gradients match central finite
/// differences on 100 random tiny models, max relative error 1e-4.
#[test]
fn criterion_2_gradient_check() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let model = tiny_model(derive_seed(20, case));
        let batch: Vec<Window> = (0..3)
            .map(|i| Window {
                trial_id: "t".into(),
                start_frame: i,
                data: random_window(&mut rng, 8),
                label: if i % 2 == 0 { Label::Lift } else { Label::NonLift },
            })
            .collect();
        let analytic = gradients(&model, &batch).unwrap();

        let batch_loss = |m: &Model| -> f64 {
            batch.iter().map(|w| loss(forward(m, &w.data).unwrap(), w.label)).sum::<f64>()
                / batch.len() as f64
        };
        let h = 1e-5;
        let mut probe = model.clone();
        for p in 0..analytic.len() {
            let orig = probe.params()[p];
            probe.params_mut()[p] = orig + h;
            let up = batch_loss(&probe);
            probe.params_mut()[p] = orig - h;
            let down = batch_loss(&probe);
            probe.params_mut()[p] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[p], numeric));
        }
        assert!(worst <= 1e-4, "case {case}: max relative gradient error {worst}");
    }
    assert_within(start.elapsed(), 60, "gradient check");
    println!("criterion 2 (gradient check): pass, max relative error {worst:.3e}");
}

/// Criterion 3: saliency equals |finite-difference input gradient| within
/// 1e-3 relative, and the linear surrogate's saliency is exactly |w|.
#[test]
fn criterion_3_saliency() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for case in 0..20u64 {
        let model = tiny_model(derive_seed(30, case));
        let window = random_window(&mut rng, 8);
        let map =
            saliency_with(&model, &window, GradientTarget::Probability, Normalization::Raw)
                .unwrap();
        let analytic = input_gradient(&model, &window, GradientTarget::Probability).unwrap();

        let h = 1e-5;
        let mut x = window.clone();
        for i in 0..window.len() {
            x[i] = window[i] + h;
            let up = forward(&model, &x).unwrap();
            x[i] = window[i] - h;
            let down = forward(&model, &x).unwrap();
            x[i] = window[i];
            let numeric = (up - down) / (2.0 * h);
            assert!(
                rel_err(map.values[i], numeric.abs()) <= 1e-3,
                "case {case} input {i}: saliency {} vs fd {}",
                map.values[i],
                numeric.abs()
            );
            assert!((map.values[i] - analytic[i].abs()).abs() <= 1e-15);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let weights: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let surrogate = LinearSurrogate { weights: weights.clone(), window_len: 4, n_channels: 3 };
    let window = random_window(&mut rng, 12);
    let map =
        saliency_with(&surrogate, &window, GradientTarget::Logit, Normalization::Raw).unwrap();
    for (got, w) in map.values.iter().zip(&weights) {
        assert!((got - w.abs()).abs() <= 1e-9, "surrogate saliency {got} vs |w| {}", w.abs());
    }
    println!("criterion 3 (saliency): pass");
}

fn body_gravity(q_true: &Quaternion) -> Vector3<f64> {
    quat_rotate(&q_true.conjugate(), Vector3::z()).unwrap() * GRAVITY
}

/// Criterion 4: filter properties. (a) equilibrium stationarity within 1e-9
/// per step; (b) constant-rate tracking error at 25 Hz stays under 2°;
/// (c) EKF covariance stays symmetric PSD over 10^4 random steps.
#[test]
fn criterion_4_filters() {
    let start = Instant::now();
    const DT: f64 = 0.04;
    let level = Vector3::new(0.0, 0.0, GRAVITY);

    // (a) stationarity at equilibrium
    let mut mahony = MahonyState::new(Quaternion::IDENTITY, DEFAULT_MAHONY_KP, DEFAULT_MAHONY_KI);
    let mut ekf = EkfState::with_defaults(Quaternion::IDENTITY);
    for step in 0..200 {
        let m2 = mahony_step(&mahony, Vector3::zeros(), level, DT).unwrap();
        let e2 = ekf_step(&ekf, Vector3::zeros(), level, DT).unwrap();
        assert!(mahony.q.angle_to(&m2.q) <= 1e-9, "mahony drift at step {step}");
        assert!(ekf.q.angle_to(&e2.q) <= 1e-9, "ekf drift at step {step}");
        mahony = m2;
        ekf = e2;
    }

    // (b) constant-rate rotation about x at 30°/s
    let omega = Vector3::new(30f64.to_radians(), 0.0, 0.0);
    let mut q_true = Quaternion::IDENTITY;
    let mut mahony = MahonyState::new(Quaternion::IDENTITY, DEFAULT_MAHONY_KP, DEFAULT_MAHONY_KI);
    let mut ekf = EkfState::with_defaults(Quaternion::IDENTITY);
    let mut steady = 0.0f64;
    for step in 0..500 {
        q_true = q_true.mul(&Quaternion::from_axis_angle(Vector3::x(), omega.x * DT));
        let accel = body_gravity(&q_true);
        mahony = mahony_step(&mahony, omega, accel, DT).unwrap();
        ekf = ekf_step(&ekf, omega, accel, DT).unwrap();
        if step >= 250 {
            steady = steady.max(mahony.q.angle_to(&q_true)).max(ekf.q.angle_to(&q_true));
        }
    }
    assert!(steady.to_degrees() <= 2.0, "steady-state error {}°", steady.to_degrees());

    // (c) covariance health under random inputs
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut ekf = EkfState::with_defaults(Quaternion::IDENTITY);
    for step in 0..10_000 {
        let gyro = Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let accel = level
            + Vector3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
        ekf = ekf_step(&ekf, gyro, accel, DT).unwrap();
        let p = ekf.covariance;
        let asym = (p - p.transpose()).abs().max();
        assert!(asym <= 1e-15, "asymmetry {asym} at step {step}");
        let min_eig = p.symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= -1e-12, "eigenvalue {min_eig} at step {step}");
    }
    assert_within(start.elapsed(), 30, "filter properties");
    println!("criterion 4 (filters): pass");
}

/// Criterion 5: synchronization and repair. Hand-checked clock-to-frame
/// cases, exact recovery of injected label lags up to 25 frames on a
/// noiseless fixture, and a placement-fix round trip within 1e-12.
#[test]
fn criterion_5_sync_and_repair() {
    // hand-checked epoch_to_frame cases at 25 Hz (40 ms per frame)
    let rec = Recording {
        subject_id: "s".into(),
        trial_id: "t".into(),
        start_epoch_ms: 36_000_000, // 10:00:00.000
        sample_rate_hz: 25.0,
        active_sensors: vec![SensorId::LeftWrist],
        frames: (0..100).map(|_| Frame { channels: vec![0.0; 6] }).collect(),
    };
    for (event_ms, frame) in [
        (36_000_000, 0), // at start
        (36_000_040, 1), // exactly one frame later
        (36_000_020, 1), // half a frame rounds up
        (36_000_019, 0), // just under half a frame rounds down
        (36_003_960, 99),
    ] {
        assert_eq!(epoch_to_frame(event_ms, &rec).unwrap(), frame, "event {event_ms}");
    }
    assert!(epoch_to_frame(35_999_999, &rec).is_err(), "event before start");
    assert!(epoch_to_frame(36_004_000, &rec).is_err(), "event past end");

    // exact lag recovery on a noiseless fixture
    let mut template = default_template();
    template.accel_noise_sigma = 0.0;
    template.gyro_noise_sigma = 0.0;
    let lr = generate_corpus(&template, 1, 5, CorpusMode::TrainLike).unwrap().remove(0);
    let scores = lr.indicator();
    for lag in -25i64..=25 {
        let shifted = apply_time_offset(&lr, lag).unwrap();
        let est = estimate_time_offset(&scores, &shifted, 25).unwrap();
        let restored = apply_time_offset(&shifted, est).unwrap();
        assert_eq!(restored.indicator(), lr.indicator(), "lag {lag} estimated {est}");
    }

    // placement fix round trip through every axis-aligned rotation
    for (i, rotation) in axis_aligned_rotations().into_iter().enumerate() {
        let fix = PlacementFix::new(SensorId::RightUpperArm, rotation).unwrap();
        let scrambled = apply_placement_fix(&lr.recording, &fix).unwrap();
        let restored = apply_placement_fix(&scrambled, &fix.inverse()).unwrap();
        for (a, b) in restored.frames.iter().zip(&lr.recording.frames) {
            for (x, y) in a.channels.iter().zip(&b.channels) {
                assert!((x - y).abs() <= 1e-12, "rotation {i}");
            }
        }
    }
    println!("criterion 5 (sync and repair): pass");
}

fn windows_of(
    recs: &[liftkit::LabeledRecording],
    cfg: &SliceConfig,
) -> (Vec<Window>, Vec<String>) {
    let mut windows = Vec::new();
    let mut layout = Vec::new();
    for lr in recs {
        layout = lr.recording.channel_names();
        windows.extend(slice_windows(lr, cfg).unwrap());
    }
    (windows, layout)
}

/// Criterion 6: a 20-trial synthetic corpus windowed at 10 frames, balanced
/// and trained from scratch reaches held-out F1 of at least 0.95 in under
/// five minutes.
#[test]
fn criterion_6_end_to_end() {
    let start = Instant::now();
    let corpus = generate_corpus(&default_template(), 20, 6, CorpusMode::TrainLike).unwrap();
    let (train_recs, held_out) = corpus.split_at(16);

    let slice = SliceConfig::new(10, 3);
    let (train_windows, layout) = windows_of(train_recs, &slice);
    let train_ds = balance(train_windows, 10, layout.clone(), 60).unwrap();
    let (eval_windows, _) = windows_of(held_out, &slice);
    let eval_ds = balance(eval_windows, 10, layout.clone(), 61).unwrap();

    let mut mc = ModelConfig::new(10, train_ds.n_channels(), 600);
    mc.lstm_hidden = 16;
    mc.channel_layout = layout;
    let model = init_model(&mc).unwrap();
    let tc = TrainConfig { epochs: 15, ..TrainConfig::default() };
    let (trained, _) = liftkit::liftnet::train(&model, &train_ds, &tc).unwrap();

    let (m, cm) = evaluate(&trained, &eval_ds, 0.5).unwrap();
    assert!(m.f1 >= 0.95, "held-out f1 {} (confusion {:?})", m.f1, cm);
    assert_within(start.elapsed(), 300, "end-to-end pipeline");
    println!("criterion 6 (end to end): pass, held-out f1 {:.4}", m.f1);
}

/// Criterion 7: with a train-only distractor on the right upper arm, a model
/// restricted to the informative sensors beats the all-sensor model on
/// field-style data in at least 4 of 5 seeds, and the all-sensor model's
/// aggregate saliency ranks a distractor arm channel in its top 3.
#[test]
fn criterion_7_distribution_shift() {
    let template = default_template();
    let train = generate_corpus(&template, 8, 7, CorpusMode::TrainLike).unwrap();
    let eval = generate_corpus(&template, 8, 77, CorpusMode::FieldLike).unwrap();
    let sources = DataSources { train: &train, eval: &eval };

    let informative = vec![SensorId::LeftWrist, SensorId::RightWrist, SensorId::UpperBack];
    let subsets = vec![SensorId::ALL.to_vec(), informative.clone()];
    let cfg = SweepConfig {
        lstm_hidden: 16,
        train: TrainConfig { epochs: 12, ..TrainConfig::default() },
        seeds: vec![0, 1, 2, 3, 4],
        ..SweepConfig::default()
    };
    let rows = ablation_sweep(&sources, &subsets, &cfg).unwrap();
    for r in &rows {
        assert!(r.error.is_none(), "row {} failed: {:?}", r.id, r.error);
    }
    let f1_of = |group: &str, seed: u64| {
        rows.iter()
            .find(|r| r.group == group && r.seed == seed)
            .and_then(|r| r.eval_metrics)
            .map(|m| m.f1)
            .unwrap()
    };
    let all_name = subset_name(&SensorId::ALL);
    let subset = subset_name(&informative);
    let wins = (0..5).filter(|&s| f1_of(&subset, s) > f1_of(&all_name, s)).count();
    assert!(wins >= 4, "informative subset won only {wins} of 5 seeds");

    // saliency of the all-sensor model over training lift windows
    let slice = SliceConfig::new(cfg.window_len, cfg.train_stride);
    let (windows, layout) = windows_of(&train, &slice);
    let ds = balance(windows, cfg.window_len, layout.clone(), 70).unwrap();
    let mut mc = ModelConfig::new(cfg.window_len, ds.n_channels(), 700);
    mc.lstm_hidden = cfg.lstm_hidden;
    let model = init_model(&mc).unwrap();
    let (trained, _) = liftkit::liftnet::train(&model, &ds, &cfg.train).unwrap();
    let maps: Vec<_> = ds
        .windows
        .iter()
        .filter(|w| w.label == Label::Lift)
        .map(|w| liftkit::attribution::saliency(&trained, &w.data).unwrap())
        .collect();
    let ranking = aggregate_saliency(&maps).unwrap();
    let top: Vec<&str> = ranking.top(3).into_iter().map(|c| layout[c].as_str()).collect();
    assert!(
        top.iter().any(|name| name.starts_with("right_upper_arm")),
        "distractor channel absent from top 3: {top:?}"
    );
    println!("criterion 7 (distribution shift): pass, {wins}/5 seeds, top channels {top:?}");
}

/// Criterion 8: rerunning every sweep with the same config and seeds
/// produces byte-identical catalog CSVs.
#[test]
fn criterion_8_determinism() {
    let template = default_template();
    let train = generate_corpus(&template, 3, 8, CorpusMode::TrainLike).unwrap();
    let eval = generate_corpus(&template, 2, 88, CorpusMode::FieldLike).unwrap();
    let sources = DataSources { train: &train, eval: &eval };
    let cfg = SweepConfig {
        lstm_hidden: 4,
        dense_widths: vec![4],
        train: TrainConfig { epochs: 2, batch_size: 16, ..TrainConfig::default() },
        seeds: vec![0, 1],
        ..SweepConfig::default()
    };

    let axes = GridAxes {
        batch_size: vec![16],
        window_len: vec![10, 25],
        epochs: vec![2],
        validation_split: vec![0.2],
    };
    let grid = |_| catalog_csv(&grid_search(&sources, &axes, &cfg).unwrap());
    assert_eq!(grid(0), grid(1), "grid catalog differs between reruns");

    let subsets =
        vec![SensorId::ALL.to_vec(), vec![SensorId::LeftWrist, SensorId::RightWrist]];
    let ablate = |_| catalog_csv(&ablation_sweep(&sources, &subsets, &cfg).unwrap());
    assert_eq!(ablate(0), ablate(1), "ablation catalog differs between reruns");

    let kinds = vec![FilterKind::None, FilterKind::mahony_default(), FilterKind::ekf_default()];
    let filters = |_| catalog_csv(&filter_compare(&sources, &kinds, &cfg).unwrap());
    assert_eq!(filters(0), filters(1), "filter catalog differs between reruns");
    println!("criterion 8 (determinism): pass");
}
