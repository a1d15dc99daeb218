//! Dataset repair: constant per-trial time-offset correction and discrete
//! sensor-misplacement fixes.

use super::*;
use nalgebra::{Matrix3, Vector3};

/// A rigid re-orientation applied to one sensor's accel and gyro channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementFix {
    pub sensor: SensorId,
    rotation: Matrix3<f64>,
}

impl PlacementFix {
    pub fn new(sensor: SensorId, rotation: Matrix3<f64>) -> Result<Self> {
        let rtr = rotation.transpose() * rotation;
        if (rtr - Matrix3::identity()).abs().max() > 1e-9 {
            return Err(ImuError::Schema("placement rotation is not orthonormal".into()));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(ImuError::Schema("placement rotation must have determinant +1".into()));
        }
        Ok(PlacementFix { sensor, rotation })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn inverse(&self) -> PlacementFix {
        PlacementFix { sensor: self.sensor, rotation: self.rotation.transpose() }
    }
}

/// Shifts every lift interval by a constant number of frames. The signal
/// itself is untouched; only the labels move.
pub fn apply_time_offset(lr: &LabeledRecording, offset_frames: i64) -> Result<LabeledRecording> {
    let len = lr.recording.len() as i64;
    let mut lifts = Vec::with_capacity(lr.lifts.len());
    for lift in &lr.lifts {
        let bol = lift.bol_frame as i64 + offset_frames;
        let eol = lift.eol_frame as i64 + offset_frames;
        if bol < 0 || eol > len {
            return Err(ImuError::OutOfRange { frame: if bol < 0 { bol } else { eol }, len: lr.recording.len() });
        }
        lifts.push(LiftInterval { bol_frame: bol as usize, eol_frame: eol as usize });
    }
    Ok(LabeledRecording {
        recording: lr.recording.clone(),
        lifts,
        applied_offset_frames: lr.applied_offset_frames + offset_frames,
    })
}

/// Estimates the constant label lag by cross-correlating a per-frame lift
/// probability series against the binary label indicator. Returns the offset
/// (in frames) that, applied to the labels via [`apply_time_offset`], best
/// realigns them with the scores. Ties break toward the smallest |lag|, then
/// the negative lag.
pub fn estimate_time_offset(
    scores: &[f64],
    lr: &LabeledRecording,
    max_lag_frames: usize,
) -> Result<i64> {
    assert_eq!(scores.len(), lr.recording.len(), "scores length must equal recording length");
    assert!(max_lag_frames >= 1);
    let ind = lr.indicator();
    if ind.iter().all(|&v| v == 0.0) {
        return Err(ImuError::DegenerateSignal("label indicator is all zero"));
    }
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        return Err(ImuError::DegenerateSignal("score series is constant"));
    }

    let len = scores.len() as i64;
    let corr = |lag: i64| -> f64 {
        // correlate scores against the indicator shifted by `lag` frames
        let mut acc = 0.0;
        for j in 0..len {
            let i = j + lag;
            if i >= 0 && i < len {
                acc += scores[i as usize] * ind[j as usize];
            }
        }
        acc
    };

    let mut best_lag = 0i64;
    let mut best = f64::NEG_INFINITY;
    // visit lags sorted by |lag| with the negative one first, so a strict
    // improvement test realizes the documented tie-break
    for mag in 0..=max_lag_frames as i64 {
        for &lag in &[-mag, mag] {
            if mag == 0 && lag == 0 && best > f64::NEG_INFINITY {
                continue;
            }
            let c = corr(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    Ok(best_lag)
}

/// Rewrites one sensor's accel and gyro vectors through the fix rotation,
/// emulating the correct mounting orientation.
pub fn apply_placement_fix(recording: &Recording, fix: &PlacementFix) -> Result<Recording> {
    let slot = recording
        .sensor_slot(fix.sensor)
        .ok_or(ImuError::SensorMissing(fix.sensor))?;
    let base = slot * CHANNELS_PER_SENSOR;
    let mut out = recording.clone();
    for frame in &mut out.frames {
        for offset in [0, 3] {
            let v = Vector3::new(
                frame.channels[base + offset],
                frame.channels[base + offset + 1],
                frame.channels[base + offset + 2],
            );
            let r = fix.rotation * v;
            frame.channels[base + offset] = r.x;
            frame.channels[base + offset + 1] = r.y;
            frame.channels[base + offset + 2] = r.z;
        }
    }
    Ok(out)
}

/// The 24 proper axis-aligned orientations (signed permutation matrices with
/// determinant +1), in a fixed enumeration order: axis permutations in
/// lexicographic order, then sign patterns in binary order, improper
/// combinations skipped.
pub fn axis_aligned_rotations() -> Vec<Matrix3<f64>> {
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for bits in 0..8u8 {
            let mut m: Matrix3<f64> = Matrix3::zeros();
            for row in 0..3 {
                let sign = if bits & (1 << row) == 0 { 1.0 } else { -1.0 };
                m[(row, perm[row])] = sign;
            }
            if (m.determinant() - 1.0).abs() < 1e-12 {
                out.push(m);
            }
        }
    }
    debug_assert_eq!(out.len(), 24);
    out
}

pub const DEFAULT_ANOMALY_THRESHOLD_DEG: f64 = 60.0;

/// Checks a suspect sensor's gravity direction against a reference sensor
/// over a still window. If they disagree by more than `threshold_deg`,
/// returns the axis-aligned fix that best realigns the suspect (first match
/// in the fixed enumeration order of [`axis_aligned_rotations`] on ties).
pub fn detect_placement_anomaly(
    recording: &Recording,
    suspect: SensorId,
    reference: SensorId,
    still_window: std::ops::Range<usize>,
    threshold_deg: f64,
) -> Result<Option<PlacementFix>> {
    let suspect_slot = recording.sensor_slot(suspect).ok_or(ImuError::SensorMissing(suspect))?;
    let reference_slot =
        recording.sensor_slot(reference).ok_or(ImuError::SensorMissing(reference))?;
    let n_frames = still_window.end.saturating_sub(still_window.start);
    if (n_frames as f64) < recording.sample_rate_hz {
        return Err(ImuError::Schema("still window must cover at least 1 s".into()));
    }
    if still_window.end > recording.len() {
        return Err(ImuError::OutOfRange { frame: still_window.end as i64, len: recording.len() });
    }

    let mean_accel = |slot: usize| -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for frame in &recording.frames[still_window.clone()] {
            let a = frame.accel(slot);
            acc += Vector3::new(a[0], a[1], a[2]);
        }
        acc / n_frames as f64
    };

    let suspect_mean = mean_accel(suspect_slot);
    let reference_mean = mean_accel(reference_slot);
    let min_mag = 0.5 * crate::GRAVITY;
    for mean in [&suspect_mean, &reference_mean] {
        if mean.norm() < min_mag {
            return Err(ImuError::NotStill(mean.norm()));
        }
    }

    let suspect_dir = suspect_mean.normalize();
    let reference_dir = reference_mean.normalize();
    let angle = suspect_dir.dot(&reference_dir).clamp(-1.0, 1.0).acos();
    if angle.to_degrees() <= threshold_deg {
        return Ok(None);
    }

    let mut best: Option<(f64, Matrix3<f64>)> = None;
    for rot in axis_aligned_rotations() {
        let residual = ((rot * suspect_dir).dot(&reference_dir)).clamp(-1.0, 1.0).acos();
        if best.map_or(true, |(b, _)| residual < b) {
            best = Some((residual, rot));
        }
    }
    let (_, rotation) = best.unwrap();
    Ok(Some(PlacementFix { sensor: suspect, rotation }))
}

/// Drops the channels of every sensor outside `subset`, preserving the fixed
/// sensor order. Used by the ablation harness.
pub fn restrict_sensors(recording: &Recording, subset: &[SensorId]) -> Result<Recording> {
    let mut slots = Vec::new();
    let mut kept = Vec::new();
    for &sensor in &recording.active_sensors {
        if subset.contains(&sensor) {
            slots.push(recording.sensor_slot(sensor).unwrap());
            kept.push(sensor);
        }
    }
    for &sensor in subset {
        if recording.sensor_slot(sensor).is_none() {
            return Err(ImuError::SensorMissing(sensor));
        }
    }
    if kept.is_empty() {
        return Err(ImuError::Schema("sensor subset is empty".into()));
    }
    let frames = recording
        .frames
        .iter()
        .map(|f| {
            let mut channels = Vec::with_capacity(kept.len() * CHANNELS_PER_SENSOR);
            for &slot in &slots {
                let base = slot * CHANNELS_PER_SENSOR;
                channels.extend_from_slice(&f.channels[base..base + CHANNELS_PER_SENSOR]);
            }
            Frame { channels }
        })
        .collect();
    Ok(Recording { active_sensors: kept, frames, ..recording.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GRAVITY;

    fn recording_with(len: usize, fill: impl Fn(usize, &mut Vec<f64>)) -> Recording {
        let n = 36;
        let frames = (0..len)
            .map(|i| {
                let mut channels = vec![0.0; n];
                fill(i, &mut channels);
                Frame { channels }
            })
            .collect();
        Recording {
            subject_id: "s01".into(),
            trial_id: "t01".into(),
            start_epoch_ms: 0,
            sample_rate_hz: 25.0,
            active_sensors: SensorId::ALL.to_vec(),
            frames,
        }
    }

    fn labeled(len: usize, lifts: &[(usize, usize)]) -> LabeledRecording {
        let rec = recording_with(len, |_, _| {});
        let lifts = lifts
            .iter()
            .map(|&(b, e)| LiftInterval { bol_frame: b, eol_frame: e })
            .collect();
        LabeledRecording::new(rec, lifts).unwrap()
    }

    #[test]
    fn offset_shift_and_identity() {
        let lr = labeled(200, &[(50, 88)]);
        let shifted = apply_time_offset(&lr, 10).unwrap();
        assert_eq!(shifted.lifts, vec![LiftInterval { bol_frame: 60, eol_frame: 98 }]);
        assert_eq!(shifted.applied_offset_frames, 10);
        let same = apply_time_offset(&lr, 0).unwrap();
        assert_eq!(same.lifts, lr.lifts);
    }

    #[test]
    fn offset_out_of_range() {
        let lr = labeled(200, &[(5, 43)]);
        assert!(matches!(apply_time_offset(&lr, -10), Err(ImuError::OutOfRange { .. })));
    }

    #[test]
    fn offset_roundtrip_restores() {
        let lr = labeled(300, &[(50, 88), (120, 158)]);
        for k in [-20i64, -1, 3, 25] {
            let back = apply_time_offset(&apply_time_offset(&lr, k).unwrap(), -k).unwrap();
            assert_eq!(back.lifts, lr.lifts);
            assert_eq!(back.applied_offset_frames, 0);
        }
    }

    /// Brute-force oracle: evaluate every lag directly on the two series.
    fn brute_force_best_lag(scores: &[f64], ind: &[f64], max_lag: i64) -> i64 {
        let len = scores.len() as i64;
        let mut lags: Vec<i64> = (-max_lag..=max_lag).collect();
        lags.sort_by_key(|&l| (l.abs(), l));
        let mut best = (f64::NEG_INFINITY, 0i64);
        for lag in lags {
            let mut c = 0.0;
            for j in 0..len {
                let i = j + lag;
                if i >= 0 && i < len {
                    c += scores[i as usize] * ind[j as usize];
                }
            }
            if c > best.0 {
                best = (c, lag);
            }
        }
        best.1
    }

    #[test]
    fn estimate_recovers_injected_shift() {
        let lr = labeled(400, &[(100, 138), (250, 288)]);
        let ind = lr.indicator();
        for s in [-25i64, -7, -1, 0, 1, 7, 25] {
            // scores show the lift `s` frames away from where the labels say
            let shifted = apply_time_offset(&lr, s).unwrap();
            let scores = shifted.indicator();
            let est = estimate_time_offset(&scores, &lr, 25).unwrap();
            assert_eq!(est, s, "injected shift {s}");
            assert_eq!(est, brute_force_best_lag(&scores, &ind, 25));
        }
    }

    #[test]
    fn estimate_perfect_alignment_is_zero() {
        let lr = labeled(400, &[(100, 138)]);
        assert_eq!(estimate_time_offset(&lr.indicator(), &lr, 25).unwrap(), 0);
    }

    #[test]
    fn estimate_degenerate_inputs() {
        let lr = labeled(400, &[(100, 138)]);
        assert!(matches!(
            estimate_time_offset(&vec![0.7; 400], &lr, 25),
            Err(ImuError::DegenerateSignal(_))
        ));
        let empty = labeled(400, &[]);
        assert!(matches!(
            estimate_time_offset(&lr.indicator(), &empty, 25),
            Err(ImuError::DegenerateSignal(_))
        ));
    }

    fn rot_z_deg(deg: f64) -> Matrix3<f64> {
        let (s, c) = deg.to_radians().sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn placement_fix_rotates_one_sensor() {
        let rec = recording_with(3, |_, ch| {
            // upper_back accel = (1,2,3), gyro = (1,0,0)
            let base = 3 * CHANNELS_PER_SENSOR;
            ch[base] = 1.0;
            ch[base + 1] = 2.0;
            ch[base + 2] = 3.0;
            ch[base + 3] = 1.0;
        });
        let fix = PlacementFix::new(SensorId::UpperBack, rot_z_deg(180.0)).unwrap();
        let fixed = apply_placement_fix(&rec, &fix).unwrap();
        let base = 3 * CHANNELS_PER_SENSOR;
        let a = &fixed.frames[0].channels[base..base + 3];
        assert!((a[0] + 1.0).abs() < 1e-12 && (a[1] + 2.0).abs() < 1e-12 && (a[2] - 3.0).abs() < 1e-12);
        // other sensors untouched
        assert_eq!(fixed.frames[0].channels[..base], rec.frames[0].channels[..base]);

        let fix90 = PlacementFix::new(SensorId::UpperBack, rot_z_deg(90.0)).unwrap();
        let g = apply_placement_fix(&rec, &fix90).unwrap().frames[0].gyro(3);
        assert!((g[0]).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12 && g[2].abs() < 1e-12);
    }

    #[test]
    fn placement_fix_identity_and_roundtrip() {
        let rec = recording_with(5, |i, ch| {
            for (k, v) in ch.iter_mut().enumerate() {
                *v = (i * 37 + k) as f64 * 0.13 - 2.0;
            }
        });
        let ident = PlacementFix::new(SensorId::Waist, Matrix3::identity()).unwrap();
        assert_eq!(apply_placement_fix(&rec, &ident).unwrap(), rec);

        let fix = PlacementFix::new(SensorId::RightThigh, rot_z_deg(90.0)).unwrap();
        let restored =
            apply_placement_fix(&apply_placement_fix(&rec, &fix).unwrap(), &fix.inverse()).unwrap();
        for (f0, f1) in rec.frames.iter().zip(&restored.frames) {
            for (a, b) in f0.channels.iter().zip(&f1.channels) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn placement_fix_rejects_inactive_sensor_and_bad_rotation() {
        let rec = restrict_sensors(&recording_with(3, |_, _| {}), &[SensorId::LeftWrist]).unwrap();
        let fix = PlacementFix::new(SensorId::Waist, Matrix3::identity()).unwrap();
        assert!(matches!(apply_placement_fix(&rec, &fix), Err(ImuError::SensorMissing(_))));
        assert!(PlacementFix::new(SensorId::Waist, Matrix3::identity() * 2.0).is_err());
        // reflection has det −1
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(PlacementFix::new(SensorId::Waist, refl).is_err());
    }

    #[test]
    fn anomaly_detected_for_flipped_sensor() {
        let rec = recording_with(50, |_, ch| {
            ch[2] = GRAVITY; // left_wrist reads +z (reference)
            let base = 3 * CHANNELS_PER_SENSOR;
            ch[base + 2] = -GRAVITY; // upper_back reads −z (flipped)
        });
        let fix = detect_placement_anomaly(
            &rec,
            SensorId::UpperBack,
            SensorId::LeftWrist,
            0..50,
            DEFAULT_ANOMALY_THRESHOLD_DEG,
        )
        .unwrap()
        .expect("should flag anomaly");
        // brute force over the group: the chosen rotation must realign
        // gravity exactly and be the first minimizer in enumeration order
        let dir = Vector3::new(0.0, 0.0, -1.0);
        let target = Vector3::new(0.0, 0.0, 1.0);
        assert!(((fix.rotation() * dir) - target).norm() < 1e-12);
        let first_minimizer = axis_aligned_rotations()
            .into_iter()
            .find(|r| ((r * dir) - target).norm() < 1e-12)
            .unwrap();
        assert_eq!(fix.rotation(), &first_minimizer);
    }

    #[test]
    fn anomaly_absent_when_aligned() {
        let rec = recording_with(50, |_, ch| {
            for base in [0, 3 * CHANNELS_PER_SENSOR] {
                ch[base + 2] = GRAVITY;
            }
        });
        let fix = detect_placement_anomaly(
            &rec,
            SensorId::UpperBack,
            SensorId::LeftWrist,
            0..50,
            DEFAULT_ANOMALY_THRESHOLD_DEG,
        )
        .unwrap();
        assert!(fix.is_none());
    }

    #[test]
    fn anomaly_not_still() {
        let rec = recording_with(50, |_, _| {});
        assert!(matches!(
            detect_placement_anomaly(
                &rec,
                SensorId::UpperBack,
                SensorId::LeftWrist,
                0..50,
                DEFAULT_ANOMALY_THRESHOLD_DEG
            ),
            Err(ImuError::NotStill(_))
        ));
    }

    #[test]
    fn anomaly_window_too_short() {
        let rec = recording_with(50, |_, ch| ch[2] = GRAVITY);
        assert!(detect_placement_anomaly(
            &rec,
            SensorId::UpperBack,
            SensorId::LeftWrist,
            0..10,
            DEFAULT_ANOMALY_THRESHOLD_DEG
        )
        .is_err());
    }

    #[test]
    fn restrict_keeps_layout_order() {
        let rec = recording_with(2, |_, ch| {
            for (k, v) in ch.iter_mut().enumerate() {
                *v = k as f64;
            }
        });
        let sub = restrict_sensors(&rec, &[SensorId::UpperBack, SensorId::LeftWrist]).unwrap();
        assert_eq!(sub.active_sensors, vec![SensorId::LeftWrist, SensorId::UpperBack]);
        assert_eq!(sub.n_channels(), 12);
        assert_eq!(sub.frames[0].channels[0], 0.0);
        assert_eq!(sub.frames[0].channels[6], 18.0);
    }

    #[test]
    fn rotation_group_has_24_distinct_elements() {
        let rots = axis_aligned_rotations();
        assert_eq!(rots.len(), 24);
        for (i, a) in rots.iter().enumerate() {
            for b in &rots[i + 1..] {
                assert!((a - b).abs().max() > 0.5);
            }
        }
    }
}
