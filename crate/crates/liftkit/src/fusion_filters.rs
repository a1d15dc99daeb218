//! Quaternion attitude estimation per sensor: Mahony complementary filter
//! and a quaternion EKF, plus the derived-channel preprocessing stage.
//!
//! Conventions: the quaternion rotates body vectors into the world frame;
//! world z is up, so a stationary accelerometer reads (0, 0, +9.81) m/s².
//! Operation is magnetometer-free, so yaw is unobservable; initialization is
//! tilt-aligned with yaw = 0.

use crate::imu_core::{Frame, Recording, CHANNELS_PER_SENSOR};
use crate::GRAVITY;
use nalgebra::{Matrix3x4, Matrix4, Vector3, Vector4};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("quaternion norm {0} outside unit tolerance")]
    Norm(f64),
    #[error("zero acceleration: gravity direction unobservable")]
    Freefall,
    #[error("innovation covariance is singular")]
    SingularUpdate,
    #[error("filter error at frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<FilterError>,
    },
}

pub type Result<T> = std::result::Result<T, FilterError>;

const UNIT_NORM_TOL: f64 = 1e-6;

/// Unit rotation quaternion, scalar-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle_rad: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (angle_rad / 2.0).sin_cos();
        Quaternion { w: c, x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }

    /// Shortest-arc rotation taking `from` to `to` (both need not be unit).
    pub fn between(from: Vector3<f64>, to: Vector3<f64>) -> Self {
        let f = from.normalize();
        let t = to.normalize();
        let w = 1.0 + f.dot(&t);
        if w < 1e-12 {
            // antiparallel: 180° about any axis orthogonal to `from`
            let axis = if f.x.abs() < 0.9 {
                f.cross(&Vector3::x()).normalize()
            } else {
                f.cross(&Vector3::y()).normalize()
            };
            return Quaternion { w: 0.0, x: axis.x, y: axis.y, z: axis.z };
        }
        let axis = f.cross(&t);
        Quaternion { w, x: axis.x, y: axis.y, z: axis.z }.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quaternion {
        let n = self.norm();
        Quaternion { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(&self) -> Quaternion {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product.
    pub fn mul(&self, r: &Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            x: self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            y: self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            z: self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        }
    }

    /// Angle of the relative rotation to `other`, radians.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let d = self.conjugate().mul(other);
        2.0 * d.w.abs().clamp(0.0, 1.0).acos()
    }

    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    fn from_vector(v: Vector4<f64>) -> Quaternion {
        Quaternion { w: v[0], x: v[1], y: v[2], z: v[3] }
    }
}

/// Rotates `v` by the unit quaternion `q` (computes q·v·q⁻¹).
pub fn quat_rotate(q: &Quaternion, v: Vector3<f64>) -> Result<Vector3<f64>> {
    let n = q.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(FilterError::Norm(n));
    }
    Ok(quat_rotate_unchecked(q, v))
}

fn quat_rotate_unchecked(q: &Quaternion, v: Vector3<f64>) -> Vector3<f64> {
    let u = Vector3::new(q.x, q.y, q.z);
    let uv = u.cross(&v);
    v + 2.0 * (q.w * uv + u.cross(&uv))
}

/// First-order gyro strapdown step: q' = normalize(q + ½·q⊗(0, ω)·dt).
pub fn integrate_gyro(q: &Quaternion, omega: Vector3<f64>, dt: f64) -> Quaternion {
    assert!(dt > 0.0, "dt must be positive");
    let dq = q.mul(&Quaternion::new(0.0, omega.x, omega.y, omega.z));
    Quaternion {
        w: q.w + 0.5 * dq.w * dt,
        x: q.x + 0.5 * dq.x * dt,
        y: q.y + 0.5 * dq.y * dt,
        z: q.z + 0.5 * dq.z * dt,
    }
    .normalized()
}

/// Expected gravity direction in the body frame for attitude `q`
/// (the world +z axis rotated into the body).
fn predicted_gravity(q: &Quaternion) -> Vector3<f64> {
    quat_rotate_unchecked(&q.conjugate(), Vector3::z())
}

pub const DEFAULT_MAHONY_KP: f64 = 1.0;
pub const DEFAULT_MAHONY_KI: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahonyState {
    pub q: Quaternion,
    pub integral_error: Vector3<f64>,
    pub kp: f64,
    pub ki: f64,
    /// Fall back to gyro-only integration on zero acceleration instead of
    /// returning [`FilterError::Freefall`].
    pub allow_freefall: bool,
}

impl MahonyState {
    pub fn new(q: Quaternion, kp: f64, ki: f64) -> Self {
        assert!(kp >= 0.0 && ki >= 0.0, "gains must be non-negative");
        MahonyState { q, integral_error: Vector3::zeros(), kp, ki, allow_freefall: false }
    }
}

/// One Mahony step; also returns the corrected body rate ω' used for the
/// attitude update (a bias-corrected angular-rate signal).
pub fn mahony_step_full(
    s: &MahonyState,
    gyro: Vector3<f64>,
    accel: Vector3<f64>,
    dt: f64,
) -> Result<(MahonyState, Vector3<f64>)> {
    assert!(dt > 0.0, "dt must be positive");
    let norm = accel.norm();
    if norm == 0.0 {
        if !s.allow_freefall {
            return Err(FilterError::Freefall);
        }
        let q = integrate_gyro(&s.q, gyro, dt);
        return Ok((MahonyState { q, ..*s }, gyro));
    }
    let measured = accel / norm;
    let error = measured.cross(&predicted_gravity(&s.q));
    let integral_error = s.integral_error + s.ki * error * dt;
    let corrected = gyro + s.kp * error + integral_error;
    let q = integrate_gyro(&s.q, corrected, dt);
    Ok((MahonyState { q, integral_error, ..*s }, corrected))
}

pub fn mahony_step(
    s: &MahonyState,
    gyro: Vector3<f64>,
    accel: Vector3<f64>,
    dt: f64,
) -> Result<MahonyState> {
    mahony_step_full(s, gyro, accel, dt).map(|(s, _)| s)
}

pub const DEFAULT_EKF_SIGMA_G: f64 = 0.3;
pub const DEFAULT_EKF_SIGMA_A: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub q: Quaternion,
    pub covariance: Matrix4<f64>,
    pub gyro_noise_var: f64,
    pub accel_noise_var: f64,
}

impl EkfState {
    pub fn new(q: Quaternion, gyro_noise_var: f64, accel_noise_var: f64) -> Self {
        assert!(gyro_noise_var > 0.0 && accel_noise_var > 0.0, "noise variances must be positive");
        EkfState {
            q,
            covariance: Matrix4::identity() * 1e-2,
            gyro_noise_var,
            accel_noise_var,
        }
    }

    pub fn with_defaults(q: Quaternion) -> Self {
        EkfState::new(
            q,
            DEFAULT_EKF_SIGMA_G * DEFAULT_EKF_SIGMA_G,
            DEFAULT_EKF_SIGMA_A * DEFAULT_EKF_SIGMA_A,
        )
    }
}

/// 4×4 quaternion-rate matrix Ω(ω) with q̇ = ½ Ω q.
fn omega_matrix(w: Vector3<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -w.x, -w.y, -w.z, //
        w.x, 0.0, w.z, -w.y, //
        w.y, -w.z, 0.0, w.x, //
        w.z, w.y, -w.x, 0.0,
    )
}

/// Jacobian of the predicted gravity direction h(q) w.r.t. (w, x, y, z).
fn gravity_jacobian(q: &Quaternion) -> Matrix3x4<f64> {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    Matrix3x4::new(
        -2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x, //
        2.0 * x, 2.0 * w, 2.0 * z, 2.0 * y, //
        0.0, -4.0 * x, -4.0 * y, 0.0,
    )
}

/// Predict–update EKF step. The measurement model maps attitude to the
/// expected gravity direction; a zero acceleration sample skips the update.
pub fn ekf_step(
    s: &EkfState,
    gyro: Vector3<f64>,
    accel: Vector3<f64>,
    dt: f64,
) -> Result<EkfState> {
    assert!(dt > 0.0, "dt must be positive");
    // predict
    let q_pred = integrate_gyro(&s.q, gyro, dt);
    let f = Matrix4::identity() + omega_matrix(gyro) * (0.5 * dt);
    let process_noise = Matrix4::identity() * (s.gyro_noise_var * (0.5 * dt) * (0.5 * dt));
    let p_pred = f * s.covariance * f.transpose() + process_noise;

    let norm = accel.norm();
    if norm == 0.0 {
        return Ok(EkfState { q: q_pred, covariance: symmetrize(p_pred), ..*s });
    }

    // update
    let innovation = accel / norm - predicted_gravity(&q_pred);
    let h = gravity_jacobian(&q_pred);
    let innovation_cov = h * p_pred * h.transpose() + Matrix3::identity() * s.accel_noise_var;
    let inv = innovation_cov.try_inverse().ok_or(FilterError::SingularUpdate)?;
    let gain = p_pred * h.transpose() * inv;
    let q = Quaternion::from_vector(q_pred.as_vector() + gain * innovation).normalized();
    let p = (Matrix4::identity() - gain * h) * p_pred;
    Ok(EkfState { q, covariance: symmetrize(p), ..*s })
}

use nalgebra::Matrix3;

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Attitude-filter selection for the preprocessing stage.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum FilterKind {
    None,
    Mahony { kp: f64, ki: f64 },
    Ekf { sigma_g: f64, sigma_a: f64 },
}

impl FilterKind {
    pub fn mahony_default() -> Self {
        FilterKind::Mahony { kp: DEFAULT_MAHONY_KP, ki: DEFAULT_MAHONY_KI }
    }

    pub fn ekf_default() -> Self {
        FilterKind::Ekf { sigma_g: DEFAULT_EKF_SIGMA_G, sigma_a: DEFAULT_EKF_SIGMA_A }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::None => "none",
            FilterKind::Mahony { .. } => "mahony",
            FilterKind::Ekf { .. } => "ekf",
        }
    }

    pub fn parse(s: &str) -> Option<FilterKind> {
        match s {
            "none" => Some(FilterKind::None),
            "mahony" => Some(FilterKind::mahony_default()),
            "ekf" => Some(FilterKind::ekf_default()),
            _ => None,
        }
    }
}

/// Tilt-aligned initial attitude with yaw = 0, from the first accel sample.
pub fn init_attitude(first_accel: Vector3<f64>) -> Quaternion {
    if first_accel.norm() == 0.0 {
        return Quaternion::IDENTITY;
    }
    // choose q with R(q)ᵀ z = accel direction, i.e. rotate accel onto world z
    Quaternion::between(first_accel, Vector3::z())
}

/// Runs the chosen filter over every sensor independently and replaces each
/// sensor's 6 channels with derived ones: world-frame linear acceleration
/// (gravity removed) and a bias-corrected angular rate (Mahony) or the raw
/// gyro (EKF). The 6-channels-per-sensor shape is preserved.
pub fn apply_filter(recording: &Recording, kind: FilterKind) -> Result<Recording> {
    if kind == FilterKind::None {
        return Ok(recording.clone());
    }
    let dt = 1.0 / recording.sample_rate_hz;
    let n_sensors = recording.active_sensors.len();
    let mut frames: Vec<Frame> = recording
        .frames
        .iter()
        .map(|f| Frame { channels: vec![0.0; f.channels.len()] })
        .collect();

    for slot in 0..n_sensors {
        let base = slot * CHANNELS_PER_SENSOR;
        let first = recording.frames[0].accel(slot);
        let q0 = init_attitude(Vector3::from(first));

        enum State {
            Mahony(MahonyState),
            Ekf(EkfState),
        }
        let mut state = match kind {
            FilterKind::Mahony { kp, ki } => {
                let mut s = MahonyState::new(q0, kp, ki);
                s.allow_freefall = true;
                State::Mahony(s)
            }
            FilterKind::Ekf { sigma_g, sigma_a } => {
                State::Ekf(EkfState::new(q0, sigma_g * sigma_g, sigma_a * sigma_a))
            }
            FilterKind::None => unreachable!(),
        };

        for (i, frame) in recording.frames.iter().enumerate() {
            let accel = Vector3::from(frame.accel(slot));
            let gyro = Vector3::from(frame.gyro(slot));
            let at_frame =
                |e: FilterError| FilterError::AtFrame { frame: i, source: Box::new(e) };
            let (q, rate) = match &mut state {
                State::Mahony(s) => {
                    let (next, corrected) =
                        mahony_step_full(s, gyro, accel, dt).map_err(at_frame)?;
                    *s = next;
                    (s.q, corrected)
                }
                State::Ekf(s) => {
                    *s = ekf_step(s, gyro, accel, dt).map_err(at_frame)?;
                    (s.q, gyro)
                }
            };
            let linear = quat_rotate_unchecked(&q, accel) - Vector3::new(0.0, 0.0, GRAVITY);
            let out = &mut frames[i].channels[base..base + CHANNELS_PER_SENSOR];
            out[0] = linear.x;
            out[1] = linear.y;
            out[2] = linear.z;
            out[3] = rate.x;
            out[4] = rate.y;
            out[5] = rate.z;
        }
    }
    Ok(Recording { frames, ..recording.clone() })
}
