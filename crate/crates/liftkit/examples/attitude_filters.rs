//! Track a known rotation with the Mahony and EKF attitude filters and
//! compare their errors against raw gyro integration under gyro bias.
//!
//! Run with: cargo run --example attitude_filters

use liftkit::fusion_filters::{
    ekf_step, integrate_gyro, mahony_step, quat_rotate, EkfState, MahonyState, Quaternion,
    DEFAULT_MAHONY_KI, DEFAULT_MAHONY_KP,
};
use liftkit::GRAVITY;
use nalgebra::Vector3;

const DT: f64 = 0.04; // 25 Hz
const BIAS: f64 = 0.03; // rad/s on the x gyro, the thing drift is made of

fn main() {
    let omega_true = Vector3::new(20f64.to_radians(), 0.0, 0.0);
    let omega_measured = omega_true + Vector3::new(BIAS, 0.0, 0.0);

    let mut q_true = Quaternion::IDENTITY;
    let mut open_loop = Quaternion::IDENTITY;
    let mut mahony = MahonyState::new(Quaternion::IDENTITY, DEFAULT_MAHONY_KP, DEFAULT_MAHONY_KI);
    let mut ekf = EkfState::with_defaults(Quaternion::IDENTITY);

    println!("{:>6} {:>12} {:>12} {:>12}", "t (s)", "gyro only", "mahony", "ekf");
    for step in 1..=750 {
        q_true = q_true.mul(&Quaternion::from_axis_angle(Vector3::x(), omega_true.x * DT));
        let accel = quat_rotate(&q_true.conjugate(), Vector3::z()).unwrap() * GRAVITY;

        open_loop = integrate_gyro(&open_loop, omega_measured, DT);
        mahony = mahony_step(&mahony, omega_measured, accel, DT).unwrap();
        ekf = ekf_step(&ekf, omega_measured, accel, DT).unwrap();

        if step % 125 == 0 {
            println!(
                "{:>6.1} {:>11.2}° {:>11.2}° {:>11.2}°",
                step as f64 * DT,
                open_loop.angle_to(&q_true).to_degrees(),
                mahony.q.angle_to(&q_true).to_degrees(),
                ekf.q.angle_to(&q_true).to_degrees()
            );
        }
    }
    println!("\ngyro-only drift grows without bound; both fused filters stay bounded");
}
