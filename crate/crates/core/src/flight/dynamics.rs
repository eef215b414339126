use nalgebra::{Matrix3, Rotation3, SVector, Vector3};

use super::{ControlInputs, FlightError, FlightParams, FlightState};
use crate::math::rk4_step;

/// `[r, q, r_dot, q_dot]` stacked.
pub type FlightVector = SVector<f64, 12>;

/// Pitch magnitude beyond which the Euler-rate map is treated as singular.
pub const PITCH_GUARD: f64 = 85.0 * std::f64::consts::PI / 180.0;

/// Body-to-inertial rotation `Rz(psi) Ry(theta) Rx(phi)`.
pub fn rotation_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_euler_angles(attitude.x, attitude.y, attitude.z).into_inner()
}

/// Maps Euler angle rates to body angular rates: `w_b = G(q) q_dot`.
pub fn euler_rate_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = attitude.x.sin_cos();
    let (st, ct) = attitude.y.sin_cos();
    Matrix3::new(
        1.0, 0.0, -st, //
        0.0, cp, sp * ct, //
        0.0, -sp, cp * ct,
    )
}

/// Time derivative of `G(q)` along `q_dot`, applied to `q_dot`.
fn euler_rate_matrix_dot_times(attitude: &Vector3<f64>, rate: &Vector3<f64>) -> Vector3<f64> {
    let (sp, cp) = attitude.x.sin_cos();
    let (st, ct) = attitude.y.sin_cos();
    let (dp, dt) = (rate.x, rate.y);
    let g_dot = Matrix3::new(
        0.0, 0.0, -ct * dt, //
        0.0, -sp * dp, cp * ct * dp - sp * st * dt, //
        0.0, -cp * dp, -sp * ct * dp - cp * st * dt,
    );
    g_dot * rate
}

/// Inverse of [`euler_rate_matrix`], valid away from `|theta| = pi/2`.
fn euler_rate_matrix_inverse(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = attitude.x.sin_cos();
    let (st, ct) = attitude.y.sin_cos();
    let tt = st / ct;
    Matrix3::new(
        1.0, sp * tt, cp * tt, //
        0.0, cp, -sp, //
        0.0, sp / ct, cp / ct,
    )
}

pub fn body_rates(state: &FlightState) -> Vector3<f64> {
    euler_rate_matrix(&state.attitude) * state.attitude_rate
}

/// `1/2 w_b^T I w_b`.
pub fn rotational_kinetic_energy(state: &FlightState, params: &FlightParams) -> f64 {
    let w = body_rates(state);
    0.5 * w.dot(&(params.inertia * w))
}

/// Rigid-body derivative.
///
/// Translation: `m r_dd = R(q) [0, 0, U1] - m g z`. Rotation uses Euler's
/// equations on the body rates `w_b = G(q) q_dot`,
/// `I w_b_dot = [U2, U3, U4] - w_b x (I w_b)`, mapped back to angle
/// accelerations through `G^-1`.
pub fn flight_derivative(
    state: &FlightState,
    u: &ControlInputs,
    params: &FlightParams,
) -> Result<FlightVector, FlightError> {
    let q = &state.attitude;
    if q.y.is_nan() || q.y.abs() > PITCH_GUARD {
        return Err(FlightError::Singularity { pitch: q.y });
    }
    let r = rotation_matrix(q);
    let accel = r * Vector3::new(0.0, 0.0, u.u1 / params.mass) - Vector3::new(0.0, 0.0, params.gravity);

    let w = euler_rate_matrix(q) * state.attitude_rate;
    let iw = params.inertia * w;
    let inertia_inv = params
        .inertia
        .try_inverse()
        .ok_or(FlightError::InvalidParams {
            field: "inertia",
            reason: "singular".into(),
        })?;
    let w_dot = inertia_inv * (u.torques() - w.cross(&iw));
    let q_dd = euler_rate_matrix_inverse(q) * (w_dot - euler_rate_matrix_dot_times(q, &state.attitude_rate));

    let mut d = FlightVector::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&state.velocity);
    d.fixed_rows_mut::<3>(3).copy_from(&state.attitude_rate);
    d.fixed_rows_mut::<3>(6).copy_from(&accel);
    d.fixed_rows_mut::<3>(9).copy_from(&q_dd);
    Ok(d)
}

/// One RK4 step with the input held over the interval.
pub fn step_rk4(
    state: &FlightState,
    u: &ControlInputs,
    params: &FlightParams,
    dt: f64,
) -> Result<FlightState, FlightError> {
    let x = state.to_vector();
    let next = rk4_step(0.0, &x, dt, |_, x| flight_derivative(&FlightState::from_vector(x), u, params))?;
    Ok(FlightState::from_vector(&next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn params() -> FlightParams {
        FlightParams::default()
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = params();
        let s = FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let d = flight_derivative(&s, &ControlInputs::hover(&p), &p).unwrap();
        assert!(d.amax() < 1e-14);
    }

    #[test]
    fn free_fall() {
        let p = params();
        let s = FlightState::default();
        let d = flight_derivative(&s, &ControlInputs::default(), &p).unwrap();
        assert_eq!(d[8], -p.gravity);
        assert_eq!(d[6], 0.0);
        assert_eq!(d[7], 0.0);
    }

    #[test]
    fn pure_yaw_torque_on_diagonal_inertia() {
        let p = params();
        let u = ControlInputs { u1: 0.0, u2: 0.0, u3: 0.0, u4: 0.07 };
        let d = flight_derivative(&FlightState::default(), &u, &p).unwrap();
        assert!((d[11] - 0.07 / p.inertia[(2, 2)]).abs() < 1e-15);
        assert_eq!(d[9], 0.0);
        assert_eq!(d[10], 0.0);
    }

    #[test]
    fn guard_band_raises_singularity() {
        let p = params();
        let mut s = FlightState::default();
        s.attitude.y = 86f64.to_radians();
        assert!(matches!(
            flight_derivative(&s, &ControlInputs::hover(&p), &p),
            Err(FlightError::Singularity { .. })
        ));
    }

    #[test]
    fn euler_rate_inverse_is_inverse() {
        let q = Vector3::new(0.3, -0.7, 1.2);
        let prod = euler_rate_matrix(&q) * euler_rate_matrix_inverse(&q);
        assert!((prod - Matrix3::identity()).amax() < 1e-14);
    }

    #[test]
    fn derivative_matches_central_difference_of_trajectory() {
        // (x(t+h) - x(t-h)) / 2h reproduces f(x) to O(h^2).
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..50 {
            let s = FlightState {
                position: Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0),
                attitude: Vector3::new(
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-3.0..3.0),
                ),
                velocity: Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                attitude_rate: Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            };
            let u = ControlInputs {
                u1: rng.random_range(0.0..30.0),
                u2: rng.random_range(-0.5..0.5),
                u3: rng.random_range(-0.5..0.5),
                u4: rng.random_range(-0.1..0.1),
            };
            let f = flight_derivative(&s, &u, &p).unwrap();
            let fwd = step_rk4(&s, &u, &p, h).unwrap().to_vector();
            let bwd = step_rk4(&s, &u, &p, -h).unwrap().to_vector();
            let fd = (fwd - bwd) / (2.0 * h);
            for i in 0..12 {
                let scale = f[i].abs().max(1.0);
                assert!((fd[i] - f[i]).abs() / scale < 1e-5, "component {i}: {} vs {}", fd[i], f[i]);
            }
        }
    }

    #[test]
    fn torque_free_rotation_conserves_kinetic_energy() {
        let p = FlightParams {
            inertia: Matrix3::from_diagonal(&Vector3::new(0.020, 0.025, 0.035)),
            ..params()
        };
        let mut s = FlightState {
            attitude_rate: Vector3::new(0.1, 0.05, 2.0),
            ..Default::default()
        };
        let e0 = rotational_kinetic_energy(&s, &p);
        let u = ControlInputs::default();
        for _ in 0..5000 {
            s = step_rk4(&s, &u, &p, 1e-3).unwrap();
        }
        let e1 = rotational_kinetic_energy(&s, &p);
        assert!(((e1 - e0) / e0).abs() < 1e-6);
    }

    #[test]
    fn hover_does_not_drift() {
        let p = params();
        let s0 = FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.4);
        let u = ControlInputs::hover(&p);
        let mut s = s0;
        for _ in 0..10_000 {
            s = step_rk4(&s, &u, &p, 1e-3).unwrap();
        }
        assert!((s.position - s0.position).norm() < 1e-9);
    }
}
