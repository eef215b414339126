use nalgebra::Vector3;

use super::{ControlInputs, FlightParams, FlightState};
use crate::math::wrap_angle;

/// Per-axis PD gains for the position and attitude loops.
///
/// Position gains act on acceleration (1/s^2, 1/s); attitude gains produce
/// torque directly (N m/rad, N m s/rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightGains {
    pub pos_kp: Vector3<f64>,
    pub pos_kd: Vector3<f64>,
    pub att_kp: Vector3<f64>,
    pub att_kd: Vector3<f64>,
    /// Largest roll/pitch the position loop may request, rad.
    pub max_tilt: f64,
}

impl FlightGains {
    pub const DEFAULT_POSITION_BANDWIDTH: f64 = 2.0;
    pub const DEFAULT_ATTITUDE_BANDWIDTH: f64 = 12.0;

    /// Critically damped poles on the linearized hover model: each attitude
    /// axis is `I_ii * q_dd = torque`, each position axis a double integrator.
    pub fn critically_damped(params: &FlightParams, position_wn: f64, attitude_wn: f64) -> Self {
        let diag = params.inertia.diagonal();
        Self {
            pos_kp: Vector3::repeat(position_wn * position_wn),
            pos_kd: Vector3::repeat(2.0 * position_wn),
            att_kp: diag * attitude_wn * attitude_wn,
            att_kd: diag * 2.0 * attitude_wn,
            max_tilt: 0.5,
        }
    }
}

/// Attitude setpoint with feedforward, bypassing the horizontal position
/// loop (stick-style attitude flying). Altitude stays regulated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudeTarget {
    pub angles: Vector3<f64>,
    pub rates: Vector3<f64>,
    pub accels: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlightReference {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub yaw: f64,
    pub attitude: Option<AttitudeTarget>,
}

impl FlightReference {
    pub fn hold(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            yaw,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub inputs: ControlInputs,
    /// Attitude targets that produced the torques.
    pub attitude_target: Vector3<f64>,
    /// Tilt or thrust limits were active.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightController {
    pub params: FlightParams,
    pub gains: FlightGains,
    /// Upper bound on collective thrust, N.
    pub thrust_max: f64,
}

impl FlightController {
    pub fn new(params: FlightParams, gains: FlightGains, thrust_max: f64) -> Self {
        Self {
            params,
            gains,
            thrust_max,
        }
    }

    pub fn compute(&self, state: &FlightState, reference: &FlightReference) -> ControllerOutput {
        let p = &self.params;
        let g = &self.gains;
        let mut saturated = false;

        let pos_err = reference.position - state.position;
        let vel_err = reference.velocity - state.velocity;
        let accel = reference.acceleration + g.pos_kp.component_mul(&pos_err) + g.pos_kd.component_mul(&vel_err);

        let target = match reference.attitude {
            Some(t) => t,
            None => {
                let (s, c) = reference.yaw.sin_cos();
                let mut roll = (accel.x * s - accel.y * c) / p.gravity;
                let mut pitch = (accel.x * c + accel.y * s) / p.gravity;
                if roll.abs() > g.max_tilt || pitch.abs() > g.max_tilt {
                    saturated = true;
                    roll = roll.clamp(-g.max_tilt, g.max_tilt);
                    pitch = pitch.clamp(-g.max_tilt, g.max_tilt);
                }
                AttitudeTarget {
                    angles: Vector3::new(roll, pitch, reference.yaw),
                    ..Default::default()
                }
            }
        };

        let (phi, theta) = (state.attitude.x, state.attitude.y);
        let tilt = (phi.cos() * theta.cos()).max(0.2);
        let mut u1 = p.mass * (p.gravity + accel.z) / tilt;
        if !(0.0..=self.thrust_max).contains(&u1) {
            saturated = true;
            u1 = u1.clamp(0.0, self.thrust_max);
        }

        let mut att_err = target.angles - state.attitude;
        att_err.z = wrap_angle(att_err.z);
        let rate_err = target.rates - state.attitude_rate;
        let torque = p.inertia.diagonal().component_mul(&target.accels)
            + g.att_kp.component_mul(&att_err)
            + g.att_kd.component_mul(&rate_err);

        ControllerOutput {
            inputs: ControlInputs {
                u1,
                u2: torque.x,
                u3: torque.y,
                u4: torque.z,
            },
            attitude_target: target.angles,
            saturated,
        }
    }
}
