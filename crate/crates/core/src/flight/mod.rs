//! Flight mode: rotor mixing, rigid-body dynamics in Euler angles and a
//! cascaded PD controller.

mod control;
mod dynamics;
mod mixer;

pub use control::{AttitudeTarget, ControllerOutput, FlightController, FlightGains, FlightReference};
pub use dynamics::{
    body_rates, euler_rate_matrix, flight_derivative, rotation_matrix, rotational_kinetic_energy,
    step_rk4, FlightVector, PITCH_GUARD,
};
pub use mixer::{mix_forces, Allocation, Mixer};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlightError {
    #[error("invalid flight parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("pitch {pitch:.4} rad inside the gimbal-lock guard band")]
    Singularity { pitch: f64 },
    #[error("infeasible allocation: required thrusts {unclamped:?}")]
    Allocation { unclamped: [f64; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    /// Diagonal propeller distance used as the torque arm in the mixer, m.
    pub prop_distance: f64,
    pub gravity: f64,
}

impl Default for FlightParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.020, 0.020, 0.035)),
            prop_distance: 0.22,
            gravity: 9.81,
        }
    }
}

impl FlightParams {
    pub fn validate(&self) -> Result<(), FlightError> {
        let bad = |field, reason: &str| FlightError::InvalidParams {
            field,
            reason: reason.to_string(),
        };
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(bad("mass", "must be positive"));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(bad("gravity", "must be positive"));
        }
        if !(self.prop_distance > 0.0 && self.prop_distance.is_finite()) {
            return Err(bad("prop_distance", "must be positive"));
        }
        let asym = (self.inertia - self.inertia.transpose()).abs().max();
        if asym > 1e-12 * self.inertia.abs().max() {
            return Err(bad("inertia", "must be symmetric"));
        }
        if self.inertia.cholesky().is_none() {
            return Err(bad("inertia", "must be positive definite"));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Rigid-body state in the inertial frame (z up).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlightState {
    pub position: Vector3<f64>,
    /// Roll, pitch, yaw (Z-Y-X convention), rad.
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Euler angle rates, rad/s.
    pub attitude_rate: Vector3<f64>,
}

impl FlightState {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            attitude: Vector3::new(0.0, 0.0, yaw),
            ..Default::default()
        }
    }

    pub fn to_vector(&self) -> FlightVector {
        let mut v = FlightVector::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.position);
        v.fixed_rows_mut::<3>(3).copy_from(&self.attitude);
        v.fixed_rows_mut::<3>(6).copy_from(&self.velocity);
        v.fixed_rows_mut::<3>(9).copy_from(&self.attitude_rate);
        v
    }

    pub fn from_vector(v: &FlightVector) -> Self {
        Self {
            position: v.fixed_rows::<3>(0).into_owned(),
            attitude: v.fixed_rows::<3>(3).into_owned(),
            velocity: v.fixed_rows::<3>(6).into_owned(),
            attitude_rate: v.fixed_rows::<3>(9).into_owned(),
        }
    }
}

/// Collective thrust and body torques.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInputs {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
}

impl ControlInputs {
    pub fn hover(params: &FlightParams) -> Self {
        Self {
            u1: params.hover_thrust(),
            ..Default::default()
        }
    }

    pub fn torques(&self) -> Vector3<f64> {
        Vector3::new(self.u2, self.u3, self.u4)
    }
}
