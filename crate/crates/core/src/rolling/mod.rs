//! Rolling mode: planar unicycle kinematics, rotor-differential yaw torque
//! and finite-horizon tracking.

mod allocation;
mod cost;
mod model;
mod mpc;
mod optimizer;
mod oracle;

pub use allocation::{yaw_torque_from_thrusts, RollingActuation, RollingAllocator};
pub use cost::{evaluate_cost, evaluate_cost_with_targets, CostWeights, ReferenceTrajectory};
pub use model::{
    predict_euler, rk4_step, rollout, unicycle_derivative, unicycle_derivative_unchecked, unicycle_jacobians,
};
pub use mpc::{PathReference, RecedingHorizon};
pub use optimizer::{optimize_tracking, OptimizeResult, OptimizerOptions};
pub use oracle::{brute_force_oracle, InputGrid, OracleResult};

use nalgebra::Vector4;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RollingError {
    #[error("input ({alpha}, {omega}) outside limits (|alpha| <= {alpha_max}, |omega| <= {omega_max})")]
    InputOutOfBounds {
        alpha: f64,
        omega: f64,
        alpha_max: f64,
        omega_max: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("enumeration of {candidates} candidates exceeds the cap of {cap}")]
    EnumerationCap { candidates: u128, cap: u128 },
}

/// Planar state `[px, py, nu, theta]`; the vehicle stays on flat ground.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnicycleState {
    pub px: f64,
    pub py: f64,
    /// Forward speed, m/s.
    pub nu: f64,
    /// Heading, rad.
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(px: f64, py: f64, nu: f64, theta: f64) -> Self {
        Self { px, py, nu, theta }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.px, self.py, self.nu, self.theta)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Forward acceleration (m/s^2) and yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnicycleInput {
    pub alpha: f64,
    pub omega: f64,
}

impl UnicycleInput {
    pub fn new(alpha: f64, omega: f64) -> Self {
        Self { alpha, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputLimits {
    pub alpha_max: f64,
    pub omega_max: f64,
    /// Largest reference speed accepted, m/s.
    pub nu_max: f64,
}

impl Default for InputLimits {
    fn default() -> Self {
        Self {
            alpha_max: 1.0,
            omega_max: 2.0,
            nu_max: 0.5,
        }
    }
}

impl InputLimits {
    pub fn contains(&self, u: &UnicycleInput) -> bool {
        u.alpha.abs() <= self.alpha_max && u.omega.abs() <= self.omega_max
    }

    pub fn check(&self, u: &UnicycleInput) -> Result<(), RollingError> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(RollingError::InputOutOfBounds {
                alpha: u.alpha,
                omega: u.omega,
                alpha_max: self.alpha_max,
                omega_max: self.omega_max,
            })
        }
    }

    pub fn clamp(&self, u: &UnicycleInput) -> UnicycleInput {
        UnicycleInput {
            alpha: u.alpha.clamp(-self.alpha_max, self.alpha_max),
            omega: u.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}
