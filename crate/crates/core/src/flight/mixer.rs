use super::{ControlInputs, FlightError, FlightParams};
use crate::actuators::RotorParams;

/// Collective thrust and body torques from individual rotor thrusts and
/// drag torque magnitudes. Rotors 2 and 4 spin so that their reaction
/// torque is positive about body z.
pub fn mix_forces(thrusts: [f64; 4], torques: [f64; 4], prop_distance: f64) -> ControlInputs {
    let [f1, f2, f3, f4] = thrusts;
    let [t1, t2, t3, t4] = torques;
    ControlInputs {
        u1: f1 + f2 + f3 + f4,
        u2: (f2 - f4) * prop_distance / 2.0,
        u3: (f3 - f1) * prop_distance / 2.0,
        u4: t2 + t4 - t1 - t3,
    }
}

/// Rotor thrusts realizing a control input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub thrusts: [f64; 4],
    /// Set when at least one thrust hit the upper rotor limit.
    pub clamped: bool,
}

/// Mixer for a fixed airframe: torque arm, drag ratio and thrust limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixer {
    pub prop_distance: f64,
    /// `km / kf`, rotor drag torque per newton of thrust.
    pub torque_ratio: f64,
    pub thrust_max: f64,
}

impl Mixer {
    pub fn new(flight: &FlightParams, rotor: &RotorParams) -> Self {
        Self {
            prop_distance: flight.prop_distance,
            torque_ratio: rotor.torque_ratio(),
            thrust_max: rotor.thrust_max(),
        }
    }

    pub fn mix(&self, thrusts: [f64; 4]) -> ControlInputs {
        let torques = thrusts.map(|f| f * self.torque_ratio);
        mix_forces(thrusts, torques, self.prop_distance)
    }

    /// Solves the mixer for thrusts. Negative thrusts are infeasible and
    /// reported with the unclamped solution; thrusts above the rotor limit
    /// are clamped and flagged.
    pub fn inverse(&self, u: &ControlInputs) -> Result<Allocation, FlightError> {
        let d = self.prop_distance;
        let yaw = u.u4 / self.torque_ratio;
        let even = 0.5 * (u.u1 + yaw); // F2 + F4
        let odd = 0.5 * (u.u1 - yaw); // F1 + F3
        let roll = 2.0 * u.u2 / d; // F2 - F4
        let pitch = 2.0 * u.u3 / d; // F3 - F1
        let thrusts = [
            0.5 * (odd - pitch),
            0.5 * (even + roll),
            0.5 * (odd + pitch),
            0.5 * (even - roll),
        ];
        // Tolerate round-off at the zero boundary.
        let floor = -1e-12 * u.u1.abs().max(1.0);
        if thrusts.iter().any(|f| *f < floor || !f.is_finite()) {
            return Err(FlightError::Allocation { unclamped: thrusts });
        }
        let mut clamped = false;
        let thrusts = thrusts.map(|f| {
            if f > self.thrust_max {
                clamped = true;
                self.thrust_max
            } else {
                f.max(0.0)
            }
        });
        Ok(Allocation { thrusts, clamped })
    }
}
