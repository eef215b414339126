use std::f64::consts::SQRT_2;

use super::{UnicycleInput, UnicycleState};
use crate::actuators::GearTrainParams;

/// Yaw torque from rotor thrusts in the rolling pose:
/// `(F1 + F2 - F3 - F4) * sqrt(2) * D / 4`.
pub fn yaw_torque_from_thrusts(thrusts: [f64; 4], frame_d: f64) -> f64 {
    let [f1, f2, f3, f4] = thrusts;
    (f1 + f2 - f3 - f4) * SQRT_2 * frame_d / 4.0
}

/// Servo and rotor set points for one rolling command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingActuation {
    pub servo_speed: f64,
    pub servo_torque: f64,
    pub thrusts: [f64; 4],
    /// Yaw torque the rotors were asked for.
    pub yaw_torque_demand: f64,
    /// Servo or rotor limits were hit.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingAllocator {
    pub gear: GearTrainParams,
    pub frame_d: f64,
    /// Yaw inertia in the rolling pose, kg m^2.
    pub yaw_inertia: f64,
    pub vehicle_mass: f64,
    /// Per-rotor thrust floor kept while rolling, N.
    pub bias_thrust: f64,
    pub thrust_max: f64,
}

impl RollingAllocator {
    /// Servo speed tracks `nu` without slip; servo torque accelerates the
    /// vehicle mass at `alpha`. Yaw torque `I * yaw_accel` is realized with
    /// `F1 = F2` and `F3 = F4` around the bias level; when one pair would go
    /// negative it is set to zero and the other carries the full
    /// differential (the minimum collective that still produces the torque).
    pub fn allocate(&self, input: &UnicycleInput, state: &UnicycleState, yaw_accel: f64) -> RollingActuation {
        let g = &self.gear;
        let mut saturated = false;

        let mut servo_speed = g.servo_speed_for(state.nu);
        if servo_speed.abs() > g.omega_s_max {
            saturated = true;
            servo_speed = servo_speed.clamp(-g.omega_s_max, g.omega_s_max);
        }
        let wheel_torque = self.vehicle_mass * input.alpha * g.wheel_radius;
        let mut servo_torque = g.servo_torque_for(wheel_torque);
        if servo_torque.abs() > g.tau_s_max {
            saturated = true;
            servo_torque = servo_torque.clamp(-g.tau_s_max, g.tau_s_max);
        }

        let demand = self.yaw_inertia * yaw_accel;
        let delta = demand / (SQRT_2 * self.frame_d);
        let (mut front, mut back) = if delta.abs() <= self.bias_thrust {
            (self.bias_thrust + delta, self.bias_thrust - delta)
        } else if delta > 0.0 {
            (2.0 * delta, 0.0)
        } else {
            (0.0, -2.0 * delta)
        };
        if front > self.thrust_max || back > self.thrust_max {
            saturated = true;
            front = front.min(self.thrust_max);
            back = back.min(self.thrust_max);
        }

        RollingActuation {
            servo_speed,
            servo_torque,
            thrusts: [front, front, back, back],
            yaw_torque_demand: demand,
            saturated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuators::GearTrainParams;
    use proptest::prelude::*;

    fn allocator() -> RollingAllocator {
        RollingAllocator {
            gear: GearTrainParams::default(),
            frame_d: 0.22,
            yaw_inertia: 0.035,
            vehicle_mass: 1.5,
            bias_thrust: 0.05 * 1.5 * 9.81 / 4.0,
            thrust_max: 33.0,
        }
    }

    #[test]
    fn yaw_torque_examples() {
        assert_eq!(yaw_torque_from_thrusts([2.0; 4], 0.22), 0.0);
        let t = yaw_torque_from_thrusts([1.0, 1.0, 0.0, 0.0], 0.22);
        assert!((t - 2.0 * SQRT_2 * 0.22 / 4.0).abs() < 1e-15);
        assert!((t - 0.1556).abs() < 1e-4);
        assert_eq!(yaw_torque_from_thrusts([0.0, 0.0, 1.0, 1.0], 0.22), -t);
    }

    #[test]
    fn servo_speed_inverts_gear_train() {
        let a = allocator().allocate(&UnicycleInput::default(), &UnicycleState::new(0.0, 0.0, 0.18, 0.0), 0.0);
        assert!((a.servo_speed - 2.0).abs() < 1e-15);
        assert_eq!(a.servo_torque, 0.0);
    }

    #[test]
    fn no_yaw_demand_leaves_bias() {
        let al = allocator();
        let a = al.allocate(&UnicycleInput::default(), &UnicycleState::default(), 0.0);
        assert_eq!(a.thrusts, [al.bias_thrust; 4]);
    }

    #[test]
    fn small_yaw_demand_splits_around_bias() {
        let al = allocator();
        let yaw_accel = 1.0;
        let a = al.allocate(&UnicycleInput::default(), &UnicycleState::default(), yaw_accel);
        let delta = al.yaw_inertia * yaw_accel / (SQRT_2 * al.frame_d);
        assert!((a.thrusts[0] - (al.bias_thrust + delta)).abs() < 1e-15);
        assert!((a.thrusts[3] - (al.bias_thrust - delta)).abs() < 1e-15);
        assert!(!a.saturated);
    }

    proptest! {
        #[test]
        fn realized_yaw_torque_matches_demand(yaw_accel in -100.0f64..100.0) {
            let al = allocator();
            let a = al.allocate(&UnicycleInput::default(), &UnicycleState::default(), yaw_accel);
            prop_assert!(a.thrusts.iter().all(|f| *f >= 0.0));
            prop_assert!(!a.saturated);
            let t = yaw_torque_from_thrusts(a.thrusts, al.frame_d);
            prop_assert!((t - a.yaw_torque_demand).abs() < 1e-9);
        }
    }
}
