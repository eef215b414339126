//! Ground/flight transition as a planar inverted pendulum pivoting on the
//! wheel contact line, driven by rotor pair thrust.
//!
//! `theta = 0` is the flight pose (body horizontal) and `theta = pi/2` the
//! rolling pose (body upright). The controller cancels the gravity moment
//! and inertia exactly, then tracks a quintic reference with PD feedback, so
//! the tracking error obeys `e_dd + kv e_d + kp e = 0`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use thiserror::Error;

use crate::math::{rk4_step, QuinticProfile};

/// Operational tilt envelope, rad.
pub const ENVELOPE: (f64, f64) = (-0.2, FRAC_PI_2 + 0.2);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("invalid transition parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("tilt {theta:.4} rad outside the envelope [{:.3}, {:.3}]", ENVELOPE.0, ENVELOPE.1)]
    Envelope { theta: f64 },
    #[error("negative pivot torque {tau:.4} N m needs reverse rotor authority")]
    NoReverseAuthority { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub mass: f64,
    /// Height of the centre of gravity above the contact line, m.
    pub pivot_length: f64,
    /// Moment arm of the rotor pair about the contact line, m.
    pub lever: f64,
    pub gravity: f64,
    pub kp: f64,
    pub kv: f64,
    /// Per-rotor thrust limit during the maneuver, N.
    pub thrust_pair_max: f64,
    /// The opposite rotor pair may push back when the required torque is
    /// negative.
    pub bidirectional_authority: bool,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            pivot_length: 0.10,
            lever: 0.11,
            gravity: 9.81,
            kp: 25.0,
            kv: 10.0,
            thrust_pair_max: 15.0,
            bidirectional_authority: true,
        }
    }
}

impl TransitionParams {
    pub fn validate(&self) -> Result<(), TransitionError> {
        let checks: [(&'static str, f64, bool); 6] = [
            ("mass", self.mass, false),
            ("pivot_length", self.pivot_length, false),
            ("lever", self.lever, false),
            ("gravity", self.gravity, false),
            ("thrust_pair_max", self.thrust_pair_max, false),
            ("kp", self.kp, true),
        ];
        for (field, v, zero_ok) in checks {
            let ok = v.is_finite() && (v > 0.0 || (zero_ok && v == 0.0));
            if !ok {
                return Err(TransitionError::InvalidParams {
                    field,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(self.kv >= 0.0 && self.kv.is_finite()) {
            return Err(TransitionError::InvalidParams {
                field: "kv",
                reason: format!("must be non-negative, got {}", self.kv),
            });
        }
        Ok(())
    }

    /// `m l^2`, the inertia about the contact line.
    pub fn alpha(&self) -> f64 {
        self.mass * self.pivot_length * self.pivot_length
    }

    /// `m l g cos(theta)`, the gravity moment.
    pub fn beta(&self, theta: f64) -> f64 {
        self.mass * self.pivot_length * self.gravity * theta.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn at_rest(theta: f64) -> Self {
        Self { theta, theta_dot: 0.0 }
    }

    fn check_envelope(&self) -> Result<(), TransitionError> {
        if self.theta >= ENVELOPE.0 && self.theta <= ENVELOPE.1 {
            Ok(())
        } else {
            Err(TransitionError::Envelope { theta: self.theta })
        }
    }
}

/// `(theta_dot, theta_dd)` with `theta_dd = (tau - m l g cos theta) / (m l^2)`.
pub fn pendulum_derivative(
    state: &PendulumState,
    tau: f64,
    params: &TransitionParams,
) -> Result<(f64, f64), TransitionError> {
    state.check_envelope()?;
    Ok((state.theta_dot, (tau - params.beta(state.theta)) / params.alpha()))
}

/// Torque that makes the pendulum accelerate at exactly `tau_prime`.
pub fn feedback_linearize(state: &PendulumState, tau_prime: f64, params: &TransitionParams) -> f64 {
    params.alpha() * tau_prime + params.beta(state.theta)
}

/// Tilt reference: angle, rate and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TiltReference {
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

/// `theta_dd_d + kv (theta_dot_d - theta_dot) + kp (theta_d - theta)`.
pub fn pd_tracking_law(state: &PendulumState, reference: &TiltReference, params: &TransitionParams) -> f64 {
    reference.theta_ddot
        + params.kv * (reference.theta_dot - state.theta_dot)
        + params.kp * (reference.theta - state.theta)
}

/// Rotor thrusts realizing a pivot torque. `f1`/`f4` is the lifting pair;
/// `f2`/`f3` the opposite pair, used only for negative torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairThrust {
    pub f1: f64,
    pub f4: f64,
    pub f2: f64,
    pub f3: f64,
    pub clamped: bool,
}

impl PairThrust {
    /// Pivot torque actually produced.
    pub fn torque(&self, lever: f64) -> f64 {
        (self.f1 + self.f4) * lever - (self.f2 + self.f3) * lever
    }

    pub fn thrusts(&self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

pub fn allocate_pair_thrust(tau: f64, params: &TransitionParams) -> Result<PairThrust, TransitionError> {
    let per_rotor = tau.abs() / (2.0 * params.lever);
    let clamped = per_rotor > params.thrust_pair_max;
    let f = per_rotor.min(params.thrust_pair_max);
    if tau >= 0.0 {
        Ok(PairThrust {
            f1: f,
            f4: f,
            clamped,
            ..Default::default()
        })
    } else if params.bidirectional_authority {
        Ok(PairThrust {
            f2: f,
            f3: f,
            clamped,
            ..Default::default()
        })
    } else {
        Err(TransitionError::NoReverseAuthority { tau })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionDirection {
    ToRolling,
    ToFlying,
}

impl TransitionDirection {
    pub fn target(self) -> f64 {
        match self {
            Self::ToRolling => FRAC_PI_2,
            Self::ToFlying => 0.0,
        }
    }

    pub fn start(self) -> f64 {
        match self {
            Self::ToRolling => 0.0,
            Self::ToFlying => FRAC_PI_2,
        }
    }
}

/// Completion test applied after the reference profile ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionGuard {
    pub angle_tol: f64,
    pub rate_tol: f64,
}

impl Default for TransitionGuard {
    fn default() -> Self {
        Self {
            angle_tol: 0.02,
            rate_tol: 0.05,
        }
    }
}

impl TransitionGuard {
    pub fn is_met(&self, state: &PendulumState, target: f64) -> bool {
        (state.theta - target).abs() < self.angle_tol && state.theta_dot.abs() < self.rate_tol
    }
}

/// Control quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransitionControl {
    pub tau_prime: f64,
    /// Torque requested by the linearizing law.
    pub tau: f64,
    pub thrust: PairThrust,
}

/// Feedback-linearizing tracking controller bound to one reference profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionController {
    pub params: TransitionParams,
    pub profile: QuinticProfile,
}

impl TransitionController {
    /// Quintic rest-to-rest reference from `start` to `target` beginning at
    /// `t0`.
    pub fn new(params: TransitionParams, start: f64, target: f64, t0: f64, duration: f64) -> Self {
        Self {
            params,
            profile: QuinticProfile::new(start, target, t0, duration),
        }
    }

    pub fn target(&self) -> f64 {
        self.profile.end
    }

    pub fn reference(&self, t: f64) -> TiltReference {
        let s = self.profile.sample(t);
        TiltReference {
            theta: s.value,
            theta_dot: s.rate,
            theta_ddot: s.accel,
        }
    }

    pub fn control(&self, t: f64, state: &PendulumState) -> Result<TransitionControl, TransitionError> {
        let tau_prime = pd_tracking_law(state, &self.reference(t), &self.params);
        let tau = feedback_linearize(state, tau_prime, &self.params);
        let thrust = allocate_pair_thrust(tau, &self.params)?;
        Ok(TransitionControl {
            tau_prime,
            tau,
            thrust,
        })
    }

    /// Closed-loop derivative; the control law is re-evaluated at every
    /// integrator stage.
    fn closed_loop(&self, t: f64, x: &Vector2<f64>) -> Result<Vector2<f64>, TransitionError> {
        let state = PendulumState {
            theta: x[0],
            theta_dot: x[1],
        };
        let c = self.control(t, &state)?;
        let (d, dd) = pendulum_derivative(&state, c.thrust.torque(self.params.lever), &self.params)?;
        Ok(Vector2::new(d, dd))
    }

    /// Advances one RK4 step from `t`. Returns the new state and the control
    /// evaluated at the start of the step.
    pub fn step(
        &self,
        t: f64,
        state: &PendulumState,
        dt: f64,
    ) -> Result<(PendulumState, TransitionControl), TransitionError> {
        state.check_envelope()?;
        let c = self.control(t, state)?;
        let x = Vector2::new(state.theta, state.theta_dot);
        let next = rk4_step(t, &x, dt, |t, x| self.closed_loop(t, x))?;
        let next = PendulumState {
            theta: next[0],
            theta_dot: next[1],
        };
        next.check_envelope()?;
        Ok((next, c))
    }
}

/// One row of a transition trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub tau: f64,
    pub f1: f64,
    pub f4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionStatus {
    Converged,
    NotConverged,
    Diverged(TransitionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReport {
    pub trace: Vec<TransitionSample>,
    pub status: TransitionStatus,
    pub final_state: PendulumState,
    pub target: f64,
    /// First instant after the profile end at which the guard held.
    pub converged_at: Option<f64>,
}

impl TransitionReport {
    pub fn success(&self) -> bool {
        self.status == TransitionStatus::Converged
    }

    pub fn terminal_error(&self) -> f64 {
        (self.final_state.theta - self.target).abs()
    }
}

/// Timing of a stand-alone transition run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRun {
    pub duration: f64,
    pub settle: f64,
    pub dt: f64,
    pub guard: TransitionGuard,
}

impl Default for TransitionRun {
    fn default() -> Self {
        Self {
            duration: 2.0,
            settle: 1.0,
            dt: 1e-3,
            guard: TransitionGuard::default(),
        }
    }
}

/// Integrates the closed loop from `initial` along a quintic reference
/// toward the direction's target pose. Success is judged on the final state
/// of the run (profile plus settling window).
pub fn run_transition(
    initial: PendulumState,
    direction: TransitionDirection,
    run: &TransitionRun,
    params: &TransitionParams,
) -> Result<TransitionReport, TransitionError> {
    params.validate()?;
    initial.check_envelope()?;
    let controller = TransitionController::new(*params, initial.theta, direction.target(), 0.0, run.duration);
    run_with_controller(initial, &controller, run)
}

/// As [`run_transition`] with a caller-supplied reference profile.
pub fn run_with_controller(
    initial: PendulumState,
    controller: &TransitionController,
    run: &TransitionRun,
) -> Result<TransitionReport, TransitionError> {
    initial.check_envelope()?;
    let steps = ((run.duration + run.settle) / run.dt).round() as usize;
    let target = controller.target();
    let mut trace = Vec::with_capacity(steps + 1);
    let mut state = initial;
    let mut converged_at = None;
    let mut last = TransitionControl::default();

    for k in 0..steps {
        let t = k as f64 * run.dt;
        match controller.step(t, &state, run.dt) {
            Ok((next, c)) => {
                trace.push(sample(t, &state, &c));
                state = next;
                last = c;
            }
            Err(e) => {
                if let Ok(c) = controller.control(t, &state) {
                    trace.push(sample(t, &state, &c));
                }
                return Ok(TransitionReport {
                    trace,
                    status: TransitionStatus::Diverged(e),
                    final_state: state,
                    target,
                    converged_at,
                });
            }
        }
        let t_next = (k + 1) as f64 * run.dt;
        if converged_at.is_none() && t_next >= controller.profile.end_time() && run.guard.is_met(&state, target) {
            converged_at = Some(t_next);
        }
    }
    let t_end = steps as f64 * run.dt;
    let c = controller.control(t_end, &state).unwrap_or(last);
    trace.push(sample(t_end, &state, &c));

    let status = if run.guard.is_met(&state, target) {
        TransitionStatus::Converged
    } else {
        TransitionStatus::NotConverged
    };
    Ok(TransitionReport {
        trace,
        status,
        final_state: state,
        target,
        converged_at,
    })
}

fn sample(t: f64, s: &PendulumState, c: &TransitionControl) -> TransitionSample {
    TransitionSample {
        t,
        theta: s.theta,
        theta_dot: s.theta_dot,
        tau: c.tau,
        f1: c.thrust.f1,
        f4: c.thrust.f4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> TransitionParams {
        TransitionParams::default()
    }

    #[test]
    fn upright_pose_has_no_gravity_moment() {
        let (_, dd) = pendulum_derivative(&PendulumState::at_rest(FRAC_PI_2), 0.3, &p()).unwrap();
        assert!((dd - 0.3 / p().alpha()).abs() < 1e-12);
    }

    #[test]
    fn static_balance() {
        let s = PendulumState::at_rest(0.7);
        let tau = p().mass * p().pivot_length * p().gravity * 0.7f64.cos();
        let (_, dd) = pendulum_derivative(&s, tau, &p()).unwrap();
        assert!(dd.abs() < 1e-12);
    }

    #[test]
    fn horizontal_pose_arithmetic() {
        let (_, dd) = pendulum_derivative(&PendulumState::at_rest(0.0), 2.0, &p()).unwrap();
        assert!((dd - (2.0 - 1.4715) / 0.015).abs() < 1e-9);
        assert!((dd - 35.2333).abs() < 1e-3);
    }

    #[test]
    fn envelope_is_guarded() {
        assert!(matches!(
            pendulum_derivative(&PendulumState::at_rest(2.0), 0.0, &p()),
            Err(TransitionError::Envelope { .. })
        ));
    }

    #[test]
    fn linearizing_torque_examples() {
        let s = PendulumState::at_rest(0.4);
        assert!((feedback_linearize(&s, 0.0, &p()) - p().beta(0.4)).abs() < 1e-15);
        let up = PendulumState::at_rest(FRAC_PI_2);
        assert!((feedback_linearize(&up, 10.0, &p()) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn pd_law_examples() {
        let r = TiltReference {
            theta: 1.0,
            theta_dot: 0.2,
            theta_ddot: -0.7,
        };
        let on_ref = PendulumState {
            theta: 1.0,
            theta_dot: 0.2,
        };
        assert_eq!(pd_tracking_law(&on_ref, &r, &p()), -0.7);
        let r0 = TiltReference {
            theta: 0.1,
            ..Default::default()
        };
        assert!((pd_tracking_law(&PendulumState::default(), &r0, &p()) - 2.5).abs() < 1e-15);
        // e = 0.1, e_dot = -0.05
        let s = PendulumState {
            theta: 0.0,
            theta_dot: 0.05,
        };
        assert!((pd_tracking_law(&s, &r0, &p()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pair_allocation_examples() {
        let a = allocate_pair_thrust(0.0, &p()).unwrap();
        assert_eq!((a.f1, a.f4), (0.0, 0.0));
        let a = allocate_pair_thrust(0.22, &p()).unwrap();
        assert!((a.f1 - 1.0).abs() < 1e-15 && (a.f4 - 1.0).abs() < 1e-15);
        let limit = 2.0 * p().lever * p().thrust_pair_max;
        let a = allocate_pair_thrust(1.5 * limit, &p()).unwrap();
        assert!(a.clamped);
        assert_eq!(a.f1, p().thrust_pair_max);
        let one_way = TransitionParams {
            bidirectional_authority: false,
            ..p()
        };
        assert!(matches!(
            allocate_pair_thrust(-0.1, &one_way),
            Err(TransitionError::NoReverseAuthority { .. })
        ));
        let rev = allocate_pair_thrust(-0.22, &p()).unwrap();
        assert!((rev.torque(p().lever) + 0.22).abs() < 1e-15);
    }

    #[test]
    fn to_rolling_converges() {
        let report = run_transition(
            PendulumState::at_rest(0.0),
            TransitionDirection::ToRolling,
            &TransitionRun::default(),
            &p(),
        )
        .unwrap();
        assert!(report.success(), "{:?}", report.status);
        assert!(report.terminal_error() < 0.02);
        assert!(report.converged_at.unwrap() <= 2.0 + 1e-9 + 1e-3);
    }

    #[test]
    fn resting_at_target_stays_there() {
        let c = TransitionController::new(p(), FRAC_PI_2, FRAC_PI_2, 0.0, 0.0);
        let report = run_with_controller(PendulumState::at_rest(FRAC_PI_2), &c, &TransitionRun::default()).unwrap();
        assert!(report.trace.iter().all(|s| (s.theta - FRAC_PI_2).abs() < 1e-9));
    }

    #[test]
    fn zero_gains_cannot_remove_initial_error() {
        let open = TransitionParams { kp: 0.0, kv: 0.0, ..p() };
        open.validate().unwrap();
        let c = TransitionController::new(open, 1.0, 1.0, 0.0, 0.0);
        let report = run_with_controller(PendulumState::at_rest(1.1), &c, &TransitionRun::default()).unwrap();
        assert!(!report.success());
    }

    #[test]
    fn trace_has_one_row_per_step() {
        let run = TransitionRun::default();
        let report = run_transition(PendulumState::at_rest(FRAC_PI_2), TransitionDirection::ToFlying, &run, &p()).unwrap();
        assert_eq!(report.trace.len(), 3001);
        assert!(report.trace.windows(2).all(|w| w[1].t > w[0].t));
    }

    proptest! {
        #[test]
        fn linearization_cancels_exactly(theta in ENVELOPE.0..ENVELOPE.1, tp in -50.0f64..50.0) {
            let s = PendulumState::at_rest(theta);
            let tau = feedback_linearize(&s, tp, &p());
            let (_, dd) = pendulum_derivative(&s, tau, &p()).unwrap();
            prop_assert!((dd - tp).abs() <= 1e-12 * tp.abs().max(1.0));
        }

        #[test]
        fn equilibrium_is_gain_independent(theta in 0.0f64..1.5, kp in 0.1f64..100.0, kv in 0.1f64..30.0) {
            let params = TransitionParams { kp, kv, ..p() };
            let r = TiltReference { theta, ..Default::default() };
            prop_assert_eq!(pd_tracking_law(&PendulumState::at_rest(theta), &r, &params), 0.0);
        }

        #[test]
        fn pair_allocation_reproduces_torque(tau in -3.0f64..3.0) {
            let a = allocate_pair_thrust(tau, &p()).unwrap();
            prop_assert!(!a.clamped);
            prop_assert!((a.torque(p().lever) - tau).abs() < 1e-14);
        }
    }
}
