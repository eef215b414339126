use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::energy::{Battery, EnergyLedger, PowerModel};
use super::log::{LogSample, TrajectoryLog};
use super::{Mode, SimError};
use crate::actuators::{GearTrainParams, RotorParams};
use crate::flight::{
    step_rk4 as flight_step, AttitudeTarget, ControlInputs, FlightController, FlightError, FlightGains, FlightParams,
    FlightReference, FlightState, Mixer,
};
use crate::math::QuinticProfile;
use crate::rolling::{
    rk4_step as rolling_step, CostWeights, InputLimits, OptimizerOptions, RecedingHorizon, RollingActuation,
    RollingAllocator, UnicycleInput, UnicycleState,
};
use crate::transition::{
    PendulumState, TransitionController, TransitionDirection, TransitionGuard, TransitionParams, TransitionSample,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingParams {
    pub weights: CostWeights,
    pub limits: InputLimits,
    pub options: OptimizerOptions,
    /// Per-rotor bias thrust as a fraction of the per-rotor hover thrust.
    pub bias_fraction: f64,
    /// Proportional gain of the speed-hold loop, 1/s.
    pub speed_gain: f64,
}

impl Default for RollingParams {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            limits: InputLimits::default(),
            options: OptimizerOptions::default(),
            bias_fraction: 0.05,
            speed_gain: 5.0,
        }
    }
}

/// Every parameter set of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub flight: FlightParams,
    pub rotor: RotorParams,
    pub gear: GearTrainParams,
    pub transition: TransitionParams,
    pub flight_gains: FlightGains,
    pub rolling: RollingParams,
    pub power: PowerModel,
    pub battery: Battery,
    /// Body width across the wheel axis, m.
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let flight = FlightParams::default();
        let rotor = RotorParams::for_vehicle(flight.mass, flight.gravity);
        Self {
            flight,
            rotor,
            gear: GearTrainParams::default(),
            transition: TransitionParams::default(),
            flight_gains: FlightGains::critically_damped(
                &flight,
                FlightGains::DEFAULT_POSITION_BANDWIDTH,
                FlightGains::DEFAULT_ATTITUDE_BANDWIDTH,
            ),
            rolling: RollingParams::default(),
            power: PowerModel::calibrated(
                PowerModel::DEFAULT_FLIGHT_POWER_PER_KG,
                flight.mass,
                rotor.omega_for_thrust(flight.hover_thrust() / 4.0),
                PowerModel::DEFAULT_SERVO_EFFICIENCY,
            ),
            battery: Battery::default(),
            width: 0.12,
        }
    }
}

impl VehicleParams {
    pub fn wheel_diameter(&self) -> f64 {
        2.0 * self.gear.wheel_radius
    }

    pub fn mixer(&self) -> Mixer {
        Mixer::new(&self.flight, &self.rotor)
    }

    pub fn flight_controller(&self) -> FlightController {
        FlightController::new(self.flight, self.flight_gains, 4.0 * self.rotor.thrust_max())
    }

    pub fn rolling_allocator(&self) -> RollingAllocator {
        RollingAllocator {
            gear: self.gear,
            frame_d: self.flight.prop_distance,
            yaw_inertia: self.flight.inertia[(2, 2)],
            vehicle_mass: self.flight.mass,
            bias_thrust: self.rolling.bias_fraction * self.flight.hover_thrust() / 4.0,
            thrust_max: self.rotor.thrust_max(),
        }
    }
}

/// Height and speed below which a flying vehicle counts as landed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundContact {
    pub max_height: f64,
    pub max_speed: f64,
}

impl Default for GroundContact {
    fn default() -> Self {
        Self {
            max_height: 0.05,
            max_speed: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    /// Log one sample every this many steps.
    pub log_decimation: u64,
    pub guard: TransitionGuard,
    pub ground: GroundContact,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            log_decimation: 10,
            guard: TransitionGuard::default(),
            ground: GroundContact::default(),
        }
    }
}

impl SimSettings {
    /// Decimation for a log rate, rounded to whole steps (at least one).
    pub fn decimation_for_rate(dt: f64, rate_hz: f64) -> u64 {
        ((1.0 / (rate_hz * dt)).round() as u64).max(1)
    }
}

/// Mode-specific state.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeKind {
    Rolling(UnicycleState),
    /// Pivoting about the wheel contact line at a fixed planar pose.
    Transition {
        direction: TransitionDirection,
        pendulum: PendulumState,
        controller: TransitionController,
        anchor: [f64; 2],
        heading: f64,
    },
    Flying(FlightState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub mode: Mode,
    pub entry_time: f64,
    pub kind: ModeKind,
}

/// Position/attitude schedule while flying.
#[derive(Debug, Clone, PartialEq)]
pub enum FlightPlan {
    Hold { position: Vector3<f64>, yaw: f64 },
    /// Vertical quintic transfer with the horizontal position held.
    Vertical {
        xy: [f64; 2],
        profile: QuinticProfile,
        yaw: f64,
    },
    /// Attitude steps: each entry adds a shaped step on one axis (0 roll,
    /// 1 pitch); the commanded angle is the sum of all steps on that axis.
    /// Altitude stays at `altitude`.
    Attitude {
        steps: Vec<(usize, QuinticProfile)>,
        altitude: f64,
        yaw: f64,
    },
}

impl FlightPlan {
    pub fn reference(&self, t: f64) -> FlightReference {
        match self {
            FlightPlan::Hold { position, yaw } => FlightReference::hold(*position, *yaw),
            FlightPlan::Vertical { xy, profile, yaw } => {
                let s = profile.sample(t);
                FlightReference {
                    position: Vector3::new(xy[0], xy[1], s.value),
                    velocity: Vector3::new(0.0, 0.0, s.rate),
                    acceleration: Vector3::new(0.0, 0.0, s.accel),
                    yaw: *yaw,
                    attitude: None,
                }
            }
            FlightPlan::Attitude { steps, altitude, yaw } => {
                let mut target = AttitudeTarget {
                    angles: Vector3::new(0.0, 0.0, *yaw),
                    ..Default::default()
                };
                for (axis, step) in steps {
                    let s = step.sample(t);
                    target.angles[*axis] += s.value;
                    target.rates[*axis] += s.rate;
                    target.accels[*axis] += s.accel;
                }
                FlightReference {
                    position: Vector3::new(0.0, 0.0, *altitude),
                    yaw: *yaw,
                    attitude: Some(target),
                    ..Default::default()
                }
            }
        }
    }
}

/// What the active phase asks of the vehicle.
#[derive(Debug, Clone)]
pub enum Command {
    /// Rolling: zero inputs. Flying: hold the position at the time of the
    /// command.
    Idle,
    /// Rolling: inputs held unchanged every step.
    Fixed(UnicycleInput),
    /// Rolling: receding-horizon tracking of a path anchored at `t0`.
    Track { mpc: Box<RecedingHorizon>, t0: f64 },
    /// Rolling: speed hold at `speed` with a fixed yaw rate.
    Speed { speed: f64, yaw_rate: f64 },
    Fly(FlightPlan),
}

/// Quantities of the last step, for phase metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub power_w: f64,
    pub attitude_target: Option<Vector3<f64>>,
    pub saturated: bool,
}

/// The simulated vehicle and its bookkeeping.
#[derive(Debug, Clone)]
pub struct World {
    pub params: VehicleParams,
    pub settings: SimSettings,
    mode: ModeState,
    command: Command,
    step_index: u64,
    ledger: EnergyLedger,
    log: TrajectoryLog,
    mode_history: Vec<(f64, Mode)>,
    held_input: UnicycleInput,
    yaw_accel_demand: f64,
    next_solve: u64,
    mpc_period_steps: u64,
    controller: FlightController,
    mixer: Mixer,
    allocator: RollingAllocator,
    transition_exit: Option<PendulumState>,
}

impl World {
    pub fn new(params: VehicleParams, settings: SimSettings, initial: ModeKind) -> Result<Self, SimError> {
        if !(settings.dt > 0.0 && settings.dt.is_finite()) {
            return Err(SimError::Settings(format!("dt must be positive, got {}", settings.dt)));
        }
        if settings.log_decimation == 0 {
            return Err(SimError::Settings("log decimation must be at least 1".into()));
        }
        let ratio = params.rolling.weights.dt / settings.dt;
        let mpc_period_steps = ratio.round() as u64;
        if mpc_period_steps == 0 || (ratio - mpc_period_steps as f64).abs() > 1e-6 * ratio {
            return Err(SimError::Settings(format!(
                "prediction step {} is not a whole multiple of dt {}",
                params.rolling.weights.dt, settings.dt
            )));
        }
        let mode = match &initial {
            ModeKind::Rolling(_) => Mode::Rolling,
            ModeKind::Flying(_) => Mode::Flying,
            ModeKind::Transition { direction, .. } => match direction {
                TransitionDirection::ToFlying => Mode::TransitionToFlying,
                TransitionDirection::ToRolling => Mode::TransitionToRolling,
            },
        };
        Ok(Self {
            controller: params.flight_controller(),
            mixer: params.mixer(),
            allocator: params.rolling_allocator(),
            ledger: EnergyLedger::new(params.battery, params.flight.mass),
            params,
            settings,
            mode: ModeState {
                mode,
                entry_time: 0.0,
                kind: initial,
            },
            command: Command::Idle,
            step_index: 0,
            log: TrajectoryLog::default(),
            mode_history: vec![(0.0, mode)],
            held_input: UnicycleInput::default(),
            yaw_accel_demand: 0.0,
            next_solve: 0,
            mpc_period_steps,
            transition_exit: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.settings.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn mode(&self) -> Mode {
        self.mode.mode
    }

    pub fn mode_state(&self) -> &ModeState {
        &self.mode
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_parts(self) -> (TrajectoryLog, EnergyLedger, Vec<(f64, Mode)>) {
        (self.log, self.ledger, self.mode_history)
    }

    pub fn mode_history(&self) -> &[(f64, Mode)] {
        &self.mode_history
    }

    pub fn rolling_state(&self) -> Option<UnicycleState> {
        match self.mode.kind {
            ModeKind::Rolling(s) => Some(s),
            _ => None,
        }
    }

    pub fn flight_state(&self) -> Option<FlightState> {
        match self.mode.kind {
            ModeKind::Flying(s) => Some(s),
            _ => None,
        }
    }

    pub fn pendulum_state(&self) -> Option<PendulumState> {
        match self.mode.kind {
            ModeKind::Transition { pendulum, .. } => Some(pendulum),
            _ => None,
        }
    }

    /// Planar pose `(x, y, heading)` in any mode.
    pub fn planar_pose(&self) -> (f64, f64, f64) {
        match &self.mode.kind {
            ModeKind::Rolling(s) => (s.px, s.py, s.theta),
            ModeKind::Transition { anchor, heading, .. } => (anchor[0], anchor[1], *heading),
            ModeKind::Flying(s) => (s.position.x, s.position.y, s.attitude.z),
        }
    }

    /// Pendulum state that satisfied the guard of the last completed
    /// transition.
    pub fn last_transition_exit(&self) -> Option<PendulumState> {
        self.transition_exit
    }

    pub fn set_command(&mut self, command: Command) {
        if let (Command::Idle, ModeKind::Flying(s)) = (&command, &self.mode.kind) {
            self.command = Command::Fly(FlightPlan::Hold {
                position: s.position,
                yaw: s.attitude.z,
            });
        } else {
            self.command = command;
        }
        // Tracking commands solve on their first step.
        self.next_solve = self.step_index;
    }

    /// Starts the pivot maneuver out of rolling or flying. Rolling brakes
    /// the wheel; flying requires ground contact.
    pub fn begin_transition(&mut self, direction: TransitionDirection, duration: f64) -> Result<(), SimError> {
        let t = self.time();
        let (next_mode, anchor, heading) = match (direction, &self.mode.kind) {
            (TransitionDirection::ToFlying, ModeKind::Rolling(s)) => {
                (Mode::TransitionToFlying, [s.px, s.py], s.theta)
            }
            (TransitionDirection::ToRolling, ModeKind::Flying(s)) => {
                let g = self.settings.ground;
                if s.position.z >= g.max_height || s.velocity.norm() >= g.max_speed {
                    return Err(SimError::Precondition(format!(
                        "transition to rolling needs ground contact (z {:.3} m, speed {:.3} m/s)",
                        s.position.z,
                        s.velocity.norm()
                    )));
                }
                (Mode::TransitionToRolling, [s.position.x, s.position.y], s.attitude.z)
            }
            (dir, _) => {
                let expected = match dir {
                    TransitionDirection::ToFlying => Mode::Rolling,
                    TransitionDirection::ToRolling => Mode::Flying,
                };
                return Err(SimError::WrongMode {
                    action: format!("{dir:?} transition"),
                    expected,
                    actual: self.mode.mode,
                });
            }
        };
        let start = direction.start();
        let controller = TransitionController::new(self.params.transition, start, direction.target(), t, duration);
        self.switch_mode(
            next_mode,
            ModeKind::Transition {
                direction,
                pendulum: PendulumState::at_rest(start),
                controller,
                anchor,
                heading,
            },
        );
        self.command = Command::Idle;
        Ok(())
    }

    fn switch_mode(&mut self, mode: Mode, kind: ModeKind) {
        debug_assert!(self.mode.mode.can_switch_to(mode));
        let t = self.time();
        self.mode = ModeState {
            mode,
            entry_time: t,
            kind,
        };
        self.mode_history.push((t, mode));
        self.held_input = UnicycleInput::default();
        self.yaw_accel_demand = 0.0;
    }

    fn rotor_omegas(&self, thrusts: &[f64; 4]) -> [f64; 4] {
        thrusts.map(|f| self.params.rotor.omega_for_thrust(f))
    }

    /// Advances one fixed step: control, power, logging, integration, mode
    /// guards.
    pub fn step(&mut self, dt: f64) -> Result<StepReport, SimError> {
        let expected = self.settings.dt;
        if (dt - expected).abs() > 1e-12 * expected {
            return Err(SimError::StepMismatch { got: dt, expected });
        }
        let t = self.time();
        let log_now = self.step_index.is_multiple_of(self.settings.log_decimation);
        let mode = self.mode.mode;
        let mut report = StepReport::default();

        match self.mode.kind.clone() {
            ModeKind::Rolling(state) => {
                let input = self.rolling_input(t, &state)?;
                let act = self.allocator.allocate(&input, &state, self.yaw_accel_demand);
                let power = self.params.power.rotor_power(&self.rotor_omegas(&act.thrusts))
                    + self.params.power.servo_power(act.servo_torque * act.servo_speed);
                report.power_w = power;
                report.saturated = act.saturated;
                if log_now {
                    self.log.samples.push(rolling_sample(t, &state, &input, &act, power));
                }
                let next = rolling_step(&state, &input, dt);
                self.ledger.record(mode, dt, power, state.nu.abs() * dt);
                self.mode.kind = ModeKind::Rolling(next);
            }
            ModeKind::Transition {
                direction,
                pendulum,
                controller,
                anchor,
                heading,
            } => {
                let (next, c) = controller.step(t, &pendulum, dt)?;
                let thrusts = c.thrust.thrusts();
                let power = self.params.power.rotor_power(&self.rotor_omegas(&thrusts));
                report.power_w = power;
                report.saturated = c.thrust.clamped;
                if log_now {
                    self.log.samples.push(LogSample {
                        t,
                        mode,
                        position: [anchor[0], anchor[1], 0.0],
                        phi: 0.0,
                        theta: pendulum.theta,
                        psi: heading,
                        nu: 0.0,
                        yaw_rate: 0.0,
                        u: [c.tau, c.thrust.f1, c.thrust.f4, c.tau_prime],
                        power_w: power,
                    });
                    self.log.transitions.push(TransitionSample {
                        t,
                        theta: pendulum.theta,
                        theta_dot: pendulum.theta_dot,
                        tau: c.tau,
                        f1: c.thrust.f1,
                        f4: c.thrust.f4,
                    });
                }
                self.ledger.record(mode, dt, power, 0.0);
                self.mode.kind = ModeKind::Transition {
                    direction,
                    pendulum: next,
                    controller,
                    anchor,
                    heading,
                };
            }
            ModeKind::Flying(state) => {
                let reference = match &self.command {
                    Command::Fly(plan) => plan.reference(t),
                    _ => FlightReference::hold(state.position, state.attitude.z),
                };
                let out = self.controller.compute(&state, &reference);
                let (thrusts, clamped) = match self.mixer.inverse(&out.inputs) {
                    Ok(a) => (a.thrusts, a.clamped),
                    Err(FlightError::Allocation { unclamped }) => {
                        (unclamped.map(|f| f.clamp(0.0, self.mixer.thrust_max)), true)
                    }
                    Err(e) => return Err(e.into()),
                };
                let applied = self.mixer.mix(thrusts);
                let power = self.params.power.rotor_power(&self.rotor_omegas(&thrusts));
                report.power_w = power;
                report.saturated = out.saturated || clamped;
                report.attitude_target = Some(out.attitude_target);
                if log_now {
                    self.log.samples.push(flight_sample(t, &state, &applied, power));
                }
                let mut next = flight_step(&state, &applied, &self.params.flight, dt)?;
                if next.position.z < 0.0 {
                    next.position.z = 0.0;
                    next.velocity.z = next.velocity.z.max(0.0);
                }
                let v = state.velocity;
                self.ledger.record(mode, dt, power, v.norm() * dt);
                self.mode.kind = ModeKind::Flying(next);
            }
        }

        self.step_index += 1;
        self.evaluate_guards();
        Ok(report)
    }

    fn rolling_input(&mut self, t: f64, state: &UnicycleState) -> Result<UnicycleInput, SimError> {
        let limits = self.params.rolling.limits;
        let previous = self.held_input;
        let input = match &mut self.command {
            Command::Fixed(u) => *u,
            Command::Track { mpc, t0 } => {
                if self.step_index >= self.next_solve {
                    let (u, _) = mpc.control(t - *t0, state)?;
                    self.next_solve = self.step_index + self.mpc_period_steps;
                    let period = self.mpc_period_steps as f64 * self.settings.dt;
                    self.yaw_accel_demand = (u.omega - previous.omega) / period;
                    u
                } else {
                    self.yaw_accel_demand = 0.0;
                    previous
                }
            }
            Command::Speed { speed, yaw_rate } => {
                let alpha = self.params.rolling.speed_gain * (*speed - state.nu);
                limits.clamp(&UnicycleInput::new(alpha, *yaw_rate))
            }
            Command::Idle | Command::Fly(_) => UnicycleInput::default(),
        };
        if !matches!(self.command, Command::Track { .. }) {
            self.yaw_accel_demand = (input.omega - previous.omega) / self.settings.dt;
        }
        self.held_input = input;
        Ok(input)
    }

    fn evaluate_guards(&mut self) {
        let t = self.time();
        if let ModeKind::Transition {
            direction,
            pendulum,
            controller,
            anchor,
            heading,
        } = &self.mode.kind
        {
            if t + 1e-12 < controller.profile.end_time() || !self.settings.guard.is_met(pendulum, direction.target()) {
                return;
            }
            let (anchor, heading) = (*anchor, *heading);
            self.transition_exit = Some(*pendulum);
            match direction {
                TransitionDirection::ToFlying => {
                    let s = FlightState::at_rest(Vector3::new(anchor[0], anchor[1], 0.0), heading);
                    self.switch_mode(Mode::Flying, ModeKind::Flying(s));
                    self.command = Command::Fly(FlightPlan::Hold {
                        position: s.position,
                        yaw: heading,
                    });
                }
                TransitionDirection::ToRolling => {
                    let s = UnicycleState::new(anchor[0], anchor[1], 0.0, heading);
                    self.switch_mode(Mode::Rolling, ModeKind::Rolling(s));
                    self.command = Command::Idle;
                }
            }
        }
    }
}

fn rolling_sample(t: f64, s: &UnicycleState, u: &UnicycleInput, a: &RollingActuation, power: f64) -> LogSample {
    LogSample {
        t,
        mode: Mode::Rolling,
        position: [s.px, s.py, 0.0],
        phi: 0.0,
        theta: FRAC_PI_2,
        psi: s.theta,
        nu: s.nu,
        yaw_rate: u.omega,
        u: [u.alpha, u.omega, a.servo_speed, a.servo_torque],
        power_w: power,
    }
}

fn flight_sample(t: f64, s: &FlightState, u: &ControlInputs, power: f64) -> LogSample {
    LogSample {
        t,
        mode: Mode::Flying,
        position: [s.position.x, s.position.y, s.position.z],
        phi: s.attitude.x,
        theta: s.attitude.y,
        psi: s.attitude.z,
        nu: s.velocity.xy().norm(),
        yaw_rate: s.attitude_rate.z,
        u: [u.u1, u.u2, u.u3, u.u4],
        power_w: power,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rolling::rollout;

    fn world(kind: ModeKind) -> World {
        World::new(VehicleParams::default(), SimSettings::default(), kind).unwrap()
    }

    #[test]
    fn hover_step_is_an_equilibrium() {
        let s0 = FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let mut w = world(ModeKind::Flying(s0));
        w.set_command(Command::Idle);
        for _ in 0..100 {
            w.step(1e-3).unwrap();
            let s = w.flight_state().unwrap();
            assert!((s.position - s0.position).amax() < 1e-12);
        }
    }

    #[test]
    fn rolling_dispatch_matches_rollout() {
        let s0 = UnicycleState::new(0.1, 0.2, 0.1, 0.3);
        let u = UnicycleInput::new(0.2, -0.5);
        let mut w = world(ModeKind::Rolling(s0));
        w.set_command(Command::Fixed(u));
        for _ in 0..500 {
            w.step(1e-3).unwrap();
        }
        let expect = *rollout(&s0, &[u; 500], 1e-3).last().unwrap();
        assert_eq!(w.rolling_state().unwrap(), expect);
    }

    #[test]
    fn wrong_step_is_rejected() {
        let mut w = world(ModeKind::Rolling(UnicycleState::default()));
        assert!(matches!(w.step(2e-3), Err(SimError::StepMismatch { .. })));
    }

    #[test]
    fn transition_switches_after_guard() {
        let mut w = world(ModeKind::Rolling(UnicycleState::new(1.0, 2.0, 0.1, 0.5)));
        w.begin_transition(TransitionDirection::ToFlying, 2.0).unwrap();
        assert_eq!(w.mode(), Mode::TransitionToFlying);
        let mut switched = None;
        for _ in 0..3000 {
            w.step(1e-3).unwrap();
            if w.mode() == Mode::Flying {
                switched = Some(w.time());
                break;
            }
        }
        let t = switched.expect("transition converged");
        assert!(t >= 2.0 - 1e-9);
        let s = w.flight_state().unwrap();
        assert_eq!((s.position.x, s.position.y, s.attitude.z), (1.0, 2.0, 0.5));
        assert_eq!(w.ledger().totals(Mode::TransitionToFlying).distance_m, 0.0);
    }

    #[test]
    fn direct_rolling_to_rolling_transition_is_rejected() {
        let mut w = world(ModeKind::Rolling(UnicycleState::default()));
        assert!(matches!(
            w.begin_transition(TransitionDirection::ToRolling, 2.0),
            Err(SimError::WrongMode { .. })
        ));
    }

    #[test]
    fn airborne_transition_to_rolling_is_rejected() {
        let mut w = world(ModeKind::Flying(FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.0)));
        assert!(matches!(
            w.begin_transition(TransitionDirection::ToRolling, 2.0),
            Err(SimError::Precondition(_))
        ));
    }

    #[test]
    fn ledger_time_matches_clock() {
        let mut w = world(ModeKind::Rolling(UnicycleState::default()));
        w.set_command(Command::Speed {
            speed: 0.18,
            yaw_rate: 0.0,
        });
        for _ in 0..2000 {
            w.step(1e-3).unwrap();
        }
        assert!((w.ledger().total_time() - w.time()).abs() < 1e-9 * w.time());
        assert_eq!(w.log().samples.len(), 200);
    }
}
