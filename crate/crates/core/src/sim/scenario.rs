//! Scripted phase lists and their per-phase verdicts.

use nalgebra::Vector3;
use serde::Deserialize;

use super::corridor::{corridor_check, Corridor};
use super::energy::EnergyLedger;
use super::log::TrajectoryLog;
use super::world::{Command, FlightPlan, World};
use super::{is_valid_mode_walk, Mode, SimError};
use crate::math::QuinticProfile;
use crate::rolling::{PathReference, RecedingHorizon};
use crate::transition::TransitionDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    #[serde(alias = "cw")]
    Clockwise,
    #[serde(alias = "ccw")]
    Counterclockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeAxis {
    Roll,
    Pitch,
}

/// Gap placed along a [`Phase::RollLine`] path, measured from the pose at
/// the start of the phase.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSpec {
    pub entry: f64,
    #[serde(default = "defaults::corridor_length")]
    pub length: f64,
    pub gap_width: f64,
}

mod defaults {
    pub fn speed() -> f64 {
        0.18
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn settle() -> f64 {
        5.0
    }
    pub fn track_tolerance() -> f64 {
        0.02
    }
    pub fn line_tolerance() -> f64 {
        0.03
    }
    pub fn distance_tolerance() -> f64 {
        1e-3
    }
    pub fn cw() -> super::TurnDirection {
        super::TurnDirection::Clockwise
    }
    pub fn transition_duration() -> f64 {
        2.0
    }
    pub fn transition_settle() -> f64 {
        1.0
    }
    pub fn climb_duration() -> f64 {
        3.0
    }
    pub fn climb_settle() -> f64 {
        2.0
    }
    pub fn position_tolerance() -> f64 {
        0.05
    }
    pub fn amplitude() -> f64 {
        0.3
    }
    pub fn axes() -> Vec<super::AttitudeAxis> {
        vec![super::AttitudeAxis::Roll, super::AttitudeAxis::Pitch]
    }
    pub fn rise() -> f64 {
        0.4
    }
    pub fn hold() -> f64 {
        2.0
    }
    pub fn attitude_tolerance() -> f64 {
        0.06
    }
    pub fn corridor_length() -> f64 {
        0.5
    }
}

/// One scripted step of a scenario. Durations in s, lengths in m, angles in
/// rad.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Phase {
    /// Receding-horizon tracking of a circle through the current pose.
    /// Cross-track error is scored after `settle`, over `laps` laps.
    RollCircle {
        radius: f64,
        direction: TurnDirection,
        #[serde(default = "defaults::speed")]
        speed: f64,
        #[serde(default = "defaults::one")]
        laps: f64,
        #[serde(default = "defaults::settle")]
        settle: f64,
        #[serde(default = "defaults::track_tolerance")]
        tolerance: f64,
    },
    /// Receding-horizon tracking of a straight line along the current
    /// heading, optionally through a gap.
    RollLine {
        #[serde(default = "defaults::speed")]
        speed: f64,
        duration: f64,
        #[serde(default = "defaults::line_tolerance")]
        tolerance: f64,
        corridor: Option<CorridorSpec>,
    },
    /// Wheel speed hold at `wheel_rate` (rad/s), optionally turning on a
    /// circle of `turn_radius`.
    RollConstant {
        wheel_rate: f64,
        turn_radius: Option<f64>,
        #[serde(default = "defaults::cw")]
        direction: TurnDirection,
        duration: f64,
        expected_distance: Option<f64>,
        /// Relative tolerance on `expected_distance`.
        #[serde(default = "defaults::distance_tolerance")]
        distance_tolerance: f64,
    },
    TransitionToFlying {
        #[serde(default = "defaults::transition_duration")]
        duration: f64,
        #[serde(default = "defaults::transition_settle")]
        settle: f64,
    },
    TransitionToRolling {
        #[serde(default = "defaults::transition_duration")]
        duration: f64,
        #[serde(default = "defaults::transition_settle")]
        settle: f64,
    },
    Takeoff {
        altitude: f64,
        #[serde(default = "defaults::climb_duration")]
        duration: f64,
        #[serde(default = "defaults::climb_settle")]
        settle: f64,
        #[serde(default = "defaults::position_tolerance")]
        tolerance: f64,
    },
    Hover {
        duration: f64,
        #[serde(default = "defaults::position_tolerance")]
        tolerance: f64,
    },
    /// Shaped doublets (`+amplitude`, `-amplitude`, level) on each axis in turn; the
    /// error is measured against the shaped command.
    AttitudeSteps {
        #[serde(default = "defaults::amplitude")]
        amplitude: f64,
        #[serde(default = "defaults::axes")]
        axes: Vec<AttitudeAxis>,
        #[serde(default = "defaults::rise")]
        rise: f64,
        #[serde(default = "defaults::hold")]
        hold: f64,
        #[serde(default = "defaults::one")]
        rest: f64,
        #[serde(default = "defaults::attitude_tolerance")]
        tolerance: f64,
    },
    Land {
        #[serde(default = "defaults::climb_duration")]
        duration: f64,
        #[serde(default = "defaults::transition_settle")]
        settle: f64,
    },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::RollCircle { .. } => "roll_circle",
            Phase::RollLine { .. } => "roll_line",
            Phase::RollConstant { .. } => "roll_constant",
            Phase::TransitionToFlying { .. } => "transition_to_flying",
            Phase::TransitionToRolling { .. } => "transition_to_rolling",
            Phase::Takeoff { .. } => "takeoff",
            Phase::Hover { .. } => "hover",
            Phase::AttitudeSteps { .. } => "attitude_steps",
            Phase::Land { .. } => "land",
        }
    }

    /// Mode required at the start and mode left at the end.
    pub fn modes(&self) -> (Mode, Mode) {
        match self {
            Phase::RollCircle { .. } | Phase::RollLine { .. } | Phase::RollConstant { .. } => {
                (Mode::Rolling, Mode::Rolling)
            }
            Phase::TransitionToFlying { .. } => (Mode::Rolling, Mode::Flying),
            Phase::TransitionToRolling { .. } => (Mode::Flying, Mode::Rolling),
            Phase::Takeoff { .. } | Phase::Hover { .. } | Phase::AttitudeSteps { .. } | Phase::Land { .. } => {
                (Mode::Flying, Mode::Flying)
            }
        }
    }

    /// Checks numeric fields; the message names the offending field.
    pub fn validate(&self) -> Result<(), String> {
        fn pos(name: &str, v: f64) -> Result<(), String> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        }
        fn non_neg(name: &str, v: f64) -> Result<(), String> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be non-negative, got {v}"))
            }
        }
        match self {
            Phase::RollCircle {
                radius,
                speed,
                laps,
                settle,
                tolerance,
                ..
            } => {
                pos("radius", *radius)?;
                pos("speed", *speed)?;
                pos("laps", *laps)?;
                non_neg("settle", *settle)?;
                pos("tolerance", *tolerance)
            }
            Phase::RollLine {
                speed,
                duration,
                tolerance,
                corridor,
            } => {
                pos("speed", *speed)?;
                pos("duration", *duration)?;
                pos("tolerance", *tolerance)?;
                if let Some(c) = corridor {
                    non_neg("corridor.entry", c.entry)?;
                    pos("corridor.length", c.length)?;
                    pos("corridor.gap_width", c.gap_width)?;
                }
                Ok(())
            }
            Phase::RollConstant {
                wheel_rate,
                turn_radius,
                duration,
                expected_distance,
                distance_tolerance,
                ..
            } => {
                if !wheel_rate.is_finite() {
                    return Err(format!("wheel_rate must be finite, got {wheel_rate}"));
                }
                if let Some(r) = turn_radius {
                    pos("turn_radius", *r)?;
                }
                if let Some(d) = expected_distance {
                    non_neg("expected_distance", *d)?;
                }
                pos("duration", *duration)?;
                pos("distance_tolerance", *distance_tolerance)
            }
            Phase::TransitionToFlying { duration, settle } | Phase::TransitionToRolling { duration, settle } => {
                pos("duration", *duration)?;
                non_neg("settle", *settle)
            }
            Phase::Takeoff {
                altitude,
                duration,
                settle,
                tolerance,
            } => {
                pos("altitude", *altitude)?;
                pos("duration", *duration)?;
                non_neg("settle", *settle)?;
                pos("tolerance", *tolerance)
            }
            Phase::Hover { duration, tolerance } => {
                pos("duration", *duration)?;
                pos("tolerance", *tolerance)
            }
            Phase::AttitudeSteps {
                amplitude,
                axes,
                rise,
                hold,
                rest,
                tolerance,
            } => {
                if !(amplitude.is_finite() && amplitude.abs() < 1.0) {
                    return Err(format!("amplitude must be below 1 rad, got {amplitude}"));
                }
                if axes.is_empty() {
                    return Err("axes must name at least one axis".into());
                }
                pos("rise", *rise)?;
                non_neg("hold", *hold)?;
                non_neg("rest", *rest)?;
                pos("tolerance", *tolerance)
            }
            Phase::Land { duration, settle } => {
                pos("duration", *duration)?;
                non_neg("settle", *settle)
            }
        }
    }
}

/// Mode sequence implied by a phase list, or the index and reason of the
/// first phase that cannot start in the mode left by its predecessor.
pub fn phase_mode_walk(initial: Mode, phases: &[Phase]) -> Result<Vec<Mode>, (usize, String)> {
    let mut walk = vec![initial];
    let mut current = initial;
    for (i, p) in phases.iter().enumerate() {
        let (needs, leaves) = p.modes();
        if needs != current {
            return Err((i, format!("{} needs mode {needs}, vehicle is {current}", p.name())));
        }
        if leaves != current {
            let via = match p {
                Phase::TransitionToFlying { .. } => Mode::TransitionToFlying,
                _ => Mode::TransitionToRolling,
            };
            walk.push(via);
            walk.push(leaves);
        }
        current = leaves;
    }
    debug_assert!(is_valid_mode_walk(&walk));
    Ok(walk)
}

/// Outcome of one scored quantity of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    /// `index:type`, 1-based.
    pub phase: String,
    pub kind: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub log: TrajectoryLog,
    pub ledger: EnergyLedger,
    pub verdicts: Vec<Verdict>,
    pub mode_history: Vec<(f64, Mode)>,
    /// Runtime failure that stopped the run early.
    pub aborted: Option<SimError>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.aborted.is_none() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.mode_history.iter().map(|(_, m)| *m).collect()
    }
}

struct PhaseResult {
    verdicts: Vec<Verdict>,
    /// Later phases cannot run (the vehicle is stuck in the wrong mode).
    halt: bool,
}

fn steps_for(duration: f64, dt: f64) -> u64 {
    (duration / dt).round() as u64
}

/// Runs every phase in order on `world`. Phases after a failed transition
/// are skipped; a dynamics error aborts the run with the log so far.
pub fn run_scenario(mut world: World, phases: &[Phase]) -> ScenarioOutcome {
    let mut verdicts = Vec::new();
    let mut aborted = None;
    for (i, phase) in phases.iter().enumerate() {
        let label = format!("{}:{}", i + 1, phase.name());
        match run_phase(&mut world, phase, &label) {
            Ok(r) => {
                verdicts.extend(r.verdicts);
                if r.halt {
                    break;
                }
            }
            Err(e) => {
                aborted = Some(e);
                break;
            }
        }
    }
    let modes: Vec<Mode> = world.mode_history().iter().map(|(_, m)| *m).collect();
    let walk_ok = is_valid_mode_walk(&modes);
    if !phases.is_empty() {
        verdicts.push(Verdict {
            phase: "run".into(),
            kind: "mode_walk".into(),
            metric: "invalid_edges".into(),
            value: if walk_ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: walk_ok,
        });
    }
    let (log, ledger, mode_history) = world.into_parts();
    ScenarioOutcome {
        log,
        ledger,
        verdicts,
        mode_history,
        aborted,
    }
}

fn require(world: &World, mode: Mode, label: &str) -> Result<(), SimError> {
    if world.mode() == mode {
        Ok(())
    } else {
        Err(SimError::WrongMode {
            action: label.to_string(),
            expected: mode,
            actual: world.mode(),
        })
    }
}

fn verdict(label: &str, kind: &str, metric: &str, value: f64, tolerance: f64, passed: bool) -> Verdict {
    Verdict {
        phase: label.to_string(),
        kind: kind.to_string(),
        metric: metric.to_string(),
        value,
        tolerance,
        passed,
    }
}

fn upper_bound(label: &str, kind: &str, metric: &str, value: f64, tolerance: f64) -> Verdict {
    verdict(label, kind, metric, value, tolerance, value <= tolerance)
}

fn run_phase(world: &mut World, phase: &Phase, label: &str) -> Result<PhaseResult, SimError> {
    let dt = world.settings.dt;
    let kind = phase.name();
    let single = |v: Verdict| PhaseResult {
        verdicts: vec![v],
        halt: false,
    };
    match phase {
        Phase::RollCircle {
            radius,
            direction,
            speed,
            laps,
            settle,
            tolerance,
        } => {
            require(world, Mode::Rolling, label)?;
            let s = world.rolling_state().expect("rolling");
            let path = PathReference::circle_from_pose(&s, *radius, *speed, *direction == TurnDirection::Clockwise);
            let period = path.period().expect("circle has a period");
            let max_err = track(world, path, settle + laps * period, *settle)?;
            Ok(single(upper_bound(label, kind, "max_cross_track_m", max_err, *tolerance)))
        }
        Phase::RollLine {
            speed,
            duration,
            tolerance,
            corridor,
        } => {
            require(world, Mode::Rolling, label)?;
            let s = world.rolling_state().expect("rolling");
            let path = PathReference::line_from_pose(&s, *speed);
            let t_start = world.time();
            let max_err = track(world, path, *duration, 0.0)?;
            let mut verdicts = vec![upper_bound(label, kind, "max_lateral_m", max_err, *tolerance)];
            if let Some(c) = corridor {
                let gap = Corridor {
                    origin: [s.px, s.py],
                    heading: s.theta,
                    entry: c.entry,
                    length: c.length,
                    gap_width: c.gap_width,
                };
                let segment = TrajectoryLog {
                    samples: world.log().samples.iter().filter(|x| x.t >= t_start).copied().collect(),
                    transitions: vec![],
                };
                let v = corridor_check(&segment, &gap, world.params.width, world.params.wheel_diameter());
                verdicts.push(verdict(label, "corridor", "clearance_m", v.clearance, 0.0, v.passed));
            }
            Ok(PhaseResult { verdicts, halt: false })
        }
        Phase::RollConstant {
            wheel_rate,
            turn_radius,
            direction,
            duration,
            expected_distance,
            distance_tolerance,
        } => {
            require(world, Mode::Rolling, label)?;
            let speed = wheel_rate * world.params.gear.wheel_radius;
            let sign = match direction {
                TurnDirection::Clockwise => -1.0,
                TurnDirection::Counterclockwise => 1.0,
            };
            let yaw_rate = turn_radius.map_or(0.0, |r| sign * speed / r);
            world.set_command(Command::Speed { speed, yaw_rate });
            let d0 = world.ledger().totals(Mode::Rolling).distance_m;
            for _ in 0..steps_for(*duration, dt) {
                world.step(dt)?;
            }
            world.set_command(Command::Idle);
            let d = world.ledger().totals(Mode::Rolling).distance_m - d0;
            let v = match expected_distance {
                Some(e) => {
                    let tol = distance_tolerance * e;
                    verdict(label, kind, "distance_m", d, tol, (d - e).abs() <= tol)
                }
                None => verdict(label, kind, "distance_m", d, f64::INFINITY, true),
            };
            Ok(single(v))
        }
        Phase::TransitionToFlying { duration, settle } | Phase::TransitionToRolling { duration, settle } => {
            let direction = match phase {
                Phase::TransitionToFlying { .. } => TransitionDirection::ToFlying,
                _ => TransitionDirection::ToRolling,
            };
            let destination = match direction {
                TransitionDirection::ToFlying => Mode::Flying,
                TransitionDirection::ToRolling => Mode::Rolling,
            };
            world.begin_transition(direction, *duration)?;
            let mut last = world.pendulum_state().expect("transition");
            for _ in 0..=steps_for(duration + settle, dt) {
                world.step(dt)?;
                match world.pendulum_state() {
                    Some(p) => last = p,
                    None => break,
                }
            }
            let converged = world.mode() == destination;
            let end = if converged {
                world.last_transition_exit().expect("exit recorded")
            } else {
                last
            };
            let guard = world.settings.guard;
            let angle = (end.theta - direction.target()).abs();
            let rate = end.theta_dot.abs();
            let verdicts = vec![
                verdict(label, kind, "terminal_angle_error_rad", angle, guard.angle_tol, converged && angle < guard.angle_tol),
                verdict(label, kind, "terminal_rate_rad_s", rate, guard.rate_tol, converged && rate < guard.rate_tol),
            ];
            Ok(PhaseResult {
                verdicts,
                halt: !converged,
            })
        }
        Phase::Takeoff {
            altitude,
            duration,
            settle,
            tolerance,
        } => {
            require(world, Mode::Flying, label)?;
            let s = world.flight_state().expect("flying");
            climb(world, &s, *altitude, *duration, *settle)?;
            let z = world.flight_state().expect("flying").position.z;
            Ok(single(upper_bound(label, kind, "altitude_error_m", (z - altitude).abs(), *tolerance)))
        }
        Phase::Hover { duration, tolerance } => {
            require(world, Mode::Flying, label)?;
            let s = world.flight_state().expect("flying");
            world.set_command(Command::Fly(FlightPlan::Hold {
                position: s.position,
                yaw: s.attitude.z,
            }));
            let mut max_err: f64 = 0.0;
            for _ in 0..steps_for(*duration, dt) {
                world.step(dt)?;
                let now = world.flight_state().expect("flying");
                max_err = max_err.max((now.position - s.position).norm());
            }
            Ok(single(upper_bound(label, kind, "max_position_error_m", max_err, *tolerance)))
        }
        Phase::AttitudeSteps {
            amplitude,
            axes,
            rise,
            hold,
            rest,
            tolerance,
        } => {
            require(world, Mode::Flying, label)?;
            let s = world.flight_state().expect("flying");
            let mut t = world.time() + rest;
            let mut steps = Vec::new();
            for axis in axes {
                let idx = match axis {
                    AttitudeAxis::Roll => 0,
                    AttitudeAxis::Pitch => 1,
                };
                // Doublet: +a, -a, back to level, so the lateral velocity
                // picked up on the first half is shed on the second.
                steps.push((idx, QuinticProfile::new(0.0, *amplitude, t, *rise)));
                t += rise + hold;
                steps.push((idx, QuinticProfile::new(0.0, -2.0 * amplitude, t, 2.0 * rise)));
                t += 2.0 * rise + hold;
                steps.push((idx, QuinticProfile::new(0.0, *amplitude, t, *rise)));
                t += rise + rest;
            }
            world.set_command(Command::Fly(FlightPlan::Attitude {
                steps,
                altitude: s.position.z,
                yaw: s.attitude.z,
            }));
            let mut max_err: f64 = 0.0;
            for _ in 0..steps_for(t - world.time(), dt) {
                let before = world.flight_state().expect("flying");
                let report = world.step(dt)?;
                if let Some(target) = report.attitude_target {
                    let e: Vector3<f64> = target - before.attitude;
                    max_err = max_err.max(e.x.abs()).max(e.y.abs());
                }
            }
            world.set_command(Command::Idle);
            Ok(single(upper_bound(label, kind, "max_attitude_error_rad", max_err, *tolerance)))
        }
        Phase::Land { duration, settle } => {
            require(world, Mode::Flying, label)?;
            let s = world.flight_state().expect("flying");
            climb(world, &s, 0.0, *duration, *settle)?;
            let now = world.flight_state().expect("flying");
            let g = world.settings.ground;
            let landed = now.position.z < g.max_height && now.velocity.norm() < g.max_speed;
            Ok(single(verdict(
                label,
                kind,
                "final_height_m",
                now.position.z,
                g.max_height,
                landed,
            )))
        }
    }
}

/// Receding-horizon tracking of `path` for `duration`; returns the largest
/// cross-track error after `settle`.
fn track(world: &mut World, path: PathReference, duration: f64, settle: f64) -> Result<f64, SimError> {
    let dt = world.settings.dt;
    let r = world.params.rolling;
    let mpc = RecedingHorizon::new(r.weights, r.limits, r.options, path)?;
    let t0 = world.time();
    world.set_command(Command::Track {
        mpc: Box::new(mpc),
        t0,
    });
    let n = steps_for(duration, dt);
    let settle_steps = steps_for(settle, dt);
    let mut max_err: f64 = 0.0;
    for k in 0..n {
        world.step(dt)?;
        if k + 1 >= settle_steps {
            let s = world.rolling_state().expect("rolling");
            max_err = max_err.max(path.cross_track_error([s.px, s.py]));
        }
    }
    world.set_command(Command::Idle);
    Ok(max_err)
}

fn climb(
    world: &mut World,
    from: &crate::flight::FlightState,
    altitude: f64,
    duration: f64,
    settle: f64,
) -> Result<(), SimError> {
    let dt = world.settings.dt;
    world.set_command(Command::Fly(FlightPlan::Vertical {
        xy: [from.position.x, from.position.y],
        profile: QuinticProfile::new(from.position.z, altitude, world.time(), duration),
        yaw: from.attitude.z,
    }));
    for _ in 0..steps_for(duration + settle, dt) {
        world.step(dt)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ModeKind, SimSettings, VehicleParams};
    use crate::rolling::UnicycleState;

    fn rolling_world() -> World {
        World::new(
            VehicleParams::default(),
            SimSettings::default(),
            ModeKind::Rolling(UnicycleState::default()),
        )
        .unwrap()
    }

    #[test]
    fn empty_phase_list_gives_empty_outputs() {
        let out = run_scenario(rolling_world(), &[]);
        assert!(out.log.is_empty());
        assert_eq!(out.ledger.total_energy(), 0.0);
        assert_eq!(out.ledger.total_time(), 0.0);
        assert!(out.verdicts.is_empty());
        assert!(out.passed());
    }

    #[test]
    fn mode_walk_of_phase_lists() {
        let phases = vec![
            Phase::TransitionToFlying {
                duration: 2.0,
                settle: 1.0,
            },
            Phase::Hover {
                duration: 1.0,
                tolerance: 0.05,
            },
        ];
        let walk = phase_mode_walk(Mode::Rolling, &phases).unwrap();
        assert_eq!(walk, vec![Mode::Rolling, Mode::TransitionToFlying, Mode::Flying]);
        let bad = vec![Phase::Hover {
            duration: 1.0,
            tolerance: 0.05,
        }];
        assert_eq!(phase_mode_walk(Mode::Rolling, &bad).unwrap_err().0, 0);
    }

    #[test]
    fn constant_speed_distance() {
        let phases = [Phase::RollConstant {
            wheel_rate: 1.0,
            turn_radius: None,
            direction: TurnDirection::Clockwise,
            duration: 10.0,
            expected_distance: Some(1.8),
            distance_tolerance: 0.02,
        }];
        let out = run_scenario(rolling_world(), &phases);
        assert!(out.passed(), "{:?}", out.verdicts);
    }
}
