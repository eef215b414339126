//! Scenario files: TOML with one section per parameter set and an ordered
//! `[[phase]]` list.
//!
//! Geometry that has no sensible default (mass, propeller distance, gear
//! ratio, wheel radius, pivot geometry) is required; tuning values fall back
//! to library defaults. Errors carry the dotted path of the offending field.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use thiserror::Error;

use crate::actuators::{GearConvention, GearTrainParams, RotorParams};
use crate::flight::{FlightGains, FlightParams, FlightState};
use crate::rolling::{CostWeights, InputLimits, OptimizerOptions, UnicycleState};
use crate::sim::{
    phase_mode_walk, run_scenario, Battery, GroundContact, Mode, ModeKind, Phase, PowerModel, ReportParams,
    RollingParams, ScenarioOutcome, SimSettings, VehicleParams, World,
};
use crate::transition::{TransitionGuard, TransitionParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Parse { path, .. } | ConfigError::Invalid { path, .. } => path,
        }
    }

    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    #[default]
    Rolling,
    Flying,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub mode: InitialMode,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub heading: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            mode: InitialMode::Rolling,
            position: [0.0; 3],
            heading: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub log_rate_hz: f64,
    pub seed: u64,
    /// Half-width of the uniform perturbation applied to the initial planar
    /// position (m) and heading (rad).
    pub initial_jitter: f64,
    pub guard_angle: f64,
    pub guard_rate: f64,
    pub ground_height: f64,
    pub ground_speed: f64,
    pub initial: InitialSection,
}

impl Default for SimSection {
    fn default() -> Self {
        let guard = TransitionGuard::default();
        let ground = GroundContact::default();
        Self {
            dt: 1e-3,
            log_rate_hz: 100.0,
            seed: 0,
            initial_jitter: 0.0,
            guard_angle: guard.angle_tol,
            guard_rate: guard.rate_tol,
            ground_height: ground.max_height,
            ground_speed: ground.max_speed,
            initial: InitialSection::default(),
        }
    }
}

fn g0() -> f64 {
    9.81
}
fn default_inertia() -> [f64; 3] {
    [0.020, 0.020, 0.035]
}
fn default_width() -> f64 {
    0.12
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub prop_distance: f64,
    #[serde(default = "g0")]
    pub gravity: f64,
    /// Principal moments of inertia, kg m^2.
    #[serde(default = "default_inertia")]
    pub inertia: [f64; 3],
    #[serde(default = "default_width")]
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RotorSection {
    pub kappa_f: Option<f64>,
    pub kappa_m: Option<f64>,
    /// `[p1, p2, p3]` of the dshot map.
    pub dshot_map: Option<[f64; 3]>,
    pub omega_max: Option<f64>,
    pub dshot_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    #[default]
    Literal,
    PowerConserving,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GearSection {
    pub ratio: f64,
    pub wheel_radius: f64,
    pub tau_s_max: Option<f64>,
    pub omega_s_max: Option<f64>,
    #[serde(default)]
    pub convention: ConventionName,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    pub pivot_length: f64,
    pub lever: f64,
    pub kp: Option<f64>,
    pub kv: Option<f64>,
    pub thrust_pair_max: Option<f64>,
    pub bidirectional_authority: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlightControlSection {
    pub position_bandwidth: f64,
    pub attitude_bandwidth: f64,
    pub max_tilt: f64,
}

impl Default for FlightControlSection {
    fn default() -> Self {
        Self {
            position_bandwidth: FlightGains::DEFAULT_POSITION_BANDWIDTH,
            attitude_bandwidth: FlightGains::DEFAULT_ATTITUDE_BANDWIDTH,
            max_tilt: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RollingSection {
    pub alpha_max: f64,
    pub omega_max: f64,
    pub nu_max: f64,
    pub horizon: usize,
    pub dt: f64,
    /// Diagonal of the stage weight on `[px, py, nu, theta]`.
    pub stage: [f64; 4],
    /// Diagonal of the terminal weight; ten times `stage` when absent.
    pub terminal: Option<[f64; 4]>,
    /// Diagonal of the input weight on `[alpha, omega]`.
    pub input: [f64; 2],
    pub max_iterations: usize,
    pub tolerance: f64,
    pub bias_fraction: f64,
    pub speed_gain: f64,
}

impl Default for RollingSection {
    fn default() -> Self {
        let limits = InputLimits::default();
        let w = CostWeights::default();
        let opts = OptimizerOptions::default();
        let r = RollingParams::default();
        Self {
            alpha_max: limits.alpha_max,
            omega_max: limits.omega_max,
            nu_max: limits.nu_max,
            horizon: w.horizon,
            dt: w.dt,
            stage: [10.0, 10.0, 1.0, 1.0],
            terminal: None,
            input: [1.0, 1.0],
            max_iterations: opts.max_iterations,
            tolerance: opts.tolerance,
            bias_fraction: r.bias_fraction,
            speed_gain: r.speed_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub battery_capacity_mah: f64,
    pub battery_voltage: f64,
    pub flight_power_per_kg: f64,
    pub servo_efficiency: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        let b = Battery::default();
        Self {
            battery_capacity_mah: b.capacity_mah,
            battery_voltage: b.voltage,
            flight_power_per_kg: PowerModel::DEFAULT_FLIGHT_POWER_PER_KG,
            servo_efficiency: PowerModel::DEFAULT_SERVO_EFFICIENCY,
        }
    }
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub sim: SimSection,
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub rotor: RotorSection,
    pub gear: GearSection,
    pub transition: TransitionSection,
    #[serde(default)]
    pub flight_control: FlightControlSection,
    #[serde(default)]
    pub rolling: RollingSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default, rename = "phase")]
    pub phases: Vec<Phase>,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub params: VehicleParams,
    pub settings: SimSettings,
    pub initial: ModeKind,
    pub phases: Vec<Phase>,
    pub seed: u64,
}

impl Scenario {
    pub fn world(&self) -> World {
        World::new(self.params, self.settings, self.initial.clone()).expect("settings validated at build time")
    }

    pub fn run(&self) -> ScenarioOutcome {
        run_scenario(self.world(), &self.phases)
    }

    pub fn report_params(&self) -> ReportParams {
        ReportParams {
            vehicle_mass: self.params.flight.mass,
            battery: self.params.battery,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("must be non-negative, got {v}")))
    }
}

/// Dotted path of a serde error; a missing field is reported at the field
/// itself rather than its parent table.
fn error_path(path: &serde_path_to_error::Path, message: &str) -> String {
    let mut p = path.to_string();
    if p == "." {
        p.clear();
    }
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            if p.is_empty() {
                p = field.to_string();
            } else {
                p = format!("{p}.{field}");
            }
        }
    }
    if p.is_empty() {
        "<root>".into()
    } else {
        p
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
            path: "<root>".into(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let message = e.inner().message().to_string();
            ConfigError::Parse {
                path: error_path(e.path(), &message),
                message,
            }
        })
    }

    /// Checks every value and builds the runnable scenario. `seed`
    /// overrides `sim.seed`.
    pub fn build(&self, seed: Option<u64>) -> Result<Scenario, ConfigError> {
        let s = &self.sim;
        positive("sim.dt", s.dt)?;
        positive("sim.log_rate_hz", s.log_rate_hz)?;
        non_negative("sim.initial_jitter", s.initial_jitter)?;
        positive("sim.guard_angle", s.guard_angle)?;
        positive("sim.guard_rate", s.guard_rate)?;
        positive("sim.ground_height", s.ground_height)?;
        positive("sim.ground_speed", s.ground_speed)?;

        let v = &self.vehicle;
        positive("vehicle.mass", v.mass)?;
        positive("vehicle.prop_distance", v.prop_distance)?;
        positive("vehicle.gravity", v.gravity)?;
        positive("vehicle.width", v.width)?;
        for (i, m) in v.inertia.iter().enumerate() {
            positive(&format!("vehicle.inertia[{i}]"), *m)?;
        }
        let flight = FlightParams {
            mass: v.mass,
            inertia: Matrix3::from_diagonal(&Vector3::from(v.inertia)),
            prop_distance: v.prop_distance,
            gravity: v.gravity,
        };
        flight
            .validate()
            .map_err(|e| ConfigError::invalid("vehicle", e.to_string()))?;

        let mut rotor = RotorParams::for_vehicle(v.mass, v.gravity);
        let r = &self.rotor;
        if let Some(kf) = r.kappa_f {
            rotor.kappa_f = kf;
            rotor.kappa_m = RotorParams::DEFAULT_TORQUE_RATIO * kf;
        }
        if let Some(km) = r.kappa_m {
            rotor.kappa_m = km;
        }
        if let Some(w) = r.omega_max {
            rotor.omega_max = w;
            rotor.p2 = w / rotor.dshot_max;
        }
        if let Some(d) = r.dshot_max {
            rotor.dshot_max = d;
            rotor.p2 = rotor.omega_max / d;
        }
        if let Some([p1, p2, p3]) = r.dshot_map {
            rotor.p1 = p1;
            rotor.p2 = p2;
            rotor.p3 = p3;
        }
        rotor.validate().map_err(|e| match e {
            crate::actuators::ActuatorError::InvalidParams { field, reason } => {
                ConfigError::invalid(format!("rotor.{field}"), reason)
            }
            other => ConfigError::invalid("rotor", other.to_string()),
        })?;

        let g = &self.gear;
        let defaults = GearTrainParams::default();
        let gear = GearTrainParams {
            ratio: g.ratio,
            wheel_radius: g.wheel_radius,
            tau_s_max: g.tau_s_max.unwrap_or(defaults.tau_s_max),
            omega_s_max: g.omega_s_max.unwrap_or(defaults.omega_s_max),
            convention: match g.convention {
                ConventionName::Literal => GearConvention::Literal,
                ConventionName::PowerConserving => GearConvention::PowerConserving,
            },
        };
        positive("gear.ratio", gear.ratio)?;
        positive("gear.wheel_radius", gear.wheel_radius)?;
        positive("gear.tau_s_max", gear.tau_s_max)?;
        positive("gear.omega_s_max", gear.omega_s_max)?;

        let t = &self.transition;
        let td = TransitionParams::default();
        let transition = TransitionParams {
            mass: v.mass,
            pivot_length: t.pivot_length,
            lever: t.lever,
            gravity: v.gravity,
            kp: t.kp.unwrap_or(td.kp),
            kv: t.kv.unwrap_or(td.kv),
            thrust_pair_max: t.thrust_pair_max.unwrap_or(td.thrust_pair_max),
            bidirectional_authority: t.bidirectional_authority.unwrap_or(td.bidirectional_authority),
        };
        transition.validate().map_err(|e| match e {
            crate::transition::TransitionError::InvalidParams { field, reason } => {
                ConfigError::invalid(format!("transition.{field}"), reason)
            }
            other => ConfigError::invalid("transition", other.to_string()),
        })?;

        let fc = &self.flight_control;
        positive("flight_control.position_bandwidth", fc.position_bandwidth)?;
        positive("flight_control.attitude_bandwidth", fc.attitude_bandwidth)?;
        positive("flight_control.max_tilt", fc.max_tilt)?;
        let mut flight_gains = FlightGains::critically_damped(&flight, fc.position_bandwidth, fc.attitude_bandwidth);
        flight_gains.max_tilt = fc.max_tilt;

        let rl = &self.rolling;
        let limits = InputLimits {
            alpha_max: rl.alpha_max,
            omega_max: rl.omega_max,
            nu_max: rl.nu_max,
        };
        positive("rolling.alpha_max", limits.alpha_max)?;
        positive("rolling.omega_max", limits.omega_max)?;
        positive("rolling.nu_max", limits.nu_max)?;
        let stage = Matrix4::from_diagonal(&Vector4::from(rl.stage));
        let weights = CostWeights {
            stage,
            terminal: rl
                .terminal
                .map(|d| Matrix4::from_diagonal(&Vector4::from(d)))
                .unwrap_or(stage * 10.0),
            input: Matrix2::from_diagonal(&Vector2::from(rl.input)),
            horizon: rl.horizon,
            dt: rl.dt,
        };
        weights
            .validate()
            .map_err(|e| ConfigError::invalid("rolling", e.to_string()))?;
        if rl.max_iterations == 0 {
            return Err(ConfigError::invalid("rolling.max_iterations", "must be at least 1"));
        }
        positive("rolling.tolerance", rl.tolerance)?;
        non_negative("rolling.bias_fraction", rl.bias_fraction)?;
        positive("rolling.speed_gain", rl.speed_gain)?;
        let ratio = rl.dt / s.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio || ratio.round() < 1.0 {
            return Err(ConfigError::invalid(
                "rolling.dt",
                format!("must be a whole multiple of sim.dt ({})", s.dt),
            ));
        }

        let e = &self.energy;
        positive("energy.battery_capacity_mah", e.battery_capacity_mah)?;
        positive("energy.battery_voltage", e.battery_voltage)?;
        positive("energy.flight_power_per_kg", e.flight_power_per_kg)?;
        if !(e.servo_efficiency > 0.0 && e.servo_efficiency <= 1.0) {
            return Err(ConfigError::invalid(
                "energy.servo_efficiency",
                format!("must lie in (0, 1], got {}", e.servo_efficiency),
            ));
        }
        let hover_omega = rotor.omega_for_thrust(flight.hover_thrust() / 4.0);
        let params = VehicleParams {
            flight,
            rotor,
            gear,
            transition,
            flight_gains,
            rolling: RollingParams {
                weights,
                limits,
                options: OptimizerOptions {
                    max_iterations: rl.max_iterations,
                    tolerance: rl.tolerance,
                },
                bias_fraction: rl.bias_fraction,
                speed_gain: rl.speed_gain,
            },
            power: PowerModel::calibrated(e.flight_power_per_kg, v.mass, hover_omega, e.servo_efficiency),
            battery: Battery {
                capacity_mah: e.battery_capacity_mah,
                voltage: e.battery_voltage,
            },
            width: v.width,
        };

        let settings = SimSettings {
            dt: s.dt,
            log_decimation: SimSettings::decimation_for_rate(s.dt, s.log_rate_hz),
            guard: TransitionGuard {
                angle_tol: s.guard_angle,
                rate_tol: s.guard_rate,
            },
            ground: GroundContact {
                max_height: s.ground_height,
                max_speed: s.ground_speed,
            },
        };

        for (i, p) in self.phases.iter().enumerate() {
            p.validate()
                .map_err(|m| ConfigError::invalid(format!("phase[{i}]"), format!("{}: {m}", p.name())))?;
            if let Phase::RollCircle { speed, .. } | Phase::RollLine { speed, .. } = p {
                if *speed > limits.nu_max {
                    return Err(ConfigError::invalid(
                        format!("phase[{i}].speed"),
                        format!("exceeds rolling.nu_max ({})", limits.nu_max),
                    ));
                }
            }
        }
        let start_mode = match s.initial.mode {
            InitialMode::Rolling => Mode::Rolling,
            InitialMode::Flying => Mode::Flying,
        };
        phase_mode_walk(start_mode, &self.phases)
            .map_err(|(i, m)| ConfigError::invalid(format!("phase[{i}]"), m))?;

        let seed = seed.unwrap_or(s.seed);
        let mut pos = s.initial.position;
        let mut heading = s.initial.heading;
        if s.initial_jitter > 0.0 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let j = s.initial_jitter;
            pos[0] += rng.random_range(-j..=j);
            pos[1] += rng.random_range(-j..=j);
            heading += rng.random_range(-j..=j);
        }
        let initial = match s.initial.mode {
            InitialMode::Rolling => ModeKind::Rolling(UnicycleState::new(pos[0], pos[1], 0.0, heading)),
            InitialMode::Flying => {
                non_negative("sim.initial.position[2]", pos[2])?;
                ModeKind::Flying(FlightState::at_rest(Vector3::from(pos), heading))
            }
        };

        Ok(Scenario {
            name: self.name.clone(),
            params,
            settings,
            initial,
            phases: self.phases.clone(),
            seed,
        })
    }
}

/// Parses and validates in one go.
pub fn load_scenario(text: &str, seed: Option<u64>) -> Result<Scenario, ConfigError> {
    ScenarioConfig::from_toml(text)?.build(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[vehicle]
mass = 1.5
prop_distance = 0.22

[gear]
ratio = 2.0
wheel_radius = 0.18

[transition]
pivot_length = 0.10
lever = 0.11
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let s = load_scenario(MINIMAL, None).unwrap();
        assert_eq!(s.params.gear, GearTrainParams::default());
        assert_eq!(s.params.transition, TransitionParams::default());
        assert_eq!(s.params.rolling.weights, CostWeights::default());
        assert_eq!(s.settings.log_decimation, 10);
        assert!(s.phases.is_empty());
    }

    #[test]
    fn missing_wheel_radius_names_the_field() {
        let text = MINIMAL.replace("wheel_radius = 0.18\n", "");
        let err = load_scenario(&text, None).unwrap_err();
        assert_eq!(err.path(), "gear.wheel_radius", "{err}");
    }

    #[test]
    fn wrong_type_names_the_field() {
        let text = MINIMAL.replace("lever = 0.11", "lever = \"long\"");
        let err = load_scenario(&text, None).unwrap_err();
        assert_eq!(err.path(), "transition.lever", "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = MINIMAL.replace("ratio = 2.0", "ratio = 2.0\nratoi = 3.0");
        assert!(load_scenario(&text, None).is_err());
    }

    #[test]
    fn negative_value_names_the_field() {
        let text = MINIMAL.replace("mass = 1.5", "mass = -1.5");
        assert_eq!(load_scenario(&text, None).unwrap_err().path(), "vehicle.mass");
    }

    #[test]
    fn invalid_mode_walk_is_rejected() {
        let text = format!("{MINIMAL}\n[[phase]]\ntype = \"hover\"\nduration = 1.0\n");
        let err = load_scenario(&text, None).unwrap_err();
        assert_eq!(err.path(), "phase[0]");
    }

    #[test]
    fn phases_parse_with_defaults() {
        let text = format!(
            "{MINIMAL}\n[[phase]]\ntype = \"roll_circle\"\nradius = 0.25\ndirection = \"clockwise\"\n\n[[phase]]\ntype = \"transition_to_flying\"\n"
        );
        let s = load_scenario(&text, None).unwrap();
        assert_eq!(s.phases.len(), 2);
        assert!(matches!(s.phases[0], Phase::RollCircle { speed, laps, .. } if speed == 0.18 && laps == 1.0));
    }

    #[test]
    fn jitter_depends_on_seed_only() {
        let text = MINIMAL.to_string() + "\n[sim]\ninitial_jitter = 0.01\n";
        let a = load_scenario(&text, Some(1)).unwrap();
        let b = load_scenario(&text, Some(1)).unwrap();
        let c = load_scenario(&text, Some(2)).unwrap();
        assert_eq!(a.initial, b.initial);
        assert_ne!(a.initial, c.initial);
    }
}
