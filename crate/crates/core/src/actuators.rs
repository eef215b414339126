//! Rotor and wheel-drive actuator models.
//!
//! Rotors follow the square law `F = kf * w^2`, `tau = km * w^2`, with the
//! ESC command mapped to speed by a quadratic in the dshot value. The wheel
//! is driven by a servo through a bevel-gear train of ratio `i`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuatorError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("dshot command {value} outside [{min}, {max}]")]
    CommandOutOfRange { value: f64, min: f64, max: f64 },
    #[error("rotor speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),
    #[error("dshot fit is rank deficient: {0}")]
    RankDeficient(String),
    #[error("servo limits exceeded (tau_s = {tau_s}, omega_s = {omega_s})")]
    Saturation {
        tau_s: f64,
        omega_s: f64,
        /// Output evaluated at the inputs clamped to the servo limits.
        clamped: WheelOutput,
    },
}

/// Rotor spin direction as seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinDirection {
    Cw,
    Ccw,
}

/// Coefficients of one rotor/ESC/propeller set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorParams {
    /// Thrust coefficient, N s^2 / rad^2.
    pub kappa_f: f64,
    /// Drag torque coefficient, N m s^2 / rad^2.
    pub kappa_m: f64,
    /// Quadratic dshot map `w = p1 u^2 + p2 u + p3`.
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Speed saturation, rad/s.
    pub omega_max: f64,
    pub dshot_min: f64,
    pub dshot_max: f64,
}

impl RotorParams {
    pub const DEFAULT_HOVER_OMEGA: f64 = 1000.0;
    pub const DEFAULT_OMEGA_MAX: f64 = 3000.0;
    pub const DEFAULT_DSHOT_MAX: f64 = 2047.0;
    pub const DEFAULT_TORQUE_RATIO: f64 = 0.016;

    /// Default set for a vehicle of the given weight: hover balance at
    /// 1000 rad/s, `km = 0.016 kf` and a linear dshot map reaching
    /// `omega_max` at full command.
    pub fn for_vehicle(mass: f64, gravity: f64) -> Self {
        let omega = Self::DEFAULT_HOVER_OMEGA;
        let kappa_f = mass * gravity / (4.0 * omega * omega);
        Self {
            kappa_f,
            kappa_m: Self::DEFAULT_TORQUE_RATIO * kappa_f,
            p1: 0.0,
            p2: Self::DEFAULT_OMEGA_MAX / Self::DEFAULT_DSHOT_MAX,
            p3: 0.0,
            omega_max: Self::DEFAULT_OMEGA_MAX,
            dshot_min: 0.0,
            dshot_max: Self::DEFAULT_DSHOT_MAX,
        }
    }

    pub fn validate(&self) -> Result<(), ActuatorError> {
        positive("kappa_f", self.kappa_f)?;
        positive("kappa_m", self.kappa_m)?;
        positive("omega_max", self.omega_max)?;
        if !(self.dshot_min.is_finite() && self.dshot_max.is_finite())
            || self.dshot_min >= self.dshot_max
        {
            return Err(ActuatorError::InvalidParams {
                field: "dshot_max",
                reason: format!(
                    "command interval [{}, {}] is empty",
                    self.dshot_min, self.dshot_max
                ),
            });
        }
        // The derivative of a quadratic is affine, so checking both ends of
        // the interval covers monotonicity everywhere on it.
        let slope = |u: f64| 2.0 * self.p1 * u + self.p2;
        if slope(self.dshot_min) < 0.0 || slope(self.dshot_max) < 0.0 {
            return Err(ActuatorError::InvalidParams {
                field: "p1",
                reason: "dshot map decreases on the command interval".into(),
            });
        }
        Ok(())
    }

    /// `km / kf`, the speed-independent torque-to-thrust ratio (m).
    pub fn torque_ratio(&self) -> f64 {
        self.kappa_m / self.kappa_f
    }

    /// Thrust of one rotor at `omega_max`.
    pub fn thrust_max(&self) -> f64 {
        self.kappa_f * self.omega_max * self.omega_max
    }

    /// Speed needed for a thrust, clamped to the rotor range.
    pub fn omega_for_thrust(&self, thrust: f64) -> f64 {
        (thrust.max(0.0) / self.kappa_f).sqrt().min(self.omega_max)
    }
}

/// One ESC command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorCommand {
    pub dshot: f64,
    pub spin_direction: SpinDirection,
}

/// Rotor speed commanded by a dshot value, saturated to `[0, omega_max]`.
pub fn rotor_speed_from_dshot(params: &RotorParams, cmd: &RotorCommand) -> Result<f64, ActuatorError> {
    let u = cmd.dshot;
    if !(u >= params.dshot_min && u <= params.dshot_max) {
        return Err(ActuatorError::CommandOutOfRange {
            value: u,
            min: params.dshot_min,
            max: params.dshot_max,
        });
    }
    let omega = params.p1 * u * u + params.p2 * u + params.p3;
    Ok(omega.clamp(0.0, params.omega_max))
}

/// Thrust (N) and drag torque magnitude (N m) at a rotor speed.
pub fn rotor_thrust_torque(params: &RotorParams, omega: f64) -> Result<(f64, f64), ActuatorError> {
    if omega.is_nan() || omega < 0.0 {
        return Err(ActuatorError::NegativeSpeed(omega));
    }
    let w2 = omega * omega;
    Ok((params.kappa_f * w2, params.kappa_m * w2))
}

/// Thrust coefficient from a hover balance: `sum(kf * w_i^2) = m g`.
pub fn calibrate_kappa_f(vehicle_mass: f64, hover_omegas: [f64; 4], gravity: f64) -> Result<f64, ActuatorError> {
    if !(vehicle_mass > 0.0 && gravity > 0.0) {
        return Err(ActuatorError::DegenerateCalibration(format!(
            "mass {vehicle_mass} and gravity {gravity} must be positive"
        )));
    }
    if let Some(w) = hover_omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(ActuatorError::DegenerateCalibration(format!(
            "hover speed {w} is not positive"
        )));
    }
    let sum_sq: f64 = hover_omegas.iter().map(|w| w * w).sum();
    Ok(vehicle_mass * gravity / sum_sq)
}

/// Least-squares quadratic dshot map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DshotFit {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// RMS of the fit residuals, rad/s.
    pub residual: f64,
}

impl DshotFit {
    pub fn eval(&self, u: f64) -> f64 {
        self.p1 * u * u + self.p2 * u + self.p3
    }
}

/// Fits `w = p1 u^2 + p2 u + p3` to `(dshot, omega)` samples.
///
/// The regression runs on a centred and scaled abscissa so that dshot values
/// in the thousands do not wreck the conditioning of the Vandermonde matrix.
pub fn fit_dshot_map(samples: &[(f64, f64)]) -> Result<DshotFit, ActuatorError> {
    if samples.len() < 3 {
        return Err(ActuatorError::RankDeficient(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(u, w)| !u.is_finite() || !w.is_finite()) {
        return Err(ActuatorError::RankDeficient("non-finite sample".into()));
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(ActuatorError::RankDeficient(format!(
            "need at least 3 distinct dshot values, got {}",
            distinct.len()
        )));
    }

    let n = samples.len();
    let center = samples.iter().map(|s| s.0).sum::<f64>() / n as f64;
    let scale = samples
        .iter()
        .map(|s| (s.0 - center).abs())
        .fold(0.0, f64::max);

    let a = DMatrix::from_fn(n, 3, |r, c| {
        let t = (samples[r].0 - center) / scale;
        t.powi(c as i32)
    });
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return Err(ActuatorError::RankDeficient(format!(
            "design matrix condition {:.3e}",
            smax / smin
        )));
    }
    let coef = svd
        .solve(&b, 0.0)
        .map_err(|e| ActuatorError::RankDeficient(e.to_string()))?;
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);

    // w = c2 t^2 + c1 t + c0 with t = (u - center) / scale
    let s2 = scale * scale;
    let p1 = c2 / s2;
    let p2 = c1 / scale - 2.0 * c2 * center / s2;
    let p3 = c2 * center * center / s2 - c1 * center / scale + c0;

    let fitted = &a * &coef;
    let sse: f64 = (fitted - b).iter().map(|r| r * r).sum();
    Ok(DshotFit {
        p1,
        p2,
        p3,
        residual: (sse / n as f64).sqrt(),
    })
}

/// How torque is carried through the gear train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GearConvention {
    /// `tau_w = tau_s / i`, the wheel-torque relation in its literal form.
    #[default]
    Literal,
    /// `tau_w = tau_s * i`, which conserves power through the reducer.
    PowerConserving,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GearTrainParams {
    pub ratio: f64,
    pub wheel_radius: f64,
    pub tau_s_max: f64,
    pub omega_s_max: f64,
    pub convention: GearConvention,
}

impl Default for GearTrainParams {
    fn default() -> Self {
        Self {
            ratio: 2.0,
            wheel_radius: 0.18,
            tau_s_max: 2.0,
            omega_s_max: 20.0,
            convention: GearConvention::Literal,
        }
    }
}

impl GearTrainParams {
    pub fn validate(&self) -> Result<(), ActuatorError> {
        positive("ratio", self.ratio)?;
        positive("wheel_radius", self.wheel_radius)?;
        positive("tau_s_max", self.tau_s_max)?;
        positive("omega_s_max", self.omega_s_max)
    }

    /// Servo speed that rolls the wheel at ground speed `nu`.
    pub fn servo_speed_for(&self, nu: f64) -> f64 {
        self.ratio * nu / self.wheel_radius
    }

    /// Servo torque that produces wheel torque `tau_w` under the configured
    /// convention.
    pub fn servo_torque_for(&self, tau_w: f64) -> f64 {
        match self.convention {
            GearConvention::Literal => tau_w * self.ratio,
            GearConvention::PowerConserving => tau_w / self.ratio,
        }
    }
}

/// Wheel-side quantities produced by one servo operating point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelOutput {
    pub omega_w: f64,
    pub nu_w: f64,
    pub tau_w: f64,
    pub force_w: f64,
    /// Servo mechanical power, W.
    pub power_s: f64,
}

fn wheel_output_unchecked(params: &GearTrainParams, tau_s: f64, omega_s: f64) -> WheelOutput {
    let omega_w = omega_s / params.ratio;
    let tau_w = match params.convention {
        GearConvention::Literal => tau_s / params.ratio,
        GearConvention::PowerConserving => tau_s * params.ratio,
    };
    WheelOutput {
        omega_w,
        nu_w: omega_w * params.wheel_radius,
        tau_w,
        force_w: tau_w / params.wheel_radius,
        power_s: tau_s * omega_s,
    }
}

/// Wheel speed, ground speed, wheel torque, traction force and servo power
/// for a servo operating point.
pub fn wheel_output(params: &GearTrainParams, tau_s: f64, omega_s: f64) -> Result<WheelOutput, ActuatorError> {
    if tau_s.abs() > params.tau_s_max || omega_s.abs() > params.omega_s_max {
        let ct = tau_s.clamp(-params.tau_s_max, params.tau_s_max);
        let cw = omega_s.clamp(-params.omega_s_max, params.omega_s_max);
        return Err(ActuatorError::Saturation {
            tau_s,
            omega_s,
            clamped: wheel_output_unchecked(params, ct, cw),
        });
    }
    Ok(wheel_output_unchecked(params, tau_s, omega_s))
}

fn positive(field: &'static str, v: f64) -> Result<(), ActuatorError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ActuatorError::InvalidParams {
            field,
            reason: format!("must be a positive finite number, got {v}"),
        })
    }
}
