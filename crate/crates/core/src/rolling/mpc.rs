use std::f64::consts::TAU;

use super::cost::{CostWeights, ReferenceTrajectory};
use super::optimizer::{optimize_tracking, OptimizeResult, OptimizerOptions};
use super::{InputLimits, RollingError, UnicycleInput, UnicycleState};

/// Time-parameterized ground paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathReference {
    /// Point at `center + radius (cos a, sin a)` with `a = start_angle + angular_rate t`.
    /// Negative `angular_rate` runs clockwise.
    Circle {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        angular_rate: f64,
    },
    Line {
        origin: [f64; 2],
        heading: f64,
        speed: f64,
    },
    Hold { point: [f64; 2] },
}

impl PathReference {
    /// Circle through the current pose, tangent to the current heading, run
    /// at `speed`; `clockwise` selects the side of the center.
    pub fn circle_from_pose(state: &UnicycleState, radius: f64, speed: f64, clockwise: bool) -> Self {
        let (s, c) = state.theta.sin_cos();
        let (center, rate) = if clockwise {
            ([state.px + radius * s, state.py - radius * c], -speed / radius)
        } else {
            ([state.px - radius * s, state.py + radius * c], speed / radius)
        };
        let start_angle = (state.py - center[1]).atan2(state.px - center[0]);
        PathReference::Circle {
            center,
            radius,
            start_angle,
            angular_rate: rate,
        }
    }

    pub fn line_from_pose(state: &UnicycleState, speed: f64) -> Self {
        PathReference::Line {
            origin: [state.px, state.py],
            heading: state.theta,
            speed,
        }
    }

    pub fn position(&self, t: f64) -> [f64; 2] {
        match *self {
            PathReference::Circle {
                center,
                radius,
                start_angle,
                angular_rate,
            } => {
                let a = start_angle + angular_rate * t;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            PathReference::Line { origin, heading, speed } => {
                [origin[0] + speed * t * heading.cos(), origin[1] + speed * t * heading.sin()]
            }
            PathReference::Hold { point } => point,
        }
    }

    pub fn speed(&self) -> f64 {
        match *self {
            PathReference::Circle {
                radius, angular_rate, ..
            } => radius * angular_rate.abs(),
            PathReference::Line { speed, .. } => speed.abs(),
            PathReference::Hold { .. } => 0.0,
        }
    }

    /// Time for one full lap; `None` for open paths.
    pub fn period(&self) -> Option<f64> {
        match *self {
            PathReference::Circle { angular_rate, .. } if angular_rate != 0.0 => Some(TAU / angular_rate.abs()),
            _ => None,
        }
    }

    /// Distance from the path geometry (not from the moving reference point).
    pub fn cross_track_error(&self, p: [f64; 2]) -> f64 {
        match *self {
            PathReference::Circle { center, radius, .. } => {
                ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs()
            }
            PathReference::Line { origin, heading, .. } => {
                let (dx, dy) = (p[0] - origin[0], p[1] - origin[1]);
                (-heading.sin() * dx + heading.cos() * dy).abs()
            }
            PathReference::Hold { point } => (p[0] - point[0]).hypot(p[1] - point[1]),
        }
    }

    /// Signed lateral offset, positive to the left of a line's direction.
    pub fn lateral_offset(&self, p: [f64; 2]) -> f64 {
        match *self {
            PathReference::Line { origin, heading, .. } => {
                let (dx, dy) = (p[0] - origin[0], p[1] - origin[1]);
                -heading.sin() * dx + heading.cos() * dy
            }
            _ => self.cross_track_error(p),
        }
    }

    /// `horizon` samples at `t0 + (k + 1) dt`.
    pub fn sample(&self, t0: f64, horizon: usize, dt: f64) -> ReferenceTrajectory {
        ReferenceTrajectory::new((1..=horizon).map(|k| self.position(t0 + k as f64 * dt)).collect())
    }
}

/// Receding-horizon tracker: solves the horizon problem at each call and
/// returns the first input. The previous solution, shifted by one step,
/// warm-starts the next solve.
#[derive(Debug, Clone)]
pub struct RecedingHorizon {
    pub weights: CostWeights,
    pub limits: InputLimits,
    pub options: OptimizerOptions,
    pub path: PathReference,
    previous: Option<Vec<UnicycleInput>>,
}

impl RecedingHorizon {
    pub fn new(
        weights: CostWeights,
        limits: InputLimits,
        options: OptimizerOptions,
        path: PathReference,
    ) -> Result<Self, RollingError> {
        weights.validate()?;
        if path.speed() > limits.nu_max {
            return Err(RollingError::InvalidReference(format!(
                "path speed {} exceeds nu_max {}",
                path.speed(),
                limits.nu_max
            )));
        }
        Ok(Self {
            weights,
            limits,
            options,
            path,
            previous: None,
        })
    }

    /// `t` is time since the path was anchored.
    pub fn control(&mut self, t: f64, state: &UnicycleState) -> Result<(UnicycleInput, OptimizeResult), RollingError> {
        let reference = self.path.sample(t, self.weights.horizon, self.weights.dt);
        let warm = self.previous.as_ref().map(|prev| {
            let mut w: Vec<UnicycleInput> = prev[1..].to_vec();
            w.push(*prev.last().expect("horizon >= 1"));
            w
        });
        let result = optimize_tracking(state, &reference, &self.weights, &self.limits, &self.options, warm.as_deref())?;
        self.previous = Some(result.inputs.clone());
        Ok((result.inputs[0], result))
    }
}
