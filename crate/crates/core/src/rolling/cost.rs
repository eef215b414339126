use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use super::{RollingError, UnicycleInput};

/// Quadratic tracking weights and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub terminal: Matrix4<f64>,
    pub stage: Matrix4<f64>,
    pub input: Matrix2<f64>,
    pub horizon: usize,
    /// Prediction step, s.
    pub dt: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        let stage = Matrix4::from_diagonal(&Vector4::new(10.0, 10.0, 1.0, 1.0));
        Self {
            terminal: stage * 10.0,
            stage,
            input: Matrix2::identity(),
            horizon: 20,
            dt: 0.05,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), RollingError> {
        fn psd(m: nalgebra::DMatrix<f64>, name: &str) -> Result<(), RollingError> {
            let scale = m.abs().max().max(1.0);
            if (&m - m.transpose()).abs().max() > 1e-12 * scale {
                return Err(RollingError::InvalidWeights(format!("{name} is not symmetric")));
            }
            let min_eig = m.symmetric_eigenvalues().min();
            if min_eig < -1e-12 * scale {
                return Err(RollingError::InvalidWeights(format!(
                    "{name} is not positive semidefinite (eigenvalue {min_eig})"
                )));
            }
            Ok(())
        }
        psd(nalgebra::DMatrix::from_column_slice(4, 4, self.terminal.as_slice()), "terminal")?;
        psd(nalgebra::DMatrix::from_column_slice(4, 4, self.stage.as_slice()), "stage")?;
        psd(nalgebra::DMatrix::from_column_slice(2, 2, self.input.as_slice()), "input")?;
        if self.input.cholesky().is_none() {
            return Err(RollingError::InvalidWeights("input weight is not positive definite".into()));
        }
        if self.horizon == 0 {
            return Err(RollingError::InvalidWeights("horizon must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(RollingError::InvalidWeights(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Desired positions; `samples[j]` is the target for the state reached after
/// `j + 1` prediction steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceTrajectory {
    pub samples: Vec<[f64; 2]>,
}

impl ReferenceTrajectory {
    pub fn new(samples: Vec<[f64; 2]>) -> Self {
        Self { samples }
    }

    /// Consecutive samples must be reachable at `nu_max`.
    pub fn validate(&self, dt: f64, nu_max: f64) -> Result<(), RollingError> {
        if self.samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RollingError::InvalidReference("non-finite sample".into()));
        }
        for (j, w) in self.samples.windows(2).enumerate() {
            let step = Vector2::new(w[1][0] - w[0][0], w[1][1] - w[0][1]).norm();
            if step > nu_max * dt * (1.0 + 1e-9) {
                return Err(RollingError::InvalidReference(format!(
                    "samples {j} and {} are {step:.4} m apart, more than nu_max * dt",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// Full 4-state targets for the first `horizon` samples. Speed comes from
    /// finite differences of the positions and heading from their direction;
    /// headings are unwrapped into a continuous sequence anchored within pi of
    /// `anchor_heading`, which also seeds the heading of a stationary
    /// reference.
    pub fn targets(&self, horizon: usize, dt: f64, anchor_heading: f64) -> Result<Vec<Vector4<f64>>, RollingError> {
        if self.samples.len() < horizon {
            return Err(RollingError::Dimension(format!(
                "reference has {} samples, horizon needs {horizon}",
                self.samples.len()
            )));
        }
        let pts = &self.samples[..horizon];
        let n = pts.len();
        let mut out = Vec::with_capacity(n);
        let mut prev_heading = anchor_heading;
        for j in 0..n {
            let (a, b) = if n == 1 {
                (pts[0], pts[0])
            } else if j + 1 < n {
                (pts[j], pts[j + 1])
            } else {
                (pts[j - 1], pts[j])
            };
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let dist = (dx * dx + dy * dy).sqrt();
            let heading = if dist > 1e-12 {
                let raw = dy.atan2(dx);
                prev_heading + crate::math::wrap_angle(raw - prev_heading)
            } else {
                prev_heading
            };
            prev_heading = heading;
            out.push(Vector4::new(pts[j][0], pts[j][1], dist / dt, heading));
        }
        Ok(out)
    }
}

/// `||x[N] - x_d[N]||_S^2 + sum_{k=1}^{N-1} (||x[k] - x_d[k]||_Q^2 + ||u[k]||_R^2)`.
///
/// `states` holds `x[0..=N]`, `inputs` holds `u[0..N]` and `targets[k - 1]`
/// is `x_d[k]`.
pub fn evaluate_cost_with_targets(
    states: &[Vector4<f64>],
    inputs: &[UnicycleInput],
    targets: &[Vector4<f64>],
    w: &CostWeights,
) -> Result<f64, RollingError> {
    let n = w.horizon;
    if states.len() != n + 1 || inputs.len() != n || targets.len() != n {
        return Err(RollingError::Dimension(format!(
            "horizon {n} needs {} states, {n} inputs and {n} targets; got {}, {}, {}",
            n + 1,
            states.len(),
            inputs.len(),
            targets.len()
        )));
    }
    let e = states[n] - targets[n - 1];
    let mut j = e.dot(&(w.terminal * e));
    for k in 1..n {
        let e = states[k] - targets[k - 1];
        let u = Vector2::new(inputs[k].alpha, inputs[k].omega);
        j += e.dot(&(w.stage * e)) + u.dot(&(w.input * u));
    }
    Ok(j)
}

/// Tracking cost against a position reference, with speed and heading
/// targets derived from the reference (heading anchored at `x[0]`).
pub fn evaluate_cost(
    states: &[Vector4<f64>],
    inputs: &[UnicycleInput],
    reference: &ReferenceTrajectory,
    w: &CostWeights,
) -> Result<f64, RollingError> {
    let anchor = states
        .first()
        .map(|s| s[3])
        .ok_or_else(|| RollingError::Dimension("no states".into()))?;
    let targets = reference.targets(w.horizon, w.dt, anchor)?;
    evaluate_cost_with_targets(states, inputs, &targets, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(n: usize) -> CostWeights {
        CostWeights {
            horizon: n,
            ..Default::default()
        }
    }

    #[test]
    fn default_weights_are_valid() {
        CostWeights::default().validate().unwrap();
        let bad = CostWeights {
            input: Matrix2::zeros(),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let asym = CostWeights {
            stage: Matrix4::new(1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
            ..Default::default()
        };
        assert!(asym.validate().is_err());
    }

    #[test]
    fn perfect_tracking_costs_nothing() {
        let x = Vector4::new(1.0, 2.0, 0.0, 0.3);
        let w = weights(3);
        let j = evaluate_cost_with_targets(&[x; 4], &[UnicycleInput::default(); 3], &[x; 3], &w).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn terminal_term_isolated() {
        let w = CostWeights {
            terminal: Matrix4::identity(),
            stage: Matrix4::zeros(),
            input: Matrix2::identity(),
            horizon: 2,
            dt: 0.1,
        };
        let states = [Vector4::zeros(), Vector4::zeros(), Vector4::new(0.3, -0.4, 0.0, 0.0)];
        let j = evaluate_cost_with_targets(&states, &[UnicycleInput::default(); 2], &[Vector4::zeros(); 2], &w).unwrap();
        assert!((j - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_two_step_instance() {
        // N = 2: J = e2' S e2 + e1' Q e1 + u1' R u1; u0 is not weighted.
        let w = CostWeights {
            terminal: Matrix4::from_diagonal(&Vector4::new(2.0, 2.0, 1.0, 1.0)),
            stage: Matrix4::from_diagonal(&Vector4::new(1.0, 3.0, 0.5, 0.0)),
            input: Matrix2::from_diagonal(&Vector2::new(4.0, 0.25)),
            horizon: 2,
            dt: 0.1,
        };
        let states = [
            Vector4::new(9.0, 9.0, 9.0, 9.0),
            Vector4::new(1.0, 1.0, 1.0, 1.0),
            Vector4::new(2.0, 0.0, 0.0, 0.0),
        ];
        let targets = [Vector4::new(0.0, 2.0, 0.0, 5.0), Vector4::new(1.0, 1.0, 0.0, 0.0)];
        let inputs = [UnicycleInput::new(100.0, 100.0), UnicycleInput::new(0.5, 2.0)];
        // e2 = (1, -1, 0, 0): 2 + 2 = 4
        // e1 = (1, -1, 1, -4): 1 + 3 + 0.5 + 0 = 4.5
        // u1: 4 * 0.25 + 0.25 * 4 = 2
        let j = evaluate_cost_with_targets(&states, &inputs, &targets, &w).unwrap();
        assert!((j - 10.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = weights(3);
        assert!(matches!(
            evaluate_cost_with_targets(&[Vector4::zeros(); 3], &[UnicycleInput::default(); 3], &[Vector4::zeros(); 3], &w),
            Err(RollingError::Dimension(_))
        ));
    }

    #[test]
    fn targets_derive_speed_and_heading() {
        let r = ReferenceTrajectory::new(vec![[0.1, 0.0], [0.2, 0.0], [0.2, 0.1]]);
        let t = r.targets(3, 0.5, 0.0).unwrap();
        assert!((t[0][2] - 0.2).abs() < 1e-12);
        assert_eq!(t[0][3], 0.0);
        assert!((t[1][3] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((t[2][3] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn stationary_reference_keeps_anchor_heading() {
        let r = ReferenceTrajectory::new(vec![[1.0, 1.0]; 4]);
        let t = r.targets(4, 0.05, 2.5).unwrap();
        assert!(t.iter().all(|x| x[2] == 0.0 && x[3] == 2.5));
    }

    #[test]
    fn headings_unwrap_around_anchor() {
        // Moving in -x direction; anchor slightly below -pi.
        let r = ReferenceTrajectory::new(vec![[0.0, 0.0], [-0.01, 0.0], [-0.02, -0.0001]]);
        let t = r.targets(3, 0.1, -3.1).unwrap();
        assert!(t.iter().all(|x| (x[3] + std::f64::consts::PI).abs() < 0.05));
    }

    #[test]
    fn reference_spacing_is_validated() {
        let r = ReferenceTrajectory::new(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(r.validate(0.05, 0.5).is_err());
        let ok = ReferenceTrajectory::new(vec![[0.0, 0.0], [0.02, 0.0]]);
        ok.validate(0.05, 0.5).unwrap();
    }
}
