//! Box-constrained finite-horizon tracking by projected Newton iterations.
//!
//! The prediction model is forward Euler at the horizon step. Gradients come
//! from an adjoint sweep; the Hessian is a central difference of the exact
//! gradient, regularized Levenberg-style when it is not positive definite on
//! the free variables.

use nalgebra::{DMatrix, DVector, Matrix2x4, Matrix4, Vector2, Vector4};

use super::cost::{evaluate_cost_with_targets, CostWeights, ReferenceTrajectory};
use super::model::{predict_euler, unicycle_jacobians};
use super::{InputLimits, RollingError, UnicycleInput, UnicycleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Projected-gradient norm that counts as stationary.
    pub tolerance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub inputs: Vec<UnicycleInput>,
    pub cost: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    /// False when the iteration budget ran out or the line search stalled;
    /// the best iterate found is returned either way.
    pub converged: bool,
}

pub(crate) struct TrackingProblem<'a> {
    x0: Vector4<f64>,
    targets: Vec<Vector4<f64>>,
    w: &'a CostWeights,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

fn unpack(u: &DVector<f64>) -> Vec<UnicycleInput> {
    u.as_slice().chunks(2).map(|c| UnicycleInput::new(c[0], c[1])).collect()
}

impl<'a> TrackingProblem<'a> {
    pub(crate) fn new(
        initial: &UnicycleState,
        reference: &ReferenceTrajectory,
        w: &'a CostWeights,
        limits: &InputLimits,
    ) -> Result<Self, RollingError> {
        w.validate()?;
        let targets = reference.targets(w.horizon, w.dt, initial.theta)?;
        let n = 2 * w.horizon;
        let lower = DVector::from_fn(n, |i, _| if i % 2 == 0 { -limits.alpha_max } else { -limits.omega_max });
        Ok(Self {
            x0: initial.to_vector(),
            targets,
            w,
            upper: -&lower,
            lower,
        })
    }

    fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        u.zip_zip_map(&self.lower, &self.upper, |v, lo, hi| v.clamp(lo, hi))
    }

    fn cost(&self, u: &DVector<f64>) -> f64 {
        let inputs = unpack(u);
        let xs = predict_euler(&self.x0, &inputs, self.w.dt);
        evaluate_cost_with_targets(&xs, &inputs, &self.targets, self.w)
            .expect("dimensions fixed at construction")
    }

    /// Cost and gradient by reverse sweep over the Euler recursion
    /// `x[k+1] = x[k] + dt f(x[k], u[k])`.
    fn cost_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let w = self.w;
        let n = w.horizon;
        let dt = w.dt;
        let inputs = unpack(u);
        let xs = predict_euler(&self.x0, &inputs, dt);
        let j = evaluate_cost_with_targets(&xs, &inputs, &self.targets, w).expect("dimensions fixed at construction");

        let s_sym = w.terminal + w.terminal.transpose();
        let q_sym = w.stage + w.stage.transpose();
        let r_sym = w.input + w.input.transpose();
        let mut grad = DVector::zeros(2 * n);
        let mut lambda = s_sym * (xs[n] - self.targets[n - 1]);
        for k in (0..n).rev() {
            let (fx, fu) = unicycle_jacobians(&super::UnicycleState::from_vector(&xs[k]), &inputs[k]);
            let bt: Matrix2x4<f64> = (fu * dt).transpose();
            let mut g = bt * lambda;
            if k >= 1 {
                g += r_sym * Vector2::new(inputs[k].alpha, inputs[k].omega);
                let a = Matrix4::identity() + fx * dt;
                lambda = q_sym * (xs[k] - self.targets[k - 1]) + a.transpose() * lambda;
            }
            grad[2 * k] = g[0];
            grad[2 * k + 1] = g[1];
        }
        (j, grad)
    }

    fn hessian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = u.len();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let step = 1e-5 * u[i].abs().max(1.0);
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += step;
            dn[i] -= step;
            let col = (self.cost_and_gradient(&up).1 - self.cost_and_gradient(&dn).1) / (2.0 * step);
            h.set_column(i, &col);
        }
        (&h + h.transpose()) * 0.5
    }

    fn projected_gradient_norm(&self, u: &DVector<f64>, g: &DVector<f64>) -> f64 {
        (self.project(&(u - g)) - u).norm()
    }
}

/// Minimizes the tracking cost over bounded input sequences starting from
/// `warm_start` (zero inputs when `None`).
pub fn optimize_tracking(
    initial: &UnicycleState,
    reference: &ReferenceTrajectory,
    weights: &CostWeights,
    limits: &InputLimits,
    options: &OptimizerOptions,
    warm_start: Option<&[UnicycleInput]>,
) -> Result<OptimizeResult, RollingError> {
    let problem = TrackingProblem::new(initial, reference, weights, limits)?;
    let n = 2 * weights.horizon;
    let mut u = DVector::zeros(n);
    if let Some(ws) = warm_start {
        if ws.len() != weights.horizon {
            return Err(RollingError::Dimension(format!(
                "warm start has {} inputs, horizon is {}",
                ws.len(),
                weights.horizon
            )));
        }
        for (k, w) in ws.iter().enumerate() {
            u[2 * k] = w.alpha;
            u[2 * k + 1] = w.omega;
        }
        u = problem.project(&u);
        // Never start worse than doing nothing.
        if problem.cost(&u) > problem.cost(&DVector::zeros(n)) {
            u = DVector::zeros(n);
        }
    }
    Ok(solve(&problem, u, options))
}

fn solve(problem: &TrackingProblem<'_>, mut u: DVector<f64>, options: &OptimizerOptions) -> OptimizeResult {
    const ARMIJO: f64 = 1e-4;
    let n = u.len();
    let (mut j, mut g) = problem.cost_and_gradient(&u);
    let mut pg = problem.projected_gradient_norm(&u, &g);
    let mut iterations = 0;
    let mut damping = 0.0_f64;
    let mut converged = pg < options.tolerance;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let eps = pg.min(1e-3);
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lo = u[i] <= problem.lower[i] + eps && g[i] > 0.0;
                let at_hi = u[i] >= problem.upper[i] - eps && g[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let h = problem.hessian(&u);

        let mut accepted = None;
        let mut mu = damping;
        for _attempt in 0..24 {
            let dir = newton_direction(&h, &g, &free, mu);
            if let Some(dir) = dir {
                if let Some(step) = line_search(problem, &u, j, &g, &dir, ARMIJO) {
                    accepted = Some(step);
                    break;
                }
            }
            mu = if mu == 0.0 { 1e-6 * h.diagonal().amax().max(1.0) } else { mu * 10.0 };
        }
        // Projected steepest descent as a last resort.
        if accepted.is_none() {
            accepted = line_search(problem, &u, j, &g, &(-&g), ARMIJO);
        }
        match accepted {
            Some((u_new, j_new)) => {
                damping = if mu > 0.0 { mu / 10.0 } else { 0.0 };
                let progress = j - j_new;
                u = u_new;
                let (jj, gg) = problem.cost_and_gradient(&u);
                j = jj;
                g = gg;
                pg = problem.projected_gradient_norm(&u, &g);
                converged = pg < options.tolerance;
                if !converged && progress <= 1e-15 * j.abs().max(1e-300) && pg < 1e3 * options.tolerance {
                    // Round-off floor reached on the cost.
                    break;
                }
            }
            None => break,
        }
    }

    OptimizeResult {
        inputs: unpack(&u),
        cost: j,
        iterations,
        projected_gradient_norm: pg,
        converged,
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>, free: &[usize], mu: f64) -> Option<DVector<f64>> {
    let n = g.len();
    let mut dir = DVector::zeros(n);
    let m = free.len();
    if m > 0 {
        let hff = DMatrix::from_fn(m, m, |a, b| h[(free[a], free[b])] + if a == b { mu } else { 0.0 });
        let gf = DVector::from_fn(m, |a, _| g[free[a]]);
        let chol = hff.cholesky()?;
        let d = chol.solve(&(-gf));
        for (a, &i) in free.iter().enumerate() {
            dir[i] = d[a];
        }
    }
    for i in 0..n {
        if !free.contains(&i) {
            let scale = h[(i, i)].abs().max(1e-8) + mu;
            dir[i] = -g[i] / scale;
        }
    }
    Some(dir)
}

/// Armijo backtracking along the projection arc `P(u + s d)`.
fn line_search(
    problem: &TrackingProblem<'_>,
    u: &DVector<f64>,
    j: f64,
    g: &DVector<f64>,
    dir: &DVector<f64>,
    sigma: f64,
) -> Option<(DVector<f64>, f64)> {
    let mut s = 1.0;
    for _ in 0..50 {
        let cand = problem.project(&(u + dir * s));
        let delta = &cand - u;
        let decrease = g.dot(&delta);
        if decrease < 0.0 {
            let jc = problem.cost(&cand);
            if jc <= j + sigma * decrease {
                return Some((cand, jc));
            }
        } else if delta.amax() == 0.0 {
            return None;
        }
        s *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn problem_fixture() -> (UnicycleState, ReferenceTrajectory, CostWeights) {
        let w = CostWeights {
            horizon: 8,
            ..Default::default()
        };
        let s0 = UnicycleState::new(0.0, 0.05, 0.1, 0.2);
        let reference = ReferenceTrajectory::new((1..=8).map(|k| [0.01 * k as f64, 0.002 * k as f64]).collect());
        (s0, reference, w)
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let (s0, reference, w) = problem_fixture();
        let limits = InputLimits::default();
        let p = TrackingProblem::new(&s0, &reference, &w, &limits).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = DVector::from_fn(16, |_, _| rng.random_range(-0.5..0.5));
        let (_, g) = p.cost_and_gradient(&u);
        for i in 0..16 {
            let h = 1e-6;
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (p.cost(&up) - p.cost(&dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * g[i].abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn already_optimal_instance() {
        let w = CostWeights {
            horizon: 10,
            ..Default::default()
        };
        let s0 = UnicycleState::new(0.3, -0.2, 0.0, 0.7);
        let reference = ReferenceTrajectory::new(vec![[0.3, -0.2]; 10]);
        let r = optimize_tracking(&s0, &reference, &w, &InputLimits::default(), &OptimizerOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!(r.cost < 1e-12);
        assert!(r.inputs.iter().all(|u| u.alpha.abs() < 1e-9 && u.omega.abs() < 1e-9));
    }

    #[test]
    fn converges_and_beats_zero_inputs() {
        let (s0, reference, w) = problem_fixture();
        let limits = InputLimits::default();
        let r = optimize_tracking(&s0, &reference, &w, &limits, &OptimizerOptions::default(), None).unwrap();
        let p = TrackingProblem::new(&s0, &reference, &w, &limits).unwrap();
        let zero = p.cost(&DVector::zeros(16));
        assert!(r.converged, "pg = {}", r.projected_gradient_norm);
        assert!(r.projected_gradient_norm < 1e-6);
        assert!(r.cost <= zero);
        assert!(r.inputs.iter().all(|u| limits.contains(u)));
    }

    #[test]
    fn active_bounds_are_respected() {
        let w = CostWeights {
            horizon: 5,
            ..Default::default()
        };
        let limits = InputLimits {
            alpha_max: 0.05,
            omega_max: 0.1,
            nu_max: 0.5,
        };
        let s0 = UnicycleState::default();
        let reference = ReferenceTrajectory::new((1..=5).map(|k| [0.02 * k as f64, 0.01 * k as f64]).collect());
        let r = optimize_tracking(&s0, &reference, &w, &limits, &OptimizerOptions::default(), None).unwrap();
        assert!(r.converged, "pg = {}", r.projected_gradient_norm);
        assert!(r.inputs.iter().all(|u| limits.contains(u)));
        assert!(r.inputs.iter().any(|u| (u.alpha.abs() - 0.05).abs() < 1e-12));
    }

    #[test]
    fn identical_problems_give_identical_answers() {
        let (s0, reference, w) = problem_fixture();
        let a = optimize_tracking(&s0, &reference, &w, &InputLimits::default(), &OptimizerOptions::default(), None).unwrap();
        let b = optimize_tracking(&s0, &reference, &w, &InputLimits::default(), &OptimizerOptions::default(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let (s0, reference, w) = problem_fixture();
        let opts = OptimizerOptions {
            max_iterations: 1,
            tolerance: 1e-14,
        };
        let r = optimize_tracking(&s0, &reference, &w, &InputLimits::default(), &opts, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }
}
