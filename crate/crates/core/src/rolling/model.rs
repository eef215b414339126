use nalgebra::{Matrix4, Matrix4x2, Vector4};

use super::{InputLimits, RollingError, UnicycleInput, UnicycleState};

/// `(nu cos theta, nu sin theta, alpha, omega)`.
pub fn unicycle_derivative_unchecked(state: &UnicycleState, input: &UnicycleInput) -> Vector4<f64> {
    let (s, c) = state.theta.sin_cos();
    Vector4::new(state.nu * c, state.nu * s, input.alpha, input.omega)
}

pub fn unicycle_derivative(
    state: &UnicycleState,
    input: &UnicycleInput,
    limits: &InputLimits,
) -> Result<Vector4<f64>, RollingError> {
    limits.check(input)?;
    Ok(unicycle_derivative_unchecked(state, input))
}

/// State and input Jacobians of the unicycle field.
pub fn unicycle_jacobians(state: &UnicycleState, _input: &UnicycleInput) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let (s, c) = state.theta.sin_cos();
    let nu = state.nu;
    #[rustfmt::skip]
    let fx = Matrix4::new(
        0.0, 0.0, c, -nu * s,
        0.0, 0.0, s, nu * c,
        0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    );
    #[rustfmt::skip]
    let fu = Matrix4x2::new(
        0.0, 0.0,
        0.0, 0.0,
        1.0, 0.0,
        0.0, 1.0,
    );
    (fx, fu)
}

/// One RK4 step with the input held constant.
pub fn rk4_step(state: &UnicycleState, input: &UnicycleInput, dt: f64) -> UnicycleState {
    let x = state.to_vector();
    let next = crate::math::rk4_step::<4, std::convert::Infallible, _>(0.0, &x, dt, |_, x| {
        Ok(unicycle_derivative_unchecked(&UnicycleState::from_vector(x), input))
    })
    .unwrap_or_else(|e| match e {});
    UnicycleState::from_vector(&next)
}

/// RK4 propagation under zero-order-hold inputs; returns `inputs.len() + 1`
/// states starting with `initial`.
pub fn rollout(initial: &UnicycleState, inputs: &[UnicycleInput], dt: f64) -> Vec<UnicycleState> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(*initial);
    let mut s = *initial;
    for u in inputs {
        s = rk4_step(&s, u, dt);
        out.push(s);
    }
    out
}

/// Forward-Euler prediction used inside the optimizer.
pub fn predict_euler(initial: &Vector4<f64>, inputs: &[UnicycleInput], dt: f64) -> Vec<Vector4<f64>> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(*initial);
    let mut x = *initial;
    for u in inputs {
        x += unicycle_derivative_unchecked(&UnicycleState::from_vector(&x), u) * dt;
        out.push(x);
    }
    out
}
