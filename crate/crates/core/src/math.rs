//! Small numerical helpers shared by the mode models.

use nalgebra::SVector;

/// One classical fourth-order Runge-Kutta step of `dx/dt = f(t, x)`.
///
/// The derivative may fail (envelope guards, singularities); the first
/// failing stage aborts the step.
pub fn rk4_step<const D: usize, E, F>(
    t: f64,
    x: &SVector<f64, D>,
    dt: f64,
    mut f: F,
) -> Result<SVector<f64, D>, E>
where
    F: FnMut(f64, &SVector<f64, D>) -> Result<SVector<f64, D>, E>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x)?;
    let k2 = f(t + half, &(x + k1 * half))?;
    let k3 = f(t + half, &(x + k2 * half))?;
    let k4 = f(t + dt, &(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Rest-to-rest quintic blend between two values over a fixed window.
///
/// Before `t0` the profile holds `start`, after `t0 + duration` it holds
/// `end`; velocity and acceleration vanish at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticProfile {
    pub start: f64,
    pub end: f64,
    pub t0: f64,
    pub duration: f64,
}

/// Position, velocity and acceleration of a reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileSample {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
}

impl QuinticProfile {
    pub fn new(start: f64, end: f64, t0: f64, duration: f64) -> Self {
        Self {
            start,
            end,
            t0,
            duration,
        }
    }

    /// A profile that holds one value forever.
    pub fn hold(value: f64) -> Self {
        Self::new(value, value, 0.0, 0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn sample(&self, t: f64) -> ProfileSample {
        if self.duration <= 0.0 || t >= self.t0 + self.duration {
            return ProfileSample {
                value: self.end,
                ..Default::default()
            };
        }
        if t <= self.t0 {
            return ProfileSample {
                value: self.start,
                ..Default::default()
            };
        }
        let span = self.end - self.start;
        let tau = (t - self.t0) / self.duration;
        let (t2, t3) = (tau * tau, tau * tau * tau);
        let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
        let ds = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
        let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
        ProfileSample {
            value: self.start + span * s,
            rate: span * ds / self.duration,
            accel: span * dds / (self.duration * self.duration),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn rk4_is_exact_for_quartic_time_polynomials() {
        // dx/dt = 4 t^3 -> x = t^4
        let x0 = Vector2::new(0.0, 0.0);
        let mut x = x0;
        let dt = 0.1;
        for k in 0..10 {
            let t = k as f64 * dt;
            x = rk4_step::<2, (), _>(t, &x, dt, |t, _| Ok(Vector2::new(4.0 * t * t * t, 1.0)))
                .unwrap();
        }
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quintic_boundary_conditions() {
        let p = QuinticProfile::new(0.0, 1.5, 1.0, 2.0);
        let a = p.sample(1.0);
        let b = p.sample(3.0);
        assert_eq!(a.value, 0.0);
        assert_eq!(b.value, 1.5);
        assert!(a.rate.abs() < 1e-15 && b.rate.abs() < 1e-15);
        let mid = p.sample(2.0);
        assert!((mid.value - 0.75).abs() < 1e-12);
        assert!(mid.accel.abs() < 1e-12);
    }

    #[test]
    fn quintic_rate_matches_finite_difference() {
        let p = QuinticProfile::new(-0.3, 0.9, 0.0, 1.7);
        let h = 1e-6;
        for &t in &[0.2, 0.5, 0.9, 1.3] {
            let fd = (p.sample(t + h).value - p.sample(t - h).value) / (2.0 * h);
            let fdd = (p.sample(t + h).rate - p.sample(t - h).rate) / (2.0 * h);
            assert!((fd - p.sample(t).rate).abs() < 1e-7);
            assert!((fdd - p.sample(t).accel).abs() < 1e-6);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }
}
