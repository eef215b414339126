use std::io::Write;

use super::Mode;
use crate::transition::TransitionSample;

/// One decimated record of the vehicle.
///
/// `theta` is body tilt from the flight pose: the flight pitch while flying,
/// `pi/2` while rolling and the pendulum angle during transitions. `u`
/// depends on the mode: `(U1, U2, U3, U4)` while flying, `(alpha, omega,
/// servo speed, servo torque)` while rolling and `(tau, F1, F4, tau')`
/// during transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSample {
    pub t: f64,
    pub mode: Mode,
    pub position: [f64; 3],
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    /// Ground speed while rolling, horizontal speed while flying, m/s.
    pub nu: f64,
    /// Heading rate, rad/s.
    pub yaw_rate: f64,
    pub u: [f64; 4],
    pub power_w: f64,
}

pub const TRAJECTORY_HEADER: [&str; 15] = [
    "t", "mode", "px", "py", "pz", "phi", "theta", "psi", "nu", "yaw", "u1", "u2", "u3", "u4", "power_W",
];
pub const TRANSITION_HEADER: [&str; 6] = ["t", "theta", "theta_dot", "tau", "F1", "F4"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub samples: Vec<LogSample>,
    /// Pendulum trace of every transition, at the log decimation.
    pub transitions: Vec<TransitionSample>,
}

impl TrajectoryLog {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut out: Vec<Mode> = Vec::new();
        for s in &self.samples {
            if out.last() != Some(&s.mode) {
                out.push(s.mode);
            }
        }
        out
    }

    /// Writes the trajectory as CSV; floats use shortest round-trip
    /// formatting so values parse back bit-exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAJECTORY_HEADER)?;
        for s in &self.samples {
            let mut rec: Vec<String> = Vec::with_capacity(15);
            rec.push(s.t.to_string());
            rec.push(s.mode.as_str().to_string());
            rec.extend(s.position.iter().map(f64::to_string));
            for v in [s.phi, s.theta, s.psi, s.nu, s.yaw_rate] {
                rec.push(v.to_string());
            }
            rec.extend(s.u.iter().map(f64::to_string));
            rec.push(s.power_w.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_transition_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRANSITION_HEADER)?;
        for s in &self.transitions {
            w.write_record([s.t, s.theta, s.theta_dot, s.tau, s.f1, s.f4].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
