use super::{Mode, TrajectoryLog};
use crate::math::wrap_angle;

/// A straight gap along an axis through `origin` at `heading`. The gap
/// occupies `[entry, entry + length]` of along-axis distance and is
/// centred on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    pub origin: [f64; 2],
    pub heading: f64,
    pub entry: f64,
    pub length: f64,
    pub gap_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorVerdict {
    pub passed: bool,
    /// Largest |lateral offset| of the wheel centre inside the gap, m.
    pub max_lateral_deviation: f64,
    /// Widest footprint across the gap axis, m.
    pub max_footprint: f64,
    /// `gap_width - (footprint + 2 * deviation)`, worst case, m.
    pub clearance: f64,
    pub rolling_throughout: bool,
    pub samples_inside: usize,
}

impl Corridor {
    fn local(&self, p: [f64; 2]) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Clearance of the rolling vehicle through the gap.
///
/// The footprint across the gap is `width |cos d| + wheel_diameter |sin d|`
/// for heading misalignment `d`; it passes when the footprint plus twice the
/// worst lateral deviation fits within the gap (boundary inclusive) and
/// every sample inside the gap is in rolling mode. A log that never enters
/// the gap fails.
pub fn corridor_check(log: &TrajectoryLog, corridor: &Corridor, vehicle_width: f64, wheel_diameter: f64) -> CorridorVerdict {
    let mut max_dev: f64 = 0.0;
    let mut max_fp: f64 = 0.0;
    let mut worst: f64 = f64::INFINITY;
    let mut rolling = true;
    let mut inside = 0;
    for s in &log.samples {
        let (along, lateral) = corridor.local([s.position[0], s.position[1]]);
        if along < corridor.entry || along > corridor.entry + corridor.length {
            continue;
        }
        inside += 1;
        rolling &= s.mode == Mode::Rolling;
        let d = wrap_angle(s.psi - corridor.heading);
        let fp = vehicle_width * d.cos().abs() + wheel_diameter * d.sin().abs();
        max_dev = max_dev.max(lateral.abs());
        max_fp = max_fp.max(fp);
        worst = worst.min(corridor.gap_width - (fp + 2.0 * lateral.abs()));
    }
    let clearance = if inside == 0 { f64::NEG_INFINITY } else { worst };
    CorridorVerdict {
        passed: inside > 0 && rolling && clearance >= -1e-12,
        max_lateral_deviation: max_dev,
        max_footprint: max_fp,
        clearance,
        rolling_throughout: rolling,
        samples_inside: inside,
    }
}
