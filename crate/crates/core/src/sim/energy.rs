//! Energy, time and distance bookkeeping per mode, and range/endurance
//! extrapolation from it.

use std::fmt::Write as _;

use super::Mode;

/// Range ratio (rolling over flying) claimed for the measured vehicle.
pub const REFERENCE_RANGE_RATIO: f64 = 2.8;
/// Endurance ratio (rolling over flying) claimed for the measured vehicle.
pub const REFERENCE_ENDURANCE_RATIO: f64 = 41.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    pub capacity_mah: f64,
    pub voltage: f64,
}

impl Default for Battery {
    fn default() -> Self {
        Self {
            capacity_mah: 2000.0,
            voltage: 14.8,
        }
    }
}

impl Battery {
    pub fn energy_j(&self) -> f64 {
        mah_to_joules(self.capacity_mah, self.voltage)
    }
}

fn mah_to_joules(mah: f64, voltage: f64) -> f64 {
    mah * 1e-3 * voltage * 3600.0
}

/// Electrical power drawn by the actuators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    /// Rotor electrical power per rotor is `rho * omega^3`, W.
    pub rotor_rho: f64,
    pub servo_efficiency: f64,
}

impl PowerModel {
    pub const DEFAULT_FLIGHT_POWER_PER_KG: f64 = 657.8;
    pub const DEFAULT_SERVO_EFFICIENCY: f64 = 0.6;

    /// Scales the cubic rotor map so that four rotors at `hover_omega` draw
    /// `flight_power_per_kg * mass`.
    pub fn calibrated(flight_power_per_kg: f64, mass: f64, hover_omega: f64, servo_efficiency: f64) -> Self {
        Self {
            rotor_rho: flight_power_per_kg * mass / (4.0 * hover_omega.powi(3)),
            servo_efficiency,
        }
    }

    pub fn rotor_power(&self, omegas: &[f64; 4]) -> f64 {
        omegas.iter().map(|w| self.rotor_rho * w.abs().powi(3)).sum()
    }

    pub fn servo_power(&self, mechanical: f64) -> f64 {
        mechanical.abs() / self.servo_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeTotals {
    pub time_s: f64,
    pub distance_m: f64,
    pub energy_j: f64,
}

/// Per-mode accumulators; every field only grows.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    totals: [ModeTotals; 4],
    pub battery: Battery,
    pub vehicle_mass: f64,
}

impl EnergyLedger {
    pub fn new(battery: Battery, vehicle_mass: f64) -> Self {
        Self {
            totals: [ModeTotals::default(); 4],
            battery,
            vehicle_mass,
        }
    }

    /// Adds one step: `power * dt` of energy and `distance` of travel.
    pub fn record(&mut self, mode: Mode, dt: f64, power: f64, distance: f64) {
        debug_assert!(dt >= 0.0 && power >= 0.0 && distance >= 0.0);
        let t = &mut self.totals[mode.index()];
        t.time_s += dt;
        t.energy_j += power * dt;
        t.distance_m += distance;
    }

    pub fn totals(&self, mode: Mode) -> ModeTotals {
        self.totals[mode.index()]
    }

    pub fn total_time(&self) -> f64 {
        self.totals.iter().map(|t| t.time_s).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.totals.iter().map(|t| t.energy_j).sum()
    }

    pub fn total_distance(&self) -> f64 {
        self.totals.iter().map(|t| t.distance_m).sum()
    }

    /// One row per mode that accumulated any time.
    pub fn rows(&self) -> Vec<LedgerRow> {
        Mode::ALL
            .into_iter()
            .filter(|m| self.totals[m.index()].time_s > 0.0)
            .map(|m| {
                let t = self.totals[m.index()];
                LedgerRow {
                    mode: m,
                    time_s: t.time_s,
                    distance_m: t.distance_m,
                    energy_j: t.energy_j,
                }
            })
            .collect()
    }

    pub fn report_params(&self) -> ReportParams {
        ReportParams {
            vehicle_mass: self.vehicle_mass,
            battery: self.battery,
        }
    }
}

/// Machine-readable ledger entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub mode: Mode,
    pub time_s: f64,
    pub distance_m: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportParams {
    pub vehicle_mass: f64,
    /// Battery used for range and endurance extrapolation.
    pub battery: Battery,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            vehicle_mass: 1.5,
            battery: Battery::default(),
        }
    }
}

/// Derived figures for one ledger row; `None` marks a quantity that is
/// undefined for the row (zero time or distance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub source: LedgerRow,
    pub power_w: Option<f64>,
    pub power_per_kg: Option<f64>,
    pub energy_per_m_per_kg: Option<f64>,
    pub endurance_s: Option<f64>,
    pub range_m: Option<f64>,
}

impl ReportRow {
    pub fn from_row(row: LedgerRow, params: &ReportParams) -> Self {
        let ratio = |num: f64, den: f64| (den > 0.0 && num.is_finite()).then(|| num / den);
        let power_w = ratio(row.energy_j, row.time_s);
        let speed = ratio(row.distance_m, row.time_s);
        let endurance_s = power_w.and_then(|p| ratio(params.battery.energy_j(), p));
        Self {
            source: row,
            power_w,
            power_per_kg: ratio(row.energy_j, row.time_s * params.vehicle_mass),
            energy_per_m_per_kg: ratio(row.energy_j, row.distance_m * params.vehicle_mass),
            endurance_s,
            range_m: endurance_s.zip(speed).map(|(e, v)| e * v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossModeRatios {
    pub range: Option<f64>,
    pub endurance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub params: ReportParams,
    pub rows: Vec<ReportRow>,
    /// Aggregated rolling rows over aggregated flying rows; `None` unless
    /// both modes are present.
    pub ratios: Option<CrossModeRatios>,
}

/// Per-row derived figures plus rolling/flying ratios of the aggregated
/// extrapolations.
pub fn energy_report(rows: &[LedgerRow], params: &ReportParams) -> EnergyReport {
    let report_rows: Vec<ReportRow> = rows.iter().map(|r| ReportRow::from_row(*r, params)).collect();
    let aggregate = |mode: Mode| {
        let mut acc = LedgerRow {
            mode,
            time_s: 0.0,
            distance_m: 0.0,
            energy_j: 0.0,
        };
        let mut any = false;
        for r in rows.iter().filter(|r| r.mode == mode) {
            any = true;
            acc.time_s += r.time_s;
            acc.distance_m += r.distance_m;
            acc.energy_j += r.energy_j;
        }
        any.then(|| ReportRow::from_row(acc, params))
    };
    let ratios = match (aggregate(Mode::Rolling), aggregate(Mode::Flying)) {
        (Some(r), Some(f)) => {
            let div = |a: Option<f64>, b: Option<f64>| a.zip(b).and_then(|(a, b)| (b > 0.0).then(|| a / b));
            Some(CrossModeRatios {
                range: div(r.range_m, f.range_m),
                endurance: div(r.endurance_s, f.endurance_s),
            })
        }
        _ => None,
    };
    EnergyReport {
        params: *params,
        rows: report_rows,
        ratios,
    }
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "n/a".to_string(),
    }
}

impl EnergyReport {
    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>10} {:>11} {:>12} {:>9} {:>10} {:>12} {:>10}",
            "mode", "time_s", "distance_m", "energy_J", "W/kg", "J/m/kg", "endurance_s", "range_m"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<22} {:>10.1} {:>11.2} {:>12.1} {:>9} {:>10} {:>12} {:>10}",
                r.source.mode.as_str(),
                r.source.time_s,
                r.source.distance_m,
                r.source.energy_j,
                cell(r.power_per_kg, 2),
                cell(r.energy_per_m_per_kg, 2),
                cell(r.endurance_s, 1),
                cell(r.range_m, 1),
            );
        }
        let _ = writeln!(
            s,
            "extrapolated with {} mAh at {} V, vehicle mass {} kg",
            self.params.battery.capacity_mah, self.params.battery.voltage, self.params.vehicle_mass
        );
        match self.ratios {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "rolling/flying range ratio:     {} (reference claim {REFERENCE_RANGE_RATIO})",
                    cell(r.range, 2)
                );
                let _ = writeln!(
                    s,
                    "rolling/flying endurance ratio: {} (reference claim {REFERENCE_ENDURANCE_RATIO})",
                    cell(r.endurance, 2)
                );
            }
            None => {
                let _ = writeln!(s, "cross-mode ratios: n/a (needs rolling and flying rows)");
            }
        }
        s
    }
}

/// A bench measurement given as consumed charge rather than energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredRun {
    pub label: &'static str,
    pub mode: Mode,
    pub time_s: f64,
    pub distance_m: f64,
    pub consumed_mah: f64,
    pub voltage: f64,
    pub vehicle_mass: f64,
}

impl MeasuredRun {
    pub fn energy_j(&self) -> f64 {
        mah_to_joules(self.consumed_mah, self.voltage)
    }

    pub fn ledger_row(&self) -> LedgerRow {
        LedgerRow {
            mode: self.mode,
            time_s: self.time_s,
            distance_m: self.distance_m,
            energy_j: self.energy_j(),
        }
    }
}

/// Published endurance measurements: two rolling groups and one manual
/// flight of this vehicle, and one rolling-cage vehicle (HyTAQ) kept as
/// static comparison data.
pub fn reference_measurements() -> Vec<MeasuredRun> {
    vec![
        MeasuredRun {
            label: "rolling group 1",
            mode: Mode::Rolling,
            time_s: 48.0 * 60.0,
            distance_m: 518.4,
            consumed_mah: 1270.0,
            voltage: 14.8,
            vehicle_mass: 1.5,
        },
        MeasuredRun {
            label: "rolling group 2",
            mode: Mode::Rolling,
            time_s: 40.33 * 60.0,
            distance_m: 435.6,
            consumed_mah: 1060.0,
            voltage: 14.8,
            vehicle_mass: 1.5,
        },
        MeasuredRun {
            label: "manual flight",
            mode: Mode::Flying,
            time_s: 1.8 * 60.0,
            distance_m: 216.0,
            consumed_mah: 2000.0,
            voltage: 14.8,
            vehicle_mass: 1.5,
        },
        MeasuredRun {
            label: "HyTAQ rolling",
            mode: Mode::Rolling,
            time_s: 27.0 * 60.0,
            distance_m: 2400.0,
            consumed_mah: 1350.0,
            voltage: 11.1,
            vehicle_mass: 0.45,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn measured_rows_reproduce_per_kg_figures() {
        let runs = reference_measurements();
        let params = ReportParams::default();
        let expect = [(15.7, 87.0), (15.6, 86.4), (657.8, 328.9)];
        for (run, (w, j)) in runs.iter().zip(expect) {
            let r = ReportRow::from_row(run.ledger_row(), &params);
            assert!(rel(r.power_per_kg.unwrap(), w) < 5e-3, "{}: {:?}", run.label, r.power_per_kg);
            assert!(rel(r.energy_per_m_per_kg.unwrap(), j) < 5e-3, "{}: {:?}", run.label, r.energy_per_m_per_kg);
        }
    }

    #[test]
    fn group_one_energy_arithmetic() {
        let run = &reference_measurements()[0];
        assert!((run.energy_j() - 67665.6).abs() < 1e-6);
        let r = ReportRow::from_row(run.ledger_row(), &ReportParams::default());
        assert!((r.power_per_kg.unwrap() - 15.664).abs() < 1e-3);
    }

    #[test]
    fn zero_length_rows_are_undefined_not_faults() {
        let row = LedgerRow {
            mode: Mode::Rolling,
            time_s: 0.0,
            distance_m: 0.0,
            energy_j: 0.0,
        };
        let r = ReportRow::from_row(row, &ReportParams::default());
        assert_eq!(r.power_per_kg, None);
        assert_eq!(r.energy_per_m_per_kg, None);
        assert_eq!(r.range_m, None);
        let rep = energy_report(&[row], &ReportParams::default());
        assert!(rep.ratios.is_none());
        assert!(rep.to_table().contains("n/a"));
    }

    #[test]
    fn cross_mode_ratios_from_measurements() {
        let runs = reference_measurements();
        let rows: Vec<LedgerRow> = runs[..3].iter().map(|r| r.ledger_row()).collect();
        let rep = energy_report(&rows, &ReportParams::default());
        let ratios = rep.ratios.unwrap();
        assert!((ratios.endurance.unwrap() - 42.1).abs() < 0.2);
        assert!((ratios.range.unwrap() - 3.79).abs() < 0.05);
        let table = rep.to_table();
        assert!(table.contains("41.2") && table.contains("2.8"));
    }

    #[test]
    fn ledger_accumulates_per_mode() {
        let mut l = EnergyLedger::new(Battery::default(), 1.5);
        l.record(Mode::Rolling, 0.5, 10.0, 0.1);
        l.record(Mode::Flying, 0.25, 100.0, 0.0);
        l.record(Mode::Rolling, 0.5, 10.0, 0.1);
        assert_eq!(l.totals(Mode::Rolling).energy_j, 10.0);
        assert_eq!(l.total_time(), 1.25);
        assert_eq!(l.rows().len(), 2);
    }

    #[test]
    fn power_model_hover_calibration() {
        let m = PowerModel::calibrated(657.8, 1.5, 1000.0, 0.6);
        let p = m.rotor_power(&[1000.0; 4]);
        assert!((p - 657.8 * 1.5).abs() < 1e-9);
        assert!((m.servo_power(-3.0) - 5.0).abs() < 1e-12);
    }
}
