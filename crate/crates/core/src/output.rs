//! CSV artefacts of a run and readers for the inputs the tools consume.

use std::io::{Read, Write};

use thiserror::Error;

use crate::sim::{EnergyReport, LedgerRow, Mode, Verdict};

pub const ENERGY_HEADER: [&str; 8] = [
    "mode",
    "time_s",
    "distance_m",
    "energy_J",
    "W_per_kg",
    "J_per_m_per_kg",
    "endurance_s",
    "range_m",
];
pub const VERDICT_HEADER: [&str; 6] = ["phase", "kind", "metric", "value", "tolerance", "passed"];

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

/// Per-mode rows; the first four columns form a ledger readable by
/// [`read_ledger`].
pub fn write_energy_report<W: Write>(report: &EnergyReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENERGY_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.source.mode.as_str().to_string(),
            r.source.time_s.to_string(),
            r.source.distance_m.to_string(),
            r.source.energy_j.to_string(),
            opt(r.power_per_kg),
            opt(r.energy_per_m_per_kg),
            opt(r.endurance_s),
            opt(r.range_m),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_verdicts<W: Write>(verdicts: &[Verdict], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERDICT_HEADER)?;
    for v in verdicts {
        w.write_record([
            v.phase.clone(),
            v.kind.clone(),
            v.metric.clone(),
            v.value.to_string(),
            v.tolerance.to_string(),
            v.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn headers_of<R: Read>(r: &mut csv::Reader<R>) -> Result<Vec<String>, ReadError> {
    Ok(r.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

fn column(headers: &[String], name: &str) -> Result<usize, ReadError> {
    headers.iter().position(|h| h == name).ok_or_else(|| ReadError::Malformed {
        line: 1,
        message: format!("missing column `{name}`"),
    })
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, ReadError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(idx).unwrap_or("").trim();
    let v: f64 = raw.parse().map_err(|_| ReadError::Malformed {
        line,
        message: format!("`{name}` is not a number: {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(ReadError::Malformed {
            line,
            message: format!("`{name}` is not finite"),
        });
    }
    Ok(v)
}

/// Reads `dshot,omega` samples.
pub fn read_calibration<R: Read>(input: R) -> Result<Vec<(f64, f64)>, ReadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let h = headers_of(&mut r)?;
    let (d, w) = (column(&h, "dshot")?, column(&h, "omega")?);
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((number(&rec, d, "dshot")?, number(&rec, w, "omega")?))
        })
        .collect()
}

/// Reads `mode,time_s,distance_m,energy_J` rows; extra columns are ignored.
pub fn read_ledger<R: Read>(input: R) -> Result<Vec<LedgerRow>, ReadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let h = headers_of(&mut r)?;
    let cols = [
        column(&h, "mode")?,
        column(&h, "time_s")?,
        column(&h, "distance_m")?,
        column(&h, "energy_J")?,
    ];
    r.records()
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let label = rec.get(cols[0]).unwrap_or("");
            let mode = Mode::parse(label).ok_or_else(|| ReadError::Malformed {
                line,
                message: format!("unknown mode {label:?}"),
            })?;
            let row = LedgerRow {
                mode,
                time_s: number(&rec, cols[1], "time_s")?,
                distance_m: number(&rec, cols[2], "distance_m")?,
                energy_j: number(&rec, cols[3], "energy_J")?,
            };
            if row.time_s < 0.0 || row.distance_m < 0.0 || row.energy_j < 0.0 {
                return Err(ReadError::Malformed {
                    line,
                    message: "ledger values must be non-negative".into(),
                });
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{energy_report, ReportParams};

    #[test]
    fn report_rows_read_back_exactly() {
        let rows = vec![
            LedgerRow {
                mode: Mode::Rolling,
                time_s: 12.345,
                distance_m: 1.0 / 3.0,
                energy_j: 987.654321,
            },
            LedgerRow {
                mode: Mode::TransitionToFlying,
                time_s: 2.0,
                distance_m: 0.0,
                energy_j: 3000.0,
            },
        ];
        let report = energy_report(&rows, &ReportParams::default());
        let mut buf = Vec::new();
        write_energy_report(&report, &mut buf).unwrap();
        assert_eq!(read_ledger(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn ledger_errors_name_the_line() {
        let text = "mode,time_s,distance_m,energy_J\nrolling,1,2,3\nswimming,1,2,3\n";
        let err = read_ledger(text.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");
        assert!(read_ledger("mode,time_s\n".as_bytes()).is_err());
    }

    #[test]
    fn calibration_reader() {
        let s = read_calibration("dshot, omega\n0,10\n100,20\n".as_bytes()).unwrap();
        assert_eq!(s, vec![(0.0, 10.0), (100.0, 20.0)]);
        assert!(read_calibration("dshot,omega\n1,x\n".as_bytes()).is_err());
    }
}
