use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wheelquad_core::output::read_ledger;
use wheelquad_core::scenarios;

fn wheelquad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wheelquad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_bundled_experiment7_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp7");
    let o = wheelquad(&["run", "--config", "experiment7", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["energy_report.csv", "trajectory.csv", "verdicts.csv"]);
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.lines().skip(1).all(|l| l.ends_with(",true")), "{verdicts}");
}

#[test]
fn run_accepts_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("line.cfg");
    fs::write(&cfg, scenarios::source("experiment4").unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = wheelquad(&["run", "--config", path(&cfg), "--out", path(&out), "--transitions"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("transitions.csv").exists());
}

#[test]
fn missing_wheel_radius_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenarios::source("experiment7").unwrap().replace("wheel_radius = 0.18\n", "");
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = wheelquad(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gear.wheel_radius"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_scenario_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wheelquad(&["run", "--config", "experiment42", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_out_dir_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = wheelquad(&["run", "--config", "experiment4", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(path(&out)), "{}", stderr(&o));
}

#[test]
fn failed_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenarios::source("experiment6")
        .unwrap()
        .replace("expected_distance = 518.4", "expected_distance = 600.0");
    let cfg = dir.path().join("wrong.cfg");
    fs::write(&cfg, text).unwrap();
    let o = wheelquad(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

fn write_samples(dir: &Path, rows: &[(f64, f64)]) -> std::path::PathBuf {
    let p = dir.join("samples.csv");
    let mut text = String::from("dshot,omega\n");
    for (d, w) in rows {
        text.push_str(&format!("{d},{w}\n"));
    }
    fs::write(&p, text).unwrap();
    p
}

fn printed(out: &str, key: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} in {out}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn calibrate_recovers_exact_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, f64)> = (0..=20)
        .map(|k| {
            let d = 100.0 * k as f64;
            (d, -2.0e-5 * d * d + 1.2 * d + 50.0)
        })
        .collect();
    let o = wheelquad(&["calibrate", "--samples", path(&write_samples(dir.path(), &rows))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!((printed(&s, "p1") + 2.0e-5).abs() < 1e-12);
    assert!((printed(&s, "p2") - 1.2).abs() < 1e-8);
    assert!((printed(&s, "p3") - 50.0).abs() < 1e-6);
    assert!(printed(&s, "rms_residual") < 1e-8);
}

#[test]
fn calibrate_needs_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = wheelquad(&[
        "calibrate",
        "--samples",
        path(&write_samples(dir.path(), &[(0.0, 1.0), (1.0, 2.0)])),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "dshot,omega\n1,2\nthree,4\n5,6\n").unwrap();
    assert_eq!(wheelquad(&["calibrate", "--samples", path(&p)]).status.code(), Some(2));
}

#[test]
fn calibrate_noisy_data_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 5.0).unwrap();
    let rows: Vec<(f64, f64)> = (0..=40)
        .map(|k| {
            let d = 50.0 * k as f64;
            (d, -2.0e-5 * d * d + 1.2 * d + 50.0 + noise.sample(&mut rng))
        })
        .collect();
    let o = wheelquad(&["calibrate", "--samples", path(&write_samples(dir.path(), &rows))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let rms = printed(&s, "rms_residual");
    assert!(rms > 2.0 && rms < 8.0, "{rms}");
    assert!((printed(&s, "p2") - 1.2).abs() < 0.05);
}

fn write_ledger(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("ledger.csv");
    fs::write(&p, format!("mode,time_s,distance_m,energy_J\n{body}")).unwrap();
    p
}

#[test]
fn report_group1_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let energy = 1.27 * 14.8 * 3600.0;
    let p = write_ledger(dir.path(), &format!("rolling,2880,518.4,{energy}\n"));
    let o = wheelquad(&["report", "--ledger", path(&p)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = stdout(&o).lines().find(|l| l.starts_with("rolling")).unwrap().to_string();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cells[4], "15.66");
    assert_eq!(cells[5], "87.02");
}

#[test]
fn report_flight_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let energy = 2.0 * 14.8 * 3600.0;
    let p = write_ledger(dir.path(), &format!("flying,108,216,{energy}\n"));
    let o = wheelquad(&["report", "--ledger", path(&p)]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().find(|l| l.starts_with("flying")).unwrap().to_string();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cells[4], "657.78");
    assert_eq!(cells[5], "328.89");
}

#[test]
fn report_empty_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ledger(dir.path(), "");
    let o = wheelquad(&["report", "--ledger", path(&p)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("n/a"));
}

#[test]
fn report_rejects_malformed_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ledger(dir.path(), "rolling,ten,1,1\n");
    assert_eq!(wheelquad(&["report", "--ledger", path(&p)]).status.code(), Some(2));
}

#[test]
fn run_outputs_parse_back_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp2");
    let o = wheelquad(&["run", "--config", "experiment2", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let outcome = scenarios::bundled("experiment2", None).unwrap().unwrap().run();
    let rows = read_ledger(fs::File::open(out.join("energy_report.csv")).unwrap()).unwrap();
    assert_eq!(rows, outcome.ledger.rows());

    let mut reader = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), outcome.log.samples.len());
    for (rec, s) in records.iter().zip(&outcome.log.samples) {
        assert_eq!(rec[0].parse::<f64>().unwrap(), s.t);
        assert_eq!(&rec[1], s.mode.as_str());
        assert_eq!(rec[2].parse::<f64>().unwrap(), s.position[0]);
        assert_eq!(rec[14].parse::<f64>().unwrap(), s.power_w);
    }

    let r = wheelquad(&[
        "report",
        "--ledger",
        path(&out.join("energy_report.csv")),
        "--config",
        "experiment2",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert!(stdout(&r).contains("range ratio"));
}

#[test]
fn batch_runs_each_scenario_into_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = wheelquad(&[
        "batch",
        "--config",
        "experiment2",
        "experiment4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for n in ["experiment2", "experiment4"] {
        assert!(dir.path().join(n).join("verdicts.csv").exists());
    }
}

#[test]
fn batch_validates_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = wheelquad(&["batch", "--config", "experiment2", "nope", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("experiment2").exists());
}
