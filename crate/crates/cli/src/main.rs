use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wheelquad_core::actuators::fit_dshot_map;
use wheelquad_core::config::{load_scenario, ConfigError, Scenario};
use wheelquad_core::output::{read_calibration, read_ledger, write_energy_report, write_verdicts};
use wheelquad_core::scenarios;
use wheelquad_core::sim::{energy_report, ReportParams, ScenarioOutcome};

/// Exit 0 success, 1 runtime or I/O failure (including failed verdicts),
/// 2 invalid input.
#[derive(Debug)]
enum Failure {
    Runtime(String),
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(format!("invalid config: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "wheelquad", version, about = "Rolling/flying quadrotor scenario simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write trajectory.csv, energy_report.csv and verdicts.csv.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the pendulum trace of every transition to transitions.csv.
        #[arg(long)]
        transitions: bool,
    },
    /// Fit the dshot-to-rotor-speed map from `dshot,omega` samples.
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Print the per-mode energy table of a `mode,time_s,distance_m,energy_J` ledger.
    Report {
        #[arg(long)]
        ledger: PathBuf,
        /// Scenario supplying vehicle mass and battery; defaults otherwise.
        #[arg(long)]
        config: Option<String>,
    },
    /// Run several scenarios in parallel, one output directory each.
    Batch {
        #[arg(long, num_args = 1.., required = true)]
        config: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            config,
            out,
            seed,
            transitions,
        } => cmd_run(&config, &out, seed, transitions),
        Cmd::Calibrate { samples } => cmd_calibrate(&samples),
        Cmd::Report { ledger, config } => cmd_report(&ledger, config.as_deref()),
        Cmd::Batch { config, out, seed } => cmd_batch(&config, &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Runtime(m) | Failure::Invalid(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

/// A path that exists is read as a file; otherwise a bundled name is tried.
fn load(config: &str, seed: Option<u64>) -> Result<Scenario, Failure> {
    let path = Path::new(config);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{config}: {e}")))?;
        let mut s = load_scenario(&text, seed).map_err(|e| Failure::Invalid(format!("{config}: {e}")))?;
        if s.name.is_empty() {
            s.name = path.file_stem().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        }
        return Ok(s);
    }
    match scenarios::bundled(config, seed) {
        Some(r) => Ok(r?),
        None => Err(Failure::Invalid(format!(
            "{config}: no such file and no bundled scenario of that name (bundled: {})",
            scenarios::names().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_outputs(scenario: &Scenario, outcome: &ScenarioOutcome, out: &Path, transitions: bool) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let p = out.join("trajectory.csv");
    outcome.log.write_csv(create(&p)?).map_err(|e| io_err(&p, e))?;
    let p = out.join("energy_report.csv");
    let report = energy_report(&outcome.ledger.rows(), &scenario.report_params());
    write_energy_report(&report, create(&p)?).map_err(|e| io_err(&p, e))?;
    let p = out.join("verdicts.csv");
    write_verdicts(&outcome.verdicts, create(&p)?).map_err(|e| io_err(&p, e))?;
    if transitions {
        let p = out.join("transitions.csv");
        outcome.log.write_transition_csv(create(&p)?).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

fn summarize(name: &str, outcome: &ScenarioOutcome) -> Result<(), Failure> {
    for v in &outcome.verdicts {
        println!(
            "{name} {:<28} {:<26} {:>12.6} <= {:<10} {}",
            v.phase,
            v.metric,
            v.value,
            v.tolerance,
            if v.passed { "PASS" } else { "FAIL" }
        );
    }
    if let Some(e) = &outcome.aborted {
        let t = outcome.log.samples.last().map_or(0.0, |s| s.t);
        return Err(Failure::Runtime(format!("{name}: run aborted near t = {t} s: {e}")));
    }
    if !outcome.passed() {
        let failed = outcome.verdicts.iter().filter(|v| !v.passed).count();
        return Err(Failure::Runtime(format!("{name}: {failed} verdict(s) failed")));
    }
    Ok(())
}

fn cmd_run(config: &str, out: &Path, seed: Option<u64>, transitions: bool) -> Result<(), Failure> {
    let scenario = load(config, seed)?;
    let outcome = scenario.run();
    write_outputs(&scenario, &outcome, out, transitions)?;
    summarize(&scenario.name, &outcome)
}

fn cmd_calibrate(samples: &Path) -> Result<(), Failure> {
    let file = File::open(samples).map_err(|e| Failure::Invalid(format!("{}: {e}", samples.display())))?;
    let data = read_calibration(file).map_err(|e| Failure::Invalid(format!("{}: {e}", samples.display())))?;
    let fit = fit_dshot_map(&data).map_err(|e| Failure::Invalid(format!("{}: {e}", samples.display())))?;
    println!("p1 = {}", fit.p1);
    println!("p2 = {}", fit.p2);
    println!("p3 = {}", fit.p3);
    println!("rms_residual = {}", fit.residual);
    Ok(())
}

fn cmd_report(ledger: &Path, config: Option<&str>) -> Result<(), Failure> {
    let params = match config {
        Some(c) => load(c, None)?.report_params(),
        None => ReportParams::default(),
    };
    let file = File::open(ledger).map_err(|e| Failure::Invalid(format!("{}: {e}", ledger.display())))?;
    let rows = read_ledger(file).map_err(|e| Failure::Invalid(format!("{}: {e}", ledger.display())))?;
    print!("{}", energy_report(&rows, &params).to_table());
    Ok(())
}

fn cmd_batch(configs: &[String], out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let loaded: Vec<Scenario> = configs.iter().map(|c| load(c, seed)).collect::<Result<_, _>>()?;
    let mut names: Vec<&str> = loaded.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Failure::Invalid(format!("scenario name {:?} given twice", w[0])));
    }
    let results: Vec<Result<(), Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = loaded
            .iter()
            .map(|s| {
                scope.spawn(move || {
                    let outcome = s.run();
                    write_outputs(s, &outcome, &out.join(&s.name), false)?;
                    summarize(&s.name, &outcome)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::Runtime("worker panicked".into()))))
            .collect()
    });
    let failures: Vec<String> = results
        .into_iter()
        .filter_map(|r| r.err())
        .map(|f| match f {
            Failure::Runtime(m) | Failure::Invalid(m) => m,
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failures.join("; ")))
    }
}
