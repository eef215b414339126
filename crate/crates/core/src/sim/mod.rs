//! Whole-vehicle simulation: the mode state machine, the fixed-step loop,
//! scripted scenarios, logging and energy accounting.

mod corridor;
mod energy;
mod log;
mod scenario;
mod world;

pub use corridor::{corridor_check, Corridor, CorridorVerdict};
pub use energy::{
    energy_report, reference_measurements, Battery, CrossModeRatios, EnergyLedger, EnergyReport, LedgerRow,
    MeasuredRun, ModeTotals, PowerModel, ReportParams, ReportRow, REFERENCE_ENDURANCE_RATIO, REFERENCE_RANGE_RATIO,
};
pub use log::{LogSample, TrajectoryLog};
pub use scenario::{
    phase_mode_walk, run_scenario, AttitudeAxis, CorridorSpec, Phase, ScenarioOutcome, TurnDirection, Verdict,
};
pub use world::{
    Command, FlightPlan, GroundContact, ModeKind, ModeState, RollingParams, SimSettings, VehicleParams, World,
};

use thiserror::Error;

use crate::flight::FlightError;
use crate::rolling::RollingError;
use crate::transition::TransitionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Rolling,
    TransitionToFlying,
    TransitionToRolling,
    Flying,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Rolling,
        Mode::TransitionToFlying,
        Mode::TransitionToRolling,
        Mode::Flying,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rolling => "rolling",
            Mode::TransitionToFlying => "transition_to_flying",
            Mode::TransitionToRolling => "transition_to_rolling",
            Mode::Flying => "flying",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Edges of the mode graph; rolling and flying never connect directly.
    pub fn can_switch_to(self, next: Mode) -> bool {
        use Mode::*;
        matches!(
            (self, next),
            (Rolling, TransitionToFlying)
                | (TransitionToFlying, Flying)
                | (Flying, TransitionToRolling)
                | (TransitionToRolling, Rolling)
        )
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True when consecutive distinct modes follow graph edges.
pub fn is_valid_mode_walk(modes: &[Mode]) -> bool {
    modes
        .windows(2)
        .all(|w| w[0] == w[1] || w[0].can_switch_to(w[1]))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Flight(#[from] FlightError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Rolling(#[from] RollingError),
    #[error("step of {got} s requested, world is configured for {expected} s")]
    StepMismatch { got: f64, expected: f64 },
    #[error("{action} requires mode {expected}, vehicle is {actual}")]
    WrongMode {
        action: String,
        expected: Mode,
        actual: Mode,
    },
    #[error("{0}")]
    Precondition(String),
    #[error("invalid simulation setting: {0}")]
    Settings(String),
}
