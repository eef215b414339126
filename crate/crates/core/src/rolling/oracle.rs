//! Exhaustive search over a discretized input set, used to check the
//! continuous optimizer on small horizons.

use super::cost::{evaluate_cost_with_targets, CostWeights, ReferenceTrajectory};
use super::model::predict_euler;
use super::{RollingError, UnicycleInput, UnicycleState};

#[derive(Debug, Clone, PartialEq)]
pub struct InputGrid {
    pub alpha_levels: Vec<f64>,
    pub omega_levels: Vec<f64>,
    /// Largest number of candidate sequences the search will evaluate.
    pub cap: u128,
}

impl InputGrid {
    pub const DEFAULT_CAP: u128 = 10_000_000;

    /// `levels` evenly spaced values on `[-alpha_max, alpha_max]` and
    /// `[-omega_max, omega_max]`.
    pub fn uniform(levels: usize, alpha_max: f64, omega_max: f64) -> Self {
        let lin = |max: f64| -> Vec<f64> {
            if levels == 1 {
                return vec![0.0];
            }
            (0..levels)
                .map(|i| -max + 2.0 * max * i as f64 / (levels - 1) as f64)
                .collect()
        };
        Self {
            alpha_levels: lin(alpha_max),
            omega_levels: lin(omega_max),
            cap: Self::DEFAULT_CAP,
        }
    }

    fn per_step(&self) -> usize {
        self.alpha_levels.len() * self.omega_levels.len()
    }

    pub fn candidates(&self, horizon: usize) -> u128 {
        (self.per_step() as u128).saturating_pow(horizon as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub inputs: Vec<UnicycleInput>,
    pub cost: f64,
    pub evaluated: u128,
}

/// Global minimum of the tracking cost over every input sequence drawn from
/// the grid. Ties keep the first sequence in lexicographic grid order.
pub fn brute_force_oracle(
    initial: &UnicycleState,
    reference: &ReferenceTrajectory,
    weights: &CostWeights,
    grid: &InputGrid,
) -> Result<OracleResult, RollingError> {
    weights.validate()?;
    let n = weights.horizon;
    let candidates = grid.candidates(n);
    if candidates > grid.cap || grid.per_step() == 0 {
        return Err(RollingError::EnumerationCap {
            candidates,
            cap: grid.cap,
        });
    }
    let targets = reference.targets(n, weights.dt, initial.theta)?;
    let x0 = initial.to_vector();
    let levels: Vec<UnicycleInput> = grid
        .alpha_levels
        .iter()
        .flat_map(|&a| grid.omega_levels.iter().map(move |&w| UnicycleInput::new(a, w)))
        .collect();

    let mut index = vec![0usize; n];
    let mut inputs = vec![levels[0]; n];
    let mut best = (f64::INFINITY, inputs.clone());
    let mut evaluated = 0u128;
    loop {
        for (slot, &i) in inputs.iter_mut().zip(index.iter()) {
            *slot = levels[i];
        }
        let xs = predict_euler(&x0, &inputs, weights.dt);
        let j = evaluate_cost_with_targets(&xs, &inputs, &targets, weights)?;
        evaluated += 1;
        if j < best.0 {
            best = (j, inputs.clone());
        }
        // Mixed-radix increment, last step fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(OracleResult {
                    inputs: best.1,
                    cost: best.0,
                    evaluated,
                });
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < levels.len() {
                break;
            }
            index[pos] = 0;
        }
    }
}
