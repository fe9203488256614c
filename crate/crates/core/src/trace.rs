use serde::{Deserialize, Serialize};

/// Per-sweep record of a variational run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Energy at the end of each sweep.
    pub energies: Vec<f64>,
    /// Largest discarded weight of each sweep (always 0 for fixed-bond updates).
    pub max_truncated_weights: Vec<f64>,
    pub wall_times_s: Vec<f64>,
    /// The per-sweep energy change fell below tolerance.
    pub converged: bool,
    /// Local eigenproblems that exhausted their iteration budget.
    pub unconverged_local_solves: usize,
}

impl ConvergenceTrace {
    pub fn sweeps(&self) -> usize {
        self.energies.len()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energies.last().copied()
    }

    /// Same trace with wall times cleared, for reproducible output.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_times_s: Vec::new(),
            ..self.clone()
        }
    }
}
