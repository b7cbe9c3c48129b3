//! Analog beamforming at the surface.
//!
//! With the digital beamformer held fixed, the effective gain of user `i` is
//! affine in the element phasors, `g_i(s) = a_i + sum_m exp(-j psi_m) b_{m,i}`,
//! and the phase objective is the interference-free sum rate
//! `W sum_i log2(1 + |g_i|^2 / sigma^2)`. [`PhaseObjective`] precomputes
//! `a` and `b` so every search below works on `O(N)` updates per element.

mod alternating;
mod bnb;
mod coordinate;
mod exhaustive;
mod line_search;
mod objective;

use std::f64::consts::TAU;

pub use alternating::{alternating_optimize, AlternatingOptions, AlternatingReport};
pub use bnb::{branch_and_bound, round_candidates, BnbOptions, BnbReport, BoundMode, PrunedNode};
pub use coordinate::{coordinate_descent, coordinate_descent_masked, CdOptions};
pub use exhaustive::{exhaustive_search, DEFAULT_EXHAUSTIVE_CAP};
pub use line_search::optimize_single_phase;
pub use objective::PhaseObjective;

/// Whether phase shifts are free or restricted to `S_a` uniform levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseDomain {
    Continuous,
    Discrete { levels: usize },
}

/// Phase shifts of all elements, in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    values: Vec<f64>,
    domain: PhaseDomain,
}

/// Phase of level `l` out of `levels`.
pub fn level_phase(l: usize, levels: usize) -> f64 {
    l as f64 * (TAU / levels as f64)
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_phase(psi: f64) -> f64 {
    let w = psi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl PhaseVector {
    pub fn continuous(values: Vec<f64>) -> Self {
        PhaseVector {
            values: values.into_iter().map(wrap_phase).collect(),
            domain: PhaseDomain::Continuous,
        }
    }

    pub fn discrete(levels: &[usize], s_a: usize) -> Self {
        PhaseVector {
            values: levels.iter().map(|&l| level_phase(l % s_a, s_a)).collect(),
            domain: PhaseDomain::Discrete { levels: s_a },
        }
    }

    pub fn zeros(len: usize, domain: PhaseDomain) -> Self {
        PhaseVector {
            values: vec![0.0; len],
            domain,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> PhaseDomain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Level indices for a discrete vector.
    pub fn levels(&self) -> Option<Vec<usize>> {
        match self.domain {
            PhaseDomain::Discrete { levels } => {
                let step = TAU / levels as f64;
                Some(
                    self.values
                        .iter()
                        .map(|v| ((v / step).round() as usize) % levels)
                        .collect(),
                )
            }
            PhaseDomain::Continuous => None,
        }
    }
}

/// Result of a phase search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub phases: PhaseVector,
    /// Best objective value found.
    pub objective: f64,
    /// Objective after each recorded iteration, starting with the initial
    /// point.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub nodes_visited: usize,
    pub nodes_pruned: usize,
    pub converged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_vectors_sit_on_the_grid() {
        let v = PhaseVector::discrete(&[0, 1, 3, 5], 4);
        assert_eq!(v.values()[1], TAU / 4.0);
        assert_eq!(v.levels().unwrap(), vec![0, 1, 3, 1]);
        assert!(PhaseVector::continuous(vec![7.0]).levels().is_none());
        assert!((PhaseVector::continuous(vec![-1.0]).values()[0] - (TAU - 1.0)).abs() < 1e-15);
    }
}
