//! Summary statistics and paired ordering tests for Monte Carlo sweeps.

use statrs::distribution::{Binomial, DiscreteCDF};

/// Significance level of the paired sign tests.
pub const SIGNIFICANCE: f64 = 0.05;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard error of the mean; zero for fewer than two samples.
pub fn std_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Paired comparison of `b` against `a`, trial by trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Trials where `b > a`.
    pub wins: usize,
    /// Trials where `b < a`.
    pub losses: usize,
    /// One-sided p-value for "b tends to exceed a".
    pub p_greater: f64,
    /// One-sided p-value for "b tends to fall below a".
    pub p_less: f64,
    pub mean_diff: f64,
}

/// `P(X >= k)` for `X ~ Bin(n, 1/2)`.
fn upper_tail(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).expect("valid binomial");
    1.0 - b.cdf(k as u64 - 1)
}

/// Sign test over paired samples; exact ties (within `tie_tol` absolute) are
/// dropped.
pub fn sign_test(a: &[f64], b: &[f64], tie_tol: f64) -> SignTest {
    assert_eq!(a.len(), b.len(), "paired samples");
    let mut wins = 0;
    let mut losses = 0;
    for (x, y) in a.iter().zip(b) {
        if y - x > tie_tol {
            wins += 1;
        } else if x - y > tie_tol {
            losses += 1;
        }
    }
    let n = wins + losses;
    let mean_diff = mean(b) - mean(a);
    SignTest {
        wins,
        losses,
        p_greater: upper_tail(wins, n),
        p_less: upper_tail(losses, n),
        mean_diff,
    }
}

impl SignTest {
    /// `b >= a`: no significant reversal.
    pub fn not_below(&self) -> bool {
        self.p_less >= SIGNIFICANCE
    }

    /// `b > a`: significantly more wins than losses.
    pub fn above(&self) -> bool {
        self.mean_diff > 0.0 && self.p_greater < SIGNIFICANCE
    }
}
