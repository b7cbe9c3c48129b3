//! Zero-forcing digital beamforming with water-filling power allocation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Channels whose condition number exceeds this are rejected.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Maximum tolerated `|H V - I|` entry for an accepted zero-forcing solution.
pub const ZF_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Digital beamformer `V = V_dir * P^(1/2)` (antennas x users) together with
/// the per-user received powers on the diagonal of `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub v: DMatrix<Complex64>,
    pub received_powers: Vec<f64>,
}

impl Precoder {
    /// `trace(V V^H)`.
    pub fn transmit_power(&self) -> f64 {
        self.v.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub sinr: Vec<f64>,
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    pub powers: Vec<f64>,
    /// `1 / mu`; zero if no user is active.
    pub water_level: f64,
}

/// 2-norm condition number from the singular values.
pub fn condition_number(h: &DMatrix<Complex64>) -> f64 {
    let sv = h.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Zero-forcing direction matrix `H^H (H H^H)^-1`.
pub fn zf_direction_matrix(h: &ChannelMatrix, condition_cap: f64) -> Result<DMatrix<Complex64>> {
    let h = h.matrix();
    let (n, k) = h.shape();
    if n == 0 {
        return Err(Error::DimensionMismatch("channel has no users".into()));
    }
    if k < n {
        return Err(Error::DimensionMismatch(format!("{k} antennas cannot serve {n} users")));
    }
    if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::SingularChannel { condition: f64::NAN });
    }
    let condition = condition_number(h);
    if !(condition <= condition_cap) {
        return Err(Error::SingularChannel { condition });
    }
    let hh = h.adjoint();
    let gram = h * &hh;
    let inv = gram.try_inverse().ok_or(Error::SingularChannel { condition })?;
    let dir = hh * inv;
    let residual = zf_residual(h, &dir);
    if !(residual < ZF_RESIDUAL_TOLERANCE) {
        return Err(Error::SingularChannel { condition });
    }
    Ok(dir)
}

/// `max |(H V)_{ij} - delta_ij|`.
pub fn zf_residual(h: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> f64 {
    let prod = h * v;
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Exact water-filling: `p_i = (1/nu_i) max(L - nu_i sigma^2, 0)` with the
/// level `L = 1/mu` chosen so that `sum_i max(L - nu_i sigma^2, 0) = budget`.
///
/// The active set is always a prefix of the users sorted by `nu`, so the level
/// is found in closed form by testing prefixes from the largest down.
pub fn water_filling(nu: &[f64], sigma_sq: f64, budget: f64) -> Result<WaterFilling> {
    if nu.is_empty() {
        return Err(Error::invalid("nu", "empty"));
    }
    if nu.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("nu", "entries must be positive and finite"));
    }
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq", "must be positive"));
    }
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid("budget", "must be positive"));
    }
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.sort_by(|&a, &b| nu[a].total_cmp(&nu[b]).then(a.cmp(&b)));

    let mut prefix = 0.0;
    let prefix_sums: Vec<f64> = order
        .iter()
        .map(|&i| {
            prefix += nu[i] * sigma_sq;
            prefix
        })
        .collect();
    let mut level = 0.0;
    for active in (1..=nu.len()).rev() {
        let candidate = (budget + prefix_sums[active - 1]) / active as f64;
        if candidate > nu[order[active - 1]] * sigma_sq {
            level = candidate;
            break;
        }
    }
    let powers = nu
        .iter()
        .map(|&v| (level - v * sigma_sq).max(0.0) / v)
        .collect();
    Ok(WaterFilling {
        powers,
        water_level: level,
    })
}

/// Per-user rates with the full interference term:
/// `R_i = W log2(1 + |h_i v_i|^2 / (sum_{i' != i} |h_i v_i'|^2 + sigma^2))`
/// where `h_i` is row `i` of `H` and `v_i` column `i` of `V`.
pub fn sum_rate(h: &ChannelMatrix, v: &DMatrix<Complex64>, sigma_sq: f64, bandwidth: f64) -> Result<RateReport> {
    let h = h.matrix();
    if h.ncols() != v.nrows() || h.nrows() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, V is {:?}",
            h.shape(),
            v.shape()
        )));
    }
    let g = h * v;
    let n = h.nrows();
    let mut rates = Vec::with_capacity(n);
    let mut sinr = Vec::with_capacity(n);
    for i in 0..n {
        let signal = g[(i, i)].norm_sqr();
        let interference: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)].norm_sqr()).sum();
        let s = signal / (interference + sigma_sq);
        sinr.push(s);
        rates.push(bandwidth * (1.0 + s).log2());
    }
    let sum_rate = rates.iter().sum();
    Ok(RateReport { rates, sinr, sum_rate })
}

/// Rates under perfect zero forcing: `W log2(1 + p_i / sigma^2)`.
pub fn zf_rates(powers: &[f64], sigma_sq: f64, bandwidth: f64) -> RateReport {
    let sinr: Vec<f64> = powers.iter().map(|p| p / sigma_sq).collect();
    let rates: Vec<f64> = sinr.iter().map(|s| bandwidth * (1.0 + s).log2()).collect();
    RateReport {
        sum_rate: rates.iter().sum(),
        rates,
        sinr,
    }
}

/// Zero forcing, water-filling and the resulting rates for a fixed channel.
pub fn digital_beamforming(
    h: &ChannelMatrix,
    sigma_sq: f64,
    budget: f64,
    bandwidth: f64,
) -> Result<(Precoder, RateReport)> {
    digital_beamforming_with_cap(h, sigma_sq, budget, bandwidth, DEFAULT_CONDITION_CAP)
}

pub fn digital_beamforming_with_cap(
    h: &ChannelMatrix,
    sigma_sq: f64,
    budget: f64,
    bandwidth: f64,
    condition_cap: f64,
) -> Result<(Precoder, RateReport)> {
    let dir = zf_direction_matrix(h, condition_cap)?;
    let nu: Vec<f64> = (0..dir.ncols()).map(|i| dir.column(i).norm_squared()).collect();
    let wf = water_filling(&nu, sigma_sq, budget)?;
    let mut v = dir;
    for (i, p) in wf.powers.iter().enumerate() {
        let scale = p.sqrt();
        v.column_mut(i).iter_mut().for_each(|c| *c *= scale);
    }
    let report = zf_rates(&wf.powers, sigma_sq, bandwidth);
    Ok((
        Precoder {
            v,
            received_powers: wf.powers,
        },
        report,
    ))
}
