use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ChannelComponents;
use crate::error::{Error, Result};

/// Interference-free sum rate as a function of the element phases, for a
/// fixed digital beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseObjective {
    base: Vec<Complex64>,
    /// Indexed `[m * n_users + i]`.
    coeffs: Vec<Complex64>,
    n_users: usize,
    n_elements: usize,
    sigma_sq: f64,
    bandwidth: f64,
}

impl PhaseObjective {
    /// Builds the objective for beamformer `v` (antennas x users).
    pub fn new(components: &ChannelComponents, v: &DMatrix<Complex64>, sigma_sq: f64, bandwidth: f64) -> Result<Self> {
        let (n, k, m_count) = (components.users(), components.antennas(), components.elements());
        if v.shape() != (k, n) {
            return Err(Error::DimensionMismatch(format!(
                "beamformer is {:?}, expected ({k}, {n})",
                v.shape()
            )));
        }
        let fixed = components.fixed();
        let base = (0..n)
            .map(|i| (0..k).map(|a| fixed[(i, a)] * v[(a, i)]).sum())
            .collect();
        let mut coeffs = Vec::with_capacity(m_count * n);
        for m in 0..m_count {
            for i in 0..n {
                coeffs.push((0..k).map(|a| components.los(m, i, a) * v[(a, i)]).sum());
            }
        }
        Ok(PhaseObjective {
            base,
            coeffs,
            n_users: n,
            n_elements: m_count,
            sigma_sq,
            bandwidth,
        })
    }

    /// Objective from raw coefficients: `g_i = base_i + sum_m exp(-j psi_m) coeffs[m][i]`.
    pub fn from_parts(base: Vec<Complex64>, coeffs: Vec<Vec<Complex64>>, sigma_sq: f64, bandwidth: f64) -> Self {
        let n_users = base.len();
        let n_elements = coeffs.len();
        assert!(coeffs.iter().all(|c| c.len() == n_users), "ragged coefficient rows");
        PhaseObjective {
            base,
            coeffs: coeffs.into_iter().flatten().collect(),
            n_users,
            n_elements,
            sigma_sq,
            bandwidth,
        }
    }

    pub fn users(&self) -> usize {
        self.n_users
    }

    pub fn elements(&self) -> usize {
        self.n_elements
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn base(&self) -> &[Complex64] {
        &self.base
    }

    /// Coefficients `b_{m, .}` of element `m`.
    pub fn coeffs(&self, m: usize) -> &[Complex64] {
        &self.coeffs[m * self.n_users..(m + 1) * self.n_users]
    }

    /// Effective gains `g_i(s)`, summed over elements in index order.
    pub fn gains(&self, phases: &[f64]) -> Vec<Complex64> {
        assert_eq!(phases.len(), self.n_elements, "phase vector length");
        let mut g = self.base.clone();
        for (m, &psi) in phases.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, -psi);
            for (gi, b) in g.iter_mut().zip(self.coeffs(m)) {
                *gi += b * rot;
            }
        }
        g
    }

    pub fn rate_of_gains(&self, gains: &[Complex64]) -> f64 {
        self.bandwidth * gains.iter().map(|g| (1.0 + g.norm_sqr() / self.sigma_sq).log2()).sum::<f64>()
    }

    /// Objective at `phases`. Every exact comparison between search methods
    /// goes through this single evaluation path.
    pub fn evaluate(&self, phases: &[f64]) -> f64 {
        self.rate_of_gains(&self.gains(phases))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, FadingDraw};
    use crate::geometry::{ScenarioLayout, SurfaceSpec, Vec3};
    use crate::precoding::sum_rate;
    use approx::assert_relative_eq;

    #[test]
    fn matches_general_rate_without_interference() {
        let s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 2, 0.025);
        let sbs = vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.2, 2.0)];
        let l = ScenarioLayout::new(s, sbs, vec![Vec3::new(97.0, 1.0, 1.5), Vec3::new(103.0, -3.0, 1.5)]).unwrap();
        let p = ChannelParams::default();
        let c = ChannelComponents::build(&l, &p, &FadingDraw::generate(4, 2, 2, 4)).unwrap();
        let v = DMatrix::from_fn(2, 2, |a, b| Complex64::new(1.0 + a as f64, b as f64 - 0.5));
        let obj = PhaseObjective::new(&c, &v, 1e-13, 1.0).unwrap();
        let phases = [0.3, 1.0, 5.0, 2.2];
        let h = c.matrix(&phases).unwrap();
        let g = h.matrix() * &v;
        let want: f64 = (0..2).map(|i| (1.0 + g[(i, i)].norm_sqr() / 1e-13).log2()).sum();
        assert_relative_eq!(obj.evaluate(&phases), want, max_relative = 1e-12);
        // with interference the true rate can only be lower
        assert!(sum_rate(&h, &v, 1e-13, 1.0).unwrap().sum_rate <= want + 1e-9);
    }
}
