//! Per-link and compound channel gains.
//!
//! Each base-station-antenna / element / user triple is a Rician link whose
//! line-of-sight part carries the element phase shift; the scattered part
//! shares the same deterministic path loss but has a fresh unit complex
//! Gaussian coefficient that the surface cannot steer. The direct path from
//! each antenna to each user is Rayleigh by default.
//!
//! Path-loss exponents follow the printed model literally: `alpha_ios`
//! applies to each surface hop in the amplitude domain, `alpha_direct` to the
//! direct link in the power domain.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    angle_from_normal, element_positions, incidence_angle, k_departure, k_incident, ScenarioLayout, Vec3,
};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the base-station-to-user path is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectPath {
    /// Rayleigh fading scaled by the deterministic path loss.
    #[default]
    Rayleigh,
    /// No small-scale fading: the coefficient is the free-space phase
    /// `exp(-j 2 pi d / lambda)`.
    Deterministic,
    /// No direct path at all.
    Disabled,
}

/// End-to-end antenna pattern of the direct link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectPattern {
    /// Omnidirectional base-station and user antennas (`F = 1`).
    #[default]
    Isotropic,
    /// `F = |cos^3 theta_tx| |cos^3 theta_rx|`, with the base-station boresight
    /// towards the surface center and each user boresight towards the surface
    /// center.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub wavelength: f64,
    /// Rician factor; `f64::INFINITY` gives pure line of sight.
    pub rician_kappa: f64,
    pub alpha_ios: f64,
    pub alpha_direct: f64,
    /// Noise power in watts.
    pub noise_power: f64,
    /// Bandwidth in hertz; 1 Hz reports rates in bit/s/Hz.
    pub bandwidth: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub direct_path: DirectPath,
    pub direct_pattern: DirectPattern,
}

impl ChannelParams {
    /// Defaults at the given carrier frequency: kappa 4, exponents 2 / 3,
    /// -96 dBm noise, unit bandwidth and gains.
    pub fn at_frequency(frequency_hz: f64) -> Self {
        ChannelParams {
            wavelength: SPEED_OF_LIGHT / frequency_hz,
            rician_kappa: 4.0,
            alpha_ios: 2.0,
            alpha_direct: 3.0,
            noise_power: dbm_to_watts(-96.0),
            bandwidth: 1.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
            direct_path: DirectPath::Rayleigh,
            direct_pattern: DirectPattern::Isotropic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.wavelength) {
            return Err(Error::invalid("wavelength", "must be positive"));
        }
        if !(self.rician_kappa >= 0.0) {
            return Err(Error::invalid("rician_kappa", "must be non-negative"));
        }
        if !positive(self.alpha_ios) || !positive(self.alpha_direct) {
            return Err(Error::invalid("alpha", "path-loss exponents must be positive"));
        }
        if !positive(self.noise_power) {
            return Err(Error::invalid("noise_power", "must be positive"));
        }
        if !positive(self.bandwidth) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        if !positive(self.tx_gain) || !positive(self.rx_gain) {
            return Err(Error::invalid("gain", "antenna gains must be positive"));
        }
        Ok(())
    }

    /// Line-of-sight and scatter weights `(sqrt(k/(1+k)), sqrt(1/(1+k)))`.
    pub fn rician_weights(&self) -> (f64, f64) {
        rician_weights(self.rician_kappa)
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams::at_frequency(5.9e9)
    }
}

pub fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Small-scale fading coefficients, each `CN(0, 1)`.
///
/// Coefficients are derived from the master seed by stream splitting: the
/// draw for a given link depends only on `(seed, user, antenna, element)`, so
/// evaluation order and the total number of users or elements never change a
/// link's coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub seed: u64,
    n_users: usize,
    n_antennas: usize,
    n_elements: usize,
    ios: Vec<Complex64>,
    direct: Vec<Complex64>,
}

impl FadingDraw {
    pub fn generate(seed: u64, n_users: usize, n_antennas: usize, n_elements: usize) -> Self {
        let mut ios = Vec::with_capacity(n_users * n_antennas * n_elements);
        let mut direct = Vec::with_capacity(n_users * n_antennas);
        for i in 0..n_users {
            for k in 0..n_antennas {
                let base = ((i as u64) << 32) | k as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(base.wrapping_mul(2).wrapping_add(1));
                ios.extend((0..n_elements).map(|_| unit_complex_gaussian(&mut rng)));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(base.wrapping_mul(2));
                direct.push(unit_complex_gaussian(&mut rng));
            }
        }
        FadingDraw {
            seed,
            n_users,
            n_antennas,
            n_elements,
            ios,
            direct,
        }
    }

    /// All coefficients zero.
    pub fn zeros(n_users: usize, n_antennas: usize, n_elements: usize) -> Self {
        FadingDraw {
            seed: 0,
            n_users,
            n_antennas,
            n_elements,
            ios: vec![Complex64::new(0.0, 0.0); n_users * n_antennas * n_elements],
            direct: vec![Complex64::new(0.0, 0.0); n_users * n_antennas],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_users, self.n_antennas, self.n_elements)
    }

    pub fn ios(&self, k: usize, m: usize, i: usize) -> Complex64 {
        self.ios[(i * self.n_antennas + k) * self.n_elements + m]
    }

    pub fn direct(&self, k: usize, i: usize) -> Complex64 {
        self.direct[i * self.n_antennas + k]
    }

    fn check(&self, layout: &ScenarioLayout) -> Result<()> {
        let want = (
            layout.mu_positions.len(),
            layout.sbs_antennas.len(),
            layout.surface.element_count(),
        );
        if self.dims() != want {
            return Err(Error::DimensionMismatch(format!(
                "fading draw dims {:?} != layout dims {:?}",
                self.dims(),
                want
            )));
        }
        Ok(())
    }
}

fn unit_complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Compound channel `H`, users along rows and base-station antennas along
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub DMatrix<Complex64>);

impl ChannelMatrix {
    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }
}

struct HopGeometry {
    d_km: f64,
    d_mi: f64,
    k_a: f64,
    k_d: f64,
}

fn hop_geometry(layout: &ScenarioLayout, elem: Vec3, k: usize, i: usize) -> Result<HopGeometry> {
    let sbs = layout.sbs_antennas[k];
    let mu = layout.mu_positions[i];
    let normal = layout.reflective_normal();
    let theta_a = incidence_angle(elem, sbs, normal)?;
    let theta_d = angle_from_normal(elem, mu, normal)?;
    Ok(HopGeometry {
        d_km: elem.distance(sbs),
        d_mi: elem.distance(mu),
        k_a: k_incident(theta_a)?,
        k_d: k_departure(theta_d, layout.surface.epsilon)?,
    })
}

fn hop_amplitude(layout: &ScenarioLayout, params: &ChannelParams, g: &HopGeometry) -> f64 {
    let s = &layout.surface;
    let hw = (params.tx_gain * s.element_gain * params.rx_gain * s.delta_x * s.delta_y * s.gamma_sq).sqrt();
    params.wavelength * g.k_a * g.k_d * hw
        / ((4.0 * PI).powf(1.5) * g.d_km.powf(params.alpha_ios) * g.d_mi.powf(params.alpha_ios))
}

fn hop_phase(params: &ChannelParams, g: &HopGeometry) -> f64 {
    TAU * (g.d_km + g.d_mi) / params.wavelength
}

fn check_indices(layout: &ScenarioLayout, k: usize, m: Option<usize>, i: usize) -> Result<()> {
    let k_len = layout.sbs_antennas.len();
    let i_len = layout.mu_positions.len();
    if k >= k_len {
        return Err(Error::IndexOutOfRange { index: k, len: k_len });
    }
    if i >= i_len {
        return Err(Error::IndexOutOfRange { index: i, len: i_len });
    }
    if let Some(m) = m {
        let m_len = layout.surface.element_count();
        if m >= m_len {
            return Err(Error::IndexOutOfRange { index: m, len: m_len });
        }
    }
    Ok(())
}

/// Deterministic path loss `PL(k, m, i)`: the line-of-sight magnitude without
/// any phase.
pub fn path_loss(layout: &ScenarioLayout, params: &ChannelParams, k: usize, m: usize, i: usize) -> Result<f64> {
    check_indices(layout, k, Some(m), i)?;
    let elem = crate::geometry::element_position(&layout.surface, m)?;
    let g = hop_geometry(layout, elem, k, i)?;
    Ok(hop_amplitude(layout, params, &g))
}

/// Line-of-sight gain from antenna `k` via element `m` to user `i` with phase
/// shift `psi` on the element.
pub fn los_component(
    layout: &ScenarioLayout,
    params: &ChannelParams,
    k: usize,
    m: usize,
    i: usize,
    psi: f64,
) -> Result<Complex64> {
    check_indices(layout, k, Some(m), i)?;
    let elem = crate::geometry::element_position(&layout.surface, m)?;
    let g = hop_geometry(layout, elem, k, i)?;
    Ok(Complex64::from_polar(hop_amplitude(layout, params, &g), -(hop_phase(params, &g) + psi)))
}

pub fn nlos_component(
    layout: &ScenarioLayout,
    params: &ChannelParams,
    k: usize,
    m: usize,
    i: usize,
    draw: &FadingDraw,
) -> Result<Complex64> {
    draw.check(layout)?;
    Ok(path_loss(layout, params, k, m, i)? * draw.ios(k, m, i))
}

/// Rician combination of [`los_component`] and [`nlos_component`].
pub fn ios_link(
    layout: &ScenarioLayout,
    params: &ChannelParams,
    k: usize,
    m: usize,
    i: usize,
    psi: f64,
    draw: &FadingDraw,
) -> Result<Complex64> {
    let (w_los, w_nlos) = params.rician_weights();
    let los = los_component(layout, params, k, m, i, psi)?;
    if w_nlos == 0.0 {
        return Ok(los * w_los);
    }
    let nlos = nlos_component(layout, params, k, m, i, draw)?;
    Ok(los * w_los + nlos * w_nlos)
}

fn direct_pattern(layout: &ScenarioLayout, k: usize, i: usize) -> Result<f64> {
    let sbs = layout.sbs_antennas[k];
    let mu = layout.mu_positions[i];
    let c = layout.surface.center;
    let tx_bore = c - sbs;
    let rx_bore = c - mu;
    let theta_tx = angle_from_normal(sbs, mu, tx_bore)?;
    let theta_rx = angle_from_normal(mu, sbs, rx_bore)?;
    Ok(theta_tx.cos().abs().powi(3) * theta_rx.cos().abs().powi(3))
}

/// Direct base-station-to-user gain.
pub fn direct_link(
    layout: &ScenarioLayout,
    params: &ChannelParams,
    k: usize,
    i: usize,
    draw: &FadingDraw,
) -> Result<Complex64> {
    check_indices(layout, k, None, i)?;
    let d = layout.sbs_antennas[k].distance(layout.mu_positions[i]);
    if d == 0.0 {
        return Err(Error::ZeroLengthDirection);
    }
    let f = match params.direct_pattern {
        DirectPattern::Isotropic => 1.0,
        DirectPattern::Cosine => direct_pattern(layout, k, i)?,
    };
    let amp = (params.tx_gain * f * params.rx_gain * d.powf(-params.alpha_direct)).sqrt();
    Ok(match params.direct_path {
        DirectPath::Rayleigh => {
            draw.check(layout)?;
            draw.direct(k, i) * amp
        }
        DirectPath::Deterministic => Complex64::from_polar(amp, -TAU * d / params.wavelength),
        DirectPath::Disabled => Complex64::new(0.0, 0.0),
    })
}

/// Phase-independent and phase-dependent parts of the compound channel:
/// `H(s) = fixed + sum_m exp(-j psi_m) * los_m`, where `los_m` already carries
/// the Rician line-of-sight weight and propagation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelComponents {
    n_users: usize,
    n_antennas: usize,
    n_elements: usize,
    fixed: DMatrix<Complex64>,
    /// Indexed `[(m * n_users + i) * n_antennas + k]`.
    los: Vec<Complex64>,
}

impl ChannelComponents {
    pub fn build(layout: &ScenarioLayout, params: &ChannelParams, draw: &FadingDraw) -> Result<Self> {
        params.validate()?;
        draw.check(layout)?;
        let n_users = layout.mu_positions.len();
        let n_antennas = layout.sbs_antennas.len();
        let n_elements = layout.surface.element_count();
        let (w_los, w_nlos) = params.rician_weights();

        let mut fixed = DMatrix::from_element(n_users, n_antennas, Complex64::new(0.0, 0.0));
        let mut los = vec![Complex64::new(0.0, 0.0); n_elements * n_users * n_antennas];
        for (m, elem) in element_positions(&layout.surface).into_iter().enumerate() {
            for i in 0..n_users {
                for k in 0..n_antennas {
                    let g = hop_geometry(layout, elem, k, i)?;
                    let amp = hop_amplitude(layout, params, &g);
                    los[(m * n_users + i) * n_antennas + k] =
                        Complex64::from_polar(amp * w_los, -hop_phase(params, &g));
                    if w_nlos != 0.0 {
                        fixed[(i, k)] += draw.ios(k, m, i) * (amp * w_nlos);
                    }
                }
            }
        }
        for i in 0..n_users {
            for k in 0..n_antennas {
                fixed[(i, k)] += direct_link(layout, params, k, i, draw)?;
            }
        }
        Ok(ChannelComponents {
            n_users,
            n_antennas,
            n_elements,
            fixed,
            los,
        })
    }

    pub fn users(&self) -> usize {
        self.n_users
    }

    pub fn antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn elements(&self) -> usize {
        self.n_elements
    }

    /// Phase-independent part (scattered surface paths plus direct path).
    pub fn fixed(&self) -> &DMatrix<Complex64> {
        &self.fixed
    }

    /// Weighted line-of-sight coefficient of element `m` before its phase
    /// shift is applied.
    pub fn los(&self, m: usize, i: usize, k: usize) -> Complex64 {
        self.los[(m * self.n_users + i) * self.n_antennas + k]
    }

    /// Removes element `m`'s line-of-sight contribution.
    pub fn zero_element(&mut self, m: usize) {
        let stride = self.n_users * self.n_antennas;
        self.los[m * stride..(m + 1) * stride]
            .iter_mut()
            .for_each(|c| *c = Complex64::new(0.0, 0.0));
    }

    pub fn matrix(&self, phases: &[f64]) -> Result<ChannelMatrix> {
        if phases.len() != self.n_elements {
            return Err(Error::DimensionMismatch(format!(
                "{} phases for {} elements",
                phases.len(),
                self.n_elements
            )));
        }
        let mut h = self.fixed.clone();
        for (m, &psi) in phases.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, -psi);
            for i in 0..self.n_users {
                for k in 0..self.n_antennas {
                    h[(i, k)] += self.los(m, i, k) * rot;
                }
            }
        }
        Ok(ChannelMatrix(h))
    }
}

/// Compound channel for phase vector `phases`.
pub fn compound_matrix(
    layout: &ScenarioLayout,
    params: &ChannelParams,
    phases: &[f64],
    draw: &FadingDraw,
) -> Result<ChannelMatrix> {
    ChannelComponents::build(layout, params, draw)?.matrix(phases)
}
