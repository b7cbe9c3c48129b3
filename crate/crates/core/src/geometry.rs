//! Scenario geometry and the element-level response of the surface.
//!
//! The surface is a rectangular grid of `rows x cols` elements lying in a
//! plane. Points on the same side of that plane as the base station are on the
//! reflective side; points on the other side receive refracted energy.
//! Radiation patterns depend only on the polar angle measured from the
//! reflective-side normal: `theta in [0, pi/2)` is reflection and
//! `theta in (pi/2, pi]` is refraction.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this to the surface plane are treated as on-plane.
pub const PLANE_TOLERANCE: f64 = 1e-9;

/// A point or direction in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

/// Hardware description of the omni-surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub center: Vec3,
    /// Plane normal. Its sign is irrelevant; the layout orients it towards the
    /// base station.
    pub normal: Vec3,
    /// In-plane direction along which rows are stacked (pitch `delta_y`).
    /// Columns run along `normal x row_axis` with pitch `delta_x`.
    pub row_axis: Vec3,
    pub rows: usize,
    pub cols: usize,
    pub delta_x: f64,
    pub delta_y: f64,
    /// Refracted-to-reflected power ratio.
    pub epsilon: f64,
    /// Fraction of incident power re-emitted by each element.
    pub gamma_sq: f64,
    /// Element antenna power gain.
    pub element_gain: f64,
    /// Number of available discrete phase shifts.
    pub phase_levels: usize,
}

impl SurfaceSpec {
    /// A square `side x side` surface in the plane `x = center.x`, rows along
    /// `y`, with element pitch equal to the element size.
    pub fn square(center: Vec3, side: usize, pitch: f64) -> Self {
        SurfaceSpec {
            center,
            normal: Vec3::new(1.0, 0.0, 0.0),
            row_axis: Vec3::new(0.0, 1.0, 0.0),
            rows: side,
            cols: side,
            delta_x: pitch,
            delta_y: pitch,
            epsilon: 1.0,
            gamma_sq: 1.0,
            element_gain: 1.0,
            phase_levels: 4,
        }
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Uniform phase step `2 pi / S_a`.
    pub fn phase_step(&self) -> f64 {
        TAU / self.phase_levels as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid("center", "non-finite component"));
        }
        let n = self
            .normal
            .normalized()
            .ok_or_else(|| Error::invalid("normal", "zero length"))?;
        let r = self
            .row_axis
            .normalized()
            .ok_or_else(|| Error::invalid("row_axis", "zero length"))?;
        if n.dot(r).abs() > 1e-9 {
            return Err(Error::invalid("row_axis", "must lie in the surface plane"));
        }
        if self.delta_x <= 0.0 || self.delta_y <= 0.0 || !self.delta_x.is_finite() || !self.delta_y.is_finite() {
            return Err(Error::invalid("delta", "element size must be positive"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", format!("{} is not positive", self.epsilon)));
        }
        if !(self.gamma_sq > 0.0 && self.gamma_sq <= 1.0) {
            return Err(Error::invalid("gamma_sq", format!("{} not in (0, 1]", self.gamma_sq)));
        }
        if !(self.element_gain > 0.0) || !self.element_gain.is_finite() {
            return Err(Error::invalid("element_gain", "must be positive"));
        }
        if self.phase_levels < 2 {
            return Err(Error::invalid("phase_levels", "need at least 2 levels"));
        }
        Ok(())
    }

    fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let n = self.normal.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let r = self.row_axis.normalized().unwrap_or(Vec3::new(0.0, 1.0, 0.0));
        let c = n.cross(r);
        (n, r, c)
    }
}

/// Which side of the surface a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SideTag {
    Reflective,
    Refractive,
}

/// Center of element `m` (zero-based, row-major) on the centered grid.
pub fn element_position(spec: &SurfaceSpec, m: usize) -> Result<Vec3> {
    let count = spec.element_count();
    if m >= count {
        return Err(Error::IndexOutOfRange { index: m, len: count });
    }
    let (_, row_axis, col_axis) = spec.frame();
    let r = (m / spec.cols) as f64 - (spec.rows as f64 - 1.0) / 2.0;
    let c = (m % spec.cols) as f64 - (spec.cols as f64 - 1.0) / 2.0;
    Ok(spec.center + row_axis * (r * spec.delta_y) + col_axis * (c * spec.delta_x))
}

pub fn element_positions(spec: &SurfaceSpec) -> Vec<Vec3> {
    (0..spec.element_count())
        .map(|m| element_position(spec, m).expect("index in range"))
        .collect()
}

/// Base station, surface and users.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLayout {
    pub surface: SurfaceSpec,
    pub sbs_antennas: Vec<Vec3>,
    pub mu_positions: Vec<Vec3>,
    reflective_normal: Vec3,
}

impl ScenarioLayout {
    pub fn new(surface: SurfaceSpec, sbs_antennas: Vec<Vec3>, mu_positions: Vec<Vec3>) -> Result<Self> {
        surface.validate()?;
        if sbs_antennas.is_empty() {
            return Err(Error::invalid("sbs_antennas", "need at least one antenna"));
        }
        let (n, _, _) = surface.frame();
        let first = n.dot(sbs_antennas[0] - surface.center);
        if first.abs() <= PLANE_TOLERANCE {
            return Err(Error::OnSurfacePlane(sbs_antennas[0].into()));
        }
        let reflective_normal = if first > 0.0 { n } else { -n };
        for a in &sbs_antennas {
            if !a.is_finite() {
                return Err(Error::invalid("sbs_antennas", "non-finite position"));
            }
            if reflective_normal.dot(*a - surface.center) <= PLANE_TOLERANCE {
                return Err(Error::invalid(
                    "sbs_antennas",
                    "all antennas must lie strictly on one side of the surface",
                ));
            }
        }
        for p in &mu_positions {
            if !p.is_finite() {
                return Err(Error::invalid("mu_positions", "non-finite position"));
            }
            if reflective_normal.dot(*p - surface.center).abs() <= PLANE_TOLERANCE {
                return Err(Error::OnSurfacePlane((*p).into()));
            }
        }
        Ok(ScenarioLayout {
            surface,
            sbs_antennas,
            mu_positions,
            reflective_normal,
        })
    }

    /// Unit normal pointing into the reflective (base-station) half-space.
    pub fn reflective_normal(&self) -> Vec3 {
        self.reflective_normal
    }

    /// Signed distance from the surface plane, positive on the reflective side.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.reflective_normal.dot(p - self.surface.center)
    }

    pub fn with_mu_positions(&self, mu_positions: Vec<Vec3>) -> Result<Self> {
        ScenarioLayout::new(self.surface.clone(), self.sbs_antennas.clone(), mu_positions)
    }

    pub fn with_surface(&self, surface: SurfaceSpec) -> Result<Self> {
        ScenarioLayout::new(surface, self.sbs_antennas.clone(), self.mu_positions.clone())
    }

    pub fn user_sides(&self) -> Result<Vec<SideTag>> {
        self.mu_positions.iter().map(|p| side_of(self, *p)).collect()
    }
}

pub fn side_of(layout: &ScenarioLayout, p: Vec3) -> Result<SideTag> {
    let d = layout.signed_distance(p);
    if d.abs() <= PLANE_TOLERANCE || !d.is_finite() {
        Err(Error::OnSurfacePlane(p.into()))
    } else if d > 0.0 {
        Ok(SideTag::Reflective)
    } else {
        Ok(SideTag::Refractive)
    }
}

/// Polar angle of `other` as seen from `element`, measured from `normal`.
///
/// With `normal` pointing into the reflective half-space the result lies in
/// `[0, pi/2)` for reflective-side points and `(pi/2, pi]` for refractive-side
/// points.
pub fn angle_from_normal(element: Vec3, other: Vec3, normal: Vec3) -> Result<f64> {
    let dir = (other - element).normalized().ok_or(Error::ZeroLengthDirection)?;
    let n = normal.normalized().ok_or(Error::ZeroLengthDirection)?;
    Ok(dir.dot(n).clamp(-1.0, 1.0).acos())
}

/// Incidence angle folded onto the incident side, in `[0, pi/2]`.
pub fn incidence_angle(element: Vec3, source: Vec3, normal: Vec3) -> Result<f64> {
    let theta = angle_from_normal(element, source, normal)?;
    Ok(if theta > FRAC_PI_2 { PI - theta } else { theta })
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::AngleOutOfDomain(theta))
    }
}

/// Normalized incident power pattern `|cos^3 theta|`.
pub fn k_incident(theta: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(theta.cos().abs().powi(3))
}

/// Normalized re-emission pattern: the reflective lobe carries `1/(1+eps)` and
/// the refractive lobe `eps/(1+eps)` of `|cos^3 theta|`.
pub fn k_departure(theta: f64, epsilon: f64) -> Result<f64> {
    check_angle(theta)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", format!("{epsilon} is not a valid power ratio")));
    }
    let c = theta.cos();
    if c == 0.0 || theta == FRAC_PI_2 {
        return Err(Error::GrazingDeparture);
    }
    let lobe = c.abs().powi(3);
    Ok(if theta < FRAC_PI_2 {
        lobe / (1.0 + epsilon)
    } else {
        epsilon * lobe / (1.0 + epsilon)
    })
}

/// Complex amplitude gain of one element for the given incidence/departure
/// angles and phase shift.
pub fn element_gain(spec: &SurfaceSpec, theta_a: f64, theta_d: f64, psi: f64) -> Result<Complex64> {
    let ka = k_incident(theta_a)?;
    let kd = k_departure(theta_d, spec.epsilon)?;
    let mag = (spec.element_gain * ka * kd * spec.delta_x * spec.delta_y * spec.gamma_sq).sqrt();
    Ok(Complex64::from_polar(mag, -psi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassivityReport {
    pub max_total: f64,
    pub passes: bool,
}

/// Default angular grid for [`passivity_check`].
pub const PASSIVITY_GRID: (usize, usize) = (720, 720);

/// Integrates `|g_m|^2` over all departure directions (midpoint rule over
/// polar and azimuth angles, solid-angle weighted) for broadside incidence,
/// where the incident pattern peaks.
pub fn passivity_check(spec: &SurfaceSpec, grid: (usize, usize)) -> PassivityReport {
    let (n_theta, n_phi) = (grid.0.max(1), grid.1.max(1));
    let d_theta = PI / n_theta as f64;
    let d_phi = TAU / n_phi as f64;
    let mut polar = 0.0;
    for t in 0..n_theta {
        let theta = (t as f64 + 0.5) * d_theta;
        if let Ok(g) = element_gain(spec, 0.0, theta, 0.0) {
            polar += g.norm_sqr() * theta.sin() * d_theta;
        }
    }
    // patterns carry no azimuth dependence
    let max_total = polar * d_phi * n_phi as f64;
    PassivityReport {
        max_total,
        passes: max_total <= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn layout_x100() -> ScenarioLayout {
        let surface = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 2, 0.025);
        ScenarioLayout::new(surface, vec![Vec3::new(0.0, 0.0, 2.0)], vec![]).unwrap()
    }

    #[test]
    fn single_element_sits_at_center() {
        let s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 1, 0.025);
        assert_eq!(element_position(&s, 0).unwrap(), Vec3::new(100.0, 0.0, 2.0));
        assert!(matches!(element_position(&s, 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_by_one_splits_pitch() {
        let mut s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 1, 0.025);
        s.rows = 2;
        let a = element_position(&s, 0).unwrap();
        let b = element_position(&s, 1).unwrap();
        assert_relative_eq!(a.y, -0.0125, epsilon = 1e-15);
        assert_relative_eq!(b.y, 0.0125, epsilon = 1e-15);
        assert_eq!((a.x, a.z), (100.0, 2.0));
        assert_eq!((b.x, b.z), (100.0, 2.0));
    }

    #[test]
    fn twenty_by_twenty_grid_is_distinct_with_min_spacing() {
        let s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 20, 0.025);
        let pts = element_positions(&s);
        assert_eq!(pts.len(), 400);
        let mut min = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                min = min.min(pts[i].distance(pts[j]));
            }
            // all in the plane x = 100
            assert!((pts[i].x - 100.0).abs() < 1e-12);
        }
        assert!(min >= 0.025 - 1e-12, "min spacing {min}");
    }

    #[test]
    fn side_classification() {
        let l = layout_x100();
        assert_eq!(side_of(&l, Vec3::new(90.0, 0.0, 2.0)).unwrap(), SideTag::Reflective);
        assert_eq!(side_of(&l, Vec3::new(110.0, 0.0, 2.0)).unwrap(), SideTag::Refractive);
        assert!(matches!(side_of(&l, Vec3::new(100.0, 5.0, 2.0)), Err(Error::OnSurfacePlane(_))));
    }

    #[test]
    fn reflective_normal_follows_the_base_station() {
        let mut s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), 2, 0.025);
        s.normal = Vec3::new(-1.0, 0.0, 0.0);
        let l = ScenarioLayout::new(s, vec![Vec3::new(0.0, 0.0, 2.0)], vec![]).unwrap();
        assert_eq!(l.reflective_normal(), Vec3::new(-1.0, 0.0, 0.0));
        s_flipped_agrees(&l);
        assert_eq!(side_of(&l, Vec3::new(50.0, 0.0, 0.0)).unwrap(), SideTag::Reflective);
    }

    fn s_flipped_agrees(l: &ScenarioLayout) {
        // orientation of the stored normal must not change the classification
        let reference = layout_x100();
        for p in [Vec3::new(90.0, 1.0, 0.0), Vec3::new(130.0, -4.0, 3.0)] {
            assert_eq!(side_of(l, p).unwrap(), side_of(&reference, p).unwrap());
        }
    }

    #[test]
    fn angles_from_normal() {
        let e = Vec3::new(0.0, 0.0, 0.0);
        let n = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(angle_from_normal(e, Vec3::new(3.0, 0.0, 0.0), n).unwrap(), 0.0);
        assert_relative_eq!(angle_from_normal(e, Vec3::new(-3.0, 0.0, 0.0), n).unwrap(), PI);
        assert_relative_eq!(
            angle_from_normal(e, Vec3::new(1.0, 1.0, 0.0), n).unwrap(),
            PI / 4.0,
            epsilon = 1e-12
        );
        assert_eq!(angle_from_normal(e, e, n), Err(Error::ZeroLengthDirection));
        assert_relative_eq!(incidence_angle(e, Vec3::new(-1.0, 1.0, 0.0), n).unwrap(), PI / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn incident_pattern_values() {
        assert_relative_eq!(k_incident(PI / 3.0).unwrap(), 0.125, epsilon = 1e-15);
        assert!(k_incident(FRAC_PI_2 - 1e-9).unwrap() < 1e-20);
        assert_relative_eq!(k_incident(PI / 4.0).unwrap(), 2f64.powf(-1.5), epsilon = 1e-15);
        assert!(k_incident(-0.1).is_err());
        assert!(k_incident(4.0).is_err());
    }

    #[test]
    fn departure_pattern_values() {
        assert_relative_eq!(k_departure(PI / 3.0, 1.0).unwrap(), 0.0625, epsilon = 1e-15);
        let t = 0.7;
        assert_relative_eq!(
            k_departure(t, 1.0).unwrap(),
            k_departure(PI - t, 1.0).unwrap(),
            epsilon = 1e-15
        );
        assert_relative_eq!(k_departure(2.0 * PI / 3.0, 3.0).unwrap(), 0.09375, epsilon = 1e-15);
        assert_eq!(k_departure(FRAC_PI_2, 1.0), Err(Error::GrazingDeparture));
    }

    #[test]
    fn element_gain_phase_and_magnitude() {
        let s = SurfaceSpec::square(Vec3::default(), 1, 0.025);
        let g0 = element_gain(&s, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(g0.im, 0.0);
        assert!(g0.re > 0.0);
        // sqrt(1 * 1 * 0.5 * 0.025^2 * 1)
        assert_relative_eq!(g0.re, (0.5f64 * 0.000625).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g0.re, 0.017677669529663688, epsilon = 1e-12);

        let a = element_gain(&s, 0.3, 0.4, 1.1).unwrap();
        let b = element_gain(&s, 0.3, 0.4, 1.1 + PI).unwrap();
        assert_relative_eq!(a.re, -b.re, epsilon = 1e-15);
        assert_relative_eq!(a.im, -b.im, epsilon = 1e-15);
    }

    #[test]
    fn passivity_on_default_element() {
        let s = SurfaceSpec::square(Vec3::default(), 1, 0.025);
        let r = passivity_check(&s, PASSIVITY_GRID);
        // closed form: G * dx * dy * gamma^2 * 2pi * int_0^pi |cos^3| sin = pi/2 * area
        let exact = std::f64::consts::FRAC_PI_2 * 0.025 * 0.025;
        assert_relative_eq!(r.max_total, exact, max_relative = 1e-5);
        assert!(r.passes);

        let mut big = s.clone();
        big.delta_x *= 2.0;
        let r2 = passivity_check(&big, PASSIVITY_GRID);
        assert_relative_eq!(r2.max_total, 2.0 * r.max_total, max_relative = 1e-12);

        let mut dim = s.clone();
        dim.gamma_sq = 1e-12;
        let r3 = passivity_check(&dim, PASSIVITY_GRID);
        assert!(r3.passes && r3.max_total < 1e-14);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SurfaceSpec::square(Vec3::default(), 2, 0.025);
        s.phase_levels = 1;
        assert!(s.validate().is_err());
        let mut s = SurfaceSpec::square(Vec3::default(), 2, 0.025);
        s.gamma_sq = 1.5;
        assert!(s.validate().is_err());
        let mut s = SurfaceSpec::square(Vec3::default(), 2, 0.025);
        s.epsilon = 0.0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn incident_pattern_is_mirror_symmetric(t in 0.0..PI) {
            prop_assert!((k_incident(t).unwrap() - k_incident(PI - t).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn departure_split_conserves_lobe(t in 1e-6..(FRAC_PI_2 - 1e-6), eps in 1e-3..1e3f64) {
            let r = k_departure(t, eps).unwrap();
            let f = k_departure(PI - t, eps).unwrap();
            let lobe = t.cos().abs().powi(3);
            prop_assert!((r + f - lobe).abs() <= 1e-12 * lobe.max(1e-300));
            prop_assert!((f / r - eps).abs() <= 1e-12 * eps);
        }

        #[test]
        fn gain_magnitude_ignores_phase(psi in 0.0..TAU, t in 0.0..1.5f64) {
            let s = SurfaceSpec::square(Vec3::default(), 1, 0.025);
            let g = element_gain(&s, t, t, psi).unwrap();
            let g0 = element_gain(&s, t, t, 0.0).unwrap();
            prop_assert!((g.norm() - g0.norm()).abs() <= 1e-15);
            let d = (g.arg() + psi).rem_euclid(TAU);
            prop_assert!(d < 1e-9 || TAU - d < 1e-9);
        }

        #[test]
        fn sides_partition_users(pts in proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..20)) {
            let l = layout_x100();
            let mut refl = 0;
            let mut refr = 0;
            for (dx, y) in pts {
                let p = Vec3::new(100.0 + dx, y, 1.5);
                match side_of(&l, p) {
                    Ok(SideTag::Reflective) => refl += 1,
                    Ok(SideTag::Refractive) => refr += 1,
                    Err(_) => continue,
                }
                prop_assert_eq!(side_of(&l, p).unwrap() == SideTag::Reflective, dx < 0.0);
            }
            prop_assert!(refl + refr <= 20);
        }
    }
}
