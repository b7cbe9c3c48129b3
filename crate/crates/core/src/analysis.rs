//! Closed-form two-user results on the reflect/refract power split and the
//! numerical checks behind them.
//!
//! The closed forms work on an SNR abstraction: user `i` sees direct-link SNR
//! `alpha_i` and, from the surface, `beta_i / (1 + eps)` on the reflective
//! side or `eps * beta_i / (1 + eps)` on the refractive side, with the two
//! contributions simply added.

use rand::Rng;

use crate::channel::{path_loss, ChannelComponents, ChannelParams, DirectPath, FadingDraw};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_from_normal, element_position, k_departure, side_of, ScenarioLayout, SideTag, SurfaceSpec, Vec3,
};
use crate::phase_opt::{alternating_optimize, level_phase, AlternatingOptions, PhaseDomain};

/// Mirror-symmetry tolerance for user pairs, in metres.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoUserSnr {
    /// Direct-link SNR of the reflective-side user.
    pub alpha_i: f64,
    /// Direct-link SNR of the refractive-side user.
    pub alpha_j: f64,
    /// Surface-link SNR shared by the pair.
    pub beta: f64,
}

impl TwoUserSnr {
    pub fn new(alpha_i: f64, alpha_j: f64, beta: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(alpha_i) || !ok(alpha_j) {
            return Err(Error::invalid("alpha", "direct-link SNRs must be finite and non-negative"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", "surface-link SNR must be finite and positive"));
        }
        Ok(TwoUserSnr { alpha_i, alpha_j, beta })
    }
}

/// Share of surface power reaching the reflective and refractive side.
fn split(epsilon: f64) -> (f64, f64) {
    if epsilon.is_infinite() {
        (0.0, 1.0)
    } else {
        (1.0 / (1.0 + epsilon), epsilon / (1.0 + epsilon))
    }
}

/// `log2(1 + alpha_i + beta/(1+eps)) + log2(1 + alpha_j + eps beta/(1+eps))`.
pub fn two_user_sum_rate(snr: &TwoUserSnr, epsilon: f64) -> f64 {
    let (r, t) = split(epsilon);
    (1.0 + snr.alpha_i + snr.beta * r).log2() + (1.0 + snr.alpha_j + snr.beta * t).log2()
}

/// Maximizer of [`two_user_sum_rate`] over `eps > 0`:
/// `(beta + alpha_i - alpha_j) / (beta - alpha_i + alpha_j)`.
///
/// A non-positive denominator means the sum rate keeps growing as
/// `eps -> inf`; this is reported as [`Error::BoundaryRegime`]. A non-positive
/// numerator likewise puts the optimum at `eps -> 0`.
pub fn optimal_epsilon_pair(snr: &TwoUserSnr) -> Result<f64> {
    let num = snr.beta + snr.alpha_i - snr.alpha_j;
    let den = snr.beta - snr.alpha_i + snr.alpha_j;
    if den <= 0.0 {
        return Err(Error::BoundaryRegime { denominator: den });
    }
    if num <= 0.0 {
        return Err(Error::BoundaryRegime { denominator: num });
    }
    Ok(num / den)
}

/// Direct and surface SNR of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSnr {
    pub alpha: f64,
    pub beta: f64,
}

/// Sum rate of reflective users `reflective` and refractive users
/// `refractive` at power ratio `epsilon`.
pub fn multi_user_sum_rate(reflective: &[UserSnr], refractive: &[UserSnr], epsilon: f64) -> f64 {
    let (r, t) = split(epsilon);
    let side = |users: &[UserSnr], share: f64| -> f64 {
        users.iter().map(|u| (1.0 + u.alpha + u.beta * share).log2()).sum()
    };
    side(reflective, r) + side(refractive, t)
}

/// Derivative of [`multi_user_sum_rate`] with respect to `epsilon`.
pub fn sum_rate_epsilon_derivative(reflective: &[UserSnr], refractive: &[UserSnr], epsilon: f64) -> f64 {
    let d = (1.0 + epsilon).powi(2);
    let gain: f64 = refractive
        .iter()
        .map(|u| (u.beta / d) / (1.0 + u.alpha + u.beta * epsilon / (1.0 + epsilon)))
        .sum();
    let loss: f64 = reflective
        .iter()
        .map(|u| (u.beta / d) / (1.0 + u.alpha + u.beta / (1.0 + epsilon)))
        .sum();
    (gain - loss) / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IosIrsRates {
    pub r_irs: f64,
    pub r_ios_opt: f64,
    pub ratio: f64,
}

/// Two-user sum rate with a reflect-only surface serving the reflective user
/// against the omni-surface at its optimal split.
pub fn ios_vs_irs_rates(snr: &TwoUserSnr) -> Result<IosIrsRates> {
    optimal_epsilon_pair(snr)?;
    let (ai, aj, b) = (snr.alpha_i, snr.alpha_j, snr.beta);
    let r_irs = (1.0 + ai + b).log2() + (1.0 + aj).log2();
    let r_ios_opt = (1.0 + ai + aj + ai * aj / 2.0 + ai * ai / 4.0 + aj * aj / 4.0 + b + b * (ai + aj) / 2.0 + b * b / 4.0).log2();
    Ok(IosIrsRates {
        r_irs,
        r_ios_opt,
        ratio: r_ios_opt / r_irs,
    })
}

/// Uniform grid `start, start + step, ...` up to `end` inclusive.
pub fn epsilon_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|j| start + j as f64 * step).collect()
}

/// Grid point maximizing `f`; ties go to the first.
pub fn grid_argmax(grid: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (grid[0], f(grid[0]));
    for &x in &grid[1..] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityReport {
    pub value: f64,
    pub side: SideTag,
}

/// Sum over elements of the departure pattern over `d^alpha`: a proxy for how
/// much the surface can raise user `i`'s rate.
pub fn priority_index(layout: &ScenarioLayout, params: &ChannelParams, i: usize) -> Result<PriorityReport> {
    let len = layout.mu_positions.len();
    let mu = *layout.mu_positions.get(i).ok_or(Error::IndexOutOfRange { index: i, len })?;
    let side = side_of(layout, mu)?;
    let normal = layout.reflective_normal();
    let mut value = 0.0;
    for m in 0..layout.surface.element_count() {
        let elem = element_position(&layout.surface, m)?;
        let theta = angle_from_normal(elem, mu, normal)?;
        value += k_departure(theta, layout.surface.epsilon)? / elem.distance(mu).powf(params.alpha_ios);
    }
    Ok(PriorityReport { value, side })
}

/// Outcome of a mirrored-pair check.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// `|h_j| / |h_i|` per (element, antenna), refractive over reflective user.
    pub magnitude_ratios: Vec<f64>,
    /// Departure-pattern ratio predicted for the pair.
    pub expected_ratio: f64,
    pub ratio_constant: bool,
    pub ratio_matches_pattern: bool,
    pub argmax_reflective: Vec<usize>,
    pub argmax_refractive: Vec<usize>,
    pub argmax_equal: bool,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.ratio_constant && self.ratio_matches_pattern && self.argmax_equal
    }
}

/// Mirror image of `p` in the surface plane.
pub fn mirror(layout: &ScenarioLayout, p: Vec3) -> Vec3 {
    p - layout.reflective_normal() * (2.0 * layout.signed_distance(p))
}

/// True if all ratios agree with `expected` to `tol` relative, and hence with
/// each other.
pub fn check_ratio_property(ratios: &[f64], expected: f64, tol: f64) -> (bool, bool) {
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let constant = ratios.is_empty() || (hi - lo) <= tol * hi.abs();
    let matches = ratios.iter().all(|r| (r - expected).abs() <= tol * expected.abs());
    (constant, matches)
}

/// Exhaustive maximizer of `f` over all `s_a^m` level vectors. Values within
/// `1e-12` relative of the best count as ties and resolve to the
/// lexicographically smallest vector, so two objectives that differ only by a
/// constant factor give the same answer despite rounding.
fn tolerant_argmax(m: usize, s_a: usize, f: impl Fn(&[usize]) -> f64) -> Result<Vec<usize>> {
    let size = (s_a as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    let cap = crate::phase_opt::DEFAULT_EXHAUSTIVE_CAP;
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let values: Vec<(Vec<usize>, f64)> = (0..size as usize)
        .map(|idx| {
            // most significant digit first gives lexicographic order
            let levels: Vec<usize> = (0..m).rev().map(|p| (idx / s_a.pow(p as u32)) % s_a).collect();
            let v = f(&levels);
            (levels, v)
        })
        .collect();
    let best = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .into_iter()
        .find(|(_, v)| *v >= best - 1e-12 * best.abs())
        .map(|(l, _)| l)
        .unwrap_or_default())
}

/// Checks that a mirrored user pair sees channels differing only by the
/// departure-pattern ratio, and that each user alone prefers the same
/// discrete phase vector.
///
/// Small-scale fading and the direct path are switched off for the check, as
/// the direct path breaks the mirror symmetry.
pub fn verify_symmetric_pair(layout: &ScenarioLayout, params: &ChannelParams, s_a: usize) -> Result<SymmetryReport> {
    if layout.mu_positions.len() != 2 {
        return Err(Error::NotSymmetric(format!("expected 2 users, got {}", layout.mu_positions.len())));
    }
    let sides = layout.user_sides()?;
    let (refl, refr) = match (sides[0], sides[1]) {
        (SideTag::Reflective, SideTag::Refractive) => (0, 1),
        (SideTag::Refractive, SideTag::Reflective) => (1, 0),
        _ => return Err(Error::NotSymmetric("users are on the same side".into())),
    };
    let gap = mirror(layout, layout.mu_positions[refl]).distance(layout.mu_positions[refr]);
    if gap > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(format!("mirror image is {gap:.3e} m off")));
    }

    let mut p = params.clone();
    p.rician_kappa = f64::INFINITY;
    p.direct_path = DirectPath::Disabled;
    let m_count = layout.surface.element_count();
    let k_count = layout.sbs_antennas.len();
    let mut ratios = Vec::with_capacity(m_count * k_count);
    for m in 0..m_count {
        for k in 0..k_count {
            ratios.push(path_loss(layout, &p, k, m, refr)? / path_loss(layout, &p, k, m, refl)?);
        }
    }
    let normal = layout.reflective_normal();
    let centre = layout.surface.center;
    let expected_ratio = k_departure(angle_from_normal(centre, layout.mu_positions[refr], normal)?, layout.surface.epsilon)?
        / k_departure(angle_from_normal(centre, layout.mu_positions[refl], normal)?, layout.surface.epsilon)?;
    let (ratio_constant, ratio_matches_pattern) = check_ratio_property(&ratios, expected_ratio, 1e-9);

    let comps = ChannelComponents::build(layout, &p, &FadingDraw::zeros(2, k_count, m_count))?;
    let user_gain = |i: usize, levels: &[usize]| -> f64 {
        let phases: Vec<f64> = levels.iter().map(|&l| level_phase(l, s_a)).collect();
        let h = comps.matrix(&phases).expect("dimensions match");
        h.matrix().row(i).norm_squared()
    };
    let argmax_reflective = tolerant_argmax(m_count, s_a, |l| user_gain(refl, l))?;
    let argmax_refractive = tolerant_argmax(m_count, s_a, |l| user_gain(refr, l))?;
    Ok(SymmetryReport {
        magnitude_ratios: ratios,
        expected_ratio,
        ratio_constant,
        ratio_matches_pattern,
        argmax_equal: argmax_reflective == argmax_refractive,
        argmax_reflective,
        argmax_refractive,
    })
}

/// One named verifier result.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Random instance whose optimal split lies inside `(lo, hi)`.
pub fn random_interior_snr(rng: &mut impl Rng, lo: f64, hi: f64) -> TwoUserSnr {
    loop {
        let snr = TwoUserSnr {
            alpha_i: rng.random_range(0.0..10.0),
            alpha_j: rng.random_range(0.0..10.0),
            beta: rng.random_range(0.1..50.0),
        };
        if let Ok(e) = optimal_epsilon_pair(&snr) {
            if e > lo && e < hi {
                return snr;
            }
        }
    }
}

/// Closed-form optimal split against the grid argmax (step `1e-3`).
pub fn verify_optimal_epsilon(rng: &mut impl Rng, instances: usize) -> Check {
    let step = 1e-3;
    let grid = epsilon_grid(step, 20.0, step);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let snr = random_interior_snr(rng, 0.01, 19.0);
        let e = optimal_epsilon_pair(&snr).expect("interior instance");
        let g = grid_argmax(&grid, |x| two_user_sum_rate(&snr, x));
        worst = worst.max((g - e).abs());
    }
    Check::new(
        "optimal epsilon closed form",
        worst <= step,
        format!("max |grid - closed form| = {worst:.2e} over {instances} instances"),
    )
}

/// Analytic derivative against a central difference with step `1e-6`.
pub fn verify_derivative(rng: &mut impl Rng, instances: usize) -> Check {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (nr, nt) = (rng.random_range(0..4), rng.random_range(1..4));
        let mut users = |n: usize| -> Vec<UserSnr> {
            (0..n)
                .map(|_| UserSnr {
                    alpha: rng.random_range(0.0..10.0),
                    beta: rng.random_range(0.1..50.0),
                })
                .collect()
        };
        let (r, t) = (users(nr), users(nt));
        let eps = rng.random_range(0.05..10.0);
        let fd = (multi_user_sum_rate(&r, &t, eps + h) - multi_user_sum_rate(&r, &t, eps - h)) / (2.0 * h);
        let an = sum_rate_epsilon_derivative(&r, &t, eps);
        // guard the relative error near a stationary point
        let scale = an.abs().max(1e-3);
        worst = worst.max((fd - an).abs() / scale);
    }
    Check::new(
        "epsilon derivative",
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over {instances} instances"),
    )
}

/// The omni-surface over reflect-only ratio stays below two.
pub fn verify_rate_ratio_bound(rng: &mut impl Rng, instances: usize) -> Check {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < instances {
        let snr = TwoUserSnr {
            alpha_i: 10f64.powf(rng.random_range(-3.0..3.0)),
            alpha_j: 10f64.powf(rng.random_range(-3.0..3.0)),
            beta: 10f64.powf(rng.random_range(-3.0..8.0)),
        };
        if let Ok(r) = ios_vs_irs_rates(&snr) {
            worst = worst.max(r.ratio);
            done += 1;
        }
    }
    Check::new(
        "rate ratio below two",
        worst < 2.0,
        format!("max ratio {worst:.6} over {instances} instances"),
    )
}

/// Equal direct SNRs put the optimal split at one.
pub fn verify_balanced_split(rng: &mut impl Rng, instances: usize) -> Check {
    let step = 1e-3;
    let grid = epsilon_grid(step, 5.0, step);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let a = rng.random_range(0.0..10.0);
        let snr = TwoUserSnr {
            alpha_i: a,
            alpha_j: a,
            beta: rng.random_range(0.1..50.0),
        };
        worst = worst.max((grid_argmax(&grid, |x| two_user_sum_rate(&snr, x)) - 1.0).abs());
    }
    Check::new(
        "equal direct links favour an even split",
        worst <= step,
        format!("max |argmax - 1| = {worst:.2e}"),
    )
}

/// Grid argmax of the multi-user split as the refractive share grows, for
/// users with identically distributed SNRs. Passes if for every consecutive
/// pair of ratios a strict majority of trials does not decrease and the mean
/// argmax does not decrease.
pub fn verify_split_monotone(rng: &mut impl Rng, trials: usize) -> Check {
    const N_R: usize = 4;
    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0];
    let grid: Vec<f64> = (0..=400).map(|j| 10f64.powf(-2.0 + j as f64 / 100.0)).collect();
    let mut argmax = vec![Vec::with_capacity(trials); ratios.len()];
    for _ in 0..trials {
        let mut draw = |n: usize| -> Vec<UserSnr> {
            (0..n)
                .map(|_| UserSnr {
                    alpha: rng.random_range(0.0..5.0),
                    beta: rng.random_range(0.1..20.0),
                })
                .collect()
        };
        let reflective = draw(N_R);
        let pool = draw(N_R * 4);
        for (a, r) in argmax.iter_mut().zip(ratios) {
            let nt = (r * N_R as f64).round() as usize;
            a.push(grid_argmax(&grid, |e| multi_user_sum_rate(&reflective, &pool[..nt], e)));
        }
    }
    let mut ok = true;
    let mut votes = Vec::new();
    for w in argmax.windows(2) {
        let up = w[0].iter().zip(&w[1]).filter(|(a, b)| b >= a).count();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        ok &= 2 * up > trials && mean(&w[1]) >= mean(&w[0]);
        votes.push(format!("{up}/{trials}"));
    }
    Check::new(
        "optimal split grows with refractive share",
        ok,
        format!("non-decreasing votes {}", votes.join(", ")),
    )
}

/// Reflective plus refractive lobe equals the full `|cos^3 theta|` lobe, and
/// their ratio is the power ratio, at random angles and ratios.
pub fn verify_pattern_split(rng: &mut impl Rng, instances: usize) -> Check {
    let mut worst_sum = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for _ in 0..instances {
        let theta = rng.random_range(0.0..1.5);
        let eps = 10f64.powf(rng.random_range(-3.0..3.0));
        let refl = k_departure(theta, eps).expect("in domain");
        let refr = k_departure(std::f64::consts::PI - theta, eps).expect("in domain");
        let lobe = theta.cos().abs().powi(3);
        worst_sum = worst_sum.max((refl + refr - lobe).abs());
        worst_ratio = worst_ratio.max((refr / refl - eps).abs() / eps);
    }
    Check::new(
        "pattern split and ratio",
        worst_sum <= 1e-12 && worst_ratio <= 1e-12,
        format!("max split error {worst_sum:.1e}, max ratio error {worst_ratio:.1e}"),
    )
}

/// Ranking check: positions ordered by priority index must be
/// ordered the same way by single-user rate gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub positions: Vec<Vec3>,
    pub priority: Vec<f64>,
    pub rate_gain: Vec<f64>,
    pub agree: bool,
}

fn ranking(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

/// Single-user rate gain from the surface (surface on minus off, fading off)
/// at each position, against the priority index.
pub fn verify_priority_ranking(
    surface: &SurfaceSpec,
    sbs: &[Vec3],
    params: &ChannelParams,
    positions: &[Vec3],
    sigma_sq: f64,
    budget: f64,
) -> Result<RankingReport> {
    let mut p = params.clone();
    p.rician_kappa = f64::INFINITY;
    if p.direct_path == DirectPath::Rayleigh {
        p.direct_path = DirectPath::Deterministic;
    }
    let opts = AlternatingOptions {
        domain: PhaseDomain::Continuous,
        ..Default::default()
    };
    let mut off_surface = surface.clone();
    off_surface.rows = 0;
    off_surface.cols = 0;
    let mut priority = Vec::new();
    let mut rate_gain = Vec::new();
    for &pos in positions {
        let on = ScenarioLayout::new(surface.clone(), sbs.to_vec(), vec![pos])?;
        let off = ScenarioLayout::new(off_surface.clone(), sbs.to_vec(), vec![pos])?;
        priority.push(priority_index(&on, &p, 0)?.value);
        let rate = |l: &ScenarioLayout| -> Result<f64> {
            let m = l.surface.element_count();
            let c = ChannelComponents::build(l, &p, &FadingDraw::zeros(1, sbs.len(), m))?;
            Ok(alternating_optimize(&c, sigma_sq, budget, 1.0, &opts)?.report.objective)
        };
        rate_gain.push(rate(&on)? - rate(&off)?);
    }
    let agree = ranking(&priority) == ranking(&rate_gain);
    Ok(RankingReport {
        positions: positions.to_vec(),
        priority,
        rate_gain,
        agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn snr(ai: f64, aj: f64, b: f64) -> TwoUserSnr {
        TwoUserSnr::new(ai, aj, b).unwrap()
    }

    #[test]
    fn sum_rate_examples() {
        let s = snr(1.5, 1.5, 6.0);
        assert_relative_eq!(two_user_sum_rate(&s, 1.0), 2.0 * (1.0f64 + 1.5 + 3.0).log2(), epsilon = 1e-12);
        let s = snr(2.0, 0.0, 4.0);
        assert_relative_eq!(two_user_sum_rate(&s, 3.0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(two_user_sum_rate(&s, f64::INFINITY), 3f64.log2() + 5f64.log2(), epsilon = 1e-12);
        assert_relative_eq!(two_user_sum_rate(&s, 1e12), two_user_sum_rate(&s, f64::INFINITY), epsilon = 1e-9);
    }

    #[test]
    fn optimal_epsilon_examples() {
        assert_relative_eq!(optimal_epsilon_pair(&snr(3.0, 3.0, 5.0)).unwrap(), 1.0);
        assert_relative_eq!(optimal_epsilon_pair(&snr(2.0, 0.0, 4.0)).unwrap(), 3.0);
        assert!(optimal_epsilon_pair(&snr(0.0, 2.0, 4.0)).unwrap() < 1.0);
        assert!(matches!(
            optimal_epsilon_pair(&snr(0.0, 5.0, 4.0)),
            Err(Error::BoundaryRegime { .. })
        ));
        assert!(optimal_epsilon_pair(&snr(5.0, 0.0, 4.0)).is_err());
        assert!(TwoUserSnr::new(-1.0, 0.0, 1.0).is_err());
        assert!(TwoUserSnr::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn derivative_vanishes_at_the_optimum() {
        let s = snr(2.0, 0.5, 7.0);
        let e = optimal_epsilon_pair(&s).unwrap();
        let r = [UserSnr { alpha: 2.0, beta: 7.0 }];
        let t = [UserSnr { alpha: 0.5, beta: 7.0 }];
        assert!(sum_rate_epsilon_derivative(&r, &t, e).abs() < 1e-9);
        for eps in [0.1, 1.0, 10.0] {
            assert!(sum_rate_epsilon_derivative(&r, &[], eps) < 0.0);
        }
    }

    #[test]
    fn rate_ratio_examples() {
        let r = ios_vs_irs_rates(&snr(0.0, 0.0, 100.0)).unwrap();
        assert_relative_eq!(r.r_ios_opt, 2.0 * 51f64.log2(), epsilon = 1e-12);
        assert_relative_eq!(r.r_irs, 101f64.log2(), epsilon = 1e-12);
        assert!((r.ratio - 1.7039).abs() < 1e-3);
        assert!((ios_vs_irs_rates(&snr(0.0, 0.0, 1e-9)).unwrap().ratio - 1.0).abs() < 1e-3);
        let ratios: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|&b| ios_vs_irs_rates(&snr(0.0, 0.0, b)).unwrap().ratio)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]) && ratios[2] < 2.0);
    }

    #[test]
    fn closed_form_matches_the_optimized_two_user_rate() {
        let s = snr(1.0, 3.0, 9.0);
        let e = optimal_epsilon_pair(&s).unwrap();
        assert_relative_eq!(ios_vs_irs_rates(&s).unwrap().r_ios_opt, two_user_sum_rate(&s, e), epsilon = 1e-12);
    }

    #[test]
    fn random_verifiers_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in [
            verify_optimal_epsilon(&mut rng, 50),
            verify_derivative(&mut rng, 200),
            verify_rate_ratio_bound(&mut rng, 2000),
            verify_balanced_split(&mut rng, 50),
            verify_split_monotone(&mut rng, 50),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    fn square_layout(side: usize, eps: f64, users: Vec<Vec3>) -> ScenarioLayout {
        let mut s = SurfaceSpec::square(Vec3::new(100.0, 0.0, 2.0), side, 0.025);
        s.epsilon = eps;
        ScenarioLayout::new(s, vec![Vec3::new(0.0, 0.0, 2.0)], users).unwrap()
    }

    #[test]
    fn priority_index_examples() {
        let l = square_layout(2, 1.0, vec![Vec3::new(97.0, 1.0, 1.5), Vec3::new(103.0, 1.0, 1.5)]);
        let p = ChannelParams::default();
        let a = priority_index(&l, &p, 0).unwrap();
        let b = priority_index(&l, &p, 1).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
        assert_eq!((a.side, b.side), (SideTag::Reflective, SideTag::Refractive));

        let l = square_layout(2, 1e-9, vec![Vec3::new(103.0, 1.0, 1.5)]);
        assert!(priority_index(&l, &p, 0).unwrap().value < 1e-9);

        let l = square_layout(20, 1.0, vec![Vec3::new(95.0, 0.0, 2.0), Vec3::new(90.0, 0.0, 2.0)]);
        let near = priority_index(&l, &p, 0).unwrap().value;
        let far = priority_index(&l, &p, 1).unwrap().value;
        assert!((near / far - 4.0).abs() < 0.4, "ratio {}", near / far);
        assert!(priority_index(&l, &p, 5).is_err());
    }

    #[test]
    fn symmetric_pair() {
        for eps in [1.0, 4.0] {
            let l = square_layout(2, eps, vec![Vec3::new(97.0, 1.0, 1.5), Vec3::new(103.0, 1.0, 1.5)]);
            let r = verify_symmetric_pair(&l, &ChannelParams::default(), 4).unwrap();
            assert!(r.passed(), "{r:?}");
            assert_relative_eq!(r.expected_ratio, eps, max_relative = 1e-12);
        }
        let l = square_layout(2, 4.0, vec![Vec3::new(97.0, 1.0, 1.5), Vec3::new(104.0, 1.0, 1.5)]);
        assert!(matches!(
            verify_symmetric_pair(&l, &ChannelParams::default(), 4),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn mutated_pattern_fails_the_ratio_check() {
        let l = square_layout(2, 4.0, vec![Vec3::new(97.0, 1.0, 1.5), Vec3::new(103.0, 1.0, 1.5)]);
        let r = verify_symmetric_pair(&l, &ChannelParams::default(), 4).unwrap();
        // a sign slip that swaps the lobes gives 1/eps instead of eps
        let mutated: Vec<f64> = r.magnitude_ratios.iter().map(|x| 1.0 / x).collect();
        let (constant, matches) = check_ratio_property(&mutated, r.expected_ratio, 1e-9);
        assert!(constant && !matches);
    }
}
