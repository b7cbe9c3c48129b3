use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::{ChannelComponents, FadingDraw};
use crate::error::{Error, Result};
use crate::geometry::{ScenarioLayout, SurfaceSpec, Vec3};
use crate::phase_opt::{AlternatingOptions, BnbOptions, CdOptions, PhaseDomain};

/// Power ratio standing in for a reflect-only surface.
pub const IRS_EPSILON: f64 = 1e-12;

/// Which surface a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The omni-surface as configured.
    Ios,
    /// The same surface with refraction switched off.
    Irs,
    /// No surface at all.
    None,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ios, Variant::Irs, Variant::None];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ios => "ios",
            Variant::Irs => "irs",
            Variant::None => "none",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ios" => Ok(Variant::Ios),
            "irs" => Ok(Variant::Irs),
            "none" => Ok(Variant::None),
            other => Err(Error::config("variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// Surface for `variant` under `cfg`.
pub fn surface_spec(cfg: &ExperimentConfig, variant: Variant) -> SurfaceSpec {
    let f = &cfg.surface;
    let mut s = SurfaceSpec::square(cfg.scenario.surface_center, f.rows, f.pitch);
    s.cols = f.cols;
    s.epsilon = f.epsilon;
    s.gamma_sq = f.gamma_sq;
    s.element_gain = f.element_gain;
    s.phase_levels = f.phase_levels;
    match variant {
        Variant::Ios => {}
        Variant::Irs => s.epsilon = IRS_EPSILON,
        Variant::None => {
            s.rows = 0;
            s.cols = 0;
        }
    }
    s
}

/// Uniform linear base-station array along `y`.
pub fn sbs_positions(cfg: &ExperimentConfig) -> Vec<Vec3> {
    let s = &cfg.scenario;
    let spacing = s.antenna_spacing.unwrap_or(cfg.channel.wavelength() / 2.0);
    let mid = (s.sbs_antennas as f64 - 1.0) / 2.0;
    (0..s.sbs_antennas)
        .map(|k| s.sbs_position + Vec3::new(0.0, (k as f64 - mid) * spacing, 0.0))
        .collect()
}

/// Random generator for one trial, independent across trials and shared by
/// every variant and sweep value of that trial.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

/// Drops users in the disk around the surface center. With a refractive
/// fraction, the first `ceil(fraction * N)` users land on the refractive
/// side and the rest on the reflective side.
pub fn place_users(cfg: &ExperimentConfig, rng: &mut impl Rng) -> Vec<Vec3> {
    let s = &cfg.scenario;
    // the reflective side faces the base station
    let towards_sbs = (s.sbs_position.x - s.surface_center.x).signum();
    let n_refr = s.refractive_fraction.map(|f| (f * s.users as f64 - 1e-9).ceil().max(0.0) as usize);
    (0..s.users)
        .map(|u| {
            let want_refractive = n_refr.map(|n| u < n);
            loop {
                let r = s.mu_radius * rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * TAU;
                let dx = r * phi.cos();
                let dy = r * phi.sin();
                if dx.abs() < s.min_plane_distance {
                    continue;
                }
                let refractive = dx * towards_sbs < 0.0;
                if want_refractive.is_some_and(|w| w != refractive) {
                    continue;
                }
                return Vec3::new(s.surface_center.x + dx, s.surface_center.y + dy, s.mu_height);
            }
        })
        .collect()
}

/// Everything random about one trial: user drop and fading.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDraw {
    pub users: Vec<Vec3>,
    pub fading_seed: u64,
}

impl TrialDraw {
    pub fn new(cfg: &ExperimentConfig, trial: usize) -> Self {
        let mut rng = trial_rng(cfg.run.seed, trial);
        let fading_seed = rng.random();
        let users = place_users(cfg, &mut rng);
        TrialDraw { users, fading_seed }
    }
}

/// Layout and channel components for one trial and variant.
pub fn build_instance(
    cfg: &ExperimentConfig,
    variant: Variant,
    draw: &TrialDraw,
) -> Result<(ScenarioLayout, ChannelComponents)> {
    let layout = ScenarioLayout::new(surface_spec(cfg, variant), sbs_positions(cfg), draw.users.clone())?;
    let params = cfg.channel.params();
    let m = layout.surface.element_count();
    let fading = FadingDraw::generate(draw.fading_seed, draw.users.len(), cfg.scenario.sbs_antennas, m);
    let comps = ChannelComponents::build(&layout, &params, &fading)?;
    Ok((layout, comps))
}

/// Optimizer settings for a surface with `elements` elements.
pub fn optimizer_options(cfg: &ExperimentConfig, elements: usize) -> AlternatingOptions {
    let o = &cfg.optimizer;
    let cd = CdOptions {
        grid_points: o.grid_points,
        refine_iters: o.refine_iters,
        rate_threshold: o.rate_threshold,
        max_sweeps: o.max_cd_sweeps,
    };
    AlternatingOptions {
        domain: if cfg.surface.continuous {
            PhaseDomain::Continuous
        } else {
            PhaseDomain::Discrete {
                levels: cfg.surface.phase_levels,
            }
        },
        cd,
        bnb: BnbOptions {
            node_budget: (elements > o.exact_elements).then_some(o.node_budget),
            cd,
            ..Default::default()
        },
        omega: o.omega,
        max_outer: o.max_outer,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{side_of, SideTag};

    #[test]
    fn users_respect_the_disk_and_split() {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.users = 5;
        cfg.scenario.refractive_fraction = Some(0.5);
        let draw = TrialDraw::new(&cfg, 3);
        let layout = ScenarioLayout::new(surface_spec(&cfg, Variant::Ios), sbs_positions(&cfg), draw.users.clone()).unwrap();
        let sides: Vec<SideTag> = draw.users.iter().map(|&p| side_of(&layout, p).unwrap()).collect();
        assert_eq!(sides.iter().filter(|&&s| s == SideTag::Refractive).count(), 3);
        for p in &draw.users {
            let d = Vec3::new(p.x, p.y, 2.0).distance(cfg.scenario.surface_center);
            assert!(d <= cfg.scenario.mu_radius);
            assert!((p.x - 100.0).abs() >= cfg.scenario.min_plane_distance);
            assert_eq!(p.z, 1.5);
        }
        cfg.scenario.refractive_fraction = Some(0.0);
        let draw = TrialDraw::new(&cfg, 3);
        assert!(draw.users.iter().all(|p| p.x < 100.0));
    }

    #[test]
    fn trials_are_reproducible_and_distinct() {
        let cfg = ExperimentConfig::default();
        assert_eq!(TrialDraw::new(&cfg, 1), TrialDraw::new(&cfg, 1));
        assert_ne!(TrialDraw::new(&cfg, 1), TrialDraw::new(&cfg, 2));
    }

    #[test]
    fn variants_share_everything_but_the_surface() {
        let mut cfg = ExperimentConfig::default();
        // without scattering the phase-independent part is the direct path alone
        cfg.channel.rician_kappa = f64::INFINITY;
        assert_eq!(surface_spec(&cfg, Variant::Irs).epsilon, IRS_EPSILON);
        assert_eq!(surface_spec(&cfg, Variant::None).element_count(), 0);
        assert_eq!(surface_spec(&cfg, Variant::Ios).element_count(), 64);
        let draw = TrialDraw::new(&cfg, 0);
        let (_, a) = build_instance(&cfg, Variant::Ios, &draw).unwrap();
        let (_, b) = build_instance(&cfg, Variant::None, &draw).unwrap();
        assert_eq!(a.fixed(), b.fixed());
        assert_eq!("irs".parse::<Variant>().unwrap(), Variant::Irs);
        assert!("foo".parse::<Variant>().is_err());
    }

    #[test]
    fn antenna_array_is_centered() {
        let cfg = ExperimentConfig::default();
        let a = sbs_positions(&cfg);
        assert_eq!(a.len(), 5);
        assert!((a[2].y).abs() < 1e-15);
        assert!((a[1].y - a[0].y - cfg.channel.wavelength() / 2.0).abs() < 1e-15);
    }
}
