use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, ChannelParams, DirectPath, DirectPattern, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A power level with its unit spelled out, e.g. `{ dbm = 40 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    Dbm(f64),
    Watts(f64),
}

impl Power {
    pub fn watts(self) -> f64 {
        match self {
            Power::Dbm(d) => dbm_to_watts(d),
            Power::Watts(w) => w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Center of the base-station array.
    pub sbs_position: Vec3,
    /// Number of base-station antennas `K`, laid out along `y`.
    pub sbs_antennas: usize,
    /// Antenna spacing in metres; half a wavelength if unset.
    pub antenna_spacing: Option<f64>,
    pub surface_center: Vec3,
    /// Number of users `N`.
    pub users: usize,
    /// Users are dropped uniformly in a horizontal disk of this radius around
    /// the surface center.
    pub mu_radius: f64,
    pub mu_height: f64,
    /// Minimum distance of a user from the surface plane.
    pub min_plane_distance: f64,
    /// If set, `ceil(fraction * N)` users go to the refractive half-disk and
    /// the rest to the reflective one.
    pub refractive_fraction: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            sbs_position: Vec3::new(0.0, 0.0, 2.0),
            sbs_antennas: 5,
            antenna_spacing: None,
            surface_center: Vec3::new(100.0, 0.0, 2.0),
            users: 5,
            mu_radius: 50.0,
            mu_height: 1.5,
            min_plane_distance: 1.0,
            refractive_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub frequency_hz: f64,
    pub rician_kappa: f64,
    pub alpha_ios: f64,
    pub alpha_direct: f64,
    pub noise_power: Power,
    pub tx_power: Power,
    pub bandwidth: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub direct_path: DirectPath,
    pub direct_pattern: DirectPattern,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            frequency_hz: 5.9e9,
            rician_kappa: 4.0,
            alpha_ios: 2.0,
            alpha_direct: 3.0,
            noise_power: Power::Dbm(-96.0),
            tx_power: Power::Dbm(40.0),
            bandwidth: 1.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
            direct_path: DirectPath::Rayleigh,
            direct_pattern: DirectPattern::Isotropic,
        }
    }
}

impl ChannelConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            wavelength: self.wavelength(),
            rician_kappa: self.rician_kappa,
            alpha_ios: self.alpha_ios,
            alpha_direct: self.alpha_direct,
            noise_power: self.noise_power.watts(),
            bandwidth: self.bandwidth,
            tx_gain: self.tx_gain,
            rx_gain: self.rx_gain,
            direct_path: self.direct_path,
            direct_pattern: self.direct_pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element size and spacing in metres.
    pub pitch: f64,
    pub epsilon: f64,
    pub gamma_sq: f64,
    pub element_gain: f64,
    pub phase_levels: usize,
    /// Optimize continuous phases instead of `phase_levels` levels.
    pub continuous: bool,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            rows: 8,
            cols: 8,
            pitch: 0.025,
            epsilon: 1.0,
            gamma_sq: 1.0,
            element_gain: 1.0,
            phase_levels: 4,
            continuous: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rate_threshold: f64,
    pub omega: f64,
    pub max_outer: usize,
    pub max_cd_sweeps: usize,
    pub grid_points: usize,
    pub refine_iters: usize,
    /// Node cap for branch and bound on surfaces larger than `exact_elements`.
    pub node_budget: usize,
    /// Surfaces with at most this many elements are searched exactly.
    pub exact_elements: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            rate_threshold: 1e-4,
            omega: 1e-4,
            max_outer: 50,
            max_cd_sweeps: 200,
            grid_points: 256,
            refine_iters: 30,
            node_budget: 5_000,
            exact_elements: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials: usize,
    pub seed: u64,
    pub output: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: 200,
            seed: 1,
            output: "results.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Surface side lengths `sqrt(M)`.
    pub sizes: Vec<usize>,
    /// Quantization bits per element; `S_a = 2^bits`.
    pub bits: Vec<u32>,
    pub epsilons: Vec<f64>,
    pub split_fractions: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: vec![4, 8, 12],
            bits: vec![1, 2, 3, 4],
            epsilons: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            split_fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub x_steps: usize,
    pub y_steps: usize,
    /// Switch off small-scale fading so the map shows the mean geometry.
    pub los_only: bool,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            x_range: [80.0, 120.0],
            y_range: [-20.0, 20.0],
            x_steps: 21,
            y_steps: 21,
            los_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub epsilon_instances: usize,
    pub derivative_instances: usize,
    pub ratio_instances: usize,
    pub split_trials: usize,
    /// Distances from the surface for the priority ranking check.
    pub ranking_distances: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            epsilon_instances: 1000,
            derivative_instances: 1000,
            ratio_instances: 100_000,
            split_trials: 200,
            ranking_distances: vec![3.0, 6.0, 12.0, 24.0],
        }
    }
}

/// Full experiment description, read from TOML. Every block and key is
/// optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub surface: SurfaceConfig,
    pub optimizer: OptimizerConfig,
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub heatmap: HeatmapConfig,
    pub verify: VerifyConfig,
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config("toml", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        check(s.sbs_antennas >= 1, "scenario.sbs_antennas", "need at least one antenna")?;
        check(s.users >= 1, "scenario.users", "need at least one user")?;
        check(positive(s.mu_radius), "scenario.mu_radius", "must be positive")?;
        check(
            s.min_plane_distance >= 0.0 && s.min_plane_distance < s.mu_radius,
            "scenario.min_plane_distance",
            "must lie in [0, mu_radius)",
        )?;
        check(s.antenna_spacing.is_none_or(positive), "scenario.antenna_spacing", "must be positive")?;
        check(
            s.refractive_fraction.is_none_or(|f| (0.0..=1.0).contains(&f)),
            "scenario.refractive_fraction",
            "must lie in [0, 1]",
        )?;
        check(
            (s.sbs_position.x - s.surface_center.x).abs() > 1e-9,
            "scenario.sbs_position",
            "base station must be off the surface plane",
        )?;

        let c = &self.channel;
        check(positive(c.frequency_hz), "channel.frequency_hz", "must be positive")?;
        check(c.rician_kappa >= 0.0, "channel.rician_kappa", "must be non-negative")?;
        check(positive(c.noise_power.watts()), "channel.noise_power", "must be positive")?;
        check(positive(c.tx_power.watts()), "channel.tx_power", "must be positive")?;
        c.params().validate().map_err(|e| Error::config("channel", e.to_string()))?;

        let f = &self.surface;
        check(positive(f.pitch), "surface.pitch", "must be positive")?;
        check(positive(f.epsilon), "surface.epsilon", "must be positive")?;
        check(f.gamma_sq > 0.0 && f.gamma_sq <= 1.0, "surface.gamma_sq", "must lie in (0, 1]")?;
        check(positive(f.element_gain), "surface.element_gain", "must be positive")?;
        check(f.phase_levels >= 2, "surface.phase_levels", "need at least two levels")?;

        let o = &self.optimizer;
        check(o.max_outer >= 1, "optimizer.max_outer", "must be at least 1")?;
        check(o.grid_points >= 1, "optimizer.grid_points", "must be at least 1")?;
        check(o.node_budget >= 1, "optimizer.node_budget", "must be at least 1")?;

        check(self.run.trials >= 1, "run.trials", "must be at least 1")?;

        let w = &self.sweep;
        check(!w.sizes.is_empty(), "sweep.sizes", "must not be empty")?;
        check(!w.bits.is_empty(), "sweep.bits", "must not be empty")?;
        check(w.bits.iter().all(|&b| (1..=16).contains(&b)), "sweep.bits", "must lie in 1..=16")?;
        check(!w.epsilons.is_empty(), "sweep.epsilons", "must not be empty")?;
        check(w.epsilons.iter().all(|&e| positive(e)), "sweep.epsilons", "must be positive")?;
        check(!w.split_fractions.is_empty(), "sweep.split_fractions", "must not be empty")?;
        check(
            w.split_fractions.iter().all(|f| (0.0..=1.0).contains(f)),
            "sweep.split_fractions",
            "must lie in [0, 1]",
        )?;

        let h = &self.heatmap;
        check(h.x_steps >= 1 && h.y_steps >= 1, "heatmap.steps", "must be at least 1")?;
        check(
            h.x_range[0] <= h.x_range[1] && h.y_range[0] <= h.y_range[1],
            "heatmap.range",
            "ranges must be ordered",
        )?;

        let v = &self.verify;
        check(v.ranking_distances.len() >= 2, "verify.ranking_distances", "need at least two")?;
        check(
            v.ranking_distances.iter().all(|&d| positive(d)),
            "verify.ranking_distances",
            "must be positive",
        )?;
        Ok(())
    }
}
