use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::scenario::{build_instance, optimizer_options, sbs_positions, surface_spec, trial_rng, TrialDraw, Variant};
use super::stats::{mean, std_error};
use crate::channel::{ChannelComponents, DirectPath, FadingDraw};
use crate::error::{Error, Result};
use crate::geometry::{side_of, ScenarioLayout, SideTag, Vec3, PLANE_TOLERANCE};
use crate::phase_opt::alternating_optimize;

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Surface side length `sqrt(M)`.
    Size,
    /// Quantization bits per element.
    Bits,
    Epsilon,
    /// Fraction of users on the refractive side.
    Split,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Size => "size",
            SweepAxis::Bits => "bits",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Split => "split",
        }
    }

    /// `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        let whole = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config(self.name(), format!("{v} is not a whole number")))
            }
        };
        match self {
            SweepAxis::Size => {
                let side = whole(value)?;
                c.surface.rows = side;
                c.surface.cols = side;
            }
            SweepAxis::Bits => {
                let bits = whole(value)?;
                if !(1..=16).contains(&bits) {
                    return Err(Error::config("bits", "must lie in 1..=16"));
                }
                c.surface.phase_levels = 1 << bits;
            }
            SweepAxis::Epsilon => c.surface.epsilon = value,
            SweepAxis::Split => c.scenario.refractive_fraction = Some(value),
        }
        c.validate()?;
        Ok(c)
    }
}

/// Outcome of one optimized trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub sum_rate: f64,
    pub bnb_converged: bool,
    pub outer_iterations: usize,
}

/// Runs the joint optimizer on one trial of `cfg` for `variant`.
pub fn run_trial(cfg: &ExperimentConfig, variant: Variant, trial: usize) -> Result<TrialOutcome> {
    let draw = TrialDraw::new(cfg, trial);
    let (layout, comps) = build_instance(cfg, variant, &draw)?;
    let opts = optimizer_options(cfg, layout.surface.element_count());
    let r = alternating_optimize(
        &comps,
        cfg.channel.noise_power.watts(),
        cfg.channel.tx_power.watts(),
        cfg.channel.bandwidth,
        &opts,
    )?;
    Ok(TrialOutcome {
        sum_rate: r.report.objective,
        bnb_converged: r.bnb_converged,
        outer_iterations: r.report.iterations,
    })
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub variant: Variant,
    pub mean_sum_rate: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Trials whose branch and bound ran out of its node budget.
    pub budget_exhausted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Per-trial sum rates, indexed by (value index, variant), in trial order.
    samples: BTreeMap<(usize, Variant), Vec<f64>>,
}

impl SweepResult {
    pub fn samples(&self, value_index: usize, variant: Variant) -> &[f64] {
        self.samples.get(&(value_index, variant)).map_or(&[], Vec::as_slice)
    }

    pub fn mean(&self, value_index: usize, variant: Variant) -> f64 {
        mean(self.samples(value_index, variant))
    }

    /// Index of the value with the highest mean for `variant`.
    pub fn argmax(&self, variant: Variant) -> usize {
        (0..self.values.len())
            .max_by(|&a, &b| self.mean(a, variant).total_cmp(&self.mean(b, variant)))
            .unwrap_or(0)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_error)?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Per-trial record in the resumable log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrialRecord {
    fingerprint: String,
    axis: String,
    value: f64,
    variant: Variant,
    trial: usize,
    sum_rate: f64,
    bnb_converged: bool,
    outer_iterations: usize,
}

/// FNV-1a digest of the configuration, ignoring the output path and trial
/// count so that extending a run reuses earlier trials.
pub fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.run.output.clear();
    c.run.trials = 0;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in c.to_toml().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Append-only per-trial log. Rows are written whole and flushed one at a
/// time through a single handle, so an interrupted run leaves only complete
/// records behind.
struct RecordLog {
    writer: Mutex<csv::Writer<File>>,
}

impl RecordLog {
    fn open(path: &Path) -> Result<(Self, Vec<TrialRecord>)> {
        let mut existing = Vec::new();
        if path.exists() {
            let mut r = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_path(path)
                .map_err(csv_error)?;
            // a torn final line from an interrupted run is skipped
            existing.extend(r.deserialize::<TrialRecord>().filter_map(std::result::Result::ok));
        }
        let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            w.write_record([
                "fingerprint",
                "axis",
                "value",
                "variant",
                "trial",
                "sum_rate",
                "bnb_converged",
                "outer_iterations",
            ])
            .map_err(csv_error)?;
            w.flush()?;
        }
        Ok((RecordLog { writer: Mutex::new(w) }, existing))
    }

    fn append(&self, rec: &TrialRecord) -> Result<()> {
        let mut w = self.writer.lock().expect("record log poisoned");
        w.serialize(rec).map_err(csv_error)?;
        w.flush()?;
        Ok(())
    }
}

/// Where sweep output goes and which variants run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub variants: Vec<Variant>,
    /// Per-trial log enabling resumption; `None` keeps everything in memory.
    pub records: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            variants: Variant::ALL.to_vec(),
            records: None,
        }
    }
}

/// Monte Carlo sweep over `values` of `axis`. Trial `t` uses the same user
/// drop and fading for every value and variant.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config(axis.name(), "sweep list is empty"));
    }
    let configs: Vec<ExperimentConfig> = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<_>>()?;
    let prints: Vec<String> = configs.iter().map(fingerprint).collect();
    let trials = cfg.run.trials;

    let (log, existing) = match &opts.records {
        Some(path) => {
            let (log, existing) = RecordLog::open(path)?;
            (Some(log), existing)
        }
        None => (None, Vec::new()),
    };
    let mut results: BTreeMap<(usize, Variant, usize), TrialOutcome> = BTreeMap::new();
    let wanted: HashSet<&str> = prints.iter().map(String::as_str).collect();
    for rec in existing {
        if !wanted.contains(rec.fingerprint.as_str()) || rec.axis != axis.name() || rec.trial >= trials {
            continue;
        }
        if let Some(vi) = prints.iter().position(|p| *p == rec.fingerprint) {
            results.insert(
                (vi, rec.variant, rec.trial),
                TrialOutcome {
                    sum_rate: rec.sum_rate,
                    bnb_converged: rec.bnb_converged,
                    outer_iterations: rec.outer_iterations,
                },
            );
        }
    }

    let mut work = Vec::new();
    for vi in 0..values.len() {
        for &variant in &opts.variants {
            for t in 0..trials {
                if !results.contains_key(&(vi, variant, t)) {
                    work.push((vi, variant, t));
                }
            }
        }
    }
    info!(
        "{} sweep: {} trials to run, {} reused",
        axis.name(),
        work.len(),
        results.len()
    );

    let fresh: Vec<((usize, Variant, usize), TrialOutcome)> = work
        .par_iter()
        .map(|&(vi, variant, t)| {
            let out = run_trial(&configs[vi], variant, t)?;
            if let Some(log) = &log {
                log.append(&TrialRecord {
                    fingerprint: prints[vi].clone(),
                    axis: axis.name().into(),
                    value: values[vi],
                    variant,
                    trial: t,
                    sum_rate: out.sum_rate,
                    bnb_converged: out.bnb_converged,
                    outer_iterations: out.outer_iterations,
                })?;
            }
            Ok(((vi, variant, t), out))
        })
        .collect::<Result<_>>()?;
    results.extend(fresh);

    let mut samples = BTreeMap::new();
    let mut rows = Vec::new();
    for (vi, &value) in values.iter().enumerate() {
        for &variant in &opts.variants {
            let outs: Vec<&TrialOutcome> = (0..trials).map(|t| &results[&(vi, variant, t)]).collect();
            let rates: Vec<f64> = outs.iter().map(|o| o.sum_rate).collect();
            rows.push(SweepRow {
                axis: axis.name().into(),
                value,
                variant,
                mean_sum_rate: mean(&rates),
                std_error: std_error(&rates),
                trials,
                budget_exhausted: outs.iter().filter(|o| !o.bnb_converged).count(),
            });
            samples.insert((vi, variant), rates);
        }
    }
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        rows,
        samples,
    })
}

pub fn sweep_size(cfg: &ExperimentConfig, sizes: &[usize], opts: &SweepOptions) -> Result<SweepResult> {
    let v: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    run_sweep(cfg, SweepAxis::Size, &v, opts)
}

pub fn sweep_bits(cfg: &ExperimentConfig, bits: &[u32], opts: &SweepOptions) -> Result<SweepResult> {
    let v: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
    run_sweep(cfg, SweepAxis::Bits, &v, opts)
}

/// Power-ratio sweep with users dropped within `mu_radius` of the surface.
pub fn sweep_epsilon(cfg: &ExperimentConfig, epsilons: &[f64], mu_radius: f64, opts: &SweepOptions) -> Result<SweepResult> {
    let mut c = cfg.clone();
    c.scenario.mu_radius = mu_radius;
    c.scenario.min_plane_distance = c.scenario.min_plane_distance.min(mu_radius / 4.0);
    c.validate()?;
    run_sweep(&c, SweepAxis::Epsilon, epsilons, opts)
}

pub fn sweep_user_split(cfg: &ExperimentConfig, fractions: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    run_sweep(cfg, SweepAxis::Split, fractions, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserReport {
    pub position: Vec3,
    pub side: SideTag,
    pub rate: f64,
    pub sinr: f64,
    pub received_power: f64,
    /// Squared norm of the direct-path channel row.
    pub direct_gain: f64,
    /// Squared norm of the surface contribution at the final phases.
    pub surface_gain: f64,
}

/// Report of [`run_single`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleReport {
    pub variant: Variant,
    pub seed: u64,
    pub elements: usize,
    pub sum_rate: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub bnb_converged: bool,
    pub history: Vec<f64>,
    pub phases: Vec<f64>,
    pub users: Vec<UserReport>,
}

impl SingleReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// One trial (trial index 0 of `cfg.run.seed`) of the joint optimizer with a
/// full per-user report.
pub fn run_single(cfg: &ExperimentConfig, variant: Variant) -> Result<SingleReport> {
    let draw = TrialDraw::new(cfg, 0);
    let (layout, comps) = build_instance(cfg, variant, &draw)?;
    let opts = optimizer_options(cfg, layout.surface.element_count());
    let sigma_sq = cfg.channel.noise_power.watts();
    let r = alternating_optimize(&comps, sigma_sq, cfg.channel.tx_power.watts(), cfg.channel.bandwidth, &opts)?;
    let h = comps.matrix(r.report.phases.values())?;
    let fixed = comps.fixed();
    let users = draw
        .users
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let direct_gain = fixed.row(i).norm_squared();
            let surface_gain = (h.matrix().row(i) - fixed.row(i)).norm_squared();
            Ok(UserReport {
                position: p,
                side: side_of(&layout, p)?,
                rate: r.rates.rates[i],
                sinr: r.rates.sinr[i],
                received_power: r.precoder.received_powers[i],
                direct_gain,
                surface_gain,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SingleReport {
        variant,
        seed: cfg.run.seed,
        elements: layout.surface.element_count(),
        sum_rate: r.report.objective,
        outer_iterations: r.report.iterations,
        converged: r.report.converged,
        bnb_converged: r.bnb_converged,
        history: r.report.history.clone(),
        phases: r.report.phases.values().to_vec(),
        users,
    })
}

/// One heatmap cell; `rate` is NaN for cells on the surface plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x: f64,
    pub y: f64,
    pub rate: f64,
}

fn linspace(range: [f64; 2], steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![range[0]];
    }
    (0..steps)
        .map(|j| range[0] + (range[1] - range[0]) * j as f64 / (steps - 1) as f64)
        .collect()
}

/// Best single-user rate with one user at each grid cell, at power ratio
/// `epsilon`.
pub fn heatmap(cfg: &ExperimentConfig, epsilon: f64) -> Result<Vec<HeatmapCell>> {
    let mut c = cfg.clone();
    c.surface.epsilon = epsilon;
    c.validate()?;
    let mut params = c.channel.params();
    if c.heatmap.los_only {
        params.rician_kappa = f64::INFINITY;
        if params.direct_path == DirectPath::Rayleigh {
            params.direct_path = DirectPath::Deterministic;
        }
    }
    let surface = surface_spec(&c, Variant::Ios);
    let sbs = sbs_positions(&c);
    let m = surface.element_count();
    let opts = optimizer_options(&c, m);
    let fading_seed = rand::Rng::random::<u64>(&mut trial_rng(c.run.seed, 0));
    let fading = FadingDraw::generate(fading_seed, 1, sbs.len(), m);
    let xs = linspace(c.heatmap.x_range, c.heatmap.x_steps);
    let ys = linspace(c.heatmap.y_range, c.heatmap.y_steps);
    let cells: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    cells
        .par_iter()
        .map(|&(x, y)| {
            let p = Vec3::new(x, y, c.scenario.mu_height);
            if (x - c.scenario.surface_center.x).abs() <= PLANE_TOLERANCE {
                return Ok(HeatmapCell { x, y, rate: f64::NAN });
            }
            let layout = ScenarioLayout::new(surface.clone(), sbs.clone(), vec![p])?;
            let comps = ChannelComponents::build(&layout, &params, &fading)?;
            let r = alternating_optimize(&comps, params.noise_power, c.channel.tx_power.watts(), params.bandwidth, &opts)?;
            Ok(HeatmapCell {
                x,
                y,
                rate: r.report.objective,
            })
        })
        .collect()
}

pub fn write_heatmap_csv(path: impl AsRef<Path>, cells: &[HeatmapCell]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_error)?;
    for c in cells {
        w.serialize(c).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::digital_beamforming;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.surface.rows = 2;
        cfg.surface.cols = 2;
        cfg.scenario.users = 2;
        cfg.scenario.sbs_antennas = 2;
        cfg.run.trials = 3;
        cfg
    }

    #[test]
    fn no_surface_equals_plain_beamforming() {
        let cfg = small();
        let draw = TrialDraw::new(&cfg, 0);
        let (_, comps) = build_instance(&cfg, Variant::None, &draw).unwrap();
        let h = comps.matrix(&[]).unwrap();
        let (_, direct) = digital_beamforming(&h, cfg.channel.noise_power.watts(), cfg.channel.tx_power.watts(), 1.0).unwrap();
        let r = run_single(&cfg, Variant::None).unwrap();
        assert_eq!(r.sum_rate, direct.sum_rate);
        assert_eq!(r.elements, 0);
    }

    #[test]
    fn single_runs_are_deterministic() {
        let cfg = small();
        assert_eq!(run_single(&cfg, Variant::Ios).unwrap().to_toml(), run_single(&cfg, Variant::Ios).unwrap().to_toml());
    }

    #[test]
    fn sweep_rows_and_resume() {
        let cfg = small();
        let dir = tempfile::tempdir().unwrap();
        let records = dir.path().join("trials.csv");
        let opts = SweepOptions {
            variants: vec![Variant::Ios, Variant::None],
            records: Some(records.clone()),
        };
        let a = sweep_bits(&cfg, &[1, 2], &opts).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.trials == 3 && r.std_error >= 0.0));
        let lines = std::fs::read_to_string(&records).unwrap().lines().count();
        assert_eq!(lines, 1 + 12);
        // a second run reuses every record and appends nothing
        let b = sweep_bits(&cfg, &[1, 2], &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), lines);
        // more trials only runs the new ones
        let mut more = cfg.clone();
        more.run.trials = 4;
        let c = sweep_bits(&more, &[1, 2], &opts).unwrap();
        assert_eq!(c.samples(0, Variant::Ios)[..3], a.samples(0, Variant::Ios)[..]);
        assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), lines + 4);

        let out = dir.path().join("out.csv");
        a.write_csv(&out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("axis,value,variant,mean_sum_rate,std_error,trials,budget_exhausted\n"));
    }

    #[test]
    fn sweep_axes_validate_values() {
        let cfg = small();
        assert!(SweepAxis::Size.apply(&cfg, 2.5).is_err());
        assert!(SweepAxis::Bits.apply(&cfg, 0.0).is_err());
        assert!(SweepAxis::Epsilon.apply(&cfg, -1.0).is_err());
        assert_eq!(SweepAxis::Bits.apply(&cfg, 3.0).unwrap().surface.phase_levels, 8);
        assert!(run_sweep(&cfg, SweepAxis::Size, &[], &SweepOptions::default()).is_err());
    }

    #[test]
    fn heatmap_marks_plane_cells() {
        let mut cfg = small();
        cfg.heatmap.x_range = [95.0, 105.0];
        cfg.heatmap.y_range = [0.0, 0.0];
        cfg.heatmap.x_steps = 3;
        cfg.heatmap.y_steps = 1;
        let cells = heatmap(&cfg, 1.0).unwrap();
        assert_eq!(cells.len(), 3);
        assert!(cells[1].rate.is_nan());
        assert!(cells[0].rate > 0.0 && cells[2].rate > 0.0);
    }
}
