use log::debug;

use super::bnb::{branch_and_bound, BnbOptions};
use super::coordinate::{coordinate_descent, CdOptions};
use super::{OptimizerReport, PhaseDomain, PhaseObjective, PhaseVector};
use crate::channel::ChannelComponents;
use crate::error::Result;
use crate::precoding::{digital_beamforming_with_cap, Precoder, RateReport, DEFAULT_CONDITION_CAP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingOptions {
    pub domain: PhaseDomain,
    pub cd: CdOptions,
    pub bnb: BnbOptions,
    /// Stop once an outer iteration gains less than this sum rate.
    pub omega: f64,
    pub max_outer: usize,
    pub condition_cap: f64,
}

impl AlternatingOptions {
    pub fn discrete(levels: usize) -> Self {
        AlternatingOptions {
            domain: PhaseDomain::Discrete { levels },
            ..Default::default()
        }
    }
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        AlternatingOptions {
            domain: PhaseDomain::Discrete { levels: 4 },
            cd: CdOptions::default(),
            bnb: BnbOptions::default(),
            omega: 1e-4,
            max_outer: 50,
            condition_cap: DEFAULT_CONDITION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingReport {
    /// Final phases; `objective` and `history` hold zero-forcing sum rates.
    pub report: OptimizerReport,
    pub precoder: Precoder,
    pub rates: RateReport,
    /// False if any discrete search ran out of its node budget.
    pub bnb_converged: bool,
}

/// Joint digital and analog beamforming by alternation.
///
/// Starting from all-zero phases, each outer iteration computes the
/// zero-forcing precoder for the current channel, improves the phases with
/// coordinate ascent (warm-started at the current phases) and, for discrete
/// phases, branch and bound over the bracketing levels. A candidate is kept
/// only if the zero-forcing sum rate of the new channel does not drop, so the
/// history never decreases. With no surface elements this is a single
/// digital beamforming step.
pub fn alternating_optimize(
    components: &ChannelComponents,
    sigma_sq: f64,
    budget: f64,
    bandwidth: f64,
    opts: &AlternatingOptions,
) -> Result<AlternatingReport> {
    let m_count = components.elements();
    let mut phases = PhaseVector::zeros(m_count, opts.domain);
    let h = components.matrix(phases.values())?;
    let (mut precoder, mut rates) = digital_beamforming_with_cap(&h, sigma_sq, budget, bandwidth, opts.condition_cap)?;
    let mut history = vec![rates.sum_rate];
    let mut bnb_converged = true;
    let mut nodes_visited = 0;
    let mut nodes_pruned = 0;
    let mut iterations = 0;
    let mut converged = m_count == 0;

    while !converged && iterations < opts.max_outer {
        iterations += 1;
        let obj = PhaseObjective::new(components, &precoder.v, sigma_sq, bandwidth)?;
        let relaxed = coordinate_descent(&obj, phases.values(), &opts.cd);
        let candidate = match opts.domain {
            PhaseDomain::Continuous => relaxed.phases,
            PhaseDomain::Discrete { levels } => {
                let b = branch_and_bound(&obj, relaxed.phases.values(), levels, &opts.bnb)?;
                bnb_converged &= b.report.converged;
                nodes_visited += b.report.nodes_visited;
                nodes_pruned += b.report.nodes_pruned;
                if b.report.objective < obj.evaluate(phases.values()) {
                    phases.clone()
                } else {
                    b.report.phases
                }
            }
        };

        let h = components.matrix(candidate.values())?;
        match digital_beamforming_with_cap(&h, sigma_sq, budget, bandwidth, opts.condition_cap) {
            Ok((p, r)) if r.sum_rate >= rates.sum_rate => {
                let gain = r.sum_rate - rates.sum_rate;
                debug!("outer iteration {iterations}: sum rate {:.6} (+{gain:.3e})", r.sum_rate);
                phases = candidate;
                precoder = p;
                rates = r;
                history.push(rates.sum_rate);
                converged = gain < opts.omega;
            }
            Ok(_) | Err(_) => {
                debug!("outer iteration {iterations}: candidate rejected");
                converged = true;
            }
        }
    }

    Ok(AlternatingReport {
        report: OptimizerReport {
            phases,
            objective: rates.sum_rate,
            history,
            iterations,
            nodes_visited,
            nodes_pruned,
            converged,
        },
        precoder,
        rates,
        bnb_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, FadingDraw};
    use crate::geometry::{ScenarioLayout, SurfaceSpec, Vec3};
    use crate::precoding::digital_beamforming;

    fn setup(side: usize, seed: u64) -> ChannelComponents {
        let mut s = SurfaceSpec::square(Vec3::new(50.0, 0.0, 2.0), side, 0.025);
        s.element_gain = 1e3;
        let sbs = vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.1, 2.0)];
        let mus = vec![Vec3::new(47.0, 2.0, 1.5), Vec3::new(53.0, -1.0, 1.5)];
        let l = ScenarioLayout::new(s, sbs, mus).unwrap();
        let p = ChannelParams::default();
        ChannelComponents::build(&l, &p, &FadingDraw::generate(seed, 2, 2, side * side)).unwrap()
    }

    #[test]
    fn history_never_decreases() {
        for seed in 0..4 {
            let c = setup(3, seed);
            let r = alternating_optimize(&c, 1e-12, 1e-2, 1.0, &AlternatingOptions::default()).unwrap();
            assert!(r.report.history.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(r.report.objective, *r.report.history.last().unwrap());
            assert!(r.report.phases.levels().is_some());
            let h = c.matrix(r.report.phases.values()).unwrap();
            let (_, direct) = digital_beamforming(&h, 1e-12, 1e-2, 1.0).unwrap();
            assert!((direct.sum_rate - r.rates.sum_rate).abs() < 1e-9);
        }
    }

    #[test]
    fn continuous_domain_at_least_matches_the_start() {
        let c = setup(2, 1);
        let opts = AlternatingOptions {
            domain: PhaseDomain::Continuous,
            ..Default::default()
        };
        let r = alternating_optimize(&c, 1e-12, 1e-2, 1.0, &opts).unwrap();
        assert!(r.report.objective >= r.report.history[0]);
    }

    #[test]
    fn no_surface_is_plain_beamforming() {
        let c = setup(0, 1);
        let r = alternating_optimize(&c, 1e-12, 1e-2, 1.0, &AlternatingOptions::default()).unwrap();
        assert_eq!(r.report.iterations, 0);
        assert_eq!(r.report.history.len(), 1);
        assert!(r.report.converged);
    }
}
