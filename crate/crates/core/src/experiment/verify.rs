use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::scenario::{sbs_positions, surface_spec, Variant};
use crate::analysis::{
    verify_balanced_split, verify_derivative, verify_optimal_epsilon, verify_pattern_split, verify_priority_ranking,
    verify_rate_ratio_bound, verify_split_monotone, verify_symmetric_pair, Check,
};
use crate::geometry::{passivity_check, ScenarioLayout, Vec3, PASSIVITY_GRID};

fn failed(name: &str, e: impl std::fmt::Display) -> Check {
    Check::new(name, false, format!("error: {e}"))
}

/// Runs every analytical and physical verifier with the counts from
/// `cfg.verify`.
pub fn verify(cfg: &ExperimentConfig) -> Vec<Check> {
    let v = &cfg.verify;
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let mut checks = vec![
        verify_pattern_split(&mut rng, 10_000),
        verify_optimal_epsilon(&mut rng, v.epsilon_instances),
        verify_derivative(&mut rng, v.derivative_instances),
        verify_rate_ratio_bound(&mut rng, v.ratio_instances),
        verify_balanced_split(&mut rng, v.epsilon_instances.min(200)),
        verify_split_monotone(&mut rng, v.split_trials),
    ];

    let surface = surface_spec(cfg, Variant::Ios);
    let p = passivity_check(&surface, PASSIVITY_GRID);
    checks.push(Check::new(
        "passivity",
        p.passes,
        format!("max re-emitted fraction {:.4e}", p.max_total),
    ));

    let params = cfg.channel.params();
    let centre = cfg.scenario.surface_center;
    let sbs = sbs_positions(cfg);
    for eps in [1.0, 4.0] {
        let name = format!("mirrored pair (epsilon {eps})");
        let mut s = surface.clone();
        s.rows = 2;
        s.cols = 2;
        s.epsilon = eps;
        let users = vec![centre + Vec3::new(-3.0, 1.0, -0.5), centre + Vec3::new(3.0, 1.0, -0.5)];
        let check = ScenarioLayout::new(s, sbs.clone(), users)
            .and_then(|l| verify_symmetric_pair(&l, &params, 4))
            .map(|r| {
                Check::new(
                    &name,
                    r.passed(),
                    format!(
                        "ratio {:.6} (pattern {:.6}), argmax {:?} / {:?}",
                        r.magnitude_ratios.first().copied().unwrap_or(f64::NAN),
                        r.expected_ratio,
                        r.argmax_reflective,
                        r.argmax_refractive
                    ),
                )
            });
        checks.push(check.unwrap_or_else(|e| failed(&name, e)));
    }

    // on-axis families on each side of the surface
    let towards_sbs = (cfg.scenario.sbs_position.x - centre.x).signum();
    for (side, dir) in [("reflective", towards_sbs), ("refractive", -towards_sbs)] {
        let name = format!("priority ranking ({side} axis)");
        let positions: Vec<Vec3> = v
            .ranking_distances
            .iter()
            .map(|&d| centre + Vec3::new(dir * d, 0.0, 0.0))
            .collect();
        let check = verify_priority_ranking(
            &surface,
            &sbs,
            &params,
            &positions,
            cfg.channel.noise_power.watts(),
            cfg.channel.tx_power.watts(),
        )
        .map(|r| {
            Check::new(
                &name,
                r.agree,
                format!("priority {:.3e}..{:.3e}", r.priority[0], r.priority[r.priority.len() - 1]),
            )
        });
        checks.push(check.unwrap_or_else(|e| failed(&name, e)));
    }
    checks
}

/// Fixed-width pass/fail table.
pub fn format_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}  {:<6}  {}\n", "check", "result", "detail");
    for c in checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{:<width$}  {:<6}  {}\n", c.name, verdict, c.detail));
    }
    out
}
