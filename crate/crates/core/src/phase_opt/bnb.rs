use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use super::coordinate::{coordinate_descent_masked, CdOptions};
use super::{level_phase, wrap_phase, OptimizerReport, PhaseObjective, PhaseVector};
use crate::error::{Error, Result};

/// Upper bound used to prune a partial assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// Per-user maximum of `|g_i|` over the two candidate levels of every
    /// unassigned element. A valid upper bound, so the search is exact.
    #[default]
    Certified,
    /// Coordinate ascent over the unassigned elements with continuous phases.
    /// Cheap to state but only a local optimum, so pruning on it is
    /// heuristic.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbOptions {
    pub bound: BoundMode,
    /// Cap on generated nodes; `None` searches to completion.
    pub node_budget: Option<usize>,
    pub record_pruned: bool,
    /// Settings for [`BoundMode::Relaxed`].
    pub cd: CdOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            bound: BoundMode::Certified,
            node_budget: None,
            record_pruned: false,
            cd: CdOptions::default(),
        }
    }
}

/// A pruned partial assignment as `(element, level)` pairs, with the bound
/// that pruned it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedNode {
    pub assignment: Vec<(usize, usize)>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbReport {
    pub report: OptimizerReport,
    /// Candidate level pairs per element.
    pub candidates: Vec<[usize; 2]>,
    pub pruned: Vec<PrunedNode>,
}

/// The two grid levels bracketing each continuous phase: `floor` and the next
/// level up, wrapping at `2 pi`. A phase already on the grid yields itself
/// and the next level.
pub fn round_candidates(s_cont: &[f64], s_a: usize) -> Result<Vec<[usize; 2]>> {
    if s_a < 2 {
        return Err(Error::invalid("phase_levels", "need at least two levels"));
    }
    let step = TAU / s_a as f64;
    s_cont
        .iter()
        .map(|&psi| {
            if !psi.is_finite() {
                return Err(Error::invalid("phase", "not finite"));
            }
            let psi = wrap_phase(psi);
            let mut lo = (psi / step).floor() as usize;
            if ((lo + 1) as f64 * step - psi).abs() < 1e-12 {
                lo += 1;
            }
            let lo = lo % s_a;
            Ok([lo, (lo + 1) % s_a])
        })
        .collect()
}

/// Circular distance between two phases.
fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Event of the angular sweep: element `m` enters or leaves the half-plane
/// where choosing its first candidate beats the second.
#[derive(Debug, Clone, Copy)]
struct Event {
    angle: f64,
    element: usize,
    enter: bool,
}

struct Search<'a> {
    obj: &'a PhaseObjective,
    s_a: usize,
    opts: &'a BnbOptions,
    s_cont: &'a [f64],
    candidates: &'a [[usize; 2]],
    order: Vec<usize>,
    /// Position of each element in `order`.
    rank: Vec<usize>,
    /// Contribution of each candidate, `[m][choice][i]`.
    contrib: Vec<[Vec<Complex64>; 2]>,
    /// Contribution at the continuous phase, `[m][i]`.
    cont: Vec<Vec<Complex64>>,
    /// Sorted sweep events per user.
    events: Vec<Vec<Event>>,
    /// Whether element `m` favours its first candidate at sweep angle zero,
    /// per user.
    initially_in: Vec<Vec<bool>>,
    levels: Vec<usize>,
    incumbent: f64,
    best_levels: Vec<usize>,
    history: Vec<f64>,
    generated: usize,
    visited: usize,
    pruned_count: usize,
    pruned: Vec<PrunedNode>,
    exhausted: bool,
}

impl Search<'_> {
    fn rate(&self, g: impl Iterator<Item = Complex64>) -> f64 {
        let s2 = self.obj.sigma_sq();
        self.obj.bandwidth() * g.map(|g| (1.0 + g.norm_sqr() / s2).log2()).sum::<f64>()
    }

    fn phases_of(&self, levels: &[usize]) -> Vec<f64> {
        levels.iter().map(|&l| level_phase(l, self.s_a)).collect()
    }

    fn slack(&self) -> f64 {
        1e-10 * (1.0 + self.incumbent.abs())
    }

    /// Certified bound at a node with `depth` assigned elements and partial
    /// gains `c`.
    fn certified_bound(&self, depth: usize, c: &[Complex64]) -> f64 {
        let s2 = self.obj.sigma_sq();
        let mut total = 0.0;
        for i in 0..self.obj.users() {
            // all unassigned elements at their second candidate, then flip
            // each to the first while the sweep direction favours it
            let mut s = c[i];
            for (m, contrib) in self.contrib.iter().enumerate() {
                if self.rank[m] >= depth {
                    s += contrib[1][i];
                    if self.initially_in[i][m] {
                        s += contrib[0][i] - contrib[1][i];
                    }
                }
            }
            let mut best = s.norm_sqr();
            for ev in &self.events[i] {
                if self.rank[ev.element] < depth {
                    continue;
                }
                let d = self.contrib[ev.element][0][i] - self.contrib[ev.element][1][i];
                if ev.enter {
                    s += d;
                } else {
                    s -= d;
                }
                best = best.max(s.norm_sqr());
            }
            total += (1.0 + best / s2).log2();
        }
        self.obj.bandwidth() * total
    }

    fn relaxed_bound(&self, depth: usize) -> f64 {
        let m_count = self.obj.elements();
        let mut start = self.s_cont.to_vec();
        let mut free = vec![true; m_count];
        for &m in &self.order[..depth] {
            start[m] = level_phase(self.levels[m], self.s_a);
            free[m] = false;
        }
        coordinate_descent_masked(self.obj, &start, &free, &self.opts.cd).objective
    }

    fn visit(&mut self, depth: usize, c: &[Complex64], rest: &[Complex64]) {
        if self.exhausted {
            return;
        }
        if self.opts.node_budget.is_some_and(|b| self.generated >= b) {
            self.exhausted = true;
            return;
        }
        self.generated += 1;
        let m_count = self.obj.elements();
        if depth == m_count {
            self.visited += 1;
            let value = self.obj.evaluate(&self.phases_of(&self.levels));
            if value > self.incumbent {
                self.incumbent = value;
                self.best_levels.clone_from(&self.levels);
                self.history.push(value);
            }
            return;
        }

        let bound = match self.opts.bound {
            BoundMode::Certified => self.certified_bound(depth, c),
            BoundMode::Relaxed => self.relaxed_bound(depth),
        };
        if bound + self.slack() < self.incumbent {
            self.pruned_count += 1;
            if self.opts.record_pruned {
                let assignment = self.order[..depth].iter().map(|&m| (m, self.levels[m])).collect();
                self.pruned.push(PrunedNode { assignment, bound });
            }
            return;
        }
        self.visited += 1;

        let e = self.order[depth];
        let rest_next: Vec<Complex64> = rest.iter().zip(&self.cont[e]).map(|(r, x)| r - x).collect();
        let score = |choice: usize| {
            self.rate(
                c.iter()
                    .zip(&self.contrib[e][choice])
                    .zip(&rest_next)
                    .map(|((ci, x), r)| ci + x + r),
            )
        };
        let first = if score(1) > score(0) { 1 } else { 0 };
        for choice in [first, 1 - first] {
            self.levels[e] = self.candidates[e][choice];
            let child: Vec<Complex64> = c.iter().zip(&self.contrib[e][choice]).map(|(a, b)| a + b).collect();
            self.visit(depth + 1, &child, &rest_next);
        }
    }
}

/// Exact discrete phase search over the two levels bracketing each phase of
/// the continuous solution `s_cont`.
///
/// The incumbent starts at the nearest rounding of `s_cont`. Elements are
/// branched in decreasing order of how much their two candidates differ with
/// the rest held at the incumbent, and the more promising child is explored
/// first. With [`BoundMode::Certified`] and no node budget the result equals
/// exhaustive search over the same candidates; if the budget runs out the
/// best leaf so far is returned with `converged == false`.
pub fn branch_and_bound(obj: &PhaseObjective, s_cont: &[f64], s_a: usize, opts: &BnbOptions) -> Result<BnbReport> {
    let m_count = obj.elements();
    let n = obj.users();
    if s_cont.len() != m_count {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {m_count} elements",
            s_cont.len()
        )));
    }
    let candidates = round_candidates(s_cont, s_a)?;
    let s_cont: Vec<f64> = s_cont.iter().map(|&p| wrap_phase(p)).collect();

    let nearest: Vec<usize> = candidates
        .iter()
        .zip(&s_cont)
        .map(|(&[lo, hi], &psi)| {
            if phase_distance(level_phase(hi, s_a), psi) < phase_distance(level_phase(lo, s_a), psi) {
                hi
            } else {
                lo
            }
        })
        .collect();
    let incumbent_phases: Vec<f64> = nearest.iter().map(|&l| level_phase(l, s_a)).collect();
    let incumbent = obj.evaluate(&incumbent_phases);

    let rotate = |m: usize, psi: f64| -> Vec<Complex64> {
        let rot = Complex64::from_polar(1.0, -psi);
        obj.coeffs(m).iter().map(|b| b * rot).collect()
    };
    let contrib: Vec<[Vec<Complex64>; 2]> = (0..m_count)
        .map(|m| {
            let [lo, hi] = candidates[m];
            [rotate(m, level_phase(lo, s_a)), rotate(m, level_phase(hi, s_a))]
        })
        .collect();
    let cont: Vec<Vec<Complex64>> = (0..m_count).map(|m| rotate(m, s_cont[m])).collect();

    // branching order from the candidate gap at the incumbent
    let g_inc = obj.gains(&incumbent_phases);
    let rate_of = |g: Vec<Complex64>| obj.rate_of_gains(&g);
    let mut gaps: Vec<(f64, usize)> = (0..m_count)
        .map(|m| {
            let nearest_choice = usize::from(candidates[m][1] == nearest[m] && candidates[m][0] != nearest[m]);
            let swap = |choice: usize| {
                g_inc
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g - contrib[m][nearest_choice][i] + contrib[m][choice][i])
                    .collect::<Vec<_>>()
            };
            ((rate_of(swap(0)) - rate_of(swap(1))).abs(), m)
        })
        .collect();
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = gaps.into_iter().map(|(_, m)| m).collect();
    let mut rank = vec![0; m_count];
    for (r, &m) in order.iter().enumerate() {
        rank[m] = r;
    }

    let mut events = Vec::with_capacity(n);
    let mut initially_in = Vec::with_capacity(n);
    for i in 0..n {
        let mut ev = Vec::with_capacity(2 * m_count);
        let mut init = Vec::with_capacity(m_count);
        for (m, c) in contrib.iter().enumerate() {
            let arg = (c[0][i] - c[1][i]).arg();
            let enter = (arg - FRAC_PI_2).rem_euclid(TAU);
            let exit = (arg + FRAC_PI_2).rem_euclid(TAU);
            init.push(enter > exit);
            ev.push(Event { angle: enter, element: m, enter: true });
            ev.push(Event { angle: exit, element: m, enter: false });
        }
        ev.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        events.push(ev);
        initially_in.push(init);
    }

    let mut search = Search {
        obj,
        s_a,
        opts,
        s_cont: &s_cont,
        candidates: &candidates,
        order,
        rank,
        contrib,
        cont,
        events,
        initially_in,
        levels: nearest.clone(),
        incumbent,
        best_levels: nearest,
        history: vec![incumbent],
        generated: 0,
        visited: 0,
        pruned_count: 0,
        pruned: Vec::new(),
        exhausted: false,
    };
    let root_rest: Vec<Complex64> = (0..n).map(|i| (0..m_count).map(|m| search.cont[m][i]).sum()).collect();
    search.visit(0, obj.base(), &root_rest);

    let phases = PhaseVector::discrete(&search.best_levels, s_a);
    let Search {
        incumbent,
        history,
        visited,
        pruned_count,
        pruned,
        exhausted,
        ..
    } = search;
    Ok(BnbReport {
        report: OptimizerReport {
            objective: incumbent,
            phases,
            iterations: history.len() - 1,
            history,
            nodes_visited: visited,
            nodes_pruned: pruned_count,
            converged: !exhausted,
        },
        candidates,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_opt::exhaustive::exhaustive_search;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_objective(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PhaseObjective {
        let mut c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let base = (0..n).map(|_| c()).collect();
        let coeffs = (0..m).map(|_| (0..n).map(|_| c()).collect()).collect();
        PhaseObjective::from_parts(base, coeffs, 0.05, 1.0)
    }

    #[test]
    fn rounding_candidates() {
        let step = TAU / 4.0;
        assert_eq!(round_candidates(&[6.2], 4).unwrap(), vec![[3, 0]]);
        assert_eq!(round_candidates(&[step], 4).unwrap(), vec![[1, 2]]);
        assert_eq!(round_candidates(&[3.0 * step], 4).unwrap(), vec![[3, 0]]);
        assert_eq!(round_candidates(&[0.0, 0.1], 2).unwrap(), vec![[0, 1], [0, 1]]);
        assert_eq!(round_candidates(&[-0.1], 4).unwrap(), vec![[3, 0]]);
        assert!(round_candidates(&[0.0], 1).is_err());
        assert!(round_candidates(&[f64::NAN], 4).is_err());
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let m = rng.random_range(1..=8);
            let n = rng.random_range(1..=3);
            let s_a = [2, 4, 8][rng.random_range(0..3)];
            let obj = random_objective(&mut rng, n, m);
            let s: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * TAU).collect();
            let r = branch_and_bound(&obj, &s, s_a, &BnbOptions::default()).unwrap();
            let cands: Vec<Vec<usize>> = r.candidates.iter().map(|c| c.to_vec()).collect();
            let (_, best) = exhaustive_search(&obj, &cands, s_a, 1 << 20).unwrap();
            assert_eq!(r.report.objective, best);
            assert!(r.report.converged);
            assert!(r.report.nodes_visited + r.report.nodes_pruned < 1 << (m + 1));
        }
    }

    #[test]
    fn certified_bound_dominates_its_subtree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obj = random_objective(&mut rng, 3, 8);
        let s: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * TAU).collect();
        let opts = BnbOptions { record_pruned: true, ..Default::default() };
        let r = branch_and_bound(&obj, &s, 4, &opts).unwrap();
        for node in &r.pruned {
            let free: Vec<usize> = (0..8).filter(|m| node.assignment.iter().all(|(e, _)| e != m)).collect();
            let mut levels = vec![0; 8];
            for &(e, l) in &node.assignment {
                levels[e] = l;
            }
            for mask in 0..1usize << free.len() {
                for (j, &m) in free.iter().enumerate() {
                    levels[m] = r.candidates[m][(mask >> j) & 1];
                }
                let p: Vec<f64> = levels.iter().map(|&l| level_phase(l, 4)).collect();
                let v = obj.evaluate(&p);
                assert!(v <= node.bound + 1e-9);
                assert!(v < r.report.objective + 1e-9);
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let obj = random_objective(&mut rng, 2, 10);
        let s: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * TAU).collect();
        let full = branch_and_bound(&obj, &s, 4, &BnbOptions::default()).unwrap();
        let opts = BnbOptions { node_budget: Some(3), ..Default::default() };
        let r = branch_and_bound(&obj, &s, 4, &opts).unwrap();
        assert!(!r.report.converged);
        assert!(r.report.nodes_visited + r.report.nodes_pruned <= 3);
        assert!(r.report.objective <= full.report.objective);
        assert!(r.report.objective >= r.report.history[0]);
    }

    #[test]
    fn relaxed_bound_still_returns_a_valid_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obj = random_objective(&mut rng, 2, 5);
        let s: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * TAU).collect();
        let opts = BnbOptions { bound: BoundMode::Relaxed, ..Default::default() };
        let r = branch_and_bound(&obj, &s, 4, &opts).unwrap();
        assert_eq!(r.report.objective, obj.evaluate(r.report.phases.values()));
        assert!(r.report.objective >= r.report.history[0]);
    }

    #[test]
    fn no_elements() {
        let obj = PhaseObjective::from_parts(vec![Complex64::new(1.0, 0.0)], vec![], 1.0, 1.0);
        let r = branch_and_bound(&obj, &[], 4, &BnbOptions::default()).unwrap();
        assert_eq!(r.report.objective, 1.0);
        assert!(r.report.phases.is_empty());
    }
}
