use std::f64::consts::TAU;

use super::wrap_phase;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes a 1-D function of one phase: dense scan over `grid_points`
/// uniform samples of `[0, 2 pi)`, then `refine_iters` golden-section steps
/// inside the two cells around the best sample.
///
/// Ties on the grid go to the lowest phase; the refined point replaces the
/// grid sample only if strictly better. Returns `(psi, value)`.
pub fn optimize_single_phase<F>(mut objective: F, grid_points: usize, refine_iters: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let grid_points = grid_points.max(1);
    let step = TAU / grid_points as f64;
    let mut best_psi = 0.0;
    let mut best_val = objective(0.0);
    for j in 1..grid_points {
        let psi = j as f64 * step;
        let v = objective(psi);
        if v > best_val {
            best_val = v;
            best_psi = psi;
        }
    }
    if refine_iters == 0 {
        return (best_psi, best_val);
    }

    let (mut a, mut b) = (best_psi - step, best_psi + step);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = objective(wrap_phase(x1));
    let mut f2 = objective(wrap_phase(x2));
    for _ in 0..refine_iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(wrap_phase(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(wrap_phase(x2));
        }
    }
    let (x, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if f > best_val {
        (wrap_phase(x), f)
    } else {
        (best_psi, best_val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_known_maximizer() {
        let (psi, v) = optimize_single_phase(|p| (p - 1.0).cos(), 256, 30);
        assert!((psi - 1.0).abs() < 1e-6, "psi {psi}");
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_near_wraparound() {
        let target = TAU - 0.001;
        let (psi, _) = optimize_single_phase(|p| (p - target).cos(), 256, 30);
        let d = (psi - target).rem_euclid(TAU);
        assert!(d.min(TAU - d) < 1e-6, "psi {psi}");
        assert!((0.0..TAU).contains(&psi));
    }

    #[test]
    fn constant_objective_returns_first_grid_point() {
        let (psi, v) = optimize_single_phase(|_| 3.0, 256, 30);
        assert_eq!(psi, 0.0);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn never_worse_than_the_grid() {
        // two narrow peaks; the grid picks one, refinement must not lose it
        let f = |p: f64| (-(p - 2.0).powi(2) * 400.0).exp() + 0.9 * (-(p - 4.0).powi(2) * 400.0).exp();
        let grid_best = (0..256).map(|j| f(j as f64 * TAU / 256.0)).fold(f64::MIN, f64::max);
        let (_, v) = optimize_single_phase(f, 256, 30);
        assert!(v >= grid_best);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
