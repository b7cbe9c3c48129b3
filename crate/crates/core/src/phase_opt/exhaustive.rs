use super::{level_phase, PhaseObjective, PhaseVector};
use crate::error::{Error, Result};

/// Largest search space enumerated by default.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1 << 20;

/// Enumerates every combination of the given per-element levels and returns
/// the best vector with its objective. Ties go to the lexicographically
/// smallest level vector.
pub fn exhaustive_search(
    obj: &PhaseObjective,
    candidates: &[Vec<usize>],
    s_a: usize,
    cap: u128,
) -> Result<(PhaseVector, f64)> {
    if candidates.len() != obj.elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} candidate lists for {} elements",
            candidates.len(),
            obj.elements()
        )));
    }
    let lists: Vec<Vec<usize>> = candidates
        .iter()
        .map(|c| {
            let mut c: Vec<usize> = c.iter().map(|l| l % s_a).collect();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    if lists.iter().any(Vec::is_empty) {
        return Err(Error::invalid("candidates", "empty candidate list"));
    }
    let size = lists
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }

    // odometer with the last element varying fastest, so the enumeration is
    // lexicographic
    let mut idx = vec![0usize; lists.len()];
    let mut levels: Vec<usize> = lists.iter().map(|c| c[0]).collect();
    let mut best_levels = levels.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        let phases: Vec<f64> = levels.iter().map(|&l| level_phase(l, s_a)).collect();
        let v = obj.evaluate(&phases);
        if v > best {
            best = v;
            best_levels.clone_from(&levels);
        }
        let mut pos = lists.len();
        loop {
            if pos == 0 {
                return Ok((PhaseVector::discrete(&best_levels, s_a), best));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < lists[pos].len() {
                levels[pos] = lists[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            levels[pos] = lists[pos][0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn ties_resolve_to_the_smallest_vector() {
        // zero coefficients: every vector ties
        let obj = PhaseObjective::from_parts(vec![Complex64::new(1.0, 0.0)], vec![vec![Complex64::default()]; 2], 1.0, 1.0);
        let (v, best) = exhaustive_search(&obj, &[vec![3, 1], vec![2, 0]], 4, 16).unwrap();
        assert_eq!(v.levels().unwrap(), vec![1, 0]);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn finds_the_aligned_level() {
        let a = Complex64::new(1.0, 0.0);
        // exp(-j psi) * j is real positive at psi = pi/2, level 1 of 4
        let obj = PhaseObjective::from_parts(vec![a], vec![vec![Complex64::new(0.0, 1.0)]], 1.0, 1.0);
        let (v, best) = exhaustive_search(&obj, &[vec![0, 1, 2, 3]], 4, 16).unwrap();
        assert_eq!(v.levels().unwrap(), vec![1]);
        assert!((best - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn enforces_the_cap() {
        let obj = PhaseObjective::from_parts(vec![Complex64::new(1.0, 0.0)], vec![vec![Complex64::default()]; 3], 1.0, 1.0);
        let c = vec![vec![0, 1]; 3];
        assert!(matches!(
            exhaustive_search(&obj, &c, 4, 4),
            Err(Error::SearchSpaceTooLarge { size: 8, cap: 4 })
        ));
        assert!(exhaustive_search(&obj, &c[..2], 4, 4).is_err());
    }
}
