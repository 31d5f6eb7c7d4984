//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use cyclelab::discriminant::MonicPoly;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lattice for real roots: -1.2, -0.8, ..., 1.2.
pub fn real_lattice() -> Vec<f64> {
    (-3..=3).map(|k| 0.4 * k as f64).collect()
}

/// Lattice for conjugate pairs `a ± bi`.
pub fn pair_lattice() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for a in -2..=2 {
        for b in 1..=3 {
            out.push((0.4 * a as f64, 0.4 * b as f64));
        }
    }
    out
}

/// A lattice polynomial of degree `d` with its construction.
#[derive(Debug, Clone)]
pub struct Sample {
    pub poly: MonicPoly,
    pub real: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    /// Distinct real roots.
    pub distinct_real: usize,
    pub repeated: bool,
}

/// `count` squarefree polynomials of degree `d` with roots drawn from the lattices.
pub fn squarefree(d: usize, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (d as u64) << 32);
    let (reals, pairs) = (real_lattice(), pair_lattice());
    (0..count)
        .map(|_| {
            let n_pairs = rng.gen_range(0..=d / 2);
            let n_real = d - 2 * n_pairs;
            let real: Vec<f64> = reals.choose_multiple(&mut rng, n_real).copied().collect();
            let pairs: Vec<(f64, f64)> = pairs.choose_multiple(&mut rng, n_pairs).copied().collect();
            let poly = MonicPoly::from_roots(&real, &pairs).unwrap();
            Sample { poly, distinct_real: n_real, real, pairs, repeated: false }
        })
        .collect()
}

/// `count` polynomials of degree `d` with at least one repeated root: a
/// doubled real root, or for `d >= 4` sometimes a doubled pair.
pub fn repeated(d: usize, count: usize, seed: u64) -> Vec<Sample> {
    assert!(d >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (d as u64) << 40 ^ 0x5eed);
    let (reals, pair_pts) = (real_lattice(), pair_lattice());
    (0..count)
        .map(|_| {
            let double_pair = d >= 4 && rng.gen_bool(0.3);
            let rest = if double_pair { d - 4 } else { d - 2 };
            let n_pairs = rng.gen_range(0..=rest / 2);
            let n_real = rest - 2 * n_pairs;
            let mut real: Vec<f64>;
            let mut pairs: Vec<(f64, f64)>;
            if double_pair {
                real = reals.choose_multiple(&mut rng, n_real).copied().collect();
                pairs = pair_pts.choose_multiple(&mut rng, n_pairs + 1).copied().collect();
                pairs.push(pairs[0]);
            } else {
                real = reals.choose_multiple(&mut rng, n_real + 1).copied().collect();
                real.push(real[0]);
                pairs = pair_pts.choose_multiple(&mut rng, n_pairs).copied().collect();
            }
            let distinct_real = if double_pair { n_real } else { n_real + 1 };
            let poly = MonicPoly::from_roots(&real, &pairs).unwrap();
            Sample { poly, real, pairs, distinct_real, repeated: true }
        })
        .collect()
}
