mod common;

use halledge::fiber::{decay_norm, group_velocity, FiberLevel, FiberSolution, TransverseGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Roots of the parabolic cylinder function D_nu(sqrt(2) k) computed to 30
// digits with mpmath; E = 2 nu + 1.
const E0_AT_ONE: f64 = 6.074_391_061_607_877_6;
const GAP0_AT_MINUS5: f64 = 7.671_713_197_597_39e-11;
const GAP0_AT_MINUS6: f64 = 1.547_916_958_282_08e-15;
const GAP0_AT_MINUS8: f64 = 1.436_270_705_475_58e-27;
const GAP1_AT_MINUS8: f64 = 1.808_987_877_745_39e-25;

#[test]
fn regression_value_at_k_one() {
    let sol = FiberSolution::solve_default(1.0, 1).unwrap();
    assert!((sol.energy(0) - E0_AT_ONE).abs() < 1e-10, "{}", sol.energy(0));
    // dense grid of the reference recipe agrees as well
    let dense = TransverseGrid::new(20.0, 20000).unwrap();
    let sol = FiberSolution::solve(1.0, &dense, 1).unwrap();
    assert!((sol.energy(0) - E0_AT_ONE).abs() < 1e-11);
}

#[test]
fn pinching_gap_against_special_function_roots() {
    for (k, n, expect) in [(-5.0, 0, GAP0_AT_MINUS5), (-6.0, 0, GAP0_AT_MINUS6), (-8.0, 0, GAP0_AT_MINUS8), (-8.0, 1, GAP1_AT_MINUS8)] {
        let sol = FiberSolution::solve_default(k, n + 1).unwrap();
        let gap = sol.landau_gap(n);
        assert!((gap - expect).abs() < 1e-6 * expect, "k={k} n={n}: {gap:e} vs {expect:e}");
    }
}

#[test]
fn richardson_ratio() {
    for k in [-1.0, 0.0, 1.5] {
        let g = TransverseGrid::default_for(k, 3);
        let levels: Vec<FiberLevel> = [1, 2, 4]
            .iter()
            .map(|m| FiberLevel::solve(k, &TransverseGrid::new(g.u_max(), g.n_points() * m / 4).unwrap(), 3).unwrap())
            .collect();
        for n in 0..3 {
            let d1 = levels[0].energy(n) - levels[1].energy(n);
            let d2 = levels[1].energy(n) - levels[2].energy(n);
            assert!(d1 / d2 >= 3.5, "k={k} n={n} ratio {}", d1 / d2);
        }
    }
}

#[test]
fn decay_norm_behaviour() {
    let sol = FiberSolution::solve_default(0.0, 1).unwrap();
    assert!((decay_norm(&sol, 0, 0.0) - 1.0).abs() < 1e-12);
    let g = *sol.grid();
    let half = TransverseGrid::new(g.u_max(), g.n_points() / 2).unwrap();
    let coarse = FiberSolution::solve(0.0, &half, 1).unwrap();
    let (a, b) = (decay_norm(&coarse, 0, 0.5), decay_norm(&sol, 0, 0.5));
    assert!((a - b).abs() < 0.01 * b);
    let values: Vec<f64> = (0..=8)
        .map(|i| {
            let k = -2.0 + 0.5 * i as f64;
            decay_norm(&FiberSolution::solve_default(k, 1).unwrap(), 0, 0.5)
        })
        .collect();
    let max = values.iter().cloned().fold(0.0, f64::max);
    // exp(u) weight around a state centred near u = 2 at k = -2
    assert!(values.iter().all(|v| v.is_finite() && *v >= 1.0) && max < 20.0, "{values:?}");
}

#[test]
fn hellmann_feynman_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.gen_range(0..4usize);
        let k: f64 = rng.gen_range(-3.0..3.0);
        let grid = TransverseGrid::default_for(k.abs() + 0.01, n + 1);
        let sol = FiberSolution::solve(k, &grid, n + 1).unwrap();
        let v = group_velocity(&sol, n);
        let d = 1e-4;
        let fd = (FiberSolution::solve(k + d, &grid, n + 1).unwrap().energy(n)
            - FiberSolution::solve(k - d, &grid, n + 1).unwrap().energy(n))
            / (2.0 * d);
        assert!(v > 0.0);
        assert!((v - fd).abs() <= 1e-6 * v, "n={n} k={k}: {v} vs {fd}");
    }
}

#[test]
fn gap_decreases_into_the_bulk() {
    for n in 0..3 {
        let mut last = f64::INFINITY;
        for i in 0..=10 {
            let k = -3.0 - 0.5 * i as f64;
            let gap = FiberSolution::solve_default(k, n + 1).unwrap().landau_gap(n);
            assert!(gap > 0.0 && gap < last, "n={n} k={k}: {gap:e}");
            last = gap;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_simple_and_above_bulk(k in -6.0f64..4.0) {
        let sol = FiberSolution::solve_default(k, 4).unwrap();
        for n in 0..4 {
            prop_assert!(sol.landau_gap(n) > 0.0);
            prop_assert!(group_velocity(&sol, n) > 0.0);
            if n > 0 {
                prop_assert!(sol.energy(n) > sol.energy(n - 1));
            }
            prop_assert!(sol.psi(n)[0] > 0.0);
        }
    }

    #[test]
    fn bands_are_orthonormal(k in -4.0f64..3.0) {
        let sol = FiberSolution::solve_default(k, 5).unwrap();
        let g = sol.grid();
        for a in 0..5 {
            for b in 0..5 {
                let expect = if a == b { 1.0 } else { 0.0 };
                prop_assert!((g.dot(sol.psi(a), sol.psi(b)) - expect).abs() <= 1e-10);
            }
        }
    }
}
