//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use halledge::fiber::TransverseGrid;
use halledge::tridiag::SymTridiag;

/// Eigenpair `index` of `-d²/du² + (k+u)² + eps * extra(u)` on `grid`, by
/// bisection and inverse iteration with a Rayleigh-quotient polish.
/// The vector is normalized with `h * sum(v²) = 1` and has a positive
/// first sample.
pub fn perturbed_pair(
    k: f64,
    grid: &TransverseGrid,
    index: usize,
    eps: f64,
    extra: &dyn Fn(f64) -> f64,
) -> (f64, Vec<f64>) {
    let h = grid.spacing();
    let nodes = grid.nodes();
    let pot: Vec<f64> = nodes.iter().map(|u| (k + u) * (k + u) + eps * extra(*u)).collect();
    let diag: Vec<f64> = pot.iter().map(|v| 2.0 / (h * h) + v).collect();
    let m = SymTridiag::new(diag, vec![-1.0 / (h * h); nodes.len() - 1]);
    let lam = m.eigenvalue(index);
    let mut v = m.inverse_iteration(lam, 3);
    let mut kin = v[0] * v[0] + v[v.len() - 1] * v[v.len() - 1];
    for w in v.windows(2) {
        kin += (w[1] - w[0]).powi(2);
    }
    let num: f64 = kin / (h * h) + pot.iter().zip(&v).map(|(p, x)| p * x * x).sum::<f64>();
    let den: f64 = v.iter().map(|x| x * x).sum();
    let norm = (h * den).sqrt();
    let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sign / norm);
    (num / den, v)
}

/// Richardson-extrapolated perturbed eigenvalue.
pub fn perturbed_energy(k: f64, grid: &TransverseGrid, index: usize, eps: f64, extra: &dyn Fn(f64) -> f64) -> f64 {
    let c = perturbed_pair(k, grid, index, eps, extra).0;
    let f = perturbed_pair(k, &grid.refined(), index, eps, extra).0;
    (4.0 * f - c) / 3.0
}

pub fn cubic(k: f64) -> impl Fn(f64) -> f64 {
    move |u: f64| u * u * u + 3.0 * u * u * k + 2.0 * u * k * k
}

pub fn l2(grid: &TransverseGrid, v: &[f64]) -> f64 {
    (grid.spacing() * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}
