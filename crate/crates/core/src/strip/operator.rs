use super::config::{StripConfig, StripGrid};
use crate::error::Result;
use crate::profile::BoundaryProfile;
use crate::symbolic::Poly;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

type C = Complex64;

/// Curved-strip Hamiltonian in scaled coordinates,
/// `D g⁻¹ D - ∂²_U + β⁻² V` with `D = -i∂_S + U - U² κ / (2β)`,
/// pseudo-spectral in `S` and second-order finite differences in `U`.
/// Nodes are stored row by row: index `j * n_s + i` for `U_j`, `S_i`.
pub struct StripOperator {
    grid: StripGrid,
    k: Vec<f64>,
    curved: bool,
    a: Vec<f64>,
    ginv: Vec<f64>,
    potential: Vec<f64>,
    kappa: Vec<[f64; 3]>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

pub fn build_strip_operator(cfg: &StripConfig) -> Result<StripOperator> {
    let grid = cfg.validate()?;
    Ok(StripOperator::new(grid, &cfg.profile()?))
}

impl StripOperator {
    pub fn new(grid: StripGrid, profile: &BoundaryProfile) -> Self {
        let beta = grid.beta;
        let kappa: Vec<[f64; 3]> = (0..grid.n_s).map(|i| profile.derivatives(grid.s_node(i) / beta)).collect();
        let curved = kappa.iter().any(|k| k.iter().any(|v| *v != 0.0));
        let n = grid.len();
        let (mut a, mut ginv, mut potential) = (vec![0.0; n], vec![1.0; n], vec![0.0; n]);
        for j in 0..grid.n_u {
            let big_u = grid.u_node(j);
            let u = big_u / beta;
            for (i, &[k0, k1, k2]) in kappa.iter().enumerate() {
                let idx = j * grid.n_s + i;
                let q = 1.0 - u * k0;
                a[idx] = big_u - big_u * big_u * k0 / (2.0 * beta);
                ginv[idx] = 1.0 / (q * q);
                potential[idx] = (-u * k2 / (2.0 * q.powi(3)) - 1.25 * u * u * k1 * k1 / q.powi(4) - 0.25 * k0 * k0 / (q * q))
                    / (beta * beta);
            }
        }
        let mut planner = FftPlanner::new();
        Self {
            grid,
            k: grid.wavenumbers(),
            curved,
            a,
            ginv,
            potential,
            kappa,
            fft: planner.plan_fft_forward(grid.n_s),
            ifft: planner.plan_fft_inverse(grid.n_s),
        }
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    pub fn is_curved(&self) -> bool {
        self.curved
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// `[κ, κ', κ'']` at each `S` node.
    pub fn curvature(&self) -> &[[f64; 3]] {
        &self.kappa
    }

    /// Unnormalised FFT of every row.
    pub fn forward(&self, buf: &mut [C]) {
        self.fft.process(buf);
    }

    /// Inverse of [`forward`](Self::forward), normalisation included.
    pub fn inverse(&self, buf: &mut [C]) {
        self.ifft.process(buf);
        let n = self.grid.n_s as f64;
        buf.iter_mut().for_each(|v| *v /= n);
    }

    /// `x ↦ (-i∂_S)^power x`.
    pub fn momentum_power(&self, x: &[C], power: u32) -> Vec<C> {
        let mut hat = x.to_vec();
        self.forward(&mut hat);
        for row in hat.chunks_mut(self.grid.n_s) {
            for (v, k) in row.iter_mut().zip(&self.k) {
                *v *= k.powi(power as i32);
            }
        }
        self.inverse(&mut hat);
        hat
    }

    /// `-∂²_U x` with Dirichlet ends, added into `out`.
    fn add_transverse(&self, x: &[C], out: &mut [C]) {
        let (n_s, n_u) = (self.grid.n_s, self.grid.n_u);
        let c = 1.0 / (self.grid.d_u * self.grid.d_u);
        for j in 0..n_u {
            for i in 0..n_s {
                let idx = j * n_s + i;
                let mut v = 2.0 * x[idx];
                if j > 0 {
                    v -= x[idx - n_s];
                }
                if j + 1 < n_u {
                    v -= x[idx + n_s];
                }
                out[idx] += c * v;
            }
        }
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        if !self.curved {
            return self.apply_straight(x);
        }
        let mut d = self.momentum_power(x, 1);
        for idx in 0..d.len() {
            d[idx] = (d[idx] + self.a[idx] * x[idx]) * self.ginv[idx];
        }
        let mut out = self.momentum_power(&d, 1);
        for idx in 0..out.len() {
            out[idx] += self.a[idx] * d[idx] + self.potential[idx] * x[idx];
        }
        self.add_transverse(x, &mut out);
        out
    }

    /// The flat-boundary operator `(-i∂_S + U)² - ∂²_U`, whatever the profile.
    pub fn apply_straight(&self, x: &[C]) -> Vec<C> {
        let n_s = self.grid.n_s;
        let mut hat = x.to_vec();
        self.forward(&mut hat);
        for (j, row) in hat.chunks_mut(n_s).enumerate() {
            let u = self.grid.u_node(j);
            for (v, k) in row.iter_mut().zip(&self.k) {
                *v *= (k + u) * (k + u);
            }
        }
        self.inverse(&mut hat);
        self.add_transverse(x, &mut hat);
        hat
    }

    /// Left quantisation of a symbol in `(eps, U, k, κ, κ', κ'')` at
    /// `eps = 1/β`, plus `-∂²_U`.
    pub fn apply_symbol(&self, symbol: &Poly, x: &[C]) -> Vec<C> {
        let n_s = self.grid.n_s;
        let eps = 1.0 / self.grid.beta;
        let mut out = vec![C::new(0.0, 0.0); x.len()];
        for (power, coeff) in symbol.k_coefficients().iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let f = self.momentum_power(x, power as u32);
            for j in 0..self.grid.n_u {
                let u = self.grid.u_node(j);
                for i in 0..n_s {
                    let idx = j * n_s + i;
                    out[idx] += coeff.evaluate(eps, u, 0.0, &self.kappa[i]) * f[idx];
                }
            }
        }
        self.add_transverse(x, &mut out);
        out
    }

    /// `dS dU Σ conj(x) y`.
    pub fn inner(&self, x: &[C], y: &[C]) -> C {
        x.iter().zip(y).map(|(a, b)| a.conj() * b).sum::<C>() * self.grid.cell()
    }

    pub fn norm_sq(&self, x: &[C]) -> f64 {
        x.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::BoundaryProfile;
    use crate::symbolic::strip_symbol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(beta: f64, theta: f64) -> StripOperator {
        let grid = StripGrid {
            n_s: 96,
            n_u: 31,
            s0: -24.0,
            d_s: 0.5,
            d_u: 0.25,
            beta,
        };
        StripOperator::new(grid, &BoundaryProfile::bump(theta, 1.0, 400).unwrap())
    }

    fn random(n: usize, seed: u64) -> Vec<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn hermitian() {
        let op = small(8.0, 0.4);
        let x = random(op.grid().len(), 1);
        let y = random(op.grid().len(), 2);
        let lhs = op.inner(&x, &op.apply(&y));
        let rhs = op.inner(&op.apply(&x), &y);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm(), "{lhs} {rhs}");
    }

    #[test]
    fn flat_profile_is_landau_channel() {
        let op = small(4.0, 0.0);
        assert!(!op.is_curved());
        let curved_path = {
            let mut o = small(4.0, 0.0);
            o.curved = true;
            o
        };
        let x = random(op.grid().len(), 3);
        let a = op.apply(&x);
        let b = curved_path.apply(&x);
        let diff: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn full_symbol_reproduces_operator() {
        // through eps^6 the truncated symbol differs from the operator by O(β⁻⁷)
        let op = small(16.0, 0.5);
        let sym = strip_symbol(4);
        let grid = *op.grid();
        let mut x = vec![C::new(0.0, 0.0); grid.len()];
        for j in 0..grid.n_u {
            for i in 0..grid.n_s {
                let (s, u) = (grid.s_node(i), grid.u_node(j));
                x[j * grid.n_s + i] = C::from_polar((-0.02 * s * s - (u - 1.5).powi(2)).exp(), 0.4 * s);
            }
        }
        let exact = op.apply(&x);
        let approx = op.apply_symbol(&sym, &x);
        let err = op.norm_sq(&exact.iter().zip(&approx).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt();
        let scale = op.norm_sq(&exact).sqrt();
        assert!(err < 1e-5 * scale, "{err} vs {scale}");
    }
}
