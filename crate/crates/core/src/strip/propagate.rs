use super::operator::StripOperator;
use crate::error::{Error, Result};
use crate::tridiag::TridiagLu;
use num_complex::Complex64;

type C = Complex64;

const RESTART: usize = 30;

/// Crank–Nicolson step `(1 + iτ(H - E)) ψ' = (1 - iτ(H - E)) ψ` with
/// `τ = dt/2`. The flat-channel system is solved exactly mode by mode and
/// serves as the right preconditioner of GMRES for the curved one.
pub struct CrankNicolson<'a> {
    op: &'a StripOperator,
    tau: f64,
    shift: f64,
    tolerance: f64,
    max_iterations: usize,
    modes: Vec<TridiagLu<C>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> CrankNicolson<'a> {
    pub fn new(op: &'a StripOperator, dt: f64, shift: f64, tolerance: f64, max_iterations: usize) -> Result<Self> {
        let grid = op.grid();
        let tau = 0.5 * dt;
        let c = 1.0 / (grid.d_u * grid.d_u);
        let off = vec![C::new(0.0, -tau * c); grid.n_u - 1];
        let mut modes = Vec::with_capacity(grid.n_s);
        for &k in op.wavenumbers() {
            let diag: Vec<C> = (0..grid.n_u)
                .map(|j| {
                    let u = grid.u_node(j);
                    C::new(1.0, tau * ((k + u) * (k + u) + 2.0 * c - shift))
                })
                .collect();
            let lu = TridiagLu::factor(&off, &diag, &off)
                .ok_or_else(|| Error::SolveFailure(format!("flat propagator singular at k = {k}")))?;
            modes.push(lu);
        }
        Ok(Self {
            op,
            tau,
            shift,
            tolerance,
            max_iterations,
            modes,
        })
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.tau
    }

    /// `(1 + iτ(H₀ - E))⁻¹ x` for the flat channel.
    pub fn flat_solve(&self, x: &[C]) -> Vec<C> {
        let grid = self.op.grid();
        let (n_s, n_u) = (grid.n_s, grid.n_u);
        let mut hat = x.to_vec();
        self.op.forward(&mut hat);
        let mut column = vec![C::new(0.0, 0.0); n_u];
        for (m, lu) in self.modes.iter().enumerate() {
            for j in 0..n_u {
                column[j] = hat[j * n_s + m];
            }
            lu.solve_in_place(&mut column);
            for j in 0..n_u {
                hat[j * n_s + m] = column[j];
            }
        }
        self.op.inverse(&mut hat);
        hat
    }

    fn shifted(&self, x: &[C], sign: f64, flat: bool) -> Vec<C> {
        let hx = if flat { self.op.apply_straight(x) } else { self.op.apply(x) };
        let i_tau = C::new(0.0, sign * self.tau);
        x.iter().zip(&hx).map(|(v, h)| v + i_tau * (h - self.shift * v)).collect()
    }

    /// One step of the flat channel, exact up to round-off.
    pub fn flat_step(&self, psi: &mut Vec<C>) {
        let rhs = self.shifted(psi, -1.0, true);
        *psi = self.flat_solve(&rhs);
    }

    /// One step of the full operator.
    pub fn step(&self, psi: &mut Vec<C>) -> Result<StepReport> {
        if !self.op.is_curved() {
            self.flat_step(psi);
            return Ok(StepReport {
                iterations: 0,
                residual: 0.0,
            });
        }
        let rhs = self.shifted(psi, -1.0, false);
        let guess = self.flat_solve(&rhs);
        let (x, report) = gmres(
            |v| self.shifted(v, 1.0, false),
            |v| self.flat_solve(v),
            &rhs,
            guess,
            self.tolerance,
            self.max_iterations,
        )?;
        *psi = x;
        Ok(report)
    }
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with right preconditioning, started from `x`.
pub fn gmres(
    apply: impl Fn(&[C]) -> Vec<C>,
    precondition: impl Fn(&[C]) -> Vec<C>,
    b: &[C],
    mut x: Vec<C>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<C>, StepReport)> {
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let target = tolerance * b_norm;
    let mut iterations = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<C> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let r_norm = norm(&r);
        if r_norm <= target {
            return Ok((
                x,
                StepReport {
                    iterations,
                    residual: r_norm / b_norm,
                },
            ));
        }
        if iterations >= max_iterations {
            return Err(Error::SolveFailure(format!(
                "GMRES stalled at relative residual {:.3e} after {iterations} iterations",
                r_norm / b_norm
            )));
        }
        let mut basis: Vec<Vec<C>> = vec![r.iter().map(|v| v / r_norm).collect()];
        let mut search: Vec<Vec<C>> = Vec::new();
        let mut hess: Vec<Vec<C>> = Vec::new();
        let mut rotations: Vec<(f64, C)> = Vec::new();
        let mut g = vec![C::new(r_norm, 0.0)];
        for j in 0..RESTART {
            let z = precondition(&basis[j]);
            let mut w = apply(&z);
            search.push(z);
            let mut column = vec![C::new(0.0, 0.0); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let h = dot(v, &w);
                column[i] = h;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= h * b);
            }
            let w_norm = norm(&w);
            column[j + 1] = C::new(w_norm, 0.0);
            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (a, b) = (column[i], column[i + 1]);
                column[i] = c * a + s * b;
                column[i + 1] = -s.conj() * a + c * b;
            }
            let (a, b) = (column[j], column[j + 1]);
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if a.norm() == 0.0 {
                (0.0, C::new(1.0, 0.0))
            } else {
                (a.norm() / r, a / a.norm() * b.conj() / r)
            };
            column[j] = c * a + s * b;
            column[j + 1] = C::new(0.0, 0.0);
            g.push(-s.conj() * g[j]);
            g[j] = c * g[j];
            rotations.push((c, s));
            hess.push(column);
            iterations += 1;
            let done = g[j + 1].norm() <= target || w_norm == 0.0 || iterations >= max_iterations;
            if !done {
                basis.push(w.iter().map(|v| v / w_norm).collect());
            }
            if done || j + 1 == RESTART {
                let size = j + 1;
                let mut y = vec![C::new(0.0, 0.0); size];
                for i in (0..size).rev() {
                    let mut acc = g[i];
                    for l in i + 1..size {
                        acc -= hess[l][i] * y[l];
                    }
                    y[i] = acc / hess[i][i];
                }
                for (coef, z) in y.iter().zip(&search) {
                    x.iter_mut().zip(z).for_each(|(a, b)| *a += coef * b);
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberLevel;
    use crate::profile::BoundaryProfile;
    use crate::strip::config::StripGrid;

    fn grid() -> StripGrid {
        StripGrid {
            n_s: 64,
            n_u: 31,
            s0: -16.0,
            d_s: 0.5,
            d_u: 0.25,
            beta: 8.0,
        }
    }

    fn op(theta: f64) -> StripOperator {
        StripOperator::new(grid(), &BoundaryProfile::bump(theta, 1.0, 400).unwrap())
    }

    /// Plane wave in band `n` at FFT mode `m`.
    fn eigenmode(op: &StripOperator, m: usize, n: usize) -> (Vec<C>, f64) {
        let g = *op.grid();
        let k = g.wavenumber(m);
        let level = FiberLevel::solve(k, &g.transverse(), n + 1).unwrap();
        let mut psi = vec![C::new(0.0, 0.0); g.len()];
        for j in 0..g.n_u {
            for i in 0..g.n_s {
                psi[j * g.n_s + i] = C::from_polar(level.psi(n)[j], k * g.s_node(i));
            }
        }
        (psi, level.energy(n))
    }

    #[test]
    fn gmres_solves_dense_system() {
        let n = 12;
        let a = |x: &[C]| -> Vec<C> {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| C::new(((i * 7 + j * 3) % 5) as f64 + if i == j { 6.0 } else { 0.0 }, (i as f64 - j as f64) * 0.1) * x[j])
                        .sum()
                })
                .collect()
        };
        let b: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0)).collect();
        let (x, report) = gmres(a, |v| v.to_vec(), &b, vec![C::new(0.0, 0.0); n], 1e-13, 100).unwrap();
        let ax = a(&x);
        assert!(norm(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) < 1e-11 * norm(&b));
        assert!(report.iterations <= n);
    }

    #[test]
    fn eigenmode_acquires_cayley_phase() {
        let op = op(0.0);
        let (psi0, energy) = eigenmode(&op, 3, 0);
        for shift in [energy, energy - 0.3] {
            let cn = CrankNicolson::new(&op, 0.1, shift, 1e-12, 50).unwrap();
            let mut psi = psi0.clone();
            cn.step(&mut psi).unwrap();
            let expected = C::from_polar(1.0, -2.0 * (0.5 * 0.1 * (energy - shift)).atan());
            let err = psi.iter().zip(&psi0).map(|(a, b)| (a - expected * b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn curved_step_is_unitary() {
        let op = op(0.4);
        let cn = CrankNicolson::new(&op, 0.1, 3.0, 1e-13, 200).unwrap();
        let (mut psi, _) = eigenmode(&op, 2, 0);
        let n0 = op.norm_sq(&psi);
        let mut worst = 0;
        for _ in 0..20 {
            worst = worst.max(cn.step(&mut psi).unwrap().iterations);
        }
        let drift = (op.norm_sq(&psi) / n0 - 1.0).abs();
        assert!(drift < 1e-11, "{drift}");
        assert!(worst > 0 && worst < 60, "{worst}");
    }

    #[test]
    fn curved_step_solves_its_system() {
        let op = op(0.4);
        let cn = CrankNicolson::new(&op, 0.2, 3.0, 1e-12, 200).unwrap();
        let (psi0, _) = eigenmode(&op, 5, 1);
        let mut psi = psi0.clone();
        cn.step(&mut psi).unwrap();
        let lhs = cn.shifted(&psi, 1.0, false);
        let rhs = cn.shifted(&psi0, -1.0, false);
        let rel = norm(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&rhs);
        assert!(rel < 1e-11, "{rel}");
    }
}
