//! Curvature perturbation of the fiber bands: the cubic first-order
//! operator, energy and vector corrections, geometric phase densities and
//! the adiabatic momentum drift.

use crate::error::{Error, Result};
use crate::fiber::{richardson, FiberLevel, FiberSolution, TransverseGrid};
use crate::profile::BoundaryProfile;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// `u³ + 3u²k + 2uk²`, the first-order curvature operator at momentum `k`.
pub fn h1_multiplier(k: f64, u: f64) -> f64 {
    u * (u + k) * (u + 2.0 * k)
}

/// `∂_k` of [`h1_multiplier`].
pub fn h1_k_derivative(k: f64, u: f64) -> f64 {
    3.0 * u * u + 4.0 * u * k
}

pub fn apply_h1(k: f64, psi: &[f64], grid: &TransverseGrid) -> Vec<f64> {
    psi.iter()
        .enumerate()
        .map(|(j, p)| h1_multiplier(k, grid.node(j)) * p)
        .collect()
}

/// `<a, w b>` with the outer tenth of the grid checked for leakage.
pub(crate) fn weighted_element(grid: &TransverseGrid, a: &[f64], weight: &[f64], b: &[f64]) -> Result<f64> {
    let h = grid.spacing();
    let tail_from = grid.tail_start();
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut tail = 0.0;
    for j in 0..a.len() {
        let t = a[j] * weight[j] * b[j];
        total += t;
        mass += t.abs();
        if j >= tail_from {
            tail += t;
        }
    }
    if tail.abs() > 1e-8 * mass {
        return Err(Error::TailContribution(format!(
            "outer tenth of [0, {}] carries {:.3e} of the matrix element",
            grid.u_max(),
            tail.abs() / mass
        )));
    }
    Ok(h * total)
}

fn h1_weights(level: &FiberLevel) -> Vec<f64> {
    let grid = level.grid();
    (0..grid.interior_len()).map(|j| h1_multiplier(level.k(), grid.node(j))).collect()
}

/// Quantities on a single grid; the public entry points extrapolate them.
pub mod level {
    use super::*;

    pub fn e1(level: &FiberLevel, n: usize) -> Result<f64> {
        let psi = level.psi(n);
        weighted_element(level.grid(), psi, &h1_weights(level), psi)
    }

    pub fn psi1(level: &FiberLevel, n: usize) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = apply_h1(level.k(), level.psi(n), level.grid())
            .into_iter()
            .map(|v| -v)
            .collect();
        level.solve_reduced(n, &rhs)
    }

    /// `<psi1, H1 psi>`.
    pub fn e2_resolvent(level: &FiberLevel, n: usize) -> Result<f64> {
        let x = psi1(level, n)?;
        weighted_element(level.grid(), &x, &h1_weights(level), level.psi(n))
    }

    /// Truncated sum over the first `m_max` discrete states.
    pub fn e2_sum(level: &FiberLevel, n: usize, m_max: usize) -> Result<SumOverStates> {
        let grid = *level.grid();
        let basis = FiberLevel::solve(level.k(), &grid, m_max)?;
        let psi = level.psi(n);
        let h1psi = apply_h1(level.k(), psi, &grid);
        let total_sq = grid.dot(&h1psi, &h1psi);
        let en = level.energy(n);
        let mut sum = 0.0;
        let mut captured = 0.0;
        let mut last_term = 0.0;
        for m in 0..m_max {
            let c = grid.dot(basis.psi(m), &h1psi);
            captured += c * c;
            if m != n {
                last_term = c * c / (en - basis.energy(m));
                sum += last_term;
            }
        }
        let gap = basis.energy(m_max - 1) - en;
        let remainder = (total_sq - captured).max(0.0) / gap;
        Ok(SumOverStates {
            value: sum,
            last_term,
            remainder,
            m_max,
        })
    }

    /// `Im <psi~, d psi~>` and `Im <H1 psi~, d psi~>` for the band
    /// re-phased by `exp(i lambda)`.
    pub fn berry_terms(level: &FiberLevel, n: usize, lambda: f64, lambda_prime: f64) -> Result<(f64, f64)> {
        let grid = level.grid();
        let h = grid.spacing();
        let psi = level.psi(n);
        let dpsi = level.dpsi_dk(n)?;
        let phase = Complex64::from_polar(1.0, lambda);
        let i = Complex64::i();
        let mut conn = Complex64::new(0.0, 0.0);
        let mut rw = Complex64::new(0.0, 0.0);
        for j in 0..psi.len() {
            let a = phase * psi[j];
            let da = phase * (dpsi[j] + i * lambda_prime * psi[j]);
            let ha = a * h1_multiplier(level.k(), grid.node(j));
            conn += a.conj() * da;
            rw += ha.conj() * da;
        }
        Ok((h * conn.im, h * rw.im))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumOverStates {
    pub value: f64,
    pub last_term: f64,
    /// Upper estimate of the discarded states' contribution.
    pub remainder: f64,
    pub m_max: usize,
}

/// `<psi_n, H1 psi_n>`, extrapolated.
pub fn first_order_energy(sol: &FiberSolution, n: usize) -> Result<f64> {
    sol.extrapolate(|l| level::e1(l, n))
}

/// Solution of `(H0 - E_n) x = -(1 - P_n) H1 psi_n` with `x ⊥ psi_n`.
pub fn first_order_vector(sol: &FiberSolution, n: usize) -> Result<Vec<f64>> {
    level::psi1(sol.coarse(), n)
}

/// `psi1 - (E1/E') (dpsi + <dpsi, psi> psi)`.
pub fn psi_tilde1(sol: &FiberSolution, n: usize) -> Result<Vec<f64>> {
    let level = sol.coarse();
    let grid = level.grid();
    let x = level::psi1(level, n)?;
    let dpsi = level.dpsi_dk(n)?;
    let ratio = level::e1(level, n)? / level.group_velocity(n);
    let psi = level.psi(n);
    let c = grid.dot(&dpsi, psi);
    Ok((0..x.len())
        .map(|j| x[j] - ratio * (dpsi[j] + c * psi[j]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrderEnergy {
    /// Resolvent form, extrapolated.
    pub value: f64,
    /// Sum over states, extrapolated.
    pub sum_over_states: f64,
    pub remainder: f64,
    pub m_max: usize,
}

const SUM_TOLERANCE: f64 = 1e-6;

/// Second-order energy by both the reduced resolvent and the truncated
/// sum over states; the two must agree.
pub fn second_order_energy(sol: &FiberSolution, n: usize, m_max: usize) -> Result<SecondOrderEnergy> {
    if m_max < n + 10 {
        return Err(Error::ConfigInvalid(format!("m_max = {m_max} must be at least n + 10 = {}", n + 10)));
    }
    let resolvent = sol.extrapolate(|l| level::e2_resolvent(l, n))?;
    let mut m = m_max;
    let cap = m_max + 100;
    loop {
        let levels = sol.levels();
        let sums = [level::e2_sum(levels[0], n, m)?, level::e2_sum(levels[1], n, m)?];
        let value = richardson(sums[0].value, sums[1].value);
        let settled = sums
            .iter()
            .all(|s| s.last_term.abs() <= SUM_TOLERANCE * s.value.abs() && s.remainder <= SUM_TOLERANCE * s.value.abs());
        if settled {
            if (value - resolvent).abs() > SUM_TOLERANCE * resolvent.abs() {
                return Err(Error::TruncationNotConverged(format!(
                    "sum over states {value} disagrees with resolvent form {resolvent}"
                )));
            }
            return Ok(SecondOrderEnergy {
                value: resolvent,
                sum_over_states: value,
                remainder: sums[0].remainder.max(sums[1].remainder),
                m_max: m,
            });
        }
        if m >= cap {
            return Err(Error::TruncationNotConverged(format!(
                "last term {:.3e} at m_max = {m}",
                sums[0].last_term
            )));
        }
        m += 10;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRecord {
    pub k: f64,
    pub n: usize,
    pub e1: f64,
    pub psi1: Vec<f64>,
    pub psi_tilde1: Vec<f64>,
    pub e2: f64,
}

pub fn perturbation_record(sol: &FiberSolution, n: usize) -> Result<PerturbationRecord> {
    Ok(PerturbationRecord {
        k: sol.k(),
        n,
        e1: first_order_energy(sol, n)?,
        psi1: first_order_vector(sol, n)?,
        psi_tilde1: psi_tilde1(sol, n)?,
        e2: second_order_energy(sol, n, n + 10)?.value,
    })
}

/// Smooth change of band phase `psi -> exp(i lambda(k)) psi`, given by
/// samples of `lambda` and `lambda'` on a momentum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconvention {
    pub k: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    pub tag: String,
}

impl Reconvention {
    pub fn from_fn<F, G>(tag: &str, ks: &[f64], lambda: F, lambda_prime: G) -> Self
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        Self {
            k: ks.to_vec(),
            lambda: ks.iter().map(|k| lambda(*k)).collect(),
            lambda_prime: ks.iter().map(|k| lambda_prime(*k)).collect(),
            tag: tag.to_string(),
        }
    }

    /// Linear interpolation of `(lambda, lambda')`.
    pub fn at(&self, k: f64) -> Result<(f64, f64)> {
        let n = self.k.len();
        if n == 0 || k < self.k[0] || k > self.k[n - 1] {
            return Err(Error::ConfigInvalid(format!("momentum {k} outside the reconvention grid")));
        }
        let i = self.k.partition_point(|x| *x < k);
        if i == 0 {
            return Ok((self.lambda[0], self.lambda_prime[0]));
        }
        let (k0, k1) = (self.k[i - 1], self.k[i]);
        let t = (k - k0) / (k1 - k0);
        let lerp = |v: &[f64]| v[i - 1] + t * (v[i] - v[i - 1]);
        Ok((lerp(&self.lambda), lerp(&self.lambda_prime)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricPhaseDensity {
    pub k: f64,
    pub n: usize,
    /// Factor multiplying `κ(s)` in the Berry density.
    pub gamma_b_coeff: f64,
    /// Factor multiplying `κ(s)` in the Rammal-Wilkinson density.
    pub gamma_rw_coeff: f64,
    pub gauge_tag: String,
}

pub const REAL_GAUGE: &str = "real, positive slope at the wall";

pub fn geometric_phase_coeffs(
    sol: &FiberSolution,
    n: usize,
    reconvention: Option<&Reconvention>,
) -> Result<GeometricPhaseDensity> {
    let (lambda, lambda_prime) = match reconvention {
        Some(r) => r.at(sol.k())?,
        None => (0.0, 0.0),
    };
    let mut coeffs = [[0.0; 2]; 2];
    for (slot, lvl) in coeffs.iter_mut().zip(sol.levels()) {
        let (conn, rw) = level::berry_terms(lvl, n, lambda, lambda_prime)?;
        let e1 = level::e1(lvl, n)?;
        let ep = lvl.group_velocity(n);
        let gamma_b = e1 / ep * conn;
        *slot = [gamma_b, -gamma_b + rw / ep];
    }
    Ok(GeometricPhaseDensity {
        k: sol.k(),
        n,
        gamma_b_coeff: richardson(coeffs[0][0], coeffs[1][0]),
        gamma_rw_coeff: richardson(coeffs[0][1], coeffs[1][1]),
        gauge_tag: reconvention.map_or(REAL_GAUGE.to_string(), |r| r.tag.clone()),
    })
}

/// `δk(s) = -κ(s) E1 / (β E')` on the profile grid.
pub fn adiabatic_drift(profile: &BoundaryProfile, sol: &FiberSolution, n: usize, beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::ConfigInvalid(format!("beta = {beta} must be at least 1")));
    }
    let ratio = first_order_energy(sol, n)? / crate::fiber::group_velocity(sol, n);
    Ok(profile.kappa.iter().map(|kappa| -kappa * ratio / beta).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub n: usize,
    pub k: f64,
    pub energy: f64,
    pub e_prime: f64,
    pub e1: f64,
    pub e2: f64,
    pub gamma_b: f64,
    pub gamma_rw: f64,
}

pub fn perturbation_row(sol: &FiberSolution, n: usize) -> Result<PerturbationRow> {
    let geo = geometric_phase_coeffs(sol, n, None)?;
    Ok(PerturbationRow {
        n,
        k: sol.k(),
        energy: sol.energy(n),
        e_prime: crate::fiber::group_velocity(sol, n),
        e1: first_order_energy(sol, n)?,
        e2: second_order_energy(sol, n, n + 10)?.value,
        gamma_b: geo.gamma_b_coeff,
        gamma_rw: geo.gamma_rw_coeff,
    })
}

pub fn write_perturbation_csv<W: Write>(out: &mut W, rows: &[PerturbationRow]) -> std::io::Result<()> {
    writeln!(out, "n,k,E,E_prime,E1,E2,gammaB,gammaRW")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.k, r.energy, r.e_prime, r.e1, r.e2, r.gamma_b, r.gamma_rw
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cubic_operator_forms() {
        for k in [-2.0, 0.0, 0.3, 1.7] {
            for u in [0.0, 0.5, 2.25, 7.0] {
                let expanded = u * u * u + 3.0 * u * u * k + 2.0 * u * k * k;
                assert!((h1_multiplier(k, u) - expanded).abs() <= 1e-12 * (1.0 + expanded.abs()));
            }
        }
        let grid = TransverseGrid::new(6.0, 64).unwrap();
        let psi = vec![1.0; grid.interior_len()];
        let out = apply_h1(0.0, &psi, &grid);
        for (j, v) in out.iter().enumerate() {
            assert_eq!(*v, grid.node(j).powi(3));
        }
    }

    #[test]
    fn ground_band_anchor() {
        let sol = FiberSolution::solve_default(0.0, 1).unwrap();
        let e1 = first_order_energy(&sol, 0).unwrap();
        assert!((e1 - 4.0 / PI.sqrt()).abs() < 1e-7, "{e1}");
    }

    #[test]
    fn psi1_defining_equation() {
        let sol = FiberSolution::solve_default(0.5, 3).unwrap();
        let level = sol.coarse();
        let grid = level.grid();
        for n in 0..3 {
            let x = first_order_vector(&sol, n).unwrap();
            let psi = level.psi(n);
            let h1psi = apply_h1(0.5, psi, grid);
            let e1 = grid.dot(psi, &h1psi);
            let lhs = level.apply_shifted(n, &x);
            let res: Vec<f64> = lhs
                .iter()
                .zip(h1psi.iter().zip(psi))
                .map(|(l, (hp, p))| l + hp - e1 * p)
                .collect();
            assert!(grid.norm(&res) < 1e-8, "{}", grid.norm(&res));
            assert!(grid.dot(psi, &x).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_tilde_in_real_gauge() {
        let sol = FiberSolution::solve_default(-0.4, 2).unwrap();
        let level = sol.coarse();
        let x = first_order_vector(&sol, 1).unwrap();
        let d = level.dpsi_dk(1).unwrap();
        let ratio = level::e1(level, 1).unwrap() / level.group_velocity(1);
        let t = psi_tilde1(&sol, 1).unwrap();
        for j in (0..t.len()).step_by(97) {
            assert!((t[j] - (x[j] - ratio * d[j])).abs() < 1e-9 * (1.0 + t[j].abs()));
        }
    }

    #[test]
    fn second_order_ground_is_negative() {
        for k in [-1.0, 0.0, 1.0] {
            let sol = FiberSolution::solve_default(k, 1).unwrap();
            let e2 = second_order_energy(&sol, 0, 10).unwrap();
            assert!(e2.value < 0.0);
            assert!((e2.value - e2.sum_over_states).abs() <= 1e-6 * e2.value.abs());
        }
    }

    #[test]
    fn truncation_floor_enforced() {
        let sol = FiberSolution::solve_default(0.0, 2).unwrap();
        assert!(matches!(second_order_energy(&sol, 1, 5), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn narrow_box_reports_tail() {
        // a box that clips band 2 at k = 0
        let grid = TransverseGrid::new(4.0, 1600).unwrap();
        let level = FiberLevel::solve(0.0, &grid, 3).unwrap();
        assert!(matches!(level::e1(&level, 2), Err(Error::TailContribution(_))));
    }

    #[test]
    fn real_gauge_has_no_berry_term() {
        let sol = FiberSolution::solve_default(0.3, 2).unwrap();
        let g = geometric_phase_coeffs(&sol, 1, None).unwrap();
        assert_eq!(g.gamma_b_coeff, 0.0);
        assert_eq!(g.gauge_tag, REAL_GAUGE);
    }

    #[test]
    fn drift_at_origin() {
        let sol = FiberSolution::solve_default(0.0, 1).unwrap();
        let p = BoundaryProfile::bump(0.4, 1.0, 401).unwrap();
        let d = adiabatic_drift(&p, &sol, 0, 4.0).unwrap();
        let d2 = adiabatic_drift(&p, &sol, 0, 8.0).unwrap();
        for ((a, b), kappa) in d.iter().zip(&d2).zip(&p.kappa) {
            assert!((a + kappa / 4.0).abs() < 1e-7 * (1.0 + kappa.abs()));
            assert!((a - 2.0 * b).abs() <= 1e-15 * a.abs());
        }
        let flat = adiabatic_drift(&p.straight_like(), &sol, 0, 4.0).unwrap();
        assert!(flat.iter().all(|v| *v == 0.0));
        assert!(adiabatic_drift(&p, &sol, 0, 0.5).is_err());
    }

    #[test]
    fn reconvention_interpolates() {
        let ks: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let r = Reconvention::from_fn("affine", &ks, |k| 2.0 * k, |_| 2.0);
        let (l, lp) = r.at(0.1).unwrap();
        assert!((l - 0.2).abs() < 1e-12 && lp == 2.0);
        assert!(r.at(1.5).is_err());
    }
}
