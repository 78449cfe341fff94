//! Half-line fiber problem `-d²/du² + (k+u)²` with a Dirichlet wall at
//! `u = 0`, discretized by central differences and extrapolated once in
//! the grid spacing.

use crate::error::{Error, Result};
use crate::tridiag::{SymTridiag, TridiagLu};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use std::io::Write;

/// Uniform grid on `[0, u_max]`. Only the interior nodes `u_j = j*h`,
/// `j = 1..n_points-1`, carry unknowns; both ends hold an implicit zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    u_max: f64,
    n_points: usize,
}

impl TransverseGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(u_max: f64, n_points: usize) -> Result<Self> {
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::GridTooSmall(format!("u_max must be positive, got {u_max}")));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::GridTooSmall(format!(
                "need at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { u_max, n_points })
    }

    /// Width needed to hold `n_max` bands at momentum `k`.
    pub fn required_width(k: f64, n_max: usize) -> f64 {
        k.abs() + 3.0 * (2.0 * n_max as f64 + 9.0).sqrt()
    }

    /// Default resolution: 400 points per unit length.
    pub fn default_for(k: f64, n_max: usize) -> Self {
        let u_max = Self::required_width(k, n_max);
        Self {
            u_max,
            n_points: (400.0 * u_max).ceil() as usize,
        }
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.u_max / self.n_points as f64
    }

    /// Number of unknowns.
    pub fn interior_len(&self) -> usize {
        self.n_points - 1
    }

    /// Coordinate of the unknown stored at `index` (zero-based).
    pub fn node(&self, index: usize) -> f64 {
        (index + 1) as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.interior_len()).map(|i| self.node(i)).collect()
    }

    /// Same interval, half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            u_max: self.u_max,
            n_points: 2 * self.n_points,
        }
    }

    /// Discrete inner product `h * sum(a_j b_j)`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.spacing() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// First index of the outer 10% of the interval.
    pub fn tail_start(&self) -> usize {
        ((0.9 * self.n_points as f64).ceil() as usize).saturating_sub(1)
    }
}

/// Finite-difference matrix of the fiber operator at momentum `k`.
pub fn fiber_matrix(k: f64, grid: &TransverseGrid) -> SymTridiag {
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let diag = grid
        .nodes()
        .into_iter()
        .map(|u| 2.0 * inv_h2 + (k + u) * (k + u))
        .collect();
    SymTridiag::new(diag, vec![-inv_h2; grid.interior_len() - 1])
}

/// Energy of `psi` from the gradient form of the quadratic form, which
/// avoids the cancellation between the large diagonal and off-diagonal.
pub(crate) fn rayleigh_quotient(potential: &[f64], h: f64, psi: &[f64]) -> f64 {
    let n = psi.len();
    let mut kinetic = psi[0] * psi[0] + psi[n - 1] * psi[n - 1];
    for j in 0..n - 1 {
        let d = psi[j + 1] - psi[j];
        kinetic += d * d;
    }
    let pot: f64 = potential.iter().zip(psi).map(|(v, p)| v * p * p).sum();
    let norm: f64 = psi.iter().map(|p| p * p).sum();
    (kinetic / (h * h) + pot) / norm
}

/// Three-term recursion of the discrete eigen-equation, run forward from
/// a zero at `start - 1`. Values are stored as `mantissa * exp(log_scale)`.
pub(crate) struct Shot {
    start: i64,
    mantissa: Vec<f64>,
    log_scale: Vec<f64>,
}

impl Shot {
    pub(crate) fn run(k: f64, h: f64, energy: f64, start: i64, last: i64) -> Self {
        let len = (last - start + 1).max(1) as usize;
        let mut mantissa = Vec::with_capacity(len);
        let mut log_scale = Vec::with_capacity(len);
        let mut prev = 0.0;
        let mut cur = 1.0;
        let mut scale = 0.0;
        for i in 0..len {
            mantissa.push(cur);
            log_scale.push(scale);
            let u = (start + i as i64) as f64 * h;
            let next = (2.0 + h * h * ((k + u) * (k + u) - energy)) * cur - prev;
            prev = cur;
            cur = next;
            let big = prev.abs().max(cur.abs());
            if big > 1e100 {
                prev /= big;
                cur /= big;
                scale += big.ln();
            }
        }
        Self {
            start,
            mantissa,
            log_scale,
        }
    }

    fn entry(&self, node: i64) -> (f64, f64) {
        let i = (node - self.start) as usize;
        (self.mantissa[i], self.log_scale[i])
    }

    /// `r(a) / r(b)` as (sign, ln|ratio|).
    pub(crate) fn ratio(&self, a: i64, b: i64) -> (f64, f64) {
        let (ma, sa) = self.entry(a);
        let (mb, sb) = self.entry(b);
        let sign = (ma * mb).signum();
        (sign, ma.abs().ln() - mb.abs().ln() + sa - sb)
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
        .0
}

/// Eigenpairs of the discrete fiber operator on one grid.
#[derive(Debug, Clone)]
pub struct FiberLevel {
    k: f64,
    grid: TransverseGrid,
    potential: Vec<f64>,
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl FiberLevel {
    /// Lowest `count` eigenpairs, normalized to `h*sum(psi²) = 1` and
    /// oriented so the first interior sample is positive.
    pub fn solve(k: f64, grid: &TransverseGrid, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::ConvergenceFailure("no bands requested".into()));
        }
        if count >= grid.interior_len() {
            return Err(Error::GridTooSmall(format!(
                "{count} bands requested on {} unknowns",
                grid.interior_len()
            )));
        }
        let matrix = fiber_matrix(k, grid);
        let h = grid.spacing();
        let potential: Vec<f64> = grid.nodes().iter().map(|u| (k + u) * (k + u)).collect();
        let mut energies = Vec::with_capacity(count);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for band in 0..count {
            let shift = matrix.eigenvalue(band);
            let mut psi = matrix.inverse_iteration(shift, 3);
            for prev in &vectors {
                let c = grid.dot(prev, &psi);
                psi.iter_mut().zip(prev).for_each(|(p, q)| *p -= c * q);
            }
            let norm = grid.norm(&psi);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::ConvergenceFailure(format!("band {band} at k={k}: degenerate vector")));
            }
            psi.iter_mut().for_each(|p| *p /= norm);
            let energy = rayleigh_quotient(&potential, h, &psi);
            if (energy - shift).abs() > 1e-6 * (1.0 + shift.abs()) {
                return Err(Error::ConvergenceFailure(format!(
                    "band {band} at k={k}: refined energy {energy} drifted from {shift}"
                )));
            }
            fix_orientation(k, h, energy, &mut psi);
            energies.push(energy);
            vectors.push(psi);
        }
        for w in energies.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::ConvergenceFailure(format!("spectrum not simple at k={k}")));
            }
        }
        Ok(Self {
            k,
            grid: *grid,
            potential,
            energies,
            vectors,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn band_count(&self) -> usize {
        self.energies.len()
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn psi(&self, n: usize) -> &[f64] {
        &self.vectors[n]
    }

    /// Values of `(k+u)²` at the unknowns.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn matrix(&self) -> SymTridiag {
        fiber_matrix(self.k, &self.grid)
    }

    /// Exact derivative of the discrete eigenvalue: `2 <psi, (k+u) psi>`.
    pub fn group_velocity(&self, n: usize) -> f64 {
        let psi = &self.vectors[n];
        let h = self.grid.spacing();
        2.0 * h
            * psi
                .iter()
                .enumerate()
                .map(|(j, p)| (self.k + self.grid.node(j)) * p * p)
                .sum::<f64>()
    }

    /// `(psi_1 / h)²`, the squared slope at the wall.
    pub fn wall_flux(&self, n: usize) -> f64 {
        let slope = self.vectors[n][0] / self.grid.spacing();
        slope * slope
    }

    /// Solves `(H - E_n) x = rhs` for `x` orthogonal to band `n`.
    ///
    /// The component of `rhs` along band `n` is removed first. The system is
    /// made regular by pinning `x` to zero at the peak of the eigenvector and
    /// dropping that row, which leaves two independent Dirichlet blocks.
    pub fn solve_reduced(&self, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        let len = self.grid.interior_len();
        assert_eq!(rhs.len(), len);
        let psi = &self.vectors[n];
        let energy = self.energies[n];
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let c = self.grid.dot(psi, rhs);
        let b: Vec<f64> = rhs.iter().zip(psi).map(|(r, p)| r - c * p).collect();
        let pin = argmax_abs(psi);
        let mut x = vec![0.0; len];
        let scale = 2.0 * inv_h2 + self.potential.iter().cloned().fold(0.0, f64::max);
        for (lo, hi) in [(0, pin), (pin + 1, len)] {
            if hi <= lo {
                continue;
            }
            let m = hi - lo;
            let diag: Vec<f64> = (lo..hi).map(|j| 2.0 * inv_h2 + self.potential[j] - energy).collect();
            let off = vec![-inv_h2; m - 1];
            let lu = TridiagLu::factor(&off, &diag, &off).ok_or_else(|| {
                Error::SingularSystem(format!("zero pivot in reduced block at k={}", self.k))
            })?;
            if lu.min_pivot() < 1e-13 * scale {
                return Err(Error::SingularSystem(format!(
                    "pivot {} below tolerance at k={}, band {n}",
                    lu.min_pivot(),
                    self.k
                )));
            }
            let block = lu.solve(&b[lo..hi]);
            x[lo..hi].copy_from_slice(&block);
        }
        let c = self.grid.dot(psi, &x);
        x.iter_mut().zip(psi).for_each(|(xi, p)| *xi -= c * p);
        Ok(x)
    }

    /// `(H - E_n) x` on this grid.
    pub fn apply_shifted(&self, n: usize, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix().matvec(x);
        let e = self.energies[n];
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi -= e * xi);
        y
    }

    /// Derivative of band `n` with respect to `k` in the real gauge.
    pub fn dpsi_dk(&self, n: usize) -> Result<Vec<f64>> {
        let psi = &self.vectors[n];
        let ep = self.group_velocity(n);
        let rhs: Vec<f64> = psi
            .iter()
            .enumerate()
            .map(|(j, p)| (ep - 2.0 * (self.k + self.grid.node(j))) * p)
            .collect();
        self.solve_reduced(n, &rhs)
    }

    /// `E_n - (2n+1)` from a discrete Green identity against the
    /// full-line oscillator on the same lattice.
    /// `None` when the band is not yet pinned to the bulk level.
    fn landau_gap(&self, n: usize) -> Option<f64> {
        let h = self.grid.spacing();
        let k = self.k;
        let last = self.grid.interior_len() as i64;
        let center_left = ((-2.0 * k - self.grid.u_max()) / h).floor() as i64;
        let first = center_left.min(-1);
        let size = (last - first + 1) as usize;
        let diag: Vec<f64> = (first..=last)
            .map(|j| {
                let u = j as f64 * h;
                2.0 / (h * h) + (k + u) * (k + u)
            })
            .collect();
        let full = SymTridiag::new(diag, vec![-1.0 / (h * h); size - 1]);
        let mu_shift = full.eigenvalue(n);
        let mut phi = full.inverse_iteration(mu_shift, 3);
        let norm = (h * phi.iter().map(|v| v * v).sum::<f64>()).sqrt();
        phi.iter_mut().for_each(|v| *v /= norm);
        let psi = &self.vectors[n];
        // psi index i sits at node i+1; phi index i sits at node first+i
        let offset = (1 - first) as usize;
        let mut overlap = h * psi.iter().enumerate().map(|(i, p)| p * phi[i + offset]).sum::<f64>();
        if overlap < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
            overlap = -overlap;
        }
        if overlap < 0.9 {
            return None;
        }
        let mu = rayleigh_quotient(
            &(first..=last).map(|j| (k + j as f64 * h).powi(2)).collect::<Vec<_>>(),
            h,
            &phi,
        );
        let peak = argmax_abs(psi);
        let peak_node = peak as i64 + 1;
        let psi_shot = Shot::run(k, h, self.energies[n], 1, peak_node);
        let (s_psi, ln_psi) = psi_shot.ratio(1, peak_node);
        let phi_shot = Shot::run(k, h, mu, first, peak_node);
        let (s_phi, ln_phi) = phi_shot.ratio(0, peak_node);
        let phi_peak = phi[(peak_node - first) as usize];
        let psi_peak = psi[peak];
        let sign = s_psi * s_phi * (phi_peak * psi_peak).signum();
        let ln_mag = ln_psi + ln_phi + phi_peak.abs().ln() + psi_peak.abs().ln();
        Some(sign * ln_mag.exp() / (h * overlap))
    }
}

/// Replaces the deep wall-side tail by the forward recursion and flips the
/// vector so that the first interior sample is positive.
fn fix_orientation(k: f64, h: f64, energy: f64, psi: &mut [f64]) {
    let peak = argmax_abs(psi);
    let shot = Shot::run(k, h, energy, 1, peak as i64 + 1);
    let (sign, _) = shot.ratio(1, peak as i64 + 1);
    if sign * psi[peak] < 0.0 {
        psi.iter_mut().for_each(|p| *p = -*p);
    }
    let threshold = 1e-8 * psi[peak].abs();
    let target = psi[peak];
    for j in 0..peak {
        if psi[j].abs() >= threshold {
            break;
        }
        let (s, ln) = shot.ratio(j as i64 + 1, peak as i64 + 1);
        psi[j] = s * ln.exp() * target;
    }
}

/// Eigenpairs at one momentum on a grid and its refinement, with the
/// energies extrapolated to fourth order in the spacing.
#[derive(Debug, Clone)]
pub struct FiberSolution {
    k: f64,
    coarse: FiberLevel,
    fine: FiberLevel,
    energies: Vec<f64>,
}

/// Richardson combination for a second-order quantity.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

impl FiberSolution {
    pub fn solve(k: f64, grid: &TransverseGrid, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::ConfigInvalid("n_max must be at least 1".into()));
        }
        let need = TransverseGrid::required_width(k, n_max);
        if grid.u_max() < need * (1.0 - 1e-12) {
            return Err(Error::GridTooSmall(format!(
                "u_max = {} but k = {k}, n_max = {n_max} needs {need}",
                grid.u_max()
            )));
        }
        Self::solve_unchecked(k, grid, n_max)
    }

    /// Solve on the default grid for `(k, n_max)`.
    pub fn solve_default(k: f64, n_max: usize) -> Result<Self> {
        Self::solve(k, &TransverseGrid::default_for(k, n_max), n_max)
    }

    pub(crate) fn solve_unchecked(k: f64, grid: &TransverseGrid, n_max: usize) -> Result<Self> {
        let coarse = FiberLevel::solve(k, grid, n_max)?;
        let fine = FiberLevel::solve(k, &grid.refined(), n_max)?;
        let energies = coarse
            .energies()
            .iter()
            .zip(fine.energies())
            .map(|(c, f)| richardson(*c, *f))
            .collect();
        Ok(Self {
            k,
            coarse,
            fine,
            energies,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &TransverseGrid {
        self.coarse.grid()
    }

    pub fn n_max(&self) -> usize {
        self.energies.len()
    }

    /// Extrapolated energy of band `n`.
    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvector of band `n` on the requested grid.
    pub fn psi(&self, n: usize) -> &[f64] {
        self.coarse.psi(n)
    }

    pub fn coarse(&self) -> &FiberLevel {
        &self.coarse
    }

    pub fn fine(&self) -> &FiberLevel {
        &self.fine
    }

    pub fn levels(&self) -> [&FiberLevel; 2] {
        [&self.coarse, &self.fine]
    }

    /// Applies `f` to both grids and extrapolates.
    pub fn extrapolate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&FiberLevel) -> Result<f64>,
    {
        Ok(richardson(f(&self.coarse)?, f(&self.fine)?))
    }

    /// Gap to the bulk Landau level, `E_n(k) - (2n+1)`.
    ///
    /// Deep in the pinned regime the gap is far below the resolution of
    /// `E_n` itself and is obtained from a wall-flux identity instead.
    pub fn landau_gap(&self, n: usize) -> f64 {
        match (self.coarse.landau_gap(n), self.fine.landau_gap(n)) {
            (Some(c), Some(f)) => richardson(c, f),
            _ => self.energies[n] - (2 * n + 1) as f64,
        }
    }

    /// JSON dump with grid metadata and 17 significant digits per sample.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Band {
            n: usize,
            energy: Box<RawValue>,
            psi: Vec<Box<RawValue>>,
        }
        #[derive(Serialize)]
        struct Dump {
            k: Box<RawValue>,
            u_max: Box<RawValue>,
            n_points: usize,
            spacing: Box<RawValue>,
            bands: Vec<Band>,
        }
        let dump = Dump {
            k: sci17(self.k),
            u_max: sci17(self.grid().u_max()),
            n_points: self.grid().n_points(),
            spacing: sci17(self.grid().spacing()),
            bands: (0..self.n_max())
                .map(|n| Band {
                    n,
                    energy: sci17(self.energy(n)),
                    psi: self.psi(n).iter().map(|v| sci17(*v)).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&dump).expect("finite samples serialize")
    }
}

/// Decimal literal with 17 significant digits.
pub(crate) fn sci17(x: f64) -> Box<RawValue> {
    assert!(x.is_finite(), "non-finite value in output");
    RawValue::from_string(format!("{x:.16e}")).expect("valid JSON number")
}

/// `dE_n/dk` by Hellmann-Feynman on both grids, extrapolated.
///
/// Deep in the pinned regime the quadrature cancels to round-off, and the
/// wall flux `(dpsi/du at 0)²`, which is the same derivative for the
/// continuum problem, is used instead.
pub fn group_velocity(sol: &FiberSolution, n: usize) -> f64 {
    let quadrature = richardson(sol.coarse.group_velocity(n), sol.fine.group_velocity(n));
    if quadrature > PINNED_VELOCITY {
        return quadrature;
    }
    richardson(sol.coarse.wall_flux(n), sol.fine.wall_flux(n))
}

/// Below this the Hellmann-Feynman sum has lost most of its digits.
const PINNED_VELOCITY: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandDerivatives {
    pub k: f64,
    pub n: usize,
    pub e_prime: f64,
    /// Derivative of the band vector, orthogonal to it.
    pub dpsi_dk: Vec<f64>,
}

pub fn dpsi_dk(sol: &FiberSolution, n: usize) -> Result<BandDerivatives> {
    Ok(BandDerivatives {
        k: sol.k,
        n,
        e_prime: group_velocity(sol, n),
        dpsi_dk: sol.coarse.dpsi_dk(n)?,
    })
}

/// `h * sum(exp(2 lambda u) psi²)` for band `n`.
pub fn decay_norm(sol: &FiberSolution, n: usize, lambda: f64) -> f64 {
    let grid = sol.grid();
    grid.spacing()
        * sol
            .psi(n)
            .iter()
            .enumerate()
            .map(|(j, p)| (2.0 * lambda * grid.node(j)).exp() * p * p)
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub n: usize,
    pub k: f64,
    pub energy: f64,
    pub e_prime: f64,
}

pub fn dispersion_rows(sol: &FiberSolution) -> Vec<DispersionRow> {
    (0..sol.n_max())
        .map(|n| DispersionRow {
            n,
            k: sol.k,
            energy: sol.energy(n),
            e_prime: group_velocity(sol, n),
        })
        .collect()
}

pub fn write_dispersion_csv<W: Write>(out: &mut W, rows: &[DispersionRow]) -> std::io::Result<()> {
    writeln!(out, "n,k,E,E_prime")?;
    for r in rows {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.n, r.k, r.energy, r.e_prime)?;
    }
    Ok(())
}

/// Smallest `k` with `E_n(k) >= energy`, by bisection on the monotone
/// dispersion. The bracket must straddle the target.
pub fn band_preimage(n: usize, energy: f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |k: f64| -> Result<f64> { Ok(FiberSolution::solve_default(k, n + 1)?.energy(n) - energy) };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(Error::BracketFailure(format!(
            "E_{n} - {energy} has the same sign at k = {lo} and k = {hi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if (f(mid)? < 0.0) == (fa < 0.0) {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matrix_entries() {
        let grid = TransverseGrid::new(12.0, 4800).unwrap();
        let h = grid.spacing();
        let m = fiber_matrix(0.0, &grid);
        for j in [0, 10, 4000] {
            let u = grid.node(j);
            assert_eq!(m.diag[j], 2.0 / (h * h) + u * u);
        }
        assert!(m.off.iter().all(|o| *o == -1.0 / (h * h)));
        // node with u = 2 at k = 1
        let grid = TransverseGrid::new(4.0, 400).unwrap();
        let j = 199;
        assert_eq!(grid.node(j), 2.0);
        let m = fiber_matrix(1.0, &grid);
        let h = grid.spacing();
        assert!((m.diag[j] - 2.0 / (h * h) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(TransverseGrid::new(0.0, 100), Err(Error::GridTooSmall(_))));
        assert!(matches!(TransverseGrid::new(5.0, 15), Err(Error::GridTooSmall(_))));
        let small = TransverseGrid::new(5.0, 2000).unwrap();
        assert!(matches!(FiberSolution::solve(0.0, &small, 1), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn odd_oscillator_levels() {
        let sol = FiberSolution::solve_default(0.0, 3).unwrap();
        for n in 0..3 {
            assert!((sol.energy(n) - (4 * n + 3) as f64).abs() < 1e-7, "{}", sol.energy(n));
        }
    }

    #[test]
    fn ground_state_moments() {
        let sol = FiberSolution::solve_default(0.0, 1).unwrap();
        let v = group_velocity(&sol, 0);
        assert!((v - 4.0 / PI.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn orientation_and_orthonormality() {
        let sol = FiberSolution::solve_default(-1.5, 4).unwrap();
        let grid = sol.grid();
        for a in 0..4 {
            assert!(sol.psi(a)[0] > 0.0);
            for b in 0..4 {
                let g = grid.dot(sol.psi(a), sol.psi(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "gram[{a}][{b}] = {g}");
            }
        }
    }

    #[test]
    fn deep_tail_sign_is_positive() {
        let sol = FiberSolution::solve_default(-8.0, 2).unwrap();
        for n in 0..2 {
            let psi = sol.psi(n);
            assert!(psi[0] > 0.0);
            // slope test from the wall
            assert!(psi[1] > psi[0]);
        }
    }

    #[test]
    fn pinned_ground_band() {
        let sol = FiberSolution::solve_default(-8.0, 1).unwrap();
        assert!((sol.energy(0) - 1.0).abs() < 1e-4);
        let gap = sol.landau_gap(0);
        assert!(gap > 0.0 && gap < 1e-4, "{gap}");
    }

    #[test]
    fn gap_matches_direct_difference_when_resolvable() {
        // at k = -3 the gap is well above round-off
        let sol = FiberSolution::solve_default(-3.0, 2).unwrap();
        for n in 0..2 {
            let direct = sol.energy(n) - (2 * n + 1) as f64;
            let flux = sol.landau_gap(n);
            assert!((direct - flux).abs() < 1e-8 * (1.0 + direct.abs()), "{n}: {direct} vs {flux}");
        }
    }

    #[test]
    fn reduced_solve_residual_and_gauge() {
        let sol = FiberSolution::solve_default(0.7, 3).unwrap();
        let level = sol.coarse();
        let grid = level.grid();
        for n in 0..3 {
            let x = level.dpsi_dk(n).unwrap();
            let ep = level.group_velocity(n);
            let psi = level.psi(n);
            let rhs: Vec<f64> = psi
                .iter()
                .enumerate()
                .map(|(j, p)| (ep - 2.0 * (0.7 + grid.node(j))) * p)
                .collect();
            let lhs = level.apply_shifted(n, &x);
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(grid.norm(&diff) <= 1e-8, "{}", grid.norm(&diff));
            assert!(grid.dot(psi, &x).abs() < 1e-10);
        }
    }

    #[test]
    fn json_dump_has_seventeen_digits() {
        let grid = TransverseGrid::new(TransverseGrid::required_width(0.0, 1), 64).unwrap();
        let sol = FiberSolution::solve(0.0, &grid, 1).unwrap();
        let text = sol.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_points"], 64);
        assert_eq!(v["bands"][0]["psi"].as_array().unwrap().len(), 63);
        assert!(text.contains("e0") || text.contains("e-"));
        let e = v["bands"][0]["energy"].as_f64().unwrap();
        assert_eq!(e, sol.energy(0));
    }

    #[test]
    fn dispersion_csv_header() {
        let sol = FiberSolution::solve_default(0.0, 2).unwrap();
        let mut buf = Vec::new();
        write_dispersion_csv(&mut buf, &dispersion_rows(&sol)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,k,E,E_prime"));
        assert_eq!(lines.count(), 2);
    }
}
