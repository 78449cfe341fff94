//! Scattering phases of an edge band crossing a bend: the leading phase,
//! its profile along the boundary, the second-order correction and the
//! WKB reconstruction that ties them together.

use crate::error::Result;
use crate::fiber::{self, richardson, FiberLevel, FiberSolution, TransverseGrid};
use crate::perturbation::{self, level, weighted_element};
use crate::profile::BoundaryProfile;
use crate::symbolic::{symbols, Poly, KAPPA_DERIVS};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Step of the central differences in `k`.
pub const MOMENTUM_STEP: f64 = 1e-4;

/// Where band quantities are evaluated: extrapolated from a grid and its
/// refinement, or on one grid as it stands (to mirror a discretised strip).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "grid", rename_all = "snake_case")]
pub enum Resolution {
    Extrapolated(TransverseGrid),
    Single(TransverseGrid),
}

impl Resolution {
    /// Extrapolated, on a grid wide enough for the momentum stencil.
    pub fn default_for(k: f64, n: usize) -> Self {
        Self::Extrapolated(TransverseGrid::default_for(k.abs() + 2.0 * MOMENTUM_STEP, n + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Left,
    Weyl,
}

enum Sample {
    Pair(FiberSolution),
    One(FiberLevel),
}

impl Sample {
    fn at(k: f64, n: usize, res: &Resolution) -> Result<Self> {
        Ok(match res {
            Resolution::Extrapolated(grid) => Sample::Pair(FiberSolution::solve(k, grid, n + 1)?),
            Resolution::Single(grid) => Sample::One(FiberLevel::solve(k, grid, n + 1)?),
        })
    }

    fn combine<F: Fn(&FiberLevel) -> Result<f64>>(&self, f: F) -> Result<f64> {
        match self {
            Sample::Pair(sol) => sol.extrapolate(f),
            Sample::One(level) => f(level),
        }
    }

    fn energy(&self, n: usize) -> f64 {
        match self {
            Sample::Pair(sol) => sol.energy(n),
            Sample::One(level) => level.energy(n),
        }
    }

    fn e_prime(&self, n: usize) -> f64 {
        match self {
            Sample::Pair(sol) => fiber::group_velocity(sol, n),
            Sample::One(level) => level.group_velocity(n),
        }
    }

    fn e1(&self, n: usize) -> Result<f64> {
        self.combine(|l| level::e1(l, n))
    }

    fn e2(&self, n: usize) -> Result<f64> {
        match self {
            Sample::Pair(sol) => Ok(perturbation::second_order_energy(sol, n, n + 10)?.value),
            Sample::One(level) => level::e2_resolvent(level, n),
        }
    }

    /// `<psi_n, P(U, k) psi_n>` for an `eps`- and curvature-free polynomial.
    fn expectation(&self, n: usize, poly: &Poly) -> Result<Complex64> {
        let part = |take_im: bool| {
            self.combine(|l| {
                let w = multiplier(poly, l.k(), l.grid());
                let w: Vec<f64> = w.iter().map(|c| if take_im { c.im } else { c.re }).collect();
                if w.iter().all(|v| *v == 0.0) {
                    return Ok(0.0);
                }
                let psi = l.psi(n);
                weighted_element(l.grid(), psi, &w, psi)
            })
        };
        Ok(Complex64::new(part(false)?, part(true)?))
    }
}

/// Values of `P(U, k)` on the interior nodes.
fn multiplier(poly: &Poly, k: f64, grid: &TransverseGrid) -> Vec<Complex64> {
    (0..grid.interior_len())
        .map(|j| poly.evaluate(0.0, grid.node(j), k, &[]))
        .collect()
}

fn kappa_factor(powers: &[u8; KAPPA_DERIVS], kappa: [f64; 3]) -> f64 {
    assert!(powers[3..].iter().all(|e| *e == 0), "third curvature derivative not sampled");
    (0..3).map(|i| kappa[i].powi(powers[i] as i32)).product()
}

/// Energy, group velocity and first-order energy of one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingBand {
    pub n: usize,
    pub k: f64,
    pub energy: f64,
    pub e_prime: f64,
    pub e1: f64,
}

impl LeadingBand {
    pub fn compute(n: usize, k: f64, res: &Resolution) -> Result<Self> {
        let s = Sample::at(k, n, res)?;
        Ok(Self {
            n,
            k,
            energy: s.energy(n),
            e_prime: s.e_prime(n),
            e1: s.e1(n)?,
        })
    }

    /// `E1 / E'`, the phase per unit turning angle (up to sign).
    pub fn ratio(&self) -> f64 {
        self.e1 / self.e_prime
    }

    pub fn phi0(&self, profile: &BoundaryProfile) -> f64 {
        -self.ratio() * profile.theta
    }

    /// Phase accumulated up to each profile sample.
    pub fn phi_profile(&self, profile: &BoundaryProfile) -> Vec<f64> {
        let r = self.ratio();
        profile.cumulative(&profile.kappa).into_iter().map(|c| -r * c).collect()
    }
}

/// Expectation of one curvature sector of the second-order symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorMoment {
    pub kappa_powers: [u8; KAPPA_DERIVS],
    pub value: Complex64,
}

/// Everything the second-order phase needs at one `(n, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCoefficients {
    pub leading: LeadingBand,
    pub e_second: f64,
    pub e1_prime: f64,
    pub e2: f64,
    /// `<psi, H2 psi>` per curvature sector, left ordering.
    pub h2_moments: Vec<SectorMoment>,
}

impl BandCoefficients {
    pub fn compute(n: usize, k: f64, res: &Resolution) -> Result<Self> {
        let centre = Sample::at(k, n, res)?;
        let plus = Sample::at(k + MOMENTUM_STEP, n, res)?;
        let minus = Sample::at(k - MOMENTUM_STEP, n, res)?;
        let diff = |a: f64, b: f64| (a - b) / (2.0 * MOMENTUM_STEP);
        let mut h2_moments = Vec::new();
        for (powers, poly) in symbols().left[2].kappa_sectors() {
            h2_moments.push(SectorMoment {
                kappa_powers: powers,
                value: centre.expectation(n, &poly)?,
            });
        }
        Ok(Self {
            leading: LeadingBand {
                n,
                k,
                energy: centre.energy(n),
                e_prime: centre.e_prime(n),
                e1: centre.e1(n)?,
            },
            e_second: diff(plus.e_prime(n), minus.e_prime(n)),
            e1_prime: diff(plus.e1(n)?, minus.e1(n)?),
            e2: centre.e2(n)?,
            h2_moments,
        })
    }

    /// `E^(1;2)(s, k) = <psi, H2(s, k) psi>` from `[κ, κ', κ'']`.
    pub fn h2_expectation(&self, kappa: [f64; 3]) -> Complex64 {
        self.h2_moments
            .iter()
            .map(|m| m.value * kappa_factor(&m.kappa_powers, kappa))
            .sum()
    }

    /// Real part of the `κ²` moment, identical in left and Weyl ordering.
    pub fn m2(&self) -> f64 {
        self.h2_moments
            .iter()
            .find(|m| m.kappa_powers == [2, 0, 0, 0, 0])
            .map_or(0.0, |m| m.value.re)
    }

    pub fn phi0(&self, profile: &BoundaryProfile) -> f64 {
        self.leading.phi0(profile)
    }

    /// First-order momentum shift `-κ E1/E'` at each profile sample.
    pub fn p1(&self, profile: &BoundaryProfile) -> Vec<f64> {
        let r = self.leading.ratio();
        profile.kappa.iter().map(|k| -r * k).collect()
    }

    /// Second-order momentum shift from the eikonal equation; its integral
    /// is the phase correction.
    pub fn phi1_integrand(&self, profile: &BoundaryProfile) -> Vec<f64> {
        let ep = self.leading.e_prime;
        let p1 = self.p1(profile);
        (0..profile.s_grid.len())
            .map(|i| {
                let kappa = [profile.kappa[i], profile.kappa_dot[i], profile.kappa_ddot[i]];
                let h2 = self.h2_expectation(kappa).re + kappa[0] * kappa[0] * self.e2;
                -(h2 + 0.5 * self.e_second * p1[i] * p1[i] + kappa[0] * self.e1_prime * p1[i]) / ep
            })
            .collect()
    }

    pub fn phi1(&self, profile: &BoundaryProfile) -> f64 {
        profile.integrate(&self.phi1_integrand(profile))
    }

    /// The same correction from the closed form in `∫κ²`; the `κ'` sector
    /// integrates to zero for a compact profile.
    pub fn phi1_closed_form(&self, profile: &BoundaryProfile) -> f64 {
        let b = &self.leading;
        let (ep, e1) = (b.e_prime, b.e1);
        let k2 = profile.kappa_sq_integral();
        let ratio_sq_slope = 2.0 * (e1 / ep) * (self.e1_prime / ep - e1 * self.e_second / (ep * ep));
        -(self.m2() + self.e2) * k2 / ep + 0.5 * (ratio_sq_slope + (e1 / ep).powi(2) * self.e_second / ep) * k2
    }

    pub fn wkb(&self, profile: &BoundaryProfile, beta: f64) -> WkbProfile {
        let p1 = self.p1(profile);
        let ep = self.leading.e_prime;
        let log_amplitude = (0..p1.len())
            .map(|i| {
                let v = ep + (self.e_second * p1[i] + profile.kappa[i] * self.e1_prime) / beta;
                0.5 * (ep / v).ln()
            })
            .collect();
        WkbProfile {
            beta,
            s_grid: profile.s_grid.clone(),
            order0: profile.cumulative(&p1),
            order1: profile.cumulative(&self.phi1_integrand(profile)),
            log_amplitude,
        }
    }
}

/// `S = k s + S1/β + S2/β²` and transport amplitude `B` along the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbProfile {
    pub beta: f64,
    pub s_grid: Vec<f64>,
    /// `S1(s)`.
    pub order0: Vec<f64>,
    /// `S2(s)`.
    pub order1: Vec<f64>,
    /// `ln B(s)`.
    pub log_amplitude: Vec<f64>,
}

impl WkbProfile {
    /// `β (S - k s) - i ln B` at sample `i`.
    pub fn phase(&self, i: usize) -> Complex64 {
        Complex64::new(self.order0[i] + self.order1[i] / self.beta, -self.log_amplitude[i])
    }

    pub fn endpoint(&self) -> Complex64 {
        self.phase(self.s_grid.len() - 1)
    }
}

pub fn phi0(n: usize, k: f64, profile: &BoundaryProfile) -> Result<f64> {
    Ok(LeadingBand::compute(n, k, &Resolution::default_for(k, n))?.phi0(profile))
}

pub fn phi_profile(n: usize, k: f64, profile: &BoundaryProfile) -> Result<Vec<f64>> {
    Ok(LeadingBand::compute(n, k, &Resolution::default_for(k, n))?.phi_profile(profile))
}

pub fn phi1(n: usize, k: f64, profile: &BoundaryProfile) -> Result<f64> {
    Ok(BandCoefficients::compute(n, k, &Resolution::default_for(k, n))?.phi1(profile))
}

pub fn wkb_phase(n: usize, k: f64, profile: &BoundaryProfile, beta: f64) -> Result<WkbProfile> {
    Ok(BandCoefficients::compute(n, k, &Resolution::default_for(k, n))?.wkb(profile, beta))
}

/// One curvature sector of `H2(s, k)`: a factor in `κ, κ', κ''` times a
/// multiplication operator in `u`. The expansion has no `u`-derivative
/// part because the tangential covariant derivative contains none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolSector {
    pub kappa_powers: [u8; KAPPA_DERIVS],
    pub multiplier: Vec<Complex64>,
}

/// Second-order symbol at fixed `k`, sampled along a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Symbol {
    pub k: f64,
    pub ordering: Ordering,
    pub grid: TransverseGrid,
    pub kappa: Vec<[f64; 3]>,
    pub sectors: Vec<SymbolSector>,
}

pub fn h2_symbol(profile: &BoundaryProfile, k: f64, grid: &TransverseGrid, ordering: Ordering) -> H2Symbol {
    let set = symbols();
    let poly = match ordering {
        Ordering::Left => &set.left[2],
        Ordering::Weyl => &set.weyl[2],
    };
    H2Symbol {
        k,
        ordering,
        grid: *grid,
        kappa: (0..profile.s_grid.len())
            .map(|i| [profile.kappa[i], profile.kappa_dot[i], profile.kappa_ddot[i]])
            .collect(),
        sectors: poly
            .kappa_sectors()
            .into_iter()
            .map(|(kappa_powers, p)| SymbolSector {
                kappa_powers,
                multiplier: multiplier(&p, k, grid),
            })
            .collect(),
    }
}

impl H2Symbol {
    /// `H2(s_i, k) psi`.
    pub fn apply(&self, i: usize, psi: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for sector in &self.sectors {
            let f = kappa_factor(&sector.kappa_powers, self.kappa[i]);
            if f == 0.0 {
                continue;
            }
            for (o, (m, p)) in out.iter_mut().zip(sector.multiplier.iter().zip(psi)) {
                *o += m * (f * p);
            }
        }
        out
    }

    /// `<psi, H2(s, k) psi>` at every profile sample.
    pub fn expectation(&self, psi: &[f64]) -> Vec<Complex64> {
        let h = self.grid.spacing();
        let moments: Vec<Complex64> = self
            .sectors
            .iter()
            .map(|sec| sec.multiplier.iter().zip(psi).map(|(m, p)| m * (p * p)).sum::<Complex64>() * h)
            .collect();
        self.kappa
            .iter()
            .map(|kap| {
                self.sectors
                    .iter()
                    .zip(&moments)
                    .map(|(sec, m)| m * kappa_factor(&sec.kappa_powers, *kap))
                    .sum()
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.kappa
            .iter()
            .all(|kap| self.sectors.iter().all(|sec| kappa_factor(&sec.kappa_powers, *kap) == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub n: usize,
    pub k: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub s_grid: Vec<f64>,
    pub phi_profile: Vec<f64>,
}

pub fn phase_record(n: usize, k: f64, profile: &BoundaryProfile) -> Result<PhaseRecord> {
    let c = BandCoefficients::compute(n, k, &Resolution::default_for(k, n))?;
    Ok(PhaseRecord {
        n,
        k,
        phi0: c.phi0(profile),
        phi1: c.phi1(profile),
        s_grid: profile.s_grid.clone(),
        phi_profile: c.leading.phi_profile(profile),
    })
}

/// Records for every `(n, k)` pair, computed in parallel.
pub fn phase_table(bands: &[usize], momenta: &[f64], profile: &BoundaryProfile) -> Result<Vec<PhaseRecord>> {
    let jobs: Vec<(usize, f64)> = bands
        .iter()
        .flat_map(|n| momenta.iter().map(move |k| (*n, *k)))
        .collect();
    jobs.par_iter().map(|(n, k)| phase_record(*n, *k, profile)).collect()
}

pub fn write_phase_csv<W: Write>(out: &mut W, records: &[PhaseRecord]) -> std::io::Result<()> {
    writeln!(out, "n,k,phi0,phi1")?;
    for r in records {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.n, r.k, r.phi0, r.phi1)?;
    }
    Ok(())
}

pub fn profile_json(profile: &BoundaryProfile) -> String {
    serde_json::to_string_pretty(profile).expect("profile serialises")
}

/// Analytic `E''` on one grid: `2 + 4 <dpsi, (k+u) psi>`.
pub fn e_second_analytic(level: &FiberLevel, n: usize) -> Result<f64> {
    let grid = level.grid();
    let psi = level.psi(n);
    let dpsi = level.dpsi_dk(n)?;
    let w: Vec<f64> = (0..psi.len()).map(|j| level.k() + grid.node(j)).collect();
    Ok(2.0 + 4.0 * grid.spacing() * (0..psi.len()).map(|j| dpsi[j] * w[j] * psi[j]).sum::<f64>())
}

/// Analytic `E1'` on one grid: `<psi, dH1/dk psi> + 2 <dpsi, H1 psi>`.
pub fn e1_prime_analytic(level: &FiberLevel, n: usize) -> Result<f64> {
    let grid = level.grid();
    let psi = level.psi(n);
    let dpsi = level.dpsi_dk(n)?;
    let k = level.k();
    let h = grid.spacing();
    let mut acc = 0.0;
    for j in 0..psi.len() {
        let u = grid.node(j);
        acc += perturbation::h1_k_derivative(k, u) * psi[j] * psi[j]
            + 2.0 * dpsi[j] * perturbation::h1_multiplier(k, u) * psi[j];
    }
    Ok(h * acc)
}

/// Analytic slopes, extrapolated.
pub fn analytic_slopes(sol: &FiberSolution, n: usize) -> Result<(f64, f64)> {
    let levels = sol.levels();
    Ok((
        richardson(e_second_analytic(levels[0], n)?, e_second_analytic(levels[1], n)?),
        richardson(e1_prime_analytic(levels[0], n)?, e1_prime_analytic(levels[1], n)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::DEFAULT_SAMPLES;

    fn bump(theta: f64) -> BoundaryProfile {
        BoundaryProfile::bump(theta, 1.0, DEFAULT_SAMPLES).unwrap()
    }

    #[test]
    fn ground_band_anchor() {
        for theta in [0.1, 0.4, 1.0] {
            let p = phi0(0, 0.0, &bump(theta)).unwrap();
            assert!((p + theta).abs() < 1e-6 * theta, "{p}");
        }
        assert_eq!(phi0(0, 0.0, &bump(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn profile_endpoints_and_midpoint() {
        let profile = bump(0.4);
        let lead = LeadingBand::compute(1, 0.5, &Resolution::default_for(0.5, 1)).unwrap();
        let prof = lead.phi_profile(&profile);
        let phi = lead.phi0(&profile);
        assert_eq!(prof[0], 0.0);
        assert!((prof[prof.len() - 1] - phi).abs() < 1e-10 * phi.abs());
        assert!((prof[prof.len() / 2] - 0.5 * phi).abs() < 1e-8);
    }

    #[test]
    fn additive_and_shape_blind() {
        let lead = LeadingBand::compute(0, 0.7, &Resolution::default_for(0.7, 0)).unwrap();
        let one = bump(0.5);
        let two = BoundaryProfile::two_bump(0.5, 0.2, 1.0, DEFAULT_SAMPLES).unwrap();
        let split = lead.phi0(&bump(0.2)) + lead.phi0(&bump(0.3));
        assert!((lead.phi0(&one) - lead.phi0(&two)).abs() < 1e-10);
        assert!((split - lead.phi0(&one)).abs() < 1e-14);
        assert!(lead.phi0(&one) < 0.0);
    }

    #[test]
    fn analytic_slopes_match_differences() {
        for (n, k) in [(0, 0.0), (1, -0.5), (2, 1.0)] {
            let c = BandCoefficients::compute(n, k, &Resolution::default_for(k, n)).unwrap();
            let grid = TransverseGrid::default_for(k, n + 1);
            let sol = FiberSolution::solve(k, &grid, n + 1).unwrap();
            let (es, e1p) = analytic_slopes(&sol, n).unwrap();
            assert!((c.e_second - es).abs() < 1e-5 * es.abs(), "{} {es}", c.e_second);
            assert!((c.e1_prime - e1p).abs() < 1e-5 * e1p.abs(), "{} {e1p}", c.e1_prime);
        }
    }

    #[test]
    fn flat_boundary_has_no_correction() {
        let c = BandCoefficients::compute(0, 0.3, &Resolution::default_for(0.3, 0)).unwrap();
        let flat = bump(0.4).straight_like();
        assert_eq!(c.phi1(&flat), 0.0);
        let w = c.wkb(&flat, 8.0);
        assert!(w.phase(0) == Complex64::new(0.0, 0.0) && w.endpoint() == Complex64::new(0.0, 0.0));
        let grid = TransverseGrid::default_for(0.3, 1);
        assert!(h2_symbol(&flat, 0.3, &grid, Ordering::Left).is_zero());
    }

    #[test]
    fn stretching_halves_correction() {
        let c = BandCoefficients::compute(0, 0.5, &Resolution::default_for(0.5, 0)).unwrap();
        let p = bump(0.4);
        let q = p.stretched(2.0).unwrap();
        assert!((c.phi1(&q) - 0.5 * c.phi1(&p)).abs() < 1e-8 * c.phi1(&p).abs());
        assert!((c.phi0(&q) - c.phi0(&p)).abs() < 1e-12);
        assert!((c.phi1(&p) - c.phi1_closed_form(&p)).abs() < 1e-8 * c.phi1(&p).abs());
    }

    #[test]
    fn wkb_orders_match_phases() {
        let c = BandCoefficients::compute(0, 0.4, &Resolution::default_for(0.4, 0)).unwrap();
        let p = bump(0.4);
        let w = c.wkb(&p, 8.0);
        for (a, b) in w.order0.iter().zip(c.leading.phi_profile(&p)) {
            assert!((a - b).abs() < 1e-13);
        }
        let cum = p.cumulative(&c.phi1_integrand(&p));
        assert_eq!(w.order1, cum);
        let end = w.endpoint();
        assert!((end.re - (c.phi0(&p) + c.phi1(&p) / 8.0)).abs() < 1e-8);
        assert!(end.im.abs() < 1e-12);
    }

    #[test]
    fn symbol_expectation_matches_moments() {
        let k = 0.6;
        let res = Resolution::default_for(k, 0);
        let c = BandCoefficients::compute(0, k, &res).unwrap();
        let p = bump(0.4);
        let Resolution::Extrapolated(grid) = res else { unreachable!() };
        let level = FiberLevel::solve(k, &grid, 1).unwrap();
        let sym = h2_symbol(&p, k, &grid, Ordering::Left);
        let density = sym.expectation(level.psi(0));
        let i = p.s_grid.len() / 3;
        let kap = [p.kappa[i], p.kappa_dot[i], p.kappa_ddot[i]];
        let applied = sym.apply(i, level.psi(0));
        let direct: Complex64 = applied.iter().zip(level.psi(0)).map(|(a, b)| a * b).sum::<Complex64>() * grid.spacing();
        assert!((direct - density[i]).norm() < 1e-12);
        // coarse grid against extrapolated moments
        assert!((density[i] - c.h2_expectation(kap)).norm() < 1e-4 * (1.0 + density[i].norm()));
        let weyl = h2_symbol(&p, k, &grid, Ordering::Weyl).expectation(level.psi(0));
        assert!(weyl[i].im.abs() < 1e-14 && (weyl[i].re - density[i].re).abs() < 1e-12);
    }

    #[test]
    fn csv_and_json() {
        let p = bump(0.4);
        let recs = phase_table(&[0], &[0.0, 0.5], &p).unwrap();
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,k,phi0,phi1\n0,0.0000000000000000e0,"));
        assert_eq!(text.lines().count(), 3);
        let back: BoundaryProfile = serde_json::from_str(&profile_json(&p)).unwrap();
        assert_eq!(back, p);
    }
}
