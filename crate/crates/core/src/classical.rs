//! Skipping-orbit geometry and its semiclassical phase.
//!
//! Lengths are in the transverse phase-space normalisation, where the
//! orbit of energy `E` has radius `sqrt(E)`.

use crate::error::{Error, Result};
use crate::fiber::FiberSolution;
use crate::phases::{LeadingBand, Resolution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitShape {
    pub energy: f64,
    pub k: f64,
    pub radius: f64,
    pub eta: f64,
}

impl OrbitShape {
    pub fn new(energy: f64, k: f64) -> Result<Self> {
        Ok(Self {
            energy,
            k,
            radius: energy.sqrt(),
            eta: eta_from(energy, k)?,
        })
    }

    /// `2 r sin(eta)`.
    pub fn chord(&self) -> f64 {
        2.0 * self.radius * self.eta.sin()
    }

    /// `2 r eta`.
    pub fn arc(&self) -> f64 {
        2.0 * self.radius * self.eta
    }

    pub fn cap_area(&self) -> f64 {
        self.energy * (self.eta - self.eta.sin() * self.eta.cos())
    }
}

/// Incidence angle from `cos(eta) = k / sqrt(E)`.
pub fn eta_from(energy: f64, k: f64) -> Result<f64> {
    if !(energy > 0.0) || k.abs() >= energy.sqrt() {
        return Err(Error::NoCollision(format!("orbit with E = {energy}, k = {k} misses the boundary")));
    }
    Ok((k / energy.sqrt()).acos())
}

/// Area of the orbit disk beyond the chord at offset `k`.
pub fn cap_area(energy: f64, k: f64) -> Result<f64> {
    Ok(OrbitShape::new(energy, k)?.cap_area())
}

fn band_energy(n: usize, k: f64) -> Result<f64> {
    Ok(FiberSolution::solve_default(k, n + 1)?.energy(n))
}

/// `A(E_n(k), k) / 2π - n`.
pub fn bohr_sommerfeld_residual(n: usize, k: f64) -> Result<f64> {
    Ok(cap_area(band_energy(n, k)?, k)? / (2.0 * PI) - n as f64)
}

/// `(E'/(2 sqrt E), sin(eta)/eta)`: tangential over total speed, quantum
/// and classical.
pub fn velocity_ratio_check(n: usize, k: f64) -> Result<(f64, f64)> {
    let band = LeadingBand::compute(n, k, &Resolution::default_for(k, n))?;
    let eta = eta_from(band.energy, k)?;
    Ok((band.e_prime / (2.0 * band.energy.sqrt()), eta.sin() / eta))
}

const KN_TOLERANCE: f64 = 1e-10;
const SCAN_POINTS: usize = 16;

/// Momentum whose orbit meets the boundary at angle `eta`:
/// the root of `k - sqrt(E_n(k)) cos(eta)`.
pub fn solve_kn(n: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < PI) {
        return Err(Error::ConfigInvalid(format!("incidence angle {eta} outside (0, pi)")));
    }
    let c = eta.cos();
    let f = |k: f64| -> Result<f64> { Ok(k - band_energy(n, k)?.sqrt() * c) };
    let f0 = f(0.0)?;
    if f0.abs() <= KN_TOLERANCE {
        return Ok(0.0);
    }
    let mut half_width = 2.0 * ((4 * n + 3) as f64).sqrt();
    for _ in 0..3 {
        // the root lies on the side opposite to the sign of f(0)
        let (a, b) = if f0 < 0.0 { (0.0, half_width) } else { (-half_width, 0.0) };
        let step = (b - a) / SCAN_POINTS as f64;
        let mut lo = (if f0 < 0.0 { a } else { b }, f0);
        for i in 1..=SCAN_POINTS {
            let k = if f0 < 0.0 { a + i as f64 * step } else { b - i as f64 * step };
            let v = f(k)?;
            if v.signum() != lo.1.signum() {
                return refine(&f, lo, (k, v));
            }
            lo = (k, v);
        }
        half_width *= 2.0;
    }
    Err(Error::BracketFailure(format!("no root of k - sqrt(E_{n}) cos({eta}) within |k| < {}", half_width / 2.0)))
}

/// Illinois regula falsi on a sign-changing bracket.
fn refine<F: Fn(f64) -> Result<f64>>(f: &F, mut a: (f64, f64), mut b: (f64, f64)) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..200 {
        let k = (a.0 * b.1 - b.0 * a.1) / (b.1 - a.1);
        let v = f(k)?;
        if v.abs() <= KN_TOLERANCE {
            return Ok(k);
        }
        if v.signum() == b.1.signum() {
            b = (k, v);
            if side == 1 {
                a.1 *= 0.5;
            }
            side = 1;
        } else {
            a = (k, v);
            if side == -1 {
                b.1 *= 0.5;
            }
            side = -1;
        }
        if (b.0 - a.0).abs() < 1e-15 * (1.0 + k.abs()) {
            return Ok(k);
        }
    }
    Err(Error::ConvergenceFailure("incidence-angle root did not settle".into()))
}

/// First-order changes of one hop when the boundary has curvature `kappa`,
/// for an arc of radius `r` leaving at angle `eta`. Positive curvature bends
/// the boundary towards the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopDeltas {
    pub d_span: f64,
    pub d_eta: f64,
    pub d_length: f64,
    pub d_area: f64,
    /// Change of `r L - A`, the reduced action per `β²`.
    pub d_action: f64,
}

pub const MAX_CURVATURE_RADIUS: f64 = 0.1;

pub fn hop_deltas(r: f64, eta: f64, kappa: f64) -> Result<HopDeltas> {
    if (kappa * r).abs() > MAX_CURVATURE_RADIUS {
        return Err(Error::CurvatureTooLarge(format!("|kappa r| = {} above {MAX_CURVATURE_RADIUS}", (kappa * r).abs())));
    }
    let s = eta.sin();
    let d_length = -2.0 * kappa * r * r * s;
    let d_area = -4.0 / 3.0 * kappa * r.powi(3) * s.powi(3);
    Ok(HopDeltas {
        d_span: -kappa * r * r * (2.0 * eta).sin(),
        d_eta: 0.0,
        d_length,
        d_area,
        d_action: r * d_length - d_area,
    })
}

/// One hop computed without linearisation: the orbit circle of radius `r`
/// leaves the boundary at the origin at angle `eta`, and the boundary is the
/// circle of curvature `kappa` tangent to the flat wall there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactHop {
    /// Boundary arc length between the two collisions.
    pub span: f64,
    /// Angle between orbit and boundary at the second collision.
    pub eta_out: f64,
    pub length: f64,
    /// Area between the orbit arc and the boundary arc.
    pub area: f64,
}

pub fn exact_hop(r: f64, eta: f64, kappa: f64) -> ExactHop {
    let orbit = [r * eta.sin(), -r * eta.cos()];
    let land = if kappa == 0.0 {
        [2.0 * r * eta.sin(), 0.0]
    } else {
        // second intersection: mirror of the origin across the line of centres
        let centre = [0.0, 1.0 / kappa];
        let d = [centre[0] - orbit[0], centre[1] - orbit[1]];
        let len = d[0].hypot(d[1]);
        let n = [d[0] / len, d[1] / len];
        let along = orbit[0] * n[0] + orbit[1] * n[1];
        [2.0 * orbit[0] - 2.0 * along * n[0], 2.0 * orbit[1] - 2.0 * along * n[1]]
    };
    let chord = land[0].hypot(land[1]);
    let a = [-orbit[0], -orbit[1]];
    let b = [land[0] - orbit[0], land[1] - orbit[1]];
    let ccw = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    let sweep = (-ccw).rem_euclid(2.0 * PI);
    let cap = 0.5 * r * r * (sweep - sweep.sin());
    let (span, segment, inward) = if kappa == 0.0 {
        (chord, 0.0, [0.0, 1.0])
    } else {
        let radius = 1.0 / kappa.abs();
        let opening = 2.0 * (0.5 * chord / radius).min(1.0).asin();
        let inward = [-land[0] * kappa, (1.0 / kappa - land[1]) * kappa];
        (radius * opening, 0.5 * radius * radius * (opening - opening.sin()), inward)
    };
    let cos_out = (b[0] * inward[0] + b[1] * inward[1]) / r;
    ExactHop {
        span,
        eta_out: cos_out.clamp(-1.0, 1.0).acos(),
        length: r * sweep,
        // the short boundary arc sags below the chord when kappa > 0
        area: cap + kappa.signum() * segment,
    }
}

/// Exact changes of one hop relative to the flat wall.
pub fn exact_deltas(r: f64, eta: f64, kappa: f64) -> HopDeltas {
    let flat = exact_hop(r, eta, 0.0);
    let bent = exact_hop(r, eta, kappa);
    let d_length = bent.length - flat.length;
    let d_area = bent.area - flat.area;
    HopDeltas {
        d_span: bent.span - flat.span,
        d_eta: bent.eta_out - flat.eta_out,
        d_length,
        d_area,
        d_action: r * d_length - d_area,
    }
}

/// `-(1/3) θ E sin²(eta)`.
pub fn semiclassical_phase_at(energy: f64, eta: f64, theta: f64) -> f64 {
    -theta * energy * eta.sin().powi(2) / 3.0
}

pub fn semiclassical_phase(n: usize, eta: f64, theta: f64) -> Result<f64> {
    let k = solve_kn(n, eta)?;
    Ok(semiclassical_phase_at(band_energy(n, k)?, eta, theta))
}

/// Large-`n` limit of the first-order energy, `(2/3) E^{3/2} sin³(eta)/eta`.
pub fn e1_semiclassical(energy: f64, eta: f64) -> f64 {
    2.0 / 3.0 * energy.powf(1.5) * eta.sin().powi(3) / eta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub n: usize,
    pub eta: f64,
    pub k_n: f64,
    pub energy: f64,
    pub phi_semiclassical: f64,
    pub phi_quantum: f64,
    pub rel_gap: f64,
    /// First-order energy and its classical limit, for the same orbit.
    pub e1: f64,
    pub e1_classical: f64,
}

pub fn classical_row(n: usize, eta: f64, theta: f64) -> Result<ClassicalRow> {
    let k_n = solve_kn(n, eta)?;
    let band = LeadingBand::compute(n, k_n, &Resolution::default_for(k_n, n))?;
    let phi_semiclassical = semiclassical_phase_at(band.energy, eta, theta);
    let phi_quantum = -band.ratio() * theta;
    Ok(ClassicalRow {
        n,
        eta,
        k_n,
        energy: band.energy,
        phi_semiclassical,
        phi_quantum,
        rel_gap: ((phi_semiclassical - phi_quantum) / phi_quantum).abs(),
        e1: band.e1,
        e1_classical: e1_semiclassical(band.energy, eta),
    })
}

pub fn classical_table(bands: &[usize], etas: &[f64], theta: f64) -> Result<Vec<ClassicalRow>> {
    let jobs: Vec<(usize, f64)> = bands
        .iter()
        .flat_map(|n| etas.iter().map(move |e| (*n, *e)))
        .collect();
    jobs.par_iter().map(|(n, e)| classical_row(*n, *e, theta)).collect()
}

pub fn write_classical_csv<W: Write>(out: &mut W, rows: &[ClassicalRow]) -> std::io::Result<()> {
    writeln!(out, "n,eta,k_n,E_n,phi_semiclassical,phi_quantum,rel_gap")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.eta, r.k_n, r.energy, r.phi_semiclassical, r.phi_quantum, r.rel_gap
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_hop_matches_first_order() {
        let r = 2.0;
        for eta in [PI / 4.0, PI / 2.0, 2.0 * PI / 3.0] {
            for kappa in [5e-4, -5e-4] {
                let approx = hop_deltas(r, eta, kappa).unwrap();
                let exact = exact_deltas(r, eta, kappa);
                for (a, e) in [
                    (approx.d_length, exact.d_length),
                    (approx.d_area, exact.d_area),
                    (approx.d_action, exact.d_action),
                ] {
                    assert!((a - e).abs() <= 2e-3 * e.abs(), "eta {eta} kappa {kappa}: {a} vs {e}");
                }
                if eta != PI / 2.0 {
                    assert!((approx.d_span - exact.d_span).abs() <= 2e-3 * exact.d_span.abs(), "{approx:?} {exact:?}");
                }
                assert!(exact.d_eta.abs() < 1e-12);
            }
        }
        let flat = exact_hop(r, 1.0, 0.0);
        assert!((flat.length - 2.0 * r).abs() < 1e-14);
        assert!((flat.area - OrbitShape::new(r * r, r * 1f64.cos()).unwrap().cap_area()).abs() < 1e-13);
    }

    #[test]
    fn incidence_angles() {
        assert!((eta_from(4.0, 0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((eta_from(4.0, 1.0).unwrap() - PI / 3.0).abs() < 1e-14);
        assert!(eta_from(4.0, -1.999_999).unwrap() > PI - 1e-2);
        assert!(matches!(eta_from(4.0, 2.0), Err(Error::NoCollision(_))));
        assert!(matches!(eta_from(4.0, -2.5), Err(Error::NoCollision(_))));
    }

    #[test]
    fn cap_limits() {
        assert!((cap_area(3.0, 0.0).unwrap() - 1.5 * PI).abs() < 1e-14);
        assert!((cap_area(3.0, -3f64.sqrt() * (1.0 - 1e-12)).unwrap() - 3.0 * PI).abs() < 1e-4);
    }

    #[test]
    fn exact_residual_at_zero_momentum() {
        for n in [0, 1, 4] {
            let r = bohr_sommerfeld_residual(n, 0.0).unwrap();
            assert!((r - 0.75).abs() < 1e-6, "{n}: {r}");
        }
    }

    #[test]
    fn ground_velocity_ratio() {
        let (q, c) = velocity_ratio_check(0, 0.0).unwrap();
        assert!((q - 2.0 / (3.0 * PI).sqrt()).abs() < 1e-7);
        assert!((c - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn symmetric_orbit_momentum() {
        assert_eq!(solve_kn(3, PI / 2.0).unwrap(), 0.0);
        let k = solve_kn(4, PI / 3.0).unwrap();
        let e = band_energy(4, k).unwrap();
        assert!((k - e.sqrt() * 0.5).abs() <= 1e-10);
        assert!(solve_kn(4, 0.0).is_err());
    }

    #[test]
    fn hop_deltas_flat_and_symmetric() {
        let d = hop_deltas(2.0, 0.9, 0.0).unwrap();
        assert_eq!([d.d_span, d.d_eta, d.d_length, d.d_area, d.d_action], [0.0; 5]);
        let d = hop_deltas(2.0, PI / 2.0, 0.01).unwrap();
        assert!(d.d_span.abs() < 1e-17 && (d.d_length + 0.08).abs() < 1e-15);
        assert!(matches!(hop_deltas(2.0, 1.0, 0.06), Err(Error::CurvatureTooLarge(_))));
    }

    #[test]
    fn ground_semiclassical_anchor() {
        let p = semiclassical_phase(0, PI / 2.0, 0.4).unwrap();
        assert!((p + 0.4).abs() < 1e-7);
        assert_eq!(semiclassical_phase_at(5.0, 1.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn chord_is_area_slope(e in 1.0f64..40.0, frac in -0.95f64..0.95) {
            let k = frac * e.sqrt();
            let d = 1e-5;
            let slope = -(cap_area(e, k + d).unwrap() - cap_area(e, k - d).unwrap()) / (2.0 * d);
            let chord = OrbitShape::new(e, k).unwrap().chord();
            prop_assert!((slope - chord).abs() < 1e-8 * (1.0 + chord));
        }

        #[test]
        fn hop_deltas_linear(r in 0.5f64..5.0, eta in 0.1f64..3.0, kr in -0.05f64..0.05) {
            let a = hop_deltas(r, eta, kr / r).unwrap();
            let b = hop_deltas(r, eta, 2.0 * kr / r).unwrap();
            prop_assert_eq!(2.0 * a.d_span, b.d_span);
            prop_assert_eq!(2.0 * a.d_length, b.d_length);
            prop_assert_eq!(2.0 * a.d_area, b.d_area);
            prop_assert_eq!(2.0 * a.d_action, b.d_action);
        }
    }
}
