use super::config::StripConfig;
use super::operator::StripOperator;
use super::packet::{envelope, mass_beyond, BandBasis};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

type C = Complex64;

/// Smallest fraction of the final mass that must sit past the bend.
pub const ASYMPTOTIC_MASS: f64 = 1.0 - 1e-4;
/// Modes whose packet weight falls below this are left out of the phase curve.
pub const WINDOW_WEIGHT: f64 = 1e-3;

/// Transmission through the bend, mode by mode, relative to the flat channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub beta: f64,
    pub band: usize,
    /// FFT wavenumber nearest the packet centre.
    pub k: f64,
    pub energy: f64,
    /// `arg t(k)` at the packet centre.
    pub phase: f64,
    pub modulus: f64,
    /// `(k, arg t)` over the packet, unwrapped along `k`.
    pub phase_curve: Vec<(f64, f64)>,
    pub norm_drift: f64,
    pub reflected_mass: f64,
    pub transmitted_mass: f64,
    pub band_masses: Vec<f64>,
    pub steps: usize,
    pub time: f64,
}

/// Cayley factor of one flat Crank–Nicolson step at energy `energy`.
pub fn cayley(energy: f64, shift: f64, dt: f64) -> C {
    C::from_polar(1.0, -2.0 * (0.5 * dt * (energy - shift)).atan())
}

fn wrap(phase: f64) -> f64 {
    let x = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if x == -PI {
        PI
    } else {
        x
    }
}

pub struct ExtractInput<'a> {
    pub cfg: &'a StripConfig,
    pub op: &'a StripOperator,
    pub basis: &'a BandBasis,
    pub initial: &'a [C],
    pub fin: &'a [C],
    pub steps: usize,
    pub reflected_mass: f64,
}

/// Divides the outgoing band amplitudes by those of the same packet carried
/// along a flat channel by the same number of exact flat steps.
pub fn extract(input: ExtractInput<'_>) -> Result<ScatteringRecord> {
    let ExtractInput {
        cfg,
        op,
        basis,
        initial,
        fin,
        steps,
        reflected_mass,
    } = input;
    let grid = *op.grid();
    let norm = op.norm_sq(fin);
    let beyond = mass_beyond(op, fin, cfg.beta * cfg.profile.half_support());
    if beyond < ASYMPTOTIC_MASS * norm {
        return Err(Error::NotAsymptotic(format!(
            "only {:.6} of the mass has passed the bend",
            beyond / norm
        )));
    }
    let transform = |psi: &[C]| {
        let mut hat = psi.to_vec();
        op.forward(&mut hat);
        basis.coefficients(&hat, cfg.band)
    };
    let c0 = transform(initial);
    let c1 = transform(fin);
    let mut modes: Vec<usize> = (0..grid.n_s).filter(|&m| envelope(cfg, grid.wavenumber(m)) >= WINDOW_WEIGHT).collect();
    modes.sort_by(|a, b| grid.wavenumber(*a).total_cmp(&grid.wavenumber(*b)));
    if modes.is_empty() {
        return Err(Error::ConfigInvalid("packet has no modes above the window weight".into()));
    }
    let ratio = |m: usize| {
        let e = basis.level(m).energy(cfg.band);
        c1[m] / (c0[m] * cayley(e, cfg.energy_shift, cfg.dt).powu(steps as u32))
    };
    let centre = *modes
        .iter()
        .min_by(|a, b| {
            (grid.wavenumber(**a) - cfg.k_center).abs().total_cmp(&(grid.wavenumber(**b) - cfg.k_center).abs())
        })
        .expect("non-empty window");
    let t_centre = ratio(centre);
    let phase = wrap(t_centre.arg());
    let mut curve = Vec::with_capacity(modes.len());
    let mut previous: Option<f64> = None;
    for &m in &modes {
        let raw = ratio(m).arg();
        let value = match previous {
            None => raw,
            Some(p) => p + wrap(raw - p),
        };
        previous = Some(value);
        curve.push((grid.wavenumber(m), value));
    }
    // anchor the unwrapped curve so that it passes through the centre phase
    let offset = curve
        .iter()
        .find(|(k, _)| *k == grid.wavenumber(centre))
        .map(|(_, v)| phase - v)
        .unwrap_or(0.0);
    curve.iter_mut().for_each(|p| p.1 += offset);
    Ok(ScatteringRecord {
        beta: cfg.beta,
        band: cfg.band,
        k: grid.wavenumber(centre),
        energy: basis.level(centre).energy(cfg.band),
        phase,
        modulus: t_centre.norm(),
        phase_curve: curve,
        norm_drift: (norm - op.norm_sq(initial)).abs(),
        reflected_mass,
        transmitted_mass: beyond,
        band_masses: basis.band_masses(op, fin, cfg.bands_reported),
        steps,
        time: steps as f64 * cfg.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap(0.5), 0.5);
        assert!((wrap(2.0 * PI + 0.25) - 0.25).abs() < 1e-14);
        assert!((wrap(-PI - 0.25) - (PI - 0.25)).abs() < 1e-14);
        assert_eq!(wrap(PI), PI);
    }

    #[test]
    fn cayley_is_unimodular_and_second_order() {
        let c = cayley(4.3, 4.0, 0.01);
        assert!((c.norm() - 1.0).abs() < 1e-15);
        let exact = C::from_polar(1.0, -0.3 * 0.01);
        assert!((c - exact).norm() < 1e-8);
    }
}
