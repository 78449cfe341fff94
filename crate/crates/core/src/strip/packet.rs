use super::config::{StripConfig, StripGrid, PACKET_CUTOFF};
use super::operator::StripOperator;
use crate::error::{Error, Result};
use crate::fiber::FiberLevel;
use num_complex::Complex64;
use rayon::prelude::*;

type C = Complex64;

/// Largest packet mass allowed on the bend at the start of a run.
pub const BEND_MASS_LIMIT: f64 = 1e-6;

/// Transverse eigenvectors for every FFT mode of the strip.
pub struct BandBasis {
    grid: StripGrid,
    levels: Vec<FiberLevel>,
}

impl BandBasis {
    pub fn new(grid: StripGrid, bands: usize) -> Result<Self> {
        let transverse = grid.transverse();
        let levels = (0..grid.n_s)
            .into_par_iter()
            .map(|m| FiberLevel::solve(grid.wavenumber(m), &transverse, bands))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, levels })
    }

    pub fn bands(&self) -> usize {
        self.levels[0].band_count()
    }

    pub fn level(&self, m: usize) -> &FiberLevel {
        &self.levels[m]
    }

    /// `c_n(k_m) = dU Σ_j ψ_n(k_m, U_j) ψ̂(k_m, U_j)` for an FFT'd state.
    pub fn coefficients(&self, hat: &[C], band: usize) -> Vec<C> {
        let n_s = self.grid.n_s;
        (0..n_s)
            .map(|m| {
                let psi = self.levels[m].psi(band);
                psi.iter().enumerate().map(|(j, p)| hat[j * n_s + m] * *p).sum::<C>() * self.grid.d_u
            })
            .collect()
    }

    /// Probability carried by each of the first `count` bands.
    pub fn band_masses(&self, op: &StripOperator, psi: &[C], count: usize) -> Vec<f64> {
        let mut hat = psi.to_vec();
        op.forward(&mut hat);
        let scale = self.grid.d_s / self.grid.n_s as f64;
        (0..count)
            .map(|b| self.coefficients(&hat, b).iter().map(|c| c.norm_sqr()).sum::<f64>() * scale)
            .collect()
    }
}

/// Wavefunction on the strip grid, normalised at `t = 0`.
#[derive(Debug, Clone)]
pub struct StripState {
    pub psi: Vec<C>,
    pub time: f64,
    pub steps: usize,
}

/// Packet amplitude on mode `k`.
pub fn envelope(cfg: &StripConfig, k: f64) -> f64 {
    let x = (k - cfg.k_center) / cfg.k_width;
    if x.abs() > PACKET_CUTOFF {
        0.0
    } else {
        (-0.5 * x * x).exp()
    }
}

/// `ψ(S, U) = Σ_m f(k_m) e^{i k_m (S - S₀)} ψ_n(k_m, U)`, unit norm.
pub fn prepare_packet(cfg: &StripConfig, op: &StripOperator, basis: &BandBasis) -> Result<StripState> {
    let grid = *op.grid();
    let (n_s, n_u) = (grid.n_s, grid.n_u);
    let centre = cfg.s_start * cfg.beta;
    let mut hat = vec![C::new(0.0, 0.0); grid.len()];
    for m in 0..n_s {
        let k = grid.wavenumber(m);
        let f = envelope(cfg, k);
        if f == 0.0 {
            continue;
        }
        let phase = C::from_polar(f * n_s as f64, -k * (centre - grid.s0));
        let psi = basis.level(m).psi(cfg.band);
        for j in 0..n_u {
            hat[j * n_s + m] = phase * psi[j];
        }
    }
    op.inverse(&mut hat);
    let norm = op.norm_sq(&hat).sqrt();
    hat.iter_mut().for_each(|v| *v /= norm);
    let bend_start = -cfg.beta * cfg.profile.half_support();
    let on_bend = mass_beyond(op, &hat, bend_start);
    if on_bend > BEND_MASS_LIMIT {
        return Err(Error::PacketOverlapsBend(format!(
            "initial mass {on_bend:.3e} past s = {:.3} exceeds {BEND_MASS_LIMIT:.0e}",
            -cfg.profile.half_support()
        )));
    }
    Ok(StripState {
        psi: hat,
        time: 0.0,
        steps: 0,
    })
}

/// Mass at scaled positions `S > s_cut`.
pub fn mass_beyond(op: &StripOperator, psi: &[C], s_cut: f64) -> f64 {
    let g = op.grid();
    let mut total = 0.0;
    for j in 0..g.n_u {
        for i in 0..g.n_s {
            if g.s_node(i) > s_cut {
                total += psi[j * g.n_s + i].norm_sqr();
            }
        }
    }
    total * g.cell()
}

/// Mass at scaled positions `S < s_cut`.
pub fn mass_before(op: &StripOperator, psi: &[C], s_cut: f64) -> f64 {
    op.norm_sq(psi) - mass_beyond(op, psi, s_cut)
}

/// `⟨S⟩ / β`, the packet centre in arc length.
pub fn mean_position(op: &StripOperator, psi: &[C]) -> f64 {
    let g = op.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..g.n_u {
        for i in 0..g.n_s {
            let w = psi[j * g.n_s + i].norm_sqr();
            num += w * g.s_node(i);
            den += w;
        }
    }
    num / den / g.beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{BoundaryProfile, ProfileSpec};

    fn small_config() -> StripConfig {
        let mut cfg = StripConfig::standard(
            4.0,
            ProfileSpec::Bump {
                theta: 0.4,
                half_support: 1.0,
            },
            0,
            0.39,
            0.25,
        )
        .unwrap();
        cfg.u_max = 10.0 / 4.0;
        cfg.du = 0.25 / 4.0;
        cfg
    }

    #[test]
    fn packet_lives_in_one_band() {
        let cfg = small_config();
        let grid = cfg.grid().unwrap();
        let op = StripOperator::new(grid, &BoundaryProfile::bump(0.0, 1.0, 400).unwrap());
        let basis = BandBasis::new(grid, 3).unwrap();
        let state = prepare_packet(&cfg, &op, &basis).unwrap();
        assert!((op.norm_sq(&state.psi) - 1.0).abs() < 1e-13);
        let masses = basis.band_masses(&op, &state.psi, 3);
        assert!((masses[0] - 1.0).abs() < 1e-12, "{masses:?}");
        assert!(masses[1] < 1e-24 && masses[2] < 1e-24);
        let centre = mean_position(&op, &state.psi);
        assert!((centre - cfg.s_start).abs() < 1e-6, "{centre} vs {}", cfg.s_start);
    }

    #[test]
    fn band_masses_add_up() {
        let cfg = small_config();
        let grid = cfg.grid().unwrap();
        let op = StripOperator::new(grid, &BoundaryProfile::bump(0.0, 1.0, 400).unwrap());
        let basis = BandBasis::new(grid, 6).unwrap();
        let mut hat = vec![C::new(0.0, 0.0); grid.len()];
        for m in 0..grid.n_s {
            for b in 0..5 {
                let c = C::new(((m * 7 + b * 3) as f64 * 0.37).sin(), ((m + b) as f64 * 0.11).cos());
                for (j, p) in basis.level(m).psi(b).iter().enumerate() {
                    hat[j * grid.n_s + m] += c * *p;
                }
            }
        }
        op.inverse(&mut hat);
        let masses = basis.band_masses(&op, &hat, 6);
        let total: f64 = masses.iter().sum();
        let direct = op.norm_sq(&hat);
        assert!((total - direct).abs() < 1e-12 * direct, "{total} {direct}");
        assert!(masses[5] < 1e-24 * direct);
    }

    #[test]
    fn packet_on_bend_is_rejected() {
        let mut cfg = small_config();
        cfg.s_start = -1.0;
        let grid = cfg.grid().unwrap();
        let op = StripOperator::new(grid, &BoundaryProfile::bump(0.0, 1.0, 400).unwrap());
        let basis = BandBasis::new(grid, 1).unwrap();
        assert!(matches!(prepare_packet(&cfg, &op, &basis), Err(Error::PacketOverlapsBend(_))));
    }
}
