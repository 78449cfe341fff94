use crate::error::{Error, Result};
use crate::fiber::{FiberLevel, TransverseGrid};
use crate::profile::{BoundaryProfile, ProfileSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

/// SHA-256 of `body` framed like a git blob.
pub fn blob_hash(body: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// A strip run. Lengths are physical (the boundary has arc length `s`,
/// normal distance `u`); momenta are in the scaled units of the fiber
/// problem and `dt` is in the time units of the magnetic Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripConfig {
    pub beta: f64,
    pub profile: ProfileSpec,
    pub s_min: f64,
    pub s_max: f64,
    pub u_max: f64,
    pub ds: f64,
    pub du: f64,
    pub dt: f64,
    pub band: usize,
    pub k_center: f64,
    pub k_width: f64,
    /// Initial packet centre.
    pub s_start: f64,
    pub steps: usize,
    /// Energy subtracted from the Hamiltonian before time stepping.
    pub energy_shift: f64,
    /// Bands resolved in the observables.
    pub bands_reported: usize,
    pub record_every: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// Packet amplitude `exp(-(k - k0)² / (2 w²))`, cut off past this many widths.
pub const PACKET_CUTOFF: f64 = 8.0;
/// Packet support used for the band window and accuracy checks.
pub const WINDOW_WIDTHS: f64 = 4.0;
/// Largest admissible `dt · |E - E_shift|` over the packet support.
pub const PHASE_STEP_LIMIT: f64 = 0.1;
/// Largest admissible `u_max · |κ|`.
pub const JACOBIAN_LIMIT: f64 = 0.9;
pub const MIN_PACKET_MODES: usize = 64;
/// Arc-length wavenumber, times the bump half-width, that the `S` grid of a
/// standard run resolves. The bump spectrum has fallen below 1e-8 there, and
/// extracted phases move by less than 1e-7 on further refinement.
pub const CURVATURE_BANDWIDTH: f64 = 165.0;

/// Grid in scaled coordinates `S = β s`, `U = β u`; periodic in `S`,
/// Dirichlet at `U = 0` and `U = U_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub n_s: usize,
    pub n_u: usize,
    pub s0: f64,
    pub d_s: f64,
    pub d_u: f64,
    pub beta: f64,
}

impl StripGrid {
    pub fn len(&self) -> usize {
        self.n_s * self.n_u
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn period(&self) -> f64 {
        self.n_s as f64 * self.d_s
    }

    pub fn s_node(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.d_s
    }

    pub fn u_node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.d_u
    }

    /// Wavenumber of FFT mode `m`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let m = m as i64;
        let n = self.n_s as i64;
        let signed = if m < (n + 1) / 2 { m } else { m - n };
        2.0 * PI * signed as f64 / self.period()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_s).map(|m| self.wavenumber(m)).collect()
    }

    /// Fiber grid with the same transverse nodes.
    pub fn transverse(&self) -> TransverseGrid {
        TransverseGrid::new((self.n_u + 1) as f64 * self.d_u, self.n_u + 1).expect("validated transverse grid")
    }

    /// `dS dU`, the quadrature weight of one node.
    pub fn cell(&self) -> f64 {
        self.d_s * self.d_u
    }
}

/// Smallest even 5-smooth integer not below `n`.
fn fft_friendly(n: usize) -> usize {
    (n.max(2)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1 && m % 2 == 0
        })
        .expect("5-smooth numbers are unbounded")
}

fn count(extent: f64, step: f64, what: &str) -> Result<usize> {
    if !(extent.is_finite() && step.is_finite() && extent > 0.0 && step > 0.0) {
        return Err(Error::ConfigInvalid(format!("{what}: extent {extent} and spacing {step} must be positive")));
    }
    let n = (extent / step).round();
    if (n * step - extent).abs() > 1e-9 * extent {
        return Err(Error::ConfigInvalid(format!("{what}: spacing {step} does not divide {extent}")));
    }
    Ok(n as usize)
}

impl StripConfig {
    /// A run that carries a band packet across the bend, with a grid fine
    /// enough for the packet and a period long enough that it never wraps.
    pub fn standard(beta: f64, profile: ProfileSpec, band: usize, k_center: f64, k_width: f64) -> Result<Self> {
        if !(beta >= 1.0 && k_width > 0.0) {
            return Err(Error::ConfigInvalid(format!("beta = {beta}, k_width = {k_width}")));
        }
        let d_s = (beta * PI * profile.feature_width() / CURVATURE_BANDWIDTH).min(0.75);
        let d_u = 1.0 / 8.0;
        let u_cells = 56;
        // enough modes across the packet, and room for it on both sides of the bend
        let modes_period = 1.02 * MIN_PACKET_MODES as f64 * 2.0 * PI / (2.0 * 5.0 * k_width);
        let reach = 5.5 / k_width;
        let bend = beta * profile.half_support();
        let room_period = 2.0 * (bend + 2.0 * reach) + 20.0;
        let n_s = fft_friendly((modes_period.max(room_period) / d_s).ceil() as usize);
        let d_s = modes_period.max(room_period) / n_s as f64;
        let period = n_s as f64 * d_s;
        let transverse = TransverseGrid::new(u_cells as f64 * d_u, u_cells)?;
        let level = FiberLevel::solve(k_center, &transverse, band + 1)?;
        let speed = level.group_velocity(band);
        let dt = 0.1;
        let travel = 2.0 * (bend + reach);
        let steps = (travel / speed / dt).ceil() as usize;
        Ok(Self {
            beta,
            profile,
            s_min: -0.5 * period / beta,
            s_max: 0.5 * period / beta,
            u_max: u_cells as f64 * d_u / beta,
            ds: d_s / beta,
            du: d_u / beta,
            dt,
            band,
            k_center,
            k_width,
            s_start: -(bend + reach) / beta,
            steps,
            energy_shift: level.energy(band),
            bands_reported: band + 3,
            record_every: 10,
            tolerance: 1e-12,
            max_iterations: 200,
        })
    }

    pub fn profile(&self) -> Result<BoundaryProfile> {
        self.profile.build(crate::profile::DEFAULT_SAMPLES)
    }

    pub fn grid(&self) -> Result<StripGrid> {
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::ConfigInvalid(format!("beta = {} must be at least 1", self.beta)));
        }
        let n_s = count(self.s_max - self.s_min, self.ds, "s extent")?;
        let n_u = count(self.u_max, self.du, "u extent")?;
        if n_s < 16 || n_u < TransverseGrid::MIN_POINTS {
            return Err(Error::ConfigInvalid(format!("grid {n_s} x {n_u} is too small")));
        }
        Ok(StripGrid {
            n_s,
            n_u: n_u - 1,
            s0: self.beta * self.s_min,
            d_s: self.beta * self.ds,
            d_u: self.beta * self.du,
            beta: self.beta,
        })
    }

    /// Checks every precondition of a run and returns its grid.
    pub fn validate(&self) -> Result<StripGrid> {
        let grid = self.grid()?;
        let profile = self.profile()?;
        let l = profile.half_support;
        if self.s_min > -1.25 * l || self.s_max < 1.25 * l {
            return Err(Error::ConfigInvalid(format!("strip [{}, {}] does not contain the bend", self.s_min, self.s_max)));
        }
        if self.u_max * profile.max_abs_kappa() >= JACOBIAN_LIMIT {
            return Err(Error::ConfigInvalid(format!(
                "u_max |kappa| = {} reaches {JACOBIAN_LIMIT}",
                self.u_max * profile.max_abs_kappa()
            )));
        }
        if !(self.dt > 0.0 && self.k_width > 0.0 && self.steps > 0 && self.record_every > 0) {
            return Err(Error::ConfigInvalid("dt, k_width, steps and record_every must be positive".into()));
        }
        if self.bands_reported <= self.band {
            return Err(Error::ConfigInvalid("bands_reported must include the packet band".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-6 && self.max_iterations > 0) {
            return Err(Error::ConfigInvalid("solver tolerance must lie in (0, 1e-6]".into()));
        }
        let spacing = 2.0 * PI / grid.period();
        let modes = (10.0 * self.k_width / spacing).floor() as usize;
        if modes < MIN_PACKET_MODES {
            return Err(Error::ConfigInvalid(format!(
                "only {modes} momentum modes across the packet; {MIN_PACKET_MODES} needed"
            )));
        }
        let transverse = grid.transverse();
        let edge = |k: f64| -> Result<f64> { Ok(FiberLevel::solve(k, &transverse, self.band + 1)?.energy(self.band)) };
        let lo = edge(self.k_center - WINDOW_WIDTHS * self.k_width)?;
        let hi = edge(self.k_center + WINDOW_WIDTHS * self.k_width)?;
        let first_odd = ((lo - 1.0) / 2.0).ceil() * 2.0 + 1.0;
        if first_odd <= hi {
            return Err(Error::ConfigInvalid(format!(
                "band energies [{lo:.4}, {hi:.4}] over the packet reach the Landau level {first_odd}"
            )));
        }
        let spread = (lo - self.energy_shift).abs().max((hi - self.energy_shift).abs());
        if self.dt * spread > PHASE_STEP_LIMIT {
            return Err(Error::ConfigInvalid(format!(
                "dt |E - E_shift| = {:.3} exceeds {PHASE_STEP_LIMIT}",
                self.dt * spread
            )));
        }
        Ok(grid)
    }

    /// Canonical JSON of the configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON, framed like a git blob.
    pub fn content_hash(&self) -> String {
        blob_hash(&serde_json::to_string(self).expect("config serialises"))
    }

    /// The same run with a flat boundary.
    pub fn straightened(&self) -> Self {
        let mut c = self.clone();
        c.profile = match self.profile {
            ProfileSpec::Bump { half_support, .. } => ProfileSpec::Bump { theta: 0.0, half_support },
            ProfileSpec::TwoBump { half_support, .. } => ProfileSpec::TwoBump {
                theta: 0.0,
                first_theta: 0.0,
                half_support,
            },
        };
        c
    }
}
