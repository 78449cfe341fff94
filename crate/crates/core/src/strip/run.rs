use super::config::StripConfig;
use super::extract::{extract, ExtractInput, ScatteringRecord};
use super::operator::StripOperator;
use super::packet::{mass_before, mean_position, prepare_packet, BandBasis, StripState};
use super::propagate::CrankNicolson;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub norm: f64,
    pub s_mean: f64,
    pub reflected_mass: f64,
    pub band_masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub config: StripConfig,
    pub hash: String,
    pub observations: Vec<Observation>,
    pub record: ScatteringRecord,
    pub solver: SolverStats,
}

fn observe(cfg: &StripConfig, op: &StripOperator, basis: &BandBasis, state: &StripState) -> Observation {
    Observation {
        time: state.time,
        norm: op.norm_sq(&state.psi),
        s_mean: mean_position(op, &state.psi),
        reflected_mass: mass_before(op, &state.psi, -cfg.beta * cfg.profile.half_support()),
        band_masses: basis.band_masses(op, &state.psi, cfg.bands_reported),
    }
}

/// Carries the configured packet across the bend and extracts its phase.
pub fn simulate(cfg: &StripConfig) -> Result<SimulationOutput> {
    simulate_with(cfg, |_| {})
}

/// As [`simulate`], reporting every observation as it is made.
pub fn simulate_with(cfg: &StripConfig, mut progress: impl FnMut(&Observation)) -> Result<SimulationOutput> {
    let grid = cfg.validate()?;
    let op = StripOperator::new(grid, &cfg.profile()?);
    let basis = BandBasis::new(grid, cfg.bands_reported.max(cfg.band + 1))?;
    let mut state = prepare_packet(cfg, &op, &basis)?;
    let initial = state.psi.clone();
    let cn = CrankNicolson::new(&op, cfg.dt, cfg.energy_shift, cfg.tolerance, cfg.max_iterations)?;
    let mut stats = SolverStats {
        total_iterations: 0,
        max_iterations: 0,
        max_residual: 0.0,
    };
    let mut observations = vec![observe(cfg, &op, &basis, &state)];
    progress(&observations[0]);
    let mut reflected = 0.0;
    for step in 1..=cfg.steps {
        let report = cn.step(&mut state.psi)?;
        stats.total_iterations += report.iterations;
        stats.max_iterations = stats.max_iterations.max(report.iterations);
        stats.max_residual = stats.max_residual.max(report.residual);
        state.steps = step;
        state.time = step as f64 * cfg.dt;
        if step % cfg.record_every == 0 || step == cfg.steps {
            let obs = observe(cfg, &op, &basis, &state);
            reflected = obs.reflected_mass;
            progress(&obs);
            observations.push(obs);
        }
    }
    let record = extract(ExtractInput {
        cfg,
        op: &op,
        basis: &basis,
        initial: &initial,
        fin: &state.psi,
        steps: cfg.steps,
        reflected_mass: reflected,
    })?;
    Ok(SimulationOutput {
        config: cfg.clone(),
        hash: cfg.content_hash(),
        observations,
        record,
        solver: stats,
    })
}

pub fn write_observables_csv(out: &mut impl Write, bands: usize, observations: &[Observation]) -> std::io::Result<()> {
    write!(out, "t,norm,s_mean,reflected_mass")?;
    for b in 0..bands {
        write!(out, ",band_{b}")?;
    }
    writeln!(out)?;
    for o in observations {
        write!(out, "{:.6},{:.16e},{:.10e},{:.6e}", o.time, o.norm, o.s_mean, o.reflected_mass)?;
        for m in &o.band_masses {
            write!(out, ",{m:.6e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Configuration and its hash, the record that makes a run reproducible.
pub fn manifest_json(cfg: &StripConfig) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "hash": cfg.content_hash(),
        "config": cfg,
    }))
    .expect("manifest serialises")
}
