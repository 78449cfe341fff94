use crate::config::{config_error, precondition, required, BandParams, CliError, RunConfig, Shape};
use crate::config::{ClassicalParams, Job, PhaseParams, SelfcheckParams, SimulateParams, SweepParams};
use crate::output::Sink;
use crate::svg::{Chart, Series};
use halledge::acceptance::{self, SimulatedPhase, SimulationSet, PACKET_WIDTH};
use halledge::classical::{classical_table, write_classical_csv};
use halledge::fiber::{dispersion_rows, write_dispersion_csv, FiberSolution};
use halledge::perturbation::{perturbation_row, write_perturbation_csv};
use halledge::phases::{phase_table, write_phase_csv};
use halledge::profile::{BoundaryProfile, ProfileSpec, DEFAULT_SAMPLES};
use halledge::strip::{write_observables_csv, StripConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Bend half-length when none is given.
pub const DEFAULT_HALF_SUPPORT: f64 = 1.0;
/// Observations between two progress lines of a simulation.
const PROGRESS_EVERY: usize = 50;

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink {
        dir: cfg.output_dir.clone(),
        format: cfg.format,
        plot: cfg.plot,
        hash: cfg.hash(),
        command: cfg.command,
    };
    match &cfg.job {
        Job::Dispersion(p) => dispersion(p, &sink),
        Job::Perturb(p) => perturb(p, &sink),
        Job::Phase(p) => phase(p, &sink),
        Job::Classical(p) => classical(p, &sink),
        Job::Simulate(p) => simulate(p, &sink),
        Job::Sweep(p) => sweep(p, &sink),
        Job::Selfcheck(p) => selfcheck(p, &sink),
    }
}

fn bands_and_momenta(p: &BandParams) -> Result<(Vec<usize>, Vec<f64>), CliError> {
    let bands = required(&p.n, "n")?.indices("n")?;
    let momenta = required(&p.k, "k")?.expand("k", p.dk, "dk")?;
    Ok((bands, momenta))
}

fn pairs(bands: &[usize], momenta: &[f64]) -> Vec<(usize, f64)> {
    bands.iter().flat_map(|n| momenta.iter().map(move |k| (*n, *k))).collect()
}

fn dispersion(p: &BandParams, sink: &Sink) -> Result<(), CliError> {
    let (bands, momenta) = bands_and_momenta(p)?;
    let n_max = bands.iter().max().expect("at least one band") + 1;
    sink.prepare()?;
    let solutions = momenta
        .par_iter()
        .map(|k| FiberSolution::solve_default(*k, n_max))
        .collect::<halledge::Result<Vec<_>>>()?;
    let per_k: Vec<_> = solutions.iter().map(dispersion_rows).collect();
    let rows: Vec<_> = bands.iter().flat_map(|n| per_k.iter().map(move |r| r[*n])).collect();
    sink.table("dispersion", &rows, write_dispersion_csv)?;
    sink.chart(
        "dispersion",
        &Chart {
            title: "Edge band dispersion".into(),
            x_label: "k".into(),
            y_label: "E_n(k)".into(),
            log_x: false,
            log_y: false,
            series: bands
                .iter()
                .map(|n| Series {
                    label: format!("n = {n}"),
                    points: rows.iter().filter(|r| r.n == *n).map(|r| (r.k, r.energy)).collect(),
                })
                .collect(),
        },
    )
}

fn perturb(p: &BandParams, sink: &Sink) -> Result<(), CliError> {
    let (bands, momenta) = bands_and_momenta(p)?;
    sink.prepare()?;
    let rows = pairs(&bands, &momenta)
        .par_iter()
        .map(|(n, k)| perturbation_row(&FiberSolution::solve_default(*k, n + 1)?, *n))
        .collect::<halledge::Result<Vec<_>>>()?;
    sink.table("perturbation", &rows, write_perturbation_csv)
}

fn profile_spec(
    theta: Option<f64>,
    half_support: Option<f64>,
    shape: Option<Shape>,
    first_theta: Option<f64>,
) -> Result<(ProfileSpec, BoundaryProfile), CliError> {
    let theta = required(&theta, "theta")?;
    let half_support = half_support.unwrap_or(DEFAULT_HALF_SUPPORT);
    let spec = match (shape.unwrap_or(Shape::Bump), first_theta) {
        (Shape::Bump, None) => ProfileSpec::Bump { theta, half_support },
        (Shape::TwoBump, Some(first_theta)) => ProfileSpec::TwoBump {
            theta,
            first_theta,
            half_support,
        },
        (Shape::Bump, Some(_)) => return Err(config_error("first_theta applies only to a two-bump profile")),
        (Shape::TwoBump, None) => return Err(config_error("a two-bump profile needs first_theta")),
    };
    let profile = spec.build(DEFAULT_SAMPLES).map_err(precondition)?;
    Ok((spec, profile))
}

fn phase(p: &PhaseParams, sink: &Sink) -> Result<(), CliError> {
    let (bands, momenta) = bands_and_momenta(&BandParams {
        n: p.n.clone(),
        k: p.k.clone(),
        dk: p.dk,
    })?;
    let (_, profile) = profile_spec(p.theta, p.half_support, p.profile, p.first_theta)?;
    sink.prepare()?;
    let records = phase_table(&bands, &momenta, &profile)?;
    for r in &records {
        println!("n = {}  k = {}  phi0 = {:.10}  phi1 = {:.10}", r.n, r.k, r.phi0, r.phi1);
    }
    if sink.dir.is_some() {
        sink.table("phase", &records, write_phase_csv)?;
    }
    if momenta.len() < 2 {
        return Ok(());
    }
    let series = |name: &str, pick: fn(&halledge::phases::PhaseRecord) -> f64| -> Vec<Series> {
        bands
            .iter()
            .map(|n| Series {
                label: format!("{name}, n = {n}"),
                points: records.iter().filter(|r| r.n == *n).map(|r| (r.k, pick(r))).collect(),
            })
            .collect()
    };
    let mut all = series("phi0", |r| r.phi0);
    all.extend(series("phi1", |r| r.phi1));
    sink.chart(
        "phase",
        &Chart {
            title: "Scattering phase against momentum".into(),
            x_label: "k".into(),
            y_label: "phase".into(),
            log_x: false,
            log_y: false,
            series: all,
        },
    )
}

fn classical(p: &ClassicalParams, sink: &Sink) -> Result<(), CliError> {
    let bands = required(&p.n, "n")?.indices("n")?;
    let angles = required(&p.eta, "eta")?.expand("eta", p.deta, "deta")?;
    if let Some(bad) = angles.iter().find(|eta| !(**eta > 0.0 && **eta < PI)) {
        return Err(config_error(format!("eta = {bad} outside (0, pi)")));
    }
    let theta = required(&p.theta, "theta")?;
    if !theta.is_finite() {
        return Err(config_error("theta must be finite"));
    }
    sink.prepare()?;
    let rows = classical_table(&bands, &angles, theta)?;
    sink.table("classical", &rows, write_classical_csv)
}

/// Standard strip run for the packet parameters.
fn standard_config(
    beta: Option<f64>,
    n: Option<usize>,
    k: Option<f64>,
    k_width: Option<f64>,
    profile: (Option<f64>, Option<f64>, Option<Shape>, Option<f64>),
) -> Result<StripConfig, CliError> {
    let beta = required(&beta, "beta")?;
    let band = required(&n, "n")?;
    let k = required(&k, "k")?;
    let (spec, _) = profile_spec(profile.0, profile.1, profile.2, profile.3)?;
    let cfg = StripConfig::standard(beta, spec, band, k, k_width.unwrap_or(PACKET_WIDTH)).map_err(precondition)?;
    cfg.validate().map_err(precondition)?;
    Ok(cfg)
}

fn write_simulation(sink: &Sink, dir: &Path, sim: &SimulatedPhase) -> Result<(), CliError> {
    let out = &sim.output;
    sink.write_file(
        dir,
        "manifest.json",
        &sink.json_bytes(json!({ "hash": out.hash, "config": out.config })),
    )?;
    let csv = sink.csv_bytes(|buf| write_observables_csv(buf, out.config.bands_reported, &out.observations));
    sink.write_file(dir, "observables.csv", &csv)?;
    let record = json!({
        "strip_hash": out.hash,
        "record": out.record,
        "theory": {
            "phi0": sim.phi0,
            "phi1": sim.phi1,
            "wkb_endpoint": [sim.wkb_endpoint.re, sim.wkb_endpoint.im],
        },
        "first_order_error": sim.phase() - sim.phi0,
        "second_order_residual": sim.second_order_residual(),
        "interband_mass": sim.interband_mass(),
        "max_norm_drift": sim.max_norm_drift(),
        "solver": out.solver,
    });
    sink.write_file(dir, "record.json", &sink.json_bytes(record))
}

fn run_simulation(sink: &Sink, dir: &Path, cfg: &StripConfig, tag: &str) -> Result<SimulatedPhase, CliError> {
    let mut seen = 0usize;
    let sim = acceptance::simulate_against_theory(cfg, |obs| {
        if seen.is_multiple_of(PROGRESS_EVERY) {
            eprintln!("{tag}t = {:.1}  norm - 1 = {:+.2e}  s_mean = {:.4}", obs.time, obs.norm - 1.0, obs.s_mean);
        }
        seen += 1;
    })?;
    write_simulation(sink, dir, &sim)?;
    Ok(sim)
}

fn simulate(p: &SimulateParams, sink: &Sink) -> Result<(), CliError> {
    let cfg = match &p.strip {
        Some(cfg) => {
            let packet_given = p.beta.is_some()
                || p.n.is_some()
                || p.k.is_some()
                || p.k_width.is_some()
                || p.theta.is_some()
                || p.half_support.is_some()
                || p.profile.is_some()
                || p.first_theta.is_some();
            if packet_given {
                return Err(config_error("`strip` replaces the packet and profile parameters; give one or the other"));
            }
            cfg.validate().map_err(precondition)?;
            cfg.clone()
        }
        None => standard_config(
            p.beta,
            p.n,
            p.k,
            p.k_width,
            (p.theta, p.half_support, p.profile, p.first_theta),
        )?,
    };
    let dir = sink.require_dir()?;
    sink.prepare()?;
    let sim = run_simulation(sink, dir, &cfg, "")?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "beta = {}  n = {}  k = {}", cfg.beta, cfg.band, sim.output.record.k);
    let _ = writeln!(out, "phase = {:.10}", sim.phase());
    let _ = writeln!(out, "phi0 = {:.10}", sim.phi0);
    let _ = writeln!(out, "phi1 = {:.10}", sim.phi1);
    let _ = writeln!(out, "phase - phi0 - phi1/beta = {:.3e}", sim.second_order_residual());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    beta: f64,
    k: f64,
    phase: f64,
    phi0: f64,
    phi1: f64,
    first_order_error: f64,
    second_order_residual: f64,
    interband_mass: f64,
}

fn write_sweep_csv(out: &mut Vec<u8>, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "beta,k,phase,phi0,phi1,first_order_error,second_order_residual,interband_mass")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e}",
            r.beta, r.k, r.phase, r.phi0, r.phi1, r.first_order_error, r.second_order_residual, r.interband_mass
        )?;
    }
    Ok(())
}

fn sweep(p: &SweepParams, sink: &Sink) -> Result<(), CliError> {
    let mut betas = required(&p.beta, "beta")?.expand("beta", p.dbeta, "dbeta")?;
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let configs = betas
        .iter()
        .map(|beta| {
            standard_config(
                Some(*beta),
                p.n,
                p.k,
                p.k_width,
                (p.theta, p.half_support, p.profile, p.first_theta),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let workers = p.workers.unwrap_or_else(rayon::current_num_threads);
    if workers == 0 {
        return Err(config_error("workers must be at least 1"));
    }
    let dir = sink.require_dir()?;
    sink.prepare()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config_error(format!("worker pool: {e}")))?;
    let results: Vec<Result<SimulatedPhase, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let sub = dir.join(format!("beta_{}", cfg.beta));
                std::fs::create_dir_all(&sub).map_err(|e| config_error(format!("cannot create {}: {e}", sub.display())))?;
                run_simulation(sink, &sub, cfg, &format!("[beta = {}] ", cfg.beta))
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<SweepRow> = runs
        .iter()
        .map(|sim| SweepRow {
            beta: sim.beta(),
            k: sim.output.record.k,
            phase: sim.phase(),
            phi0: sim.phi0,
            phi1: sim.phi1,
            first_order_error: sim.phase() - sim.phi0,
            second_order_residual: sim.second_order_residual(),
            interband_mass: sim.interband_mass(),
        })
        .collect();
    sink.table("sweep", &rows, write_sweep_csv)?;
    for r in &rows {
        println!("beta = {}  phase = {:.10}  phase - phi0 = {:.3e}", r.beta, r.phase, r.first_order_error);
    }
    sink.chart(
        "sweep",
        &Chart {
            title: "Simulated phase against the expansion".into(),
            x_label: "beta".into(),
            y_label: "error".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "|phase - phi0|".into(),
                    points: rows.iter().map(|r| (r.beta, r.first_order_error.abs())).collect(),
                },
                Series {
                    label: "|phase - phi0 - phi1/beta|".into(),
                    points: rows.iter().map(|r| (r.beta, r.second_order_residual.abs())).collect(),
                },
            ],
        },
    )
}

#[derive(Debug, Clone, Serialize)]
struct CriterionRow {
    criterion: u8,
    title: &'static str,
    passed: bool,
}

fn selfcheck(p: &SelfcheckParams, sink: &Sink) -> Result<(), CliError> {
    sink.prepare()?;
    let mut checks = acceptance::fast_checks();
    if p.simulations.unwrap_or(false) {
        let set = SimulationSet::run(|msg| eprintln!("{msg}"));
        checks.extend(acceptance::simulation_checks(&set));
    }
    let mut out = std::io::stdout().lock();
    for c in &checks {
        let _ = write!(out, "{c}");
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(out, "{passed} of {} criteria passed", checks.len());
    drop(out);
    if sink.dir.is_some() {
        let rows: Vec<CriterionRow> = checks
            .iter()
            .map(|c| CriterionRow {
                criterion: c.id,
                title: c.title,
                passed: c.passed,
            })
            .collect();
        sink.table("selfcheck", &rows, |buf, rows| {
            writeln!(buf, "criterion,title,passed")?;
            for r in rows {
                writeln!(buf, "{},{},{}", r.criterion, r.title, r.passed)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
