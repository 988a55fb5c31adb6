//! Scenario orchestration: march a configured flow, compute the per-snapshot
//! diagnostics, and write the CSV with its JSON sidecar.
//!
//! The run is driven one diagnostic interval at a time so that a mid-run
//! solver failure keeps every completed interval; the rows computed so far
//! are written out and the failure is recorded in the sidecar.  Mass
//! conservation is therefore budgeted per interval, so the whole-run drift
//! bound is the per-run budget times the number of intervals.
//!
//! Quantities a given run cannot define (the Hamiltonian outside the
//! finite-speed regime, the second moment on the circle, the relative
//! columns when no reference model exists at the start time) are written as
//! `0` and flagged in the sidecar's notes.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use ottolab::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use ottolab::model::Speed;
use ottolab::reference::{ScalingInit, SelfSimilarModel};
use ottolab::solver::Snapshot;
use ottolab::wentropy::{self, WEntropyCoefficients};
use ottolab::{
    entropy, geodesic_solve, langevin_solve, pme_solve, DensityField, Error, Grid,
    PotentialField, Result, WeightedMeasure,
};

use crate::config::{GridKindSpec, InitSpec, ScenarioConfig};

/// Time-step count of the inner reference solves per unit of horizon length.
const REFERENCE_ODE_STEPS: f64 = 4000.0;

/// How the snapshots are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// March the configured solver from the initial state.
    Solver,
    /// Sample the exact self-similar evolution; no solver runs.
    Analytic,
}

pub struct ReferenceAssembly {
    pub model: SelfSimilarModel,
    pub coeffs: WEntropyCoefficients,
}

/// Build the self-similar model and the weighting coefficients spanning the
/// run horizon.  Valid for any start time `delta > 0`.
pub fn build_reference(cfg: &ScenarioConfig) -> Result<ReferenceAssembly> {
    let delta = cfg.time.delta;
    let t_end = cfg.time.t_end;
    let dt = (t_end - delta) / REFERENCE_ODE_STEPS;
    let init = ScalingInit::canonical(cfg.params.c, cfg.params.k(), delta);
    let model = SelfSimilarModel::build(&cfg.params, delta, t_end, dt, init)?;
    let coeffs = WEntropyCoefficients::build(&cfg.params, delta, t_end, dt, init)?;
    Ok(ReferenceAssembly { model, coeffs })
}

/// Initial `(rho, phi)` for the configured preset.
pub fn build_initial(
    cfg: &ScenarioConfig,
    grid: &Grid,
    reference: Option<&ReferenceAssembly>,
) -> Result<(DensityField, PotentialField)> {
    match &cfg.init {
        InitSpec::Barenblatt => {
            let asm = reference.ok_or_else(|| {
                Error::Invalid(
                    "init.preset: the self-similar start needs the reference model".to_string(),
                )
            })?;
            asm.model.state_at(grid, cfg.time.delta)
        }
        InitSpec::UniformPerturbed { mode, amplitude } => {
            if !(amplitude.abs() < 1.0) {
                return Err(Error::Invalid(format!(
                    "init.amplitude: perturbation must stay below 1 in magnitude, got {amplitude}"
                )));
            }
            let length = grid.extent();
            let w = 2.0 * std::f64::consts::PI * *mode as f64 / length;
            let rho = DensityField::from_fn(grid, |x| (1.0 + amplitude * (w * x).sin()) / length)?;
            let sign = cfg.params.potential_sign.value();
            let gamma = cfg.params.gamma;
            let phi = PotentialField::new(
                grid,
                rho.values()
                    .iter()
                    .map(|&r| -sign * gamma * r.powf(gamma - 1.0) / (gamma - 1.0))
                    .collect(),
            )?;
            Ok((rho, phi))
        }
        InitSpec::File { path } => read_initial_csv(grid, Path::new(path)),
    }
}

/// Read `x, rho, phi` rows; a first line that does not parse as three
/// numbers is taken to be a header.  The `x` column must match the grid.
fn read_initial_csv(grid: &Grid, path: &Path) -> Result<(DensityField, PotentialField)> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parsed = (|| {
            let x: f64 = cols.next()?.parse().ok()?;
            let r: f64 = cols.next()?.parse().ok()?;
            let p: f64 = cols.next()?.parse().ok()?;
            if cols.next().is_some() {
                return None;
            }
            Some((x, r, p))
        })();
        match parsed {
            Some(row) => rows.push(row),
            None if lineno == 0 => continue,
            None => {
                return Err(Error::Invalid(format!(
                    "init.path: line {} of {} is not `x, rho, phi`",
                    lineno + 1,
                    path.display()
                )));
            }
        }
    }
    if rows.len() != grid.len() {
        return Err(Error::Invalid(format!(
            "init.path: {} rows for a grid of {} points",
            rows.len(),
            grid.len()
        )));
    }
    let tol = 1e-8 * grid.extent().max(1.0);
    for (i, (x, _, _)) in rows.iter().enumerate() {
        if (x - grid.nodes()[i]).abs() > tol {
            return Err(Error::Invalid(format!(
                "init.path: node {i} is at {x}, the grid expects {}",
                grid.nodes()[i]
            )));
        }
    }
    let rho = DensityField::new(grid, rows.iter().map(|r| r.1).collect())?;
    let phi = PotentialField::new(grid, rows.iter().map(|r| r.2).collect())?;
    Ok((rho, phi))
}

/// March the configured solver chunk by chunk, one diagnostic interval per
/// call.  On failure the completed snapshots are returned with the error.
fn march(
    cfg: &ScenarioConfig,
    grid: &Grid,
    mu: &WeightedMeasure,
    rho0: DensityField,
    phi0: PotentialField,
) -> (Vec<Snapshot>, Option<Error>) {
    let dt = cfg.time.dt;
    let stride = cfg.time.diagnostic_stride;
    let steps = ((cfg.time.t_end - cfg.time.delta) / dt).round() as usize;
    let chunks = steps / stride;
    let mut snaps = vec![Snapshot { t: cfg.time.delta, rho: rho0, phi: phi0 }];
    for _ in 0..chunks {
        let prev = snaps.last().unwrap();
        let t0 = prev.t;
        let chunk = ottolab::SolverConfig {
            dt,
            t_end: t0 + stride as f64 * dt,
            cfl: cfg.solver.cfl,
            density_floor: cfg.solver.density_floor,
            diagnostic_stride: stride,
            scheme: cfg.solver.scheme,
        };
        let run = match cfg.params.c {
            Speed::Zero => pme_solve(grid, mu, &prev.rho, cfg.params.gamma, t0, &chunk),
            Speed::Finite(_) => {
                langevin_solve(grid, mu, &cfg.params, &prev.rho, &prev.phi, t0, &chunk)
            }
            Speed::Infinite => geodesic_solve(grid, mu, &prev.rho, &prev.phi, t0, &chunk),
        };
        match run {
            Ok(traj) => {
                let last = traj.snapshots.into_iter().next_back().unwrap();
                snaps.push(last);
            }
            Err(e) => return (snaps, Some(e)),
        }
    }
    (snaps, None)
}

/// Sample the exact evolution at every diagnostic time.
fn analytic_snapshots(
    cfg: &ScenarioConfig,
    grid: &Grid,
    asm: &ReferenceAssembly,
) -> Result<Vec<Snapshot>> {
    let dt = cfg.time.dt;
    let stride = cfg.time.diagnostic_stride;
    let steps = ((cfg.time.t_end - cfg.time.delta) / dt).round() as usize;
    let chunks = steps / stride;
    let mut snaps = Vec::with_capacity(chunks + 1);
    for j in 0..=chunks {
        let t = cfg.time.delta + (j * stride) as f64 * dt;
        let (rho, phi) = asm.model.state_at(grid, t)?;
        snaps.push(Snapshot { t, rho, phi });
    }
    Ok(snaps)
}

struct RowContext<'a> {
    cfg: &'a ScenarioConfig,
    grid: &'a Grid,
    mu: &'a WeightedMeasure,
    reference: Option<&'a ReferenceAssembly>,
}

fn base_row(ctx: &RowContext<'_>, snap: &Snapshot) -> Result<DiagnosticsRecord> {
    let gamma = ctx.cfg.params.gamma;
    let (grid, mu) = (ctx.grid, ctx.mu);
    let (rho, phi) = (&snap.rho, &snap.phi);
    let mut rec = DiagnosticsRecord { t: snap.t, ..Default::default() };
    rec.mass = entropy::mass(grid, mu, rho);
    rec.ent_gamma = entropy::renyi_entropy(grid, mu, rho, gamma)?;
    rec.dent_dt = entropy::entropy_time_derivative(grid, mu, rho, phi, gamma)?;
    rec.fisher = entropy::fisher_information(grid, mu, rho, gamma)?;
    rec.grad_ent_norm_sq = entropy::grad_entropy_norm_sq(grid, mu, rho, gamma)?;
    if !grid.is_periodic() {
        rec.second_moment = entropy::second_moment(grid, mu, rho)?;
    }
    rec.kinetic = entropy::kinetic_energy(grid, mu, rho, phi);
    if ctx.cfg.params.c.finite_value().is_some() {
        let (h, l) = entropy::hamiltonian_lagrangian(grid, mu, rho, phi, &ctx.cfg.params)?;
        rec.hamiltonian = h;
        rec.lagrangian = l;
    }
    let alpha = match ctx.reference {
        Some(asm) => asm.model.scaling.alpha1_at(snap.t)?,
        None => 0.0,
    };
    rec.bochner_rhs = entropy::bochner_rhs(grid, mu, rho, phi, alpha, &ctx.cfg.params)?;
    Ok(rec)
}

/// Fill the five relative columns in place from the base columns.
pub(crate) fn assemble_identity(
    asm: &ReferenceAssembly,
    records: &mut [DiagnosticsRecord],
) -> Result<()> {
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ent: Vec<f64> = records.iter().map(|r| r.ent_gamma).collect();
    let dent: Vec<f64> = records.iter().map(|r| r.dent_dt).collect();
    let fisher: Vec<f64> = records.iter().map(|r| r.fisher).collect();
    let q_alpha: Vec<f64> = records.iter().map(|r| r.bochner_rhs).collect();
    let rel = wentropy::relative_series(&asm.model, &times, &ent, &dent, &fisher)?;
    let h: Vec<f64> = rel.iter().map(|r| r.h).collect();
    let h_dot: Vec<f64> = rel.iter().map(|r| r.h_dot).collect();
    let i_rel: Vec<f64> = rel.iter().map(|r| r.i_rel).collect();
    let sides = wentropy::w_formula_sides(&asm.coeffs, &times, &h, &h_dot, &i_rel, &q_alpha)?;
    for (j, rec) in records.iter_mut().enumerate() {
        rec.h_cm = h[j];
        rec.i_cm = i_rel[j];
        rec.w_cm = asm.coeffs.w_at(times[j], h[j], h_dot[j])?;
        rec.lhs_w_formula = sides.lhs[j];
        rec.residual = sides.lhs[j] - sides.rhs[j];
    }
    Ok(())
}

#[derive(Serialize)]
struct SidecarMeta {
    mode: &'static str,
    scheme: &'static str,
    grid: &'static str,
    points: usize,
    spacing: f64,
    rows: usize,
    /// whether the relative columns hold assembled values rather than zeros
    reference_columns: bool,
    /// recorded verbatim from the command line; runs are deterministic
    /// regardless of its value
    seed: Option<u64>,
    wall_clock_ms: u128,
    notes: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a BTreeMap<String, String>,
    meta: SidecarMeta,
}

fn write_outputs(
    cfg: &ScenarioConfig,
    records: &[DiagnosticsRecord],
    meta: SidecarMeta,
) -> Result<()> {
    let mut csv = String::with_capacity(64 + records.len() * 256);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for rec in records {
        csv.push_str(&rec.to_csv_row());
        csv.push('\n');
    }
    std::fs::write(&cfg.output.path, csv)?;
    let sidecar = Sidecar { config: cfg.echo(), meta };
    let mut json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Invalid(format!("sidecar serialization: {e}")))?;
    json.push('\n');
    std::fs::write(sidecar_path(&cfg.output.path), json)?;
    Ok(())
}

pub fn sidecar_path(csv_path: &str) -> String {
    format!("{csv_path}.json")
}

/// Run one scenario end to end.  Setup failures (grid, measure, initial
/// state, a reference the mode requires) surface before any file is
/// written; solver and diagnostic failures write the completed rows and the
/// sidecar first, then return the error.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    drive: Drive,
    quiet: bool,
    seed: Option<u64>,
) -> Result<()> {
    let started = Instant::now();
    let grid = cfg.build_grid()?;
    let mu = cfg.build_measure(&grid)?;
    let mut notes: Vec<String> = Vec::new();

    let needs_reference =
        drive == Drive::Analytic || matches!(cfg.init, InitSpec::Barenblatt);
    let reference = match build_reference(cfg) {
        Ok(asm) => Some(asm),
        Err(e) if needs_reference => return Err(e),
        Err(e) => {
            notes.push(format!(
                "no reference model on this horizon ({e}); relative columns are written as 0 \
                 and bochner_rhs uses alpha = 0"
            ));
            None
        }
    };
    if drive == Drive::Analytic && !matches!(cfg.init, InitSpec::Barenblatt) {
        return Err(Error::Invalid(
            "init.preset: the analytic mode samples the self-similar evolution; \
             set init.preset = barenblatt"
                .to_string(),
        ));
    }

    if cfg.grid.kind == GridKindSpec::Periodic {
        notes.push("second_moment is written as 0 on the periodic domain".to_string());
    }
    if cfg.params.c.finite_value().is_none() {
        notes.push(
            "hamiltonian and lagrangian are written as 0 outside the finite-speed regime"
                .to_string(),
        );
    }

    let (snaps, run_error) = match drive {
        Drive::Analytic => (analytic_snapshots(cfg, &grid, reference.as_ref().unwrap())?, None),
        Drive::Solver => {
            let (rho0, phi0) = build_initial(cfg, &grid, reference.as_ref())?;
            march(cfg, &grid, &mu, rho0, phi0)
        }
    };

    let ctx = RowContext { cfg, grid: &grid, mu: &mu, reference: reference.as_ref() };
    let mut records = Vec::with_capacity(snaps.len());
    let mut row_error: Option<Error> = None;
    for snap in &snaps {
        match base_row(&ctx, snap) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                row_error = Some(e);
                break;
            }
        }
    }

    let mut reference_columns = false;
    if let Some(asm) = reference.as_ref() {
        if records.len() >= 5 {
            match assemble_identity(asm, &mut records) {
                Ok(()) => reference_columns = true,
                Err(e) => notes.push(format!("relative columns are written as 0: {e}")),
            }
        } else {
            notes.push(
                "relative columns are written as 0: fewer than 5 rows for the stencils"
                    .to_string(),
            );
        }
    }

    let error = run_error.or(row_error);
    let meta = SidecarMeta {
        mode: match drive {
            Drive::Solver => "simulate",
            Drive::Analytic => "reference",
        },
        scheme: cfg.solver.scheme.name(),
        grid: match cfg.grid.kind {
            GridKindSpec::Periodic => "periodic",
            GridKindSpec::Radial => "radial",
        },
        points: grid.len(),
        spacing: grid.spacing(),
        rows: records.len(),
        reference_columns,
        seed,
        wall_clock_ms: started.elapsed().as_millis(),
        notes,
        error: error.as_ref().map(|e| e.to_string()),
    };
    let rows = records.len();
    write_outputs(cfg, &records, meta)?;
    match error {
        Some(e) => {
            if !quiet {
                eprintln!(
                    "run failed after {rows} rows: {e}; partial output kept at {}",
                    cfg.output.path
                );
            }
            Err(e)
        }
        None => {
            if !quiet {
                eprintln!("wrote {} ({rows} rows)", cfg.output.path);
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn torus_config(dir: &Path, c: &str) -> ScenarioConfig {
        let out = dir.join("run.csv");
        let text = format!(
            "model.gamma = 2.0\n\
             model.c = {c}\n\
             grid.kind = periodic\n\
             grid.points = 64\n\
             grid.length = 6.283185307179586\n\
             weight.preset = zero\n\
             init.preset = uniform-perturbed\n\
             init.amplitude = 0.2\n\
             time.delta = 1.0\n\
             time.t_end = 1.5\n\
             time.dt = 0.00125\n\
             time.diagnostic_stride = 50\n\
             solver.scheme = spectral-rk4\n\
             output.path = {}\n",
            out.display()
        );
        ScenarioConfig::from_text(&text, &[]).unwrap()
    }

    #[test]
    fn torus_run_writes_rows_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = torus_config(dir.path(), "1.0");
        run_scenario(&cfg, Drive::Solver, true, None).unwrap();
        let csv = std::fs::read_to_string(&cfg.output.path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 9);
        let side = std::fs::read_to_string(sidecar_path(&cfg.output.path)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&side).unwrap();
        assert_eq!(doc["meta"]["rows"], 9);
        assert!(doc["meta"]["error"].is_null());
        assert_eq!(doc["config"]["model.c"], "1.0");
    }

    #[test]
    fn partial_output_is_kept_when_the_step_is_too_large() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = torus_config(dir.path(), "0.05");
        // dt far above the relaxation stability bound c^2/4 = 6.25e-4
        cfg.time.dt = 0.00125;
        let err = run_scenario(&cfg, Drive::Solver, true, None).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }), "{err}");
        let csv = std::fs::read_to_string(&cfg.output.path).unwrap();
        // the initial row survives even though no step completed
        assert_eq!(csv.lines().count(), 2);
        let side = std::fs::read_to_string(sidecar_path(&cfg.output.path)).unwrap();
        assert!(side.contains("\"error\""));
        assert!(!side.contains("\"error\": null"));
    }

    #[test]
    fn initial_csv_round_trips_through_a_file_start(){
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::periodic(32, 1.0).unwrap();
        let mut text = String::from("x,rho,phi\n");
        for (i, &x) in grid.nodes().iter().enumerate() {
            text.push_str(&format!("{x},{},{}\n", 1.0 + 0.1 * (i as f64), -0.5));
        }
        let path = dir.path().join("init.csv");
        std::fs::write(&path, text).unwrap();
        let (rho, phi) = read_initial_csv(&grid, &path).unwrap();
        assert_eq!(rho.values()[10], 2.0);
        assert_eq!(phi.values()[31], -0.5);
        // wrong length is rejected
        let small = Grid::periodic(16, 1.0).unwrap();
        assert!(read_initial_csv(&small, &path).is_err());
    }
}
