//! Speed-limit convergence studies.
//!
//! Both studies run matched initial data across a sweep of transition
//! speeds against the corresponding limit solver on the same grid and the
//! same diagnostic times.  Time steps are not taken from the config: each
//! run probes its solver's stability guard once and then steps at half the
//! reported bound, rounded so the diagnostic interval is an exact multiple.
//! The geodesic study halves its horizon (at most three times, recorded in
//! the notes) when a run folds before the end.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use ottolab::model::Speed;
use ottolab::solver::Snapshot;
use ottolab::{
    entropy, geodesic_solve, langevin_solve, metrics, ops, pme_solve, DensityField, Error, Grid,
    PotentialField, Result, SolverConfig, WeightedMeasure,
};

use crate::config::{GridKindSpec, ScenarioConfig};
use crate::report::Verdict;
use crate::scenario::build_initial;

/// Diagnostic intervals per study horizon.
const INTERVALS: usize = 10;
/// Fraction of the probed stability bound actually stepped at.
const STEP_SAFETY: f64 = 0.5;
/// Horizon halvings allowed before a folding run aborts the study.
const MAX_SHRINKS: usize = 3;

#[derive(Debug, Serialize)]
pub struct StudyResult {
    pub id: String,
    /// recorded verbatim from the command line; sweeps are deterministic
    /// regardless of its value
    pub seed: Option<u64>,
    pub c_values: Vec<f64>,
    pub horizon: f64,
    pub metrics: BTreeMap<String, Vec<f64>>,
    pub extras: BTreeMap<String, f64>,
    pub fitted_order: Option<f64>,
    pub order_half_width: Option<f64>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl StudyResult {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| !v.applicable || v.pass)
    }
}

fn require_torus(cfg: &ScenarioConfig, what: &str) -> Result<()> {
    if cfg.grid.kind != GridKindSpec::Periodic {
        return Err(Error::Invalid(format!(
            "grid.kind: {what} compares smooth flows on the periodic grid"
        )));
    }
    Ok(())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Invalid(format!("--jobs: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// March one flow over `[t0, t0 + horizon]` with snapshots at the shared
/// diagnostic times.  The step is probed: one trial step at the diagnostic
/// spacing either succeeds (the bound is at least that coarse) or reports
/// the bound to subdivide against.
fn drive_flow(
    cfg: &ScenarioConfig,
    grid: &Grid,
    mu: &WeightedMeasure,
    rho0: &DensityField,
    phi0: &PotentialField,
    c: Speed,
    horizon: f64,
) -> Result<Vec<Snapshot>> {
    let t0 = cfg.time.delta;
    let spacing = horizon / INTERVALS as f64;
    let params = cfg.params.with_speed(c);
    let solve = |dt: f64, t_end: f64, stride: usize| -> Result<Vec<Snapshot>> {
        let run_cfg = SolverConfig {
            dt,
            t_end,
            cfl: cfg.solver.cfl,
            density_floor: cfg.solver.density_floor,
            diagnostic_stride: stride,
            scheme: cfg.solver.scheme,
        };
        let traj = match c {
            Speed::Zero => pme_solve(grid, mu, rho0, params.gamma, t0, &run_cfg)?,
            Speed::Finite(_) => langevin_solve(grid, mu, &params, rho0, phi0, t0, &run_cfg)?,
            Speed::Infinite => geodesic_solve(grid, mu, rho0, phi0, t0, &run_cfg)?,
        };
        Ok(traj.snapshots)
    };
    let substeps = match solve(spacing, t0 + spacing, 1) {
        Ok(_) => 2.0,
        Err(Error::CflViolation { bound, .. }) => {
            (spacing / (STEP_SAFETY * bound)).ceil().max(2.0)
        }
        Err(e) => return Err(e),
    };
    let snaps = solve(spacing / substeps, t0 + horizon, substeps as usize)?;
    if snaps.len() != INTERVALS + 1 {
        return Err(Error::Invalid(format!(
            "study run produced {} snapshots, expected {}",
            snaps.len(),
            INTERVALS + 1
        )));
    }
    Ok(snaps)
}

fn check_matched_times(a: &[Snapshot], b: &[Snapshot]) -> Result<()> {
    for (x, y) in a.iter().zip(b) {
        if (x.t - y.t).abs() > 1e-9 * x.t.abs().max(1.0) {
            return Err(Error::Invalid(format!(
                "diagnostic times diverged across the sweep: {} vs {}",
                x.t, y.t
            )));
        }
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x` with a two-sigma
/// half-width from the residuals.  Needs at least three points.
fn fit_order(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 3 || xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let half_width = 2.0 * (ss_res / (n as f64 - 2.0) / sxx).sqrt();
    Some((slope, half_width))
}

fn worst_nondecrease(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------------------
// Small-speed study
// ---------------------------------------------------------------------------

/// Compare damped runs against the diffusion limit: sup-in-time distance in
/// mass (L1) and in the modulated energy
/// `h(rho^c | rho^0) + (c^2/2) int rho^c |grad phi^c - grad phi^0|^2 dmu`.
pub fn converge_c_to_zero(
    cfg: &ScenarioConfig,
    c_list: &[f64],
    jobs: Option<usize>,
) -> Result<StudyResult> {
    require_torus(cfg, "the small-speed study")?;
    if cfg.params.potential_sign.value() < 0.0 {
        return Err(Error::Invalid(
            "model.potential_sign: the small-speed limit is the forward diffusion; use +1"
                .to_string(),
        ));
    }
    if c_list.is_empty() {
        return Err(Error::Invalid("the sweep needs at least one speed".to_string()));
    }
    for &c in c_list {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Invalid(format!(
                "sweep speeds must be finite and nonnegative, got {c}"
            )));
        }
    }
    for w in c_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Invalid(format!(
                "the sweep must be strictly decreasing toward 0, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let grid = cfg.build_grid()?;
    let mu = cfg.build_measure(&grid)?;
    let (rho0, phi0) = build_initial(cfg, &grid, None)?;
    let horizon = cfg.time.t_end - cfg.time.delta;
    let gamma = cfg.params.gamma;

    let base = drive_flow(cfg, &grid, &mu, &rho0, &phi0, Speed::Zero, horizon)?;
    let runs: Vec<Result<Vec<Snapshot>>> = with_pool(jobs, || {
        c_list
            .par_iter()
            .map(|&c| {
                let speed = Speed::finite_or_limit(c)?;
                drive_flow(cfg, &grid, &mu, &rho0, &phi0, speed, horizon)
            })
            .collect()
    })?;

    let mut sup_l1 = Vec::with_capacity(c_list.len());
    let mut sup_energy = Vec::with_capacity(c_list.len());
    for (i, run) in runs.into_iter().enumerate() {
        let snaps = run.map_err(|e| {
            Error::Degenerate(format!("sweep entry c = {} failed: {e}", c_list[i]))
        })?;
        check_matched_times(&snaps, &base)?;
        let mut l1 = 0.0f64;
        let mut energy = 0.0f64;
        for (s, b) in snaps.iter().zip(&base) {
            l1 = l1.max(metrics::l1_distance(&grid, &mu, s.rho.values(), b.rho.values()));
            let rel = entropy::relative_entropy(&grid, &mu, &s.rho, &b.rho, gamma)?;
            let du = ops::gradient(&grid, s.phi.values());
            let dv = ops::gradient(&grid, b.phi.values());
            let slip: Vec<f64> = s
                .rho
                .values()
                .iter()
                .zip(du.iter().zip(&dv))
                .map(|(&r, (u, v))| r * (u - v) * (u - v))
                .collect();
            let kin = 0.5 * c_list[i] * c_list[i] * ops::integrate(&grid, &mu, &slip);
            energy = energy.max(rel + kin);
        }
        sup_l1.push(l1);
        sup_energy.push(energy);
    }

    let fit_points: Vec<(f64, f64)> = c_list
        .iter()
        .zip(&sup_l1)
        .filter(|(&c, &e)| c > 0.0 && e > 0.0)
        .map(|(&c, &e)| (c, e))
        .collect();
    let fit = fit_order(
        &fit_points.iter().map(|p| p.0).collect::<Vec<_>>(),
        &fit_points.iter().map(|p| p.1).collect::<Vec<_>>(),
    );

    let mut verdicts = vec![
        Verdict::judged(
            "l1-strictly-decreasing",
            worst_nondecrease(&sup_l1),
            0.0,
            format!("sup-L1 distances along the sweep: {sup_l1:?}"),
        ),
        Verdict::judged(
            "modulated-energy-decreasing",
            worst_nondecrease(&sup_energy),
            0.0,
            format!("modulated energies along the sweep: {sup_energy:?}"),
        ),
    ];
    verdicts.push(match fit {
        Some((order, hw)) => Verdict::judged(
            "l1-order-in-[1.5,2.5]",
            (1.5 - order).max(order - 2.5),
            0.0,
            format!("fitted L1 order {order:.3} with half-width {hw:.3}"),
        ),
        None => Verdict::skip(
            "l1-order-in-[1.5,2.5]",
            "the fit needs at least 3 positive sweep points",
        ),
    });

    let mut metrics_map = BTreeMap::new();
    metrics_map.insert("sup_l1".to_string(), sup_l1);
    metrics_map.insert("sup_modulated_energy".to_string(), sup_energy);
    Ok(StudyResult {
        id: "converge-zero".to_string(),
        seed: None,
        c_values: c_list.to_vec(),
        horizon,
        metrics: metrics_map,
        extras: BTreeMap::new(),
        fitted_order: fit.map(|f| f.0),
        order_half_width: fit.map(|f| f.1),
        verdicts,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Large-speed study
// ---------------------------------------------------------------------------

/// Discrete `H^1` size of the symmetric variables `(p, u)` of a snapshot.
fn h1_pu(grid: &Grid, mu: &WeightedMeasure, gamma: f64, snap: &Snapshot) -> f64 {
    let p: Vec<f64> = snap
        .rho
        .values()
        .iter()
        .map(|&r| (r.powf(gamma - 1.0) - 1.0) / (gamma - 1.0))
        .collect();
    let dp = ops::gradient(grid, &p);
    let u = ops::gradient(grid, snap.phi.values());
    let du = ops::second_derivative(grid, snap.phi.values());
    (ops::inner_mu(grid, mu, &p, &p)
        + ops::inner_mu(grid, mu, &dp, &dp)
        + ops::inner_mu(grid, mu, &u, &u)
        + ops::inner_mu(grid, mu, &du, &du))
    .sqrt()
}

/// Compare damped runs against the geodesic limit: sup-in-time L2 distance
/// of the velocities, a transport-distance surrogate on the densities, and
/// the discrete `H^1` size of each damped run.
pub fn converge_c_to_infinity(
    cfg: &ScenarioConfig,
    c_list: &[f64],
    jobs: Option<usize>,
) -> Result<StudyResult> {
    require_torus(cfg, "the large-speed study")?;
    if c_list.is_empty() {
        return Err(Error::Invalid("the sweep needs at least one speed".to_string()));
    }
    for &c in c_list {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Invalid(format!(
                "sweep speeds must be finite and positive, got {c}"
            )));
        }
    }
    for w in c_list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Invalid(format!(
                "the sweep must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let grid = cfg.build_grid()?;
    let mu = cfg.build_measure(&grid)?;
    let (rho0, phi0) = build_initial(cfg, &grid, None)?;
    let gamma = cfg.params.gamma;
    let mut horizon = cfg.time.t_end - cfg.time.delta;
    let mut notes = Vec::new();

    let mut shrinks = 0;
    let (base, runs) = loop {
        let attempt = (|| -> Result<(Vec<Snapshot>, Vec<Vec<Snapshot>>)> {
            let base = drive_flow(cfg, &grid, &mu, &rho0, &phi0, Speed::Infinite, horizon)?;
            let runs: Vec<Result<Vec<Snapshot>>> = with_pool(jobs, || {
                c_list
                    .par_iter()
                    .map(|&c| {
                        drive_flow(cfg, &grid, &mu, &rho0, &phi0, Speed::Finite(c), horizon)
                    })
                    .collect()
            })?;
            let mut out = Vec::with_capacity(runs.len());
            for (i, r) in runs.into_iter().enumerate() {
                out.push(r.map_err(|e| match e {
                    Error::Caustic { t } => Error::Caustic { t },
                    other => Error::Degenerate(format!(
                        "sweep entry c = {} failed: {other}",
                        c_list[i]
                    )),
                })?);
            }
            Ok((base, out))
        })();
        match attempt {
            Ok(pair) => break pair,
            Err(Error::Caustic { t }) if shrinks < MAX_SHRINKS => {
                shrinks += 1;
                horizon /= 2.0;
                notes.push(format!(
                    "fold near t = {t}; horizon halved to {horizon}"
                ));
            }
            Err(e) => return Err(e),
        }
    };

    let mut sup_l2 = Vec::with_capacity(c_list.len());
    let mut sup_w2 = Vec::with_capacity(c_list.len());
    let mut sup_h1 = Vec::with_capacity(c_list.len());
    for run in &runs {
        check_matched_times(run, &base)?;
        let mut l2 = 0.0f64;
        let mut w2 = 0.0f64;
        let mut h1 = 0.0f64;
        for (s, b) in run.iter().zip(&base) {
            let u = ops::gradient(&grid, s.phi.values());
            let v = ops::gradient(&grid, b.phi.values());
            l2 = l2.max(metrics::l2_distance(&grid, &mu, &u, &v));
            w2 = w2.max(metrics::wasserstein2_1d(
                &grid,
                &mu,
                s.rho.values(),
                b.rho.values(),
            )?);
            h1 = h1.max(h1_pu(&grid, &mu, gamma, s));
        }
        sup_l2.push(l2);
        sup_w2.push(w2);
        sup_h1.push(h1);
    }

    let ke0 = entropy::kinetic_energy(&grid, &mu, &base[0].rho, &base[0].phi);
    let ke_drift = base
        .iter()
        .map(|s| (entropy::kinetic_energy(&grid, &mu, &s.rho, &s.phi) - ke0).abs())
        .fold(0.0f64, f64::max)
        / ke0.abs().max(f64::MIN_POSITIVE);

    let h1_start = h1_pu(&grid, &mu, gamma, &base[0]);
    let h1_worst = sup_h1.iter().cloned().fold(0.0f64, f64::max);

    let fit = fit_order(c_list, &sup_l2);

    let verdicts = vec![
        Verdict::judged(
            "l2-velocity-strictly-decreasing",
            worst_nondecrease(&sup_l2),
            0.0,
            format!("sup-L2 velocity distances along the sweep: {sup_l2:?}"),
        ),
        Verdict::judged(
            "transport-distance-decreasing",
            worst_nondecrease(&sup_w2),
            0.0,
            format!("transport-distance surrogates along the sweep: {sup_w2:?}"),
        ),
        Verdict::judged(
            "h1-uniformly-bounded",
            h1_worst - 1.5 * h1_start,
            0.0,
            format!("worst H1 size {h1_worst:.6} against 1.5x the initial {h1_start:.6}"),
        ),
        Verdict::judged(
            "kinetic-drift-within-1e-2",
            ke_drift - 1e-2,
            0.0,
            format!("relative kinetic-energy drift of the geodesic run: {ke_drift:.3e}"),
        ),
    ];

    let mut metrics_map = BTreeMap::new();
    metrics_map.insert("sup_l2_velocity".to_string(), sup_l2);
    metrics_map.insert("sup_w2_surrogate".to_string(), sup_w2);
    metrics_map.insert("sup_h1_pu".to_string(), sup_h1);
    let mut extras = BTreeMap::new();
    extras.insert("kinetic_drift".to_string(), ke_drift);
    extras.insert("h1_initial".to_string(), h1_start);
    Ok(StudyResult {
        id: "converge-inf".to_string(),
        seed: None,
        c_values: c_list.to_vec(),
        horizon,
        metrics: metrics_map,
        extras,
        // rate in inverse powers of the speed
        fitted_order: fit.map(|f| -f.0),
        order_half_width: fit.map(|f| f.1),
        verdicts,
        notes,
    })
}
