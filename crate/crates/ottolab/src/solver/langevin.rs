//! Finite-speed deformation flow of a density--potential pair.
//!
//! ```text
//!     dt rho = div*_mu (rho grad phi),
//!     c^2 (dt phi + |grad phi|^2 / 2) = -phi - sign * gamma rho^{gamma-1} / (gamma - 1).
//! ```
//!
//! The periodic regime advances both fields spectrally; the radial regime
//! uses a conservative face flux with slope-reconstructed upwind densities
//! for the continuity equation and centered stencils for the potential.

use crate::error::{ensure_finite, Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::Grid;
use crate::measure::WeightedMeasure;
use crate::model::ModelParams;
use crate::ops;
use crate::tol;

use super::{
    cell_weights, check_cfl, check_density, check_run_mass, check_step_mass, max_abs, raw_mass,
    require_periodic, require_radial, rk4_pair, step_count, upwind_face_density, Scheme,
    Snapshot, SolverConfig, Trajectory,
};

fn pressure_potential(gamma: f64, rho: f64) -> f64 {
    gamma * rho.max(0.0).powf(gamma - 1.0) / (gamma - 1.0)
}

/// Largest signal speed of the pair: transport at `|grad phi|`, sound at
/// `sqrt(gamma rho^{gamma-1}) / c`.
fn signal_speed(params: &ModelParams, c: f64, dphi_max: f64, rho_max: f64) -> f64 {
    let sound = (params.gamma * rho_max.max(0.0).powf(params.gamma - 1.0)).sqrt() / c;
    dphi_max.max(sound)
}

fn spectral_rhs(
    grid: &Grid,
    mu: &WeightedMeasure,
    params: &ModelParams,
    c: f64,
    rho: &[f64],
    phi: &[f64],
    out_rho: &mut [f64],
    out_phi: &mut [f64],
) {
    let dphi = ops::gradient(grid, phi);
    let x: Vec<f64> = (0..grid.len()).map(|i| rho[i] * dphi[i]).collect();
    let adj = ops::weighted_divergence_adjoint(grid, mu, &x);
    let sign = params.potential_sign.value();
    let ic2 = 1.0 / (c * c);
    for i in 0..grid.len() {
        out_rho[i] = adj[i];
        out_phi[i] =
            -0.5 * dphi[i] * dphi[i] - ic2 * (phi[i] + sign * pressure_potential(params.gamma, rho[i]));
    }
}

fn upwind_rhs(
    grid: &Grid,
    params: &ModelParams,
    c: f64,
    weights: &[f64],
    rho: &[f64],
    phi: &[f64],
    out_rho: &mut [f64],
    out_phi: &mut [f64],
) {
    let n = grid.len();
    let h = grid.spacing();
    // face velocities; both boundary faces are closed (even mirror at r = 0,
    // wall at the outer edge)
    let mut v = vec![0.0; n + 1];
    for j in 1..n {
        v[j] = (phi[j] - phi[j - 1]) / h;
    }
    let face_rho = upwind_face_density(rho, &v);
    let face_w = |j: usize| -> f64 {
        if j == 0 || j == n {
            0.0
        } else {
            0.5 * (weights[j - 1] + weights[j])
        }
    };
    let mut flux = vec![0.0; n + 1];
    for (j, f) in flux.iter_mut().enumerate() {
        *f = face_w(j) * v[j] * face_rho[j];
    }
    let dphi = ops::gradient(grid, phi);
    let sign = params.potential_sign.value();
    let ic2 = 1.0 / (c * c);
    for i in 0..n {
        out_rho[i] = -(flux[i + 1] - flux[i]) / (weights[i] * h);
        out_phi[i] =
            -0.5 * dphi[i] * dphi[i] - ic2 * (phi[i] + sign * pressure_potential(params.gamma, rho[i]));
    }
}

/// One explicit four-stage step of the pair starting at time `t`.  Refuses
/// steps that violate the transport/sound bound `dt <= cfl h / speed` or the
/// relaxation bound `dt <= c^2 / 4`, and guards the completed step for
/// finiteness, vacuum and per-step mass drift.
pub fn langevin_step(
    grid: &Grid,
    mu: &WeightedMeasure,
    params: &ModelParams,
    rho: &DensityField,
    phi: &PotentialField,
    t: f64,
    config: &SolverConfig,
) -> Result<(DensityField, PotentialField)> {
    let c = params.c.finite_value().ok_or_else(|| {
        Error::Unsupported(
            "the deformation step needs a finite speed; the limits have dedicated drivers".into(),
        )
    })?;
    match config.scheme {
        Scheme::SpectralRk4 => require_periodic(grid, "the spectral deformation step")?,
        Scheme::CentralUpwind => require_radial(grid, "the flux-form deformation step")?,
    }

    let h = grid.spacing();
    let dphi0 = ops::gradient(grid, phi.values());
    let speed = signal_speed(params, c, max_abs(&dphi0), rho.max());
    if speed > 0.0 {
        check_cfl(config.dt, config.cfl * h / speed, "transport/sound limit")?;
    }
    check_cfl(config.dt, c * c / 4.0, "relaxation stiffness limit")?;

    let mut r: Vec<f64> = rho.values().to_vec();
    let mut p: Vec<f64> = phi.values().to_vec();
    let m_before = raw_mass(grid, mu, &r);
    match config.scheme {
        Scheme::SpectralRk4 => {
            rk4_pair(&mut r, &mut p, config.dt, |ri, pi, or, op| {
                spectral_rhs(grid, mu, params, c, ri, pi, or, op)
            });
        }
        Scheme::CentralUpwind => {
            let weights = cell_weights(grid, mu);
            rk4_pair(&mut r, &mut p, config.dt, |ri, pi, or, op| {
                upwind_rhs(grid, params, c, &weights, ri, pi, or, op)
            });
        }
    }

    let t_after = t + config.dt;
    check_density("deformation density", &r, config.density_floor, t_after)?;
    ensure_finite("deformation potential", &p)?;
    let m_after = raw_mass(grid, mu, &r);
    check_step_mass(m_before, m_after, t_after)?;

    let clamp = tol::DENSITY_UNDERSHOOT_REL * max_abs(&r);
    Ok((
        DensityField::from_raw_clamped(grid, r, clamp)?,
        PotentialField::new(grid, p)?,
    ))
}

/// March the pair from `t0` to `config.t_end`, collecting stride snapshots.
pub fn langevin_solve(
    grid: &Grid,
    mu: &WeightedMeasure,
    params: &ModelParams,
    rho0: &DensityField,
    phi0: &PotentialField,
    t0: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate(rho0.max())?;
    let steps = step_count(t0, config.t_end, config.dt)?;
    let m0 = raw_mass(grid, mu, rho0.values());

    let mut rho = rho0.clone();
    let mut phi = phi0.clone();
    let mut snapshots = vec![Snapshot { t: t0, rho: rho.clone(), phi: phi.clone() }];
    for j in 1..=steps {
        let t = t0 + (j - 1) as f64 * config.dt;
        let (r, p) = langevin_step(grid, mu, params, &rho, &phi, t, config)?;
        rho = r;
        phi = p;
        if j % config.diagnostic_stride == 0 || j == steps {
            let t = t0 + j as f64 * config.dt;
            check_run_mass(m0, raw_mass(grid, mu, rho.values()), t)?;
            snapshots.push(Snapshot { t, rho: rho.clone(), phi: phi.clone() });
        }
    }
    Ok(Trajectory { snapshots })
}
