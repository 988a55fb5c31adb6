//! Pressureless limit of the deformation flow.
//!
//! ```text
//!     dt rho = adj(rho grad phi),
//!     dt phi = -|grad phi|^2 / 2,
//! ```
//!
//! the geodesic equations of the transport metric written in the
//! density/potential chart.  The pair is the canonical Hamiltonian flow of
//! the kinetic energy `K = (1/2) int |grad phi|^2 rho dmu`, so `K` is
//! conserved along every run and its drift is a solver diagnostic.
//!
//! Geodesics fold in finite time once the velocity field compresses:
//! `grad phi` develops a shock and the density concentrates.  Each step is
//! preceded by a fold check on `max|phi''| dt`, and a trip surfaces as
//! [`Error::Caustic`] with the breakdown time instead of a garbage state.

use crate::error::{ensure_finite, Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::Grid;
use crate::measure::WeightedMeasure;
use crate::ops;
use crate::tol;

use super::{
    cell_weights, check_cfl, check_density, check_run_mass, max_abs, raw_mass, rk4_pair,
    step_count, upwind_face_density, Scheme, Snapshot, SolverConfig, Trajectory,
};

fn spectral_rhs(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &[f64],
    phi: &[f64],
    out_rho: &mut [f64],
    out_phi: &mut [f64],
) {
    let dphi = ops::gradient(grid, phi);
    let x: Vec<f64> = rho.iter().zip(&dphi).map(|(&r, &d)| r * d).collect();
    let adj = ops::weighted_divergence_adjoint(grid, mu, &x);
    out_rho.copy_from_slice(&adj);
    for i in 0..phi.len() {
        out_phi[i] = -0.5 * dphi[i] * dphi[i];
    }
}

fn upwind_rhs(
    grid: &Grid,
    weights: &[f64],
    rho: &[f64],
    phi: &[f64],
    out_rho: &mut [f64],
    out_phi: &mut [f64],
) {
    let n = grid.len();
    let h = grid.spacing();
    let mut v = vec![0.0; n + 1];
    for j in 1..n {
        v[j] = (phi[j] - phi[j - 1]) / h;
    }
    let face_rho = upwind_face_density(rho, &v);
    let mut flux = vec![0.0; n + 1];
    for j in 1..n {
        let face_w = 0.5 * (weights[j - 1] + weights[j]);
        flux[j] = face_w * v[j] * face_rho[j];
    }
    for i in 0..n {
        out_rho[i] = -(flux[i + 1] - flux[i]) / (weights[i] * h);
    }
    let dphi = ops::gradient(grid, phi);
    for i in 0..n {
        out_phi[i] = -0.5 * dphi[i] * dphi[i];
    }
}

/// March the pair from `t0` to `config.t_end`.
///
/// Both grids are supported: periodic with the spectral scheme, radial with
/// the flux-form scheme.  The advective step bound uses `max|grad phi|`;
/// there is no relaxation bound because the flow has no stiff source.
pub fn geodesic_solve(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho0: &DensityField,
    phi0: &PotentialField,
    t0: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate(rho0.max())?;
    match config.scheme {
        Scheme::SpectralRk4 => super::require_periodic(grid, "the spectral geodesic driver")?,
        Scheme::CentralUpwind => super::require_radial(grid, "the flux-form geodesic driver")?,
    }
    let steps = step_count(t0, config.t_end, config.dt)?;
    let weights = cell_weights(grid, mu);

    let mut rho: Vec<f64> = rho0.values().to_vec();
    let mut phi: Vec<f64> = phi0.values().to_vec();
    let m0 = raw_mass(grid, mu, &rho);
    let clamp0 = tol::DENSITY_UNDERSHOOT_REL * max_abs(&rho);
    let mut snapshots = vec![Snapshot {
        t: t0,
        rho: DensityField::from_raw_clamped(grid, rho.clone(), clamp0)?,
        phi: PotentialField::new(grid, phi.clone())?,
    }];

    for j in 1..=steps {
        let t = t0 + (j - 1) as f64 * config.dt;
        let fold = max_abs(&ops::second_derivative(grid, &phi)) * config.dt;
        if fold > tol::CAUSTIC_PRODUCT {
            return Err(Error::Caustic { t });
        }
        let speed = max_abs(&ops::gradient(grid, &phi));
        if speed > 0.0 {
            check_cfl(config.dt, config.cfl * grid.spacing() / speed, "transport limit")?;
        }

        match config.scheme {
            Scheme::SpectralRk4 => rk4_pair(&mut rho, &mut phi, config.dt, |r, p, or, op| {
                spectral_rhs(grid, mu, r, p, or, op);
            }),
            Scheme::CentralUpwind => rk4_pair(&mut rho, &mut phi, config.dt, |r, p, or, op| {
                upwind_rhs(grid, &weights, r, p, or, op);
            }),
        }

        let t_after = t0 + j as f64 * config.dt;
        check_density("geodesic density", &rho, config.density_floor, t_after)?;
        ensure_finite("geodesic potential", &phi)?;
        if j % config.diagnostic_stride == 0 || j == steps {
            check_run_mass(m0, raw_mass(grid, mu, &rho), t_after)?;
            let clamp = tol::DENSITY_UNDERSHOOT_REL * max_abs(&rho);
            snapshots.push(Snapshot {
                t: t_after,
                rho: DensityField::from_raw_clamped(grid, rho.clone(), clamp)?,
                phi: PotentialField::new(grid, phi.clone())?,
            });
        }
    }
    Ok(Trajectory { snapshots })
}
