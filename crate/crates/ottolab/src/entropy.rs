//! Entropy functionals, their dissipation quantities, and the quadratic
//! forms appearing in the second-order calculus.
//!
//! The central object is the Renyi entropy
//!
//! ```text
//!     Ent_gamma(rho) = 1/(gamma-1) * int rho^gamma dmu,      gamma > 1,
//! ```
//!
//! together with its dissipation `int <grad rho^gamma, grad phi> dmu`, the
//! Fisher-type information `int |grad rho^gamma|^2 / rho dmu`, and the
//! Hessian quadratic form of a general internal energy `int V(rho) dmu`
//! along a velocity potential `phi`:
//!
//! ```text
//!     Hess V (phi, phi) = int [ P2 (L phi)^2 + P ( |Hess phi|^2 + Ric(L)(grad phi, grad phi) ) ] dmu
//! ```
//!
//! with pressure `P = rho V' - V` and iterated pressure `P2 = rho P' - P`.
//!
//! Fields carrying an analytic support radius are integrated over the closed
//! support only; integrands that contain difference stencils additionally
//! retreat `SUPPORT_ERODE_CELLS` cells from the free boundary, where the
//! profiles are one-sidedly smooth but their extensions by zero are not.

use crate::error::{Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::{Grid, GridKind};
use crate::measure::WeightedMeasure;
use crate::model::ModelParams;
use crate::ops;
use crate::tol;

/// Internal-energy density `V` with the derived pressures needed by the
/// second-order calculus.
pub enum PotentialSpec {
    /// `V(rho) = sign * rho^gamma / (gamma - 1)`, the Renyi potential.
    Renyi { gamma: f64, sign: f64 },
    /// Arbitrary potential; `p2` must equal `rho P' - P` of the supplied `p`.
    Custom {
        v: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        v_prime: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        p: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        p2: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl PotentialSpec {
    pub fn renyi(gamma: f64, sign: f64) -> Self {
        PotentialSpec::Renyi { gamma, sign }
    }

    pub fn v(&self, rho: f64) -> f64 {
        match self {
            PotentialSpec::Renyi { gamma, sign } => sign * rho.powf(*gamma) / (gamma - 1.0),
            PotentialSpec::Custom { v, .. } => v(rho),
        }
    }

    pub fn v_prime(&self, rho: f64) -> f64 {
        match self {
            PotentialSpec::Renyi { gamma, sign } => {
                sign * gamma * rho.powf(gamma - 1.0) / (gamma - 1.0)
            }
            PotentialSpec::Custom { v_prime, .. } => v_prime(rho),
        }
    }

    /// Pressure `P = rho V' - V`; equals `sign * rho^gamma` for Renyi.
    pub fn pressure(&self, rho: f64) -> f64 {
        match self {
            PotentialSpec::Renyi { gamma, sign } => sign * rho.powf(*gamma),
            PotentialSpec::Custom { p, .. } => p(rho),
        }
    }

    /// Iterated pressure `P2 = rho P' - P`; equals `sign (gamma-1) rho^gamma`
    /// for Renyi.
    pub fn p2(&self, rho: f64) -> f64 {
        match self {
            PotentialSpec::Renyi { gamma, sign } => sign * (gamma - 1.0) * rho.powf(*gamma),
            PotentialSpec::Custom { p2, .. } => p2(rho),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(Error::invalid(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(())
}

/// Quadrature weights for a density's integrands: support-split when the
/// density carries an analytic radius, full grid otherwise.  `erode` retreats
/// whole cells from the boundary for stencil-based integrands.
fn quad_weights(grid: &Grid, rho: &DensityField, erode: usize) -> Option<Vec<f64>> {
    rho.support_radius()
        .map(|r| ops::support_weights(grid, r, erode))
}

fn weighted_integral(
    grid: &Grid,
    mu: &WeightedMeasure,
    weights: &Option<Vec<f64>>,
    integrand: impl Fn(usize) -> f64,
) -> f64 {
    match weights {
        Some(w) => ops::compensated_sum((0..grid.len()).map(|i| {
            if w[i] == 0.0 {
                0.0
            } else {
                integrand(i) * w[i] * grid.volume_weight(i) * mu.exp_neg_f()[i]
            }
        })),
        None => ops::compensated_sum(
            (0..grid.len()).map(|i| integrand(i) * grid.volume_weight(i) * mu.exp_neg_f()[i]),
        ),
    }
}

/// Total mass `int rho dmu`.
pub fn mass(grid: &Grid, mu: &WeightedMeasure, rho: &DensityField) -> f64 {
    let w = quad_weights(grid, rho, 0);
    let v = rho.values();
    weighted_integral(grid, mu, &w, |i| v[i])
}

/// `Ent_gamma(rho) = 1/(gamma-1) int rho^gamma dmu`.
pub fn renyi_entropy(grid: &Grid, mu: &WeightedMeasure, rho: &DensityField, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let w = quad_weights(grid, rho, 0);
    let v = rho.values();
    Ok(weighted_integral(grid, mu, &w, |i| v[i].powf(gamma)) / (gamma - 1.0))
}

/// Second moment `int (|x|^2 / 2) rho dmu`; undefined on the circle.
pub fn second_moment(grid: &Grid, mu: &WeightedMeasure, rho: &DensityField) -> Result<f64> {
    if grid.is_periodic() {
        return Err(Error::Unsupported(
            "second moment is not defined on a periodic domain".into(),
        ));
    }
    let w = quad_weights(grid, rho, 0);
    let v = rho.values();
    let nodes = grid.nodes();
    Ok(weighted_integral(grid, mu, &w, |i| 0.5 * nodes[i] * nodes[i] * v[i]))
}

/// Relative Renyi entropy
/// `int [h(rho) - h(bar) - h'(bar)(rho - bar)] dmu`, `h(s) = s^gamma/(gamma-1)`.
///
/// The integrand is pointwise nonnegative by convexity of `h`; roundoff-level
/// negatives are clamped and anything larger is a defect.
pub fn relative_entropy(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    rho_ref: &DensityField,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let a = rho.values();
    let b = rho_ref.values();
    let gm = gamma - 1.0;
    let scale = rho
        .max()
        .max(rho_ref.max())
        .powf(gamma)
        .max(f64::MIN_POSITIVE);
    let mut integrand = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let h = a[i].powf(gamma) / gm;
        let hr = b[i].powf(gamma) / gm;
        let dh = gamma * b[i].powf(gm) / gm;
        let val = h - hr - dh * (a[i] - b[i]);
        if val < -1e-12 * scale {
            return Err(Error::invalid(format!(
                "relative entropy integrand negative beyond roundoff at node {i}: {val:.3e}"
            )));
        }
        integrand.push(val.max(0.0));
    }
    Ok(ops::integrate(grid, mu, &integrand))
}

fn cross_check(what: &str, primary: f64, secondary: f64) -> Result<()> {
    let diff = (primary - secondary).abs();
    let allowed = tol::CROSS_CHECK_FACTOR
        * (tol::IDENTITY_REL * primary.abs().max(secondary.abs())).max(tol::IDENTITY_ABS);
    if diff > allowed {
        return Err(Error::CrossCheck {
            what: what.to_string(),
            diff,
            allowed,
        });
    }
    Ok(())
}

/// Entropy dissipation `d/dt Ent_gamma(rho) = int <grad rho^gamma, grad phi> dmu`
/// along the continuity equation `dt rho = div*_mu (rho grad phi)`.
///
/// The algebraically equivalent route `-int (L phi) rho^gamma dmu` is
/// evaluated as a guard; disagreement beyond ten identity tolerances aborts.
pub fn entropy_time_derivative(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let rg: Vec<f64> = rho.values().iter().map(|&r| r.powf(gamma)).collect();
    let drg = ops::gradient(grid, &rg);
    let dphi = ops::gradient(grid, phi.values());
    let primary = weighted_integral(grid, mu, &w, |i| drg[i] * dphi[i]);

    let lphi = ops::witten_laplacian(grid, mu, phi.values());
    let secondary = -weighted_integral(grid, mu, &w, |i| lphi[i] * rg[i]);
    cross_check("entropy dissipation", primary, secondary)?;
    Ok(primary)
}

/// Fisher-type information `I_gamma(rho) = int |grad rho^gamma|^2 / rho dmu`,
/// the squared metric norm of the entropy gradient.
///
/// Vacuum cells (`rho <= 1e-12 max rho`) are excluded; the dual route
/// `int |grad (gamma rho^{gamma-1}/(gamma-1))|^2 rho dmu` is evaluated as a
/// guard.
pub fn fisher_information(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let floor = tol::VACUUM_FLOOR_REL * rho.max();
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let v = rho.values();
    let rg: Vec<f64> = v.iter().map(|&r| r.powf(gamma)).collect();
    let drg = ops::gradient(grid, &rg);
    let primary = weighted_integral(grid, mu, &w, |i| {
        if v[i] > floor {
            drg[i] * drg[i] / v[i]
        } else {
            0.0
        }
    });
    let dual = grad_entropy_norm_sq(grid, mu, rho, gamma)?;
    cross_check("Fisher information", primary, dual)?;
    Ok(primary)
}

/// Dual form of the Fisher information:
/// `|grad Ent_gamma|^2 = int |grad (gamma rho^{gamma-1}/(gamma-1))|^2 rho dmu`.
pub fn grad_entropy_norm_sq(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let v = rho.values();
    let pot: Vec<f64> = v
        .iter()
        .map(|&r| gamma * r.powf(gamma - 1.0) / (gamma - 1.0))
        .collect();
    let dpot = ops::gradient(grid, &pot);
    Ok(weighted_integral(grid, mu, &w, |i| dpot[i] * dpot[i] * v[i]))
}

/// Metric kinetic energy `1/2 int |grad phi|^2 rho dmu` (no factor `c^2`).
pub fn kinetic_energy(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
) -> f64 {
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let dphi = ops::gradient(grid, phi.values());
    let v = rho.values();
    0.5 * weighted_integral(grid, mu, &w, |i| dphi[i] * dphi[i] * v[i])
}

/// Hamiltonian and Lagrangian of the damped flow at finite speed:
///
/// ```text
///     H = (c^2/2) int |grad phi|^2 rho dmu + sign * Ent_gamma(rho)
///     L = (c^2/2) int |grad phi|^2 rho dmu - sign * Ent_gamma(rho)
/// ```
///
/// The limiting regimes `c = 0` and `c = infinity` have no finite Hamiltonian
/// of this form and are rejected.
pub fn hamiltonian_lagrangian(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let c = params.c.finite_value().ok_or_else(|| {
        Error::Unsupported("Hamiltonian/Lagrangian require a finite transition speed".into())
    })?;
    let kin = c * c * kinetic_energy(grid, mu, rho, phi);
    let pot = params.potential_sign.value() * renyi_entropy(grid, mu, rho, params.gamma)?;
    Ok((kin + pot, kin - pot))
}

/// First time derivative of the Lagrangian along the damped flow:
/// `dL/dt = -int <grad(phi + 2 V'(rho)), grad phi> rho dmu`.
pub fn lagrangian_time_derivative(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    params: &ModelParams,
) -> Result<f64> {
    check_gamma(params.gamma)?;
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let sign = params.potential_sign.value();
    let spec = PotentialSpec::renyi(params.gamma, sign);
    let vp: Vec<f64> = rho.values().iter().map(|&r| spec.v_prime(r)).collect();
    let dvp = ops::gradient(grid, &vp);
    let dphi = ops::gradient(grid, phi.values());
    let v = rho.values();
    Ok(-weighted_integral(grid, mu, &w, |i| {
        (dphi[i] + 2.0 * dvp[i]) * dphi[i] * v[i]
    }))
}

/// Second time derivative of the Lagrangian along the damped flow:
///
/// ```text
///     d^2L/dt^2 = (2/c^2) int |grad(phi + V'(rho))|^2 rho dmu
///                 - 2 sign * int rho^gamma [ |Hess phi|^2
///                        + Ric(L)(grad phi, grad phi) + (gamma-1)(L phi)^2 ] dmu
/// ```
///
/// For `sign = -1` both terms are nonnegative and the Lagrangian is convex in
/// time whenever `Ric(L) >= 0`.
pub fn lagrangian_second_derivative(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    params: &ModelParams,
) -> Result<f64> {
    let c = params.c.finite_value().ok_or_else(|| {
        Error::Unsupported("Lagrangian acceleration requires a finite transition speed".into())
    })?;
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let sign = params.potential_sign.value();
    let spec = PotentialSpec::renyi(params.gamma, sign);
    let vp: Vec<f64> = rho.values().iter().map(|&r| spec.v_prime(r)).collect();
    let dvp = ops::gradient(grid, &vp);
    let dphi = ops::gradient(grid, phi.values());
    let v = rho.values();
    let damping = weighted_integral(grid, mu, &w, |i| {
        let g = dphi[i] + dvp[i];
        g * g * v[i]
    });
    let hess = hessian_quadratic_form(
        grid,
        mu,
        rho,
        phi,
        &PotentialSpec::renyi(params.gamma, 1.0),
    )?;
    Ok(2.0 / (c * c) * damping - 2.0 * sign * hess)
}

/// Hessian quadratic form of the internal energy `int V(rho) dmu` along the
/// velocity potential `phi`:
/// `int [ P2 (L phi)^2 + P ( |Hess phi|^2 + Ric(L)(grad phi, grad phi) ) ] dmu`.
pub fn hessian_quadratic_form(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    spec: &PotentialSpec,
) -> Result<f64> {
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let dphi = ops::gradient(grid, phi.values());
    let d2phi = ops::second_derivative(grid, phi.values());
    let lphi = ops::witten_laplacian(grid, mu, phi.values());
    let v = rho.values();
    let nodes = grid.nodes();
    let tangential = match grid.kind() {
        GridKind::Periodic1d => 0.0,
        GridKind::Radial { ambient_dim } => ambient_dim as f64 - 1.0,
    };
    Ok(weighted_integral(grid, mu, &w, |i| {
        let hess_sq = d2phi[i] * d2phi[i]
            + if tangential > 0.0 {
                tangential * (dphi[i] / nodes[i]).powi(2)
            } else {
                0.0
            };
        let ric = mu.d2f()[i] * dphi[i] * dphi[i];
        spec.p2(v[i]) * lphi[i] * lphi[i] + spec.pressure(v[i]) * (hess_sq + ric)
    }))
}

/// Curvature-weighted Bochner integrand of the entropy power identities:
///
/// ```text
///     int rho^gamma [ |Hess phi - alpha g|^2 + Ric_{m,n}(L)(grad phi, grad phi)
///                     + (gamma-1)(L phi - m alpha)^2
///                     + (m-n)(<grad phi, grad f>/(m-n) + alpha)^2 ] dmu
/// ```
///
/// The `(m-n)` term is dropped in the `m = n` case (which in turn requires a
/// constant weight).  `params.n` must match the grid's ambient dimension.
pub fn bochner_rhs(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    alpha: f64,
    params: &ModelParams,
) -> Result<f64> {
    check_gamma(params.gamma)?;
    let d = grid.ambient_dim() as f64;
    if (params.n - d).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "topological dimension n = {} must equal the grid's ambient dimension {d}",
            params.n
        )));
    }
    let ric = ops::bakry_emery_curvature(grid, mu, params.m, params.n)?;
    let w = quad_weights(grid, rho, tol::SUPPORT_ERODE_CELLS);
    let dphi = ops::gradient(grid, phi.values());
    let d2phi = ops::second_derivative(grid, phi.values());
    let lphi = ops::witten_laplacian(grid, mu, phi.values());
    let v = rho.values();
    let nodes = grid.nodes();
    let gamma = params.gamma;
    let m = params.m;
    let excess = m - params.n;
    let tangential = d - 1.0;
    Ok(weighted_integral(grid, mu, &w, |i| {
        let hess_dev = {
            let radial = d2phi[i] - alpha;
            let tang = if tangential > 0.0 {
                tangential * (dphi[i] / nodes[i] - alpha).powi(2)
            } else {
                0.0
            };
            radial * radial + tang
        };
        let curv = ric[i] * dphi[i] * dphi[i];
        let trace_dev = (gamma - 1.0) * (lphi[i] - m * alpha).powi(2);
        let dim_corr = if excess > 1e-14 {
            excess * (dphi[i] * mu.df()[i] / excess + alpha).powi(2)
        } else {
            0.0
        };
        v[i].powf(gamma) * (hess_dev + curv + trace_dev + dim_corr)
    }))
}
