//! Explicit time integrators for the four evolution systems.
//!
//! Two spatial regimes share the drivers: strictly positive densities on the
//! periodic grid advance with spectral derivatives and a classical four-stage
//! step, compactly supported densities on radial grids advance with
//! conservative face fluxes.  Identity checks run in the first regime; the
//! self-similar free-boundary tests run in the second.
//!
//! Every driver validates its time step against the scheme's stability bound
//! before stepping and refuses with a suggested step instead of producing
//! garbage.  Completed steps are guarded for finiteness, mass drift and
//! vacuum; transient stage values are not.

mod geodesic;
mod hyperbolic;
mod langevin;
mod pme;

pub use geodesic::geodesic_solve;
pub use hyperbolic::{
    hyperbolic_solve, HyperbolicSnapshot, HyperbolicState, HyperbolicTrajectory,
};
pub use langevin::{langevin_solve, langevin_step};
pub use pme::pme_solve;

use crate::error::{ensure_finite, Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::Grid;
use crate::measure::WeightedMeasure;
use crate::ops;
use crate::tol;

/// Spatial discretization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Periodic grid, spectral derivatives, four-stage explicit step.
    SpectralRk4,
    /// Radial grid, conservative face fluxes with upwind-biased
    /// reconstruction for transport terms.
    CentralUpwind,
}

impl Scheme {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "spectral-rk4" => Ok(Scheme::SpectralRk4),
            "central-upwind" => Ok(Scheme::CentralUpwind),
            other => Err(Error::invalid(format!(
                "unknown scheme '{other}' (expected spectral-rk4 or central-upwind)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SpectralRk4 => "spectral-rk4",
            Scheme::CentralUpwind => "central-upwind",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub density_floor: f64,
    pub diagnostic_stride: usize,
    pub scheme: Scheme,
}

impl SolverConfig {
    /// Validate against the initial state; the floor must sit far below the
    /// data so that clamping can never masquerade as dynamics.
    pub fn validate(&self, initial_max_rho: f64) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::invalid(format!("t_end must be finite, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::invalid(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.density_floor >= 0.0 && self.density_floor.is_finite()) {
            return Err(Error::invalid(format!(
                "density floor must be nonnegative, got {}",
                self.density_floor
            )));
        }
        if self.density_floor > 0.0 && self.density_floor >= 1e-6 * initial_max_rho {
            return Err(Error::invalid(format!(
                "density floor {} is not small next to the initial maximum {initial_max_rho}",
                self.density_floor
            )));
        }
        if self.diagnostic_stride == 0 {
            return Err(Error::invalid("diagnostic stride must be at least 1"));
        }
        Ok(())
    }
}

/// One diagnostic-time state of a density flow.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub rho: DensityField,
    pub phi: PotentialField,
}

/// Snapshots at stride multiples of the step, always including the initial
/// state and the final step.  When the step count is not a stride multiple
/// the last interval is shorter; identity assemblies that need uniform
/// spacing reject such tails.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectories hold at least the initial state")
    }
}

/// Number of steps covering `[t0, t_end]`; the interval must be an integer
/// multiple of `dt` so that diagnostic times line up exactly.
pub(crate) fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<usize> {
    let span = t_end - t0;
    if !(span > 0.0) {
        return Err(Error::invalid(format!(
            "t_end {t_end} must exceed the start time {t0}"
        )));
    }
    let n = (span / dt).round();
    if n < 1.0 || n > 1e9 {
        return Err(Error::invalid(format!(
            "step count {} out of range for dt = {dt}",
            span / dt
        )));
    }
    if (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::invalid(format!(
            "dt = {dt} does not divide the run interval {span} (nearest multiple {})",
            n * dt
        )));
    }
    Ok(n as usize)
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn min_value(values: &[f64]) -> f64 {
    values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Reject a step that outruns the scheme's stability region.
pub(crate) fn check_cfl(dt: f64, bound: f64, detail: &str) -> Result<()> {
    if dt > bound {
        return Err(Error::CflViolation {
            dt,
            bound,
            detail: detail.to_string(),
        });
    }
    Ok(())
}

/// Per-step conservation guard; conservative-form updates drift only at
/// roundoff level, so anything above the budget is a defect.
pub(crate) fn check_step_mass(m_before: f64, m_after: f64, t: f64) -> Result<()> {
    let drift = (m_after - m_before).abs();
    let budget = tol::MASS_DRIFT_PER_STEP * m_before.abs().max(1.0);
    if drift > budget {
        return Err(Error::MassDrift { drift, budget, t });
    }
    Ok(())
}

/// Whole-run conservation guard against the initial mass.
pub(crate) fn check_run_mass(m_initial: f64, m_now: f64, t: f64) -> Result<()> {
    let drift = (m_now - m_initial).abs();
    let budget = tol::MASS_DRIFT_RUN * m_initial.abs().max(1.0);
    if drift > budget {
        return Err(Error::MassDrift { drift, budget, t });
    }
    Ok(())
}

/// Completed-step density guard: finite everywhere, no undershoot beyond the
/// clamp tolerance, and no excursion below a positive vacuum floor.
pub(crate) fn check_density(what: &str, rho: &[f64], floor: f64, t: f64) -> Result<()> {
    ensure_finite(what, rho)?;
    let min = min_value(rho);
    let clamp = tol::DENSITY_UNDERSHOOT_REL * max_abs(rho);
    if min < -clamp {
        let index = rho.iter().position(|&v| v == min).unwrap_or(0);
        return Err(Error::NegativeDensity {
            what: format!("{what} at t = {t}"),
            min,
            index,
        });
    }
    if floor > 0.0 && min < floor {
        return Err(Error::Degenerate(format!(
            "{what} reached the vacuum floor at t = {t}: min {min:.3e} < floor {floor:.3e}"
        )));
    }
    Ok(())
}

pub(crate) fn require_periodic(grid: &Grid, what: &str) -> Result<()> {
    if !grid.is_periodic() {
        return Err(Error::Unsupported(format!(
            "{what} needs the periodic grid (got a radial one)"
        )));
    }
    Ok(())
}

pub(crate) fn require_radial(grid: &Grid, what: &str) -> Result<()> {
    if grid.is_periodic() {
        return Err(Error::Unsupported(format!(
            "{what} needs a radial grid (got the periodic one)"
        )));
    }
    Ok(())
}

/// Classical four-stage step for a coupled pair of fields, advancing both in
/// place.  `rhs(rho, phi, out_rho, out_phi)` must be a pure function of its
/// inputs.
pub(crate) fn rk4_pair(
    rho: &mut [f64],
    phi: &mut [f64],
    dt: f64,
    mut rhs: impl FnMut(&[f64], &[f64], &mut [f64], &mut [f64]),
) {
    let n = rho.len();
    let mut k1r = vec![0.0; n];
    let mut k1p = vec![0.0; n];
    let mut k2r = vec![0.0; n];
    let mut k2p = vec![0.0; n];
    let mut k3r = vec![0.0; n];
    let mut k3p = vec![0.0; n];
    let mut k4r = vec![0.0; n];
    let mut k4p = vec![0.0; n];
    let mut sr = vec![0.0; n];
    let mut sp = vec![0.0; n];

    rhs(rho, phi, &mut k1r, &mut k1p);
    for i in 0..n {
        sr[i] = rho[i] + 0.5 * dt * k1r[i];
        sp[i] = phi[i] + 0.5 * dt * k1p[i];
    }
    rhs(&sr, &sp, &mut k2r, &mut k2p);
    for i in 0..n {
        sr[i] = rho[i] + 0.5 * dt * k2r[i];
        sp[i] = phi[i] + 0.5 * dt * k2p[i];
    }
    rhs(&sr, &sp, &mut k3r, &mut k3p);
    for i in 0..n {
        sr[i] = rho[i] + dt * k3r[i];
        sp[i] = phi[i] + dt * k3p[i];
    }
    rhs(&sr, &sp, &mut k4r, &mut k4p);
    for i in 0..n {
        rho[i] += dt / 6.0 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
        phi[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
    }
}

/// Classical four-stage step for a single field.
pub(crate) fn rk4_single(
    v: &mut [f64],
    dt: f64,
    mut rhs: impl FnMut(&[f64], &mut [f64]),
) {
    let n = v.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut s = vec![0.0; n];

    rhs(v, &mut k1);
    for i in 0..n {
        s[i] = v[i] + 0.5 * dt * k1[i];
    }
    rhs(&s, &mut k2);
    for i in 0..n {
        s[i] = v[i] + 0.5 * dt * k2[i];
    }
    rhs(&s, &mut k3);
    for i in 0..n {
        s[i] = v[i] + dt * k3[i];
    }
    rhs(&s, &mut k4);
    for i in 0..n {
        v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Mass of raw density samples, `int rho dmu`.
pub(crate) fn raw_mass(grid: &Grid, mu: &WeightedMeasure, rho: &[f64]) -> f64 {
    ops::integrate(grid, mu, rho)
}

/// Cell weight density `omega r^{d-1} e^{-f}` used by conservative face
/// fluxes on radial grids (the cell measure divided by the spacing).
pub(crate) fn cell_weights(grid: &Grid, mu: &WeightedMeasure) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.len())
        .map(|i| grid.volume_weight(i) / h * mu.exp_neg_f()[i])
        .collect()
}

/// Slope-reconstructed upwind face values for transport of `rho` with face
/// velocities `v` (length `n + 1`, entries 0 and n are the closed
/// boundaries).  Central slopes keep second-order accuracy on smooth data;
/// face values are clamped nonnegative so that fronts cannot inject mass of
/// the wrong sign.
pub(crate) fn upwind_face_density(rho: &[f64], v: &[f64]) -> Vec<f64> {
    let n = rho.len();
    debug_assert_eq!(v.len(), n + 1);
    let slope = |i: usize| -> f64 {
        // even mirror at r = 0, one-sided at the outer edge
        let left = if i == 0 { rho[0] } else { rho[i - 1] };
        let right = if i == n - 1 { rho[n - 1] } else { rho[i + 1] };
        0.5 * (right - left)
    };
    let mut face = vec![0.0; n + 1];
    for j in 1..n {
        let up = if v[j] >= 0.0 { j - 1 } else { j };
        let s = slope(up);
        let value = if v[j] >= 0.0 {
            rho[up] + 0.5 * s
        } else {
            rho[up] - 0.5 * s
        };
        face[j] = value.max(0.0);
    }
    face
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_out_of_range_values() {
        let base = SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            cfl: 0.4,
            density_floor: 0.0,
            diagnostic_stride: 10,
            scheme: Scheme::SpectralRk4,
        };
        assert!(base.validate(1.0).is_ok());
        assert!(SolverConfig { dt: 0.0, ..base.clone() }.validate(1.0).is_err());
        assert!(SolverConfig { cfl: 1.5, ..base.clone() }.validate(1.0).is_err());
        assert!(SolverConfig { cfl: 0.0, ..base.clone() }.validate(1.0).is_err());
        assert!(SolverConfig { density_floor: -1.0, ..base.clone() }
            .validate(1.0)
            .is_err());
        assert!(SolverConfig { density_floor: 1e-3, ..base.clone() }
            .validate(1.0)
            .is_err());
        assert!(SolverConfig { diagnostic_stride: 0, ..base }.validate(1.0).is_err());
    }

    #[test]
    fn step_count_needs_divisible_interval() {
        assert_eq!(step_count(1.0, 2.0, 0.25).unwrap(), 4);
        assert_eq!(step_count(0.0, 1.0, 1e-3).unwrap(), 1000);
        assert!(step_count(1.0, 1.0, 0.1).is_err());
        assert!(step_count(1.0, 2.0, 0.3).is_err());
    }

    #[test]
    fn scheme_parsing_round_trips() {
        for s in [Scheme::SpectralRk4, Scheme::CentralUpwind] {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        assert!(Scheme::parse("upwind").is_err());
    }

    #[test]
    fn four_stage_step_is_fourth_order_on_a_scalar() {
        // dy/dt = y with y(0) = 1; the one-step error against e^{dt} is
        // O(dt^5), so halving dt must shrink it about 32-fold
        let err = |dt: f64| {
            let mut y = vec![1.0];
            rk4_single(&mut y, dt, |v, out| out[0] = v[0]);
            (y[0] - dt.exp()).abs()
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        assert!(e1 < 1e-7, "one-step error {e1}");
        let ratio = e1 / e2;
        assert!((25.0..40.0).contains(&ratio), "order ratio {ratio}");
    }
}
