//! Symmetrizable first-order form of the finite-speed flow.
//!
//! Differentiating the potential equation and switching to the reduced
//! pressure `p = (rho^{gamma-1} - 1)/(gamma - 1)` and velocity `u = phi'`
//! turns the density/potential pair into a damped Euler system on the flat
//! periodic line:
//!
//! ```text
//!     dt p + u p' + ((gamma-1) p + 1) u' = 0,
//!     dt u + u u' + (gamma/c^2) p' + u/c^2 = 0.
//! ```
//!
//! The diagonal matrix `A0 = diag(1/((gamma-1)p + 1), c^2/gamma)` symmetrizes
//! the system while `(gamma-1)p + 1 = rho^{gamma-1}` stays positive, and
//! `E = int p^2/((gamma-1)p+1) + (c^2/gamma) u^2 dx` is the associated energy,
//! dissipated by the friction term.  The symmetrization needs the pressure
//! coupling and the friction to enter with the same sign, which restricts the
//! driver to the convex potential; it also works in the plain Lebesgue
//! measure, so weights stay outside this formulation.
//!
//! The variables `(p, u)` are not densities, so runs here are checked for
//! positivity of `(gamma-1)p + 1` and finiteness, not for mass conservation;
//! the potential-form drivers remain the conservative reference.

use crate::error::{ensure_finite, Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::Grid;
use crate::model::{ModelParams, PotentialSign};
use crate::ops;

use super::{check_cfl, max_abs, rk4_pair, step_count, Scheme, SolverConfig};

/// Positivity floor for `(gamma-1) p + 1`.
const PRESSURE_FLOOR: f64 = 1e-10;

/// Reduced pressure and velocity on a periodic grid.
#[derive(Debug, Clone)]
pub struct HyperbolicState {
    p: Vec<f64>,
    u: Vec<f64>,
}

impl HyperbolicState {
    pub fn new(grid: &Grid, gamma: f64, p: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() || u.len() != grid.len() {
            return Err(Error::invalid(format!(
                "state length {} / {} does not match the grid ({})",
                p.len(),
                u.len(),
                grid.len()
            )));
        }
        ensure_finite("reduced pressure", &p)?;
        ensure_finite("velocity", &u)?;
        let floor = p
            .iter()
            .map(|&q| (gamma - 1.0) * q + 1.0)
            .fold(f64::INFINITY, f64::min);
        if floor <= PRESSURE_FLOOR {
            return Err(Error::invalid(format!(
                "(gamma-1) p + 1 reaches {floor:.3e}; the state is at vacuum"
            )));
        }
        Ok(HyperbolicState { p, u })
    }

    /// Build the state from a positive density and a potential, with
    /// `u = phi'` taken spectrally.
    pub fn from_density_potential(
        grid: &Grid,
        gamma: f64,
        rho: &DensityField,
        phi: &PotentialField,
    ) -> Result<Self> {
        super::require_periodic(grid, "the symmetric-system state")?;
        let p = rho
            .values()
            .iter()
            .map(|&r| (r.powf(gamma - 1.0) - 1.0) / (gamma - 1.0))
            .collect();
        let u = ops::gradient(grid, phi.values());
        HyperbolicState::new(grid, gamma, p, u)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Invert the pressure map, `rho = ((gamma-1) p + 1)^{1/(gamma-1)}`.
    pub fn density(&self, grid: &Grid, gamma: f64) -> Result<DensityField> {
        let values = self
            .p
            .iter()
            .map(|&q| ((gamma - 1.0) * q + 1.0).powf(1.0 / (gamma - 1.0)))
            .collect();
        DensityField::new(grid, values)
    }

    /// Symmetrizer energy `int p^2/((gamma-1)p+1) + (c^2/gamma) u^2 dx`.
    pub fn energy(&self, grid: &Grid, gamma: f64, c: f64) -> f64 {
        let h = grid.spacing();
        self.p
            .iter()
            .zip(&self.u)
            .map(|(&p, &u)| p * p / ((gamma - 1.0) * p + 1.0) + c * c / gamma * u * u)
            .sum::<f64>()
            * h
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicSnapshot {
    pub t: f64,
    pub state: HyperbolicState,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct HyperbolicTrajectory {
    pub snapshots: Vec<HyperbolicSnapshot>,
}

impl HyperbolicTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &HyperbolicSnapshot {
        self.snapshots.last().expect("trajectory holds at least the initial snapshot")
    }
}

fn rhs(grid: &Grid, gamma: f64, inv_c2: f64, p: &[f64], u: &[f64], out_p: &mut [f64], out_u: &mut [f64]) {
    let dp = ops::gradient(grid, p);
    let du = ops::gradient(grid, u);
    for i in 0..p.len() {
        out_p[i] = -u[i] * dp[i] - ((gamma - 1.0) * p[i] + 1.0) * du[i];
        out_u[i] = -u[i] * du[i] - gamma * inv_c2 * dp[i] - inv_c2 * u[i];
    }
}

/// March the reduced pair from `t0` to `config.t_end` spectrally.
pub fn hyperbolic_solve(
    grid: &Grid,
    params: &ModelParams,
    state0: &HyperbolicState,
    t0: f64,
    config: &SolverConfig,
) -> Result<HyperbolicTrajectory> {
    let c = params.c.finite_value().ok_or_else(|| {
        Error::Unsupported(
            "the symmetric system is the finite-speed formulation; the limits have dedicated drivers"
                .into(),
        )
    })?;
    if params.potential_sign == PotentialSign::Negative {
        return Err(Error::Unsupported(
            "the concave potential flips the pressure coupling and loses the symmetrizer".into(),
        ));
    }
    super::require_periodic(grid, "the symmetric-system driver")?;
    if config.scheme != Scheme::SpectralRk4 {
        return Err(Error::Unsupported(
            "the symmetric-system driver is spectral only".into(),
        ));
    }
    if state0.p.len() != grid.len() {
        return Err(Error::invalid(format!(
            "state length {} does not match the grid ({})",
            state0.p.len(),
            grid.len()
        )));
    }
    if !(config.dt > 0.0 && config.dt.is_finite() && config.t_end.is_finite()) {
        return Err(Error::invalid(format!(
            "need a positive finite step and horizon, got dt = {}, t_end = {}",
            config.dt, config.t_end
        )));
    }
    let gamma = params.gamma;
    let inv_c2 = 1.0 / (c * c);
    let steps = step_count(t0, config.t_end, config.dt)?;

    let mut p = state0.p.clone();
    let mut u = state0.u.clone();
    let mut snapshots = vec![HyperbolicSnapshot {
        t: t0,
        state: state0.clone(),
        energy: state0.energy(grid, gamma, c),
    }];

    for j in 1..=steps {
        let pg_max = p
            .iter()
            .map(|&q| (gamma - 1.0) * q + 1.0)
            .fold(0.0f64, f64::max);
        let speed = max_abs(&u) + (gamma * pg_max).sqrt() / c;
        check_cfl(config.dt, config.cfl * grid.spacing() / speed, "characteristic limit")?;
        check_cfl(config.dt, c * c / 4.0, "relaxation stiffness limit")?;

        rk4_pair(&mut p, &mut u, config.dt, |pp, uu, op, ou| {
            rhs(grid, gamma, inv_c2, pp, uu, op, ou);
        });

        let t = t0 + j as f64 * config.dt;
        ensure_finite("reduced pressure", &p)?;
        ensure_finite("velocity", &u)?;
        let pg_min = p
            .iter()
            .map(|&q| (gamma - 1.0) * q + 1.0)
            .fold(f64::INFINITY, f64::min);
        if pg_min <= PRESSURE_FLOOR {
            return Err(Error::Degenerate(format!(
                "(gamma-1) p + 1 reached {pg_min:.3e} at t = {t}"
            )));
        }
        if j % config.diagnostic_stride == 0 || j == steps {
            let state = HyperbolicState { p: p.clone(), u: u.clone() };
            let energy = state.energy(grid, gamma, c);
            snapshots.push(HyperbolicSnapshot { t, state, energy });
        }
    }
    Ok(HyperbolicTrajectory { snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::WeightedMeasure;
    use crate::model::Speed;
    use crate::solver::langevin_solve;

    fn params(c: f64) -> ModelParams {
        ModelParams::new(2.0, 1.0, 1.0, Speed::Finite(c), PotentialSign::Positive).unwrap()
    }

    #[test]
    fn uniform_velocity_relaxes_exponentially() {
        let n = 64;
        let grid = Grid::periodic(n, 2.0 * std::f64::consts::PI).unwrap();
        let state0 = HyperbolicState::new(&grid, 2.0, vec![0.3; n], vec![0.2; n]).unwrap();
        let config = SolverConfig {
            dt: 1e-3,
            t_end: 0.5,
            cfl: 0.9,
            density_floor: 0.0,
            diagnostic_stride: 100,
            scheme: Scheme::SpectralRk4,
        };
        let traj = hyperbolic_solve(&grid, &params(1.0), &state0, 0.0, &config).unwrap();
        let last = traj.last();
        let expect = 0.2 * (-0.5f64).exp();
        for i in 0..n {
            assert!((last.state.p()[i] - 0.3).abs() < 1e-12);
            assert!((last.state.u()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn friction_dissipates_the_symmetrizer_energy() {
        let n = 128;
        let grid = Grid::periodic(n, 2.0 * std::f64::consts::PI).unwrap();
        let p0: Vec<f64> = grid.nodes().iter().map(|&x| 0.1 * x.sin()).collect();
        let state0 = HyperbolicState::new(&grid, 2.0, p0, vec![0.0; n]).unwrap();
        let config = SolverConfig {
            dt: 5e-4,
            t_end: 1.0,
            cfl: 0.9,
            density_floor: 0.0,
            diagnostic_stride: 200,
            scheme: Scheme::SpectralRk4,
        };
        let traj = hyperbolic_solve(&grid, &params(0.5), &state0, 0.0, &config).unwrap();
        let e0 = traj.snapshots[0].energy;
        let e1 = traj.last().energy;
        assert!(e0 > 0.0 && e1 > 0.0);
        assert!(e1 < 0.5 * e0, "energy {e1} did not decay from {e0}");
    }

    #[test]
    fn matches_the_potential_form_on_smooth_data() {
        let n = 128;
        let grid = Grid::periodic(n, 2.0 * std::f64::consts::PI).unwrap();
        let mu = WeightedMeasure::flat(&grid);
        let pr = params(1.0);
        let rho0 = DensityField::from_fn(&grid, |x| 1.0 + 0.2 * x.sin()).unwrap();
        let phi0 = PotentialField::new(&grid, vec![0.0; n]).unwrap();
        let config = SolverConfig {
            dt: 1e-3,
            t_end: 0.25,
            cfl: 0.9,
            density_floor: 0.0,
            diagnostic_stride: 50,
            scheme: Scheme::SpectralRk4,
        };

        let pot = langevin_solve(&grid, &mu, &pr, &rho0, &phi0, 0.0, &config).unwrap();
        let state0 = HyperbolicState::from_density_potential(&grid, 2.0, &rho0, &phi0).unwrap();
        let hyp = hyperbolic_solve(&grid, &pr, &state0, 0.0, &config).unwrap();

        let last_pot = pot.last();
        let last_hyp = hyp.last();
        let grad_phi = ops::gradient(&grid, last_pot.phi.values());
        let rho_hyp = last_hyp.state.density(&grid, 2.0).unwrap();
        let mut du = 0.0f64;
        let mut drho = 0.0f64;
        for i in 0..n {
            du = du.max((last_hyp.state.u()[i] - grad_phi[i]).abs());
            drho = drho.max((rho_hyp.values()[i] - last_pot.rho.values()[i]).abs());
        }
        assert!(du < 1e-6, "velocity mismatch {du}");
        assert!(drho < 1e-6, "density mismatch {drho}");
    }

    #[test]
    fn vacuum_and_concave_sign_are_refused() {
        let n = 64;
        let grid = Grid::periodic(n, 2.0 * std::f64::consts::PI).unwrap();
        assert!(matches!(
            HyperbolicState::new(&grid, 2.0, vec![-1.0; n], vec![0.0; n]),
            Err(Error::Invalid(_))
        ));

        let state0 = HyperbolicState::new(&grid, 2.0, vec![0.1; n], vec![0.0; n]).unwrap();
        let concave =
            ModelParams::new(2.0, 1.0, 1.0, Speed::Finite(1.0), PotentialSign::Negative).unwrap();
        let config = SolverConfig {
            dt: 1e-3,
            t_end: 0.1,
            cfl: 0.9,
            density_floor: 0.0,
            diagnostic_stride: 10,
            scheme: Scheme::SpectralRk4,
        };
        assert!(matches!(
            hyperbolic_solve(&grid, &concave, &state0, 0.0, &config),
            Err(Error::Unsupported(_))
        ));
    }
}
