//! Rescaled entropy functionals along self-similar solutions.
//!
//! With `E(t) = A u(t)^{2-1/k}` the entropy of the moving profile, the
//! relative quantities of an arbitrary flow `(rho, phi)` are
//!
//! ```text
//!     H(t) = Ent_gamma(rho(t)) - E(t),
//!     I(t) = I_gamma(rho(t)) - (1-2k) A u^{2(1-1/k)},
//! ```
//!
//! and the weighted combination `W = a H + b H'` obeys, in the three speed
//! regimes and with `alpha = u'/u`,
//!
//! ```text
//!     finite c:   W'/b + I/c^2 = Q_alpha(rho, phi),
//!     c = 0:      W'           = 2 b Q_alpha(rho, phi),
//!     c = inf:    W'           = b Q_alpha(rho, phi),
//! ```
//!
//! where `Q_alpha` is the curvature-weighted quadratic form of
//! [`crate::entropy::bochner_rhs`].  The coefficients `(a, b)` are
//!
//! ```text
//!     c = 0:      a = (2-2k) t^{1-2k},      b = t^{2-2k},
//!     c = inf:    a = (1/k-1) t^{1/k-2},    b = t^{1/k-1},
//!     finite c:   b'' = p b' + (p' - q) b,  a = p b - b',
//! ```
//!
//! with `p = 2 alpha (1/k - 1) + 1/c^2` and `q = (1/k-2)(1/k-1) alpha^2`, so
//! that in all regimes
//!
//! ```text
//!     (a + b')/b = 2 alpha (1/k-1) + 1/c^2,    a'/b = q          (finite c),
//!     (a + b')/b = 4 alpha (1/k-1),            a'/b = 2 q        (c = 0),
//!     (a + b')/b = 2 alpha (1/k-1),            a'/b = q          (c = inf).
//! ```
//!
//! The limiting-regime closed forms assume the canonical scale normalization
//! `u = t^k` respectively `u = t`.
//!
//! The un-rescaled counterparts (`alpha = 0`, entropy instead of `H`) are the
//! three dissipation identities assembled by
//! [`variational_identity_sides`]:
//!
//! ```text
//!     finite c:   Ent'' + Ent'/c^2 + sign * I_gamma / c^2 = Q_0,
//!     c = 0:      Ent''                                   = 2 Q_0,
//!     c = inf:    Ent''                                   = Q_0.
//! ```

use crate::diagnostics::fd_derivative_uniform;
use crate::entropy;
use crate::error::{Error, Result};
use crate::field::{DensityField, PotentialField};
use crate::grid::Grid;
use crate::measure::WeightedMeasure;
use crate::model::{ModelParams, Speed};
use crate::reference::{ScalingInit, SelfSimilarModel};

// ---------------------------------------------------------------------------
// Coefficients a(t), b(t)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum WEntropyCoefficients {
    /// c = 0 closed form (assumes `u = t^k`)
    GradientFlow { k: f64 },
    /// c = infinity closed form (assumes `u = t`)
    Geodesic { k: f64 },
    /// finite speed, integrated alongside the scale equation
    Damped(DampedWCoefficients),
}

#[derive(Debug, Clone)]
pub struct DampedWCoefficients {
    pub c: f64,
    pub k: f64,
    pub delta: f64,
    dt: f64,
    times: Vec<f64>,
    a: Vec<f64>,
    da: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
    d2b: Vec<f64>,
}

impl WEntropyCoefficients {
    /// Coefficients with the gradient-flow-compatible start
    /// `b(delta) = delta^{2-2k}`, `b'(delta) = (2-2k) delta^{1-2k}`.
    pub fn build(
        params: &ModelParams,
        delta: f64,
        t_end: f64,
        dt: f64,
        init: ScalingInit,
    ) -> Result<Self> {
        let k = params.k();
        let b0 = delta.powf(2.0 - 2.0 * k);
        let db0 = (2.0 - 2.0 * k) * delta.powf(1.0 - 2.0 * k);
        Self::build_with(params, delta, t_end, dt, init, b0, db0)
    }

    /// Coefficients with caller-chosen `b(delta)`, `b'(delta)` (finite speed
    /// only; the limiting regimes always use their closed forms).
    pub fn build_with(
        params: &ModelParams,
        delta: f64,
        t_end: f64,
        dt: f64,
        init: ScalingInit,
        b0: f64,
        db0: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && t_end > delta && dt > 0.0) {
            return Err(Error::invalid(format!(
                "coefficient horizon must satisfy 0 < delta < t_end with a positive step, \
                 got [{delta}, {t_end}] at {dt}"
            )));
        }
        let k = params.k();
        let c = match params.c {
            Speed::Zero => return Ok(WEntropyCoefficients::GradientFlow { k }),
            Speed::Infinite => return Ok(WEntropyCoefficients::Geodesic { k }),
            Speed::Finite(c) => c,
        };
        if !(b0 > 0.0) {
            return Err(Error::Degenerate(format!(
                "normalizing coefficient must start positive, got {b0}"
            )));
        }
        let c2 = c * c;
        let q1 = 1.0 / k - 1.0;
        let q2 = 1.0 / k - 2.0;
        // state y = [u, u', b, b']
        let rhs = |y: &[f64; 4]| -> Result<[f64; 4]> {
            if y[0] <= 0.0 {
                return Err(Error::Degenerate(
                    "scale factor non-positive in the coefficient solve".into(),
                ));
            }
            let d2u = (k * y[0].powf(1.0 - 1.0 / k) - y[1]) / c2;
            let alpha = y[1] / y[0];
            let dalpha = d2u / y[0] - alpha * alpha;
            let p = 2.0 * alpha * q1 + 1.0 / c2;
            let dp = 2.0 * dalpha * q1;
            let q = q2 * q1 * alpha * alpha;
            Ok([y[1], d2u, y[3], p * y[3] + (dp - q) * y[2]])
        };

        let steps = ((t_end - delta) / dt).round().max(1.0) as usize;
        let dt = (t_end - delta) / steps as f64;
        let mut y = [init.u0, init.du0, b0, db0];
        let mut times = Vec::with_capacity(steps + 1);
        let mut a = Vec::with_capacity(steps + 1);
        let mut da = Vec::with_capacity(steps + 1);
        let mut b = Vec::with_capacity(steps + 1);
        let mut db = Vec::with_capacity(steps + 1);
        let mut d2b = Vec::with_capacity(steps + 1);
        let push = |t: f64,
                        y: &[f64; 4],
                        times: &mut Vec<f64>,
                        a: &mut Vec<f64>,
                        da: &mut Vec<f64>,
                        b: &mut Vec<f64>,
                        db: &mut Vec<f64>,
                        d2b: &mut Vec<f64>|
         -> Result<()> {
            if !(y[2] > 0.0) {
                return Err(Error::Degenerate(format!(
                    "normalizing coefficient crossed zero near t = {t}"
                )));
            }
            let f = rhs(y)?;
            let alpha = y[1] / y[0];
            let p = 2.0 * alpha * q1 + 1.0 / c2;
            times.push(t);
            a.push(p * y[2] - y[3]);
            da.push(q2 * q1 * alpha * alpha * y[2]);
            b.push(y[2]);
            db.push(y[3]);
            d2b.push(f[3]);
            Ok(())
        };
        push(delta, &y, &mut times, &mut a, &mut da, &mut b, &mut db, &mut d2b)?;
        for j in 0..steps {
            y = rk4_step4(y, dt, &rhs)?;
            push(
                delta + (j + 1) as f64 * dt,
                &y,
                &mut times,
                &mut a,
                &mut da,
                &mut b,
                &mut db,
                &mut d2b,
            )?;
        }
        Ok(WEntropyCoefficients::Damped(DampedWCoefficients {
            c,
            k,
            delta,
            dt,
            times,
            a,
            da,
            b,
            db,
            d2b,
        }))
    }

    pub fn speed(&self) -> Speed {
        match self {
            WEntropyCoefficients::GradientFlow { .. } => Speed::Zero,
            WEntropyCoefficients::Geodesic { .. } => Speed::Infinite,
            WEntropyCoefficients::Damped(d) => Speed::Finite(d.c),
        }
    }

    pub fn a_at(&self, t: f64) -> Result<f64> {
        match self {
            WEntropyCoefficients::GradientFlow { k } => {
                check_positive_time(t)?;
                Ok((2.0 - 2.0 * k) * t.powf(1.0 - 2.0 * k))
            }
            WEntropyCoefficients::Geodesic { k } => {
                check_positive_time(t)?;
                Ok((1.0 / k - 1.0) * t.powf(1.0 / k - 2.0))
            }
            WEntropyCoefficients::Damped(d) => d.sample(t, &d.a, &d.da),
        }
    }

    pub fn b_at(&self, t: f64) -> Result<f64> {
        match self {
            WEntropyCoefficients::GradientFlow { k } => {
                check_positive_time(t)?;
                Ok(t.powf(2.0 - 2.0 * k))
            }
            WEntropyCoefficients::Geodesic { k } => {
                check_positive_time(t)?;
                Ok(t.powf(1.0 / k - 1.0))
            }
            WEntropyCoefficients::Damped(d) => d.sample(t, &d.b, &d.db),
        }
    }

    pub fn db_at(&self, t: f64) -> Result<f64> {
        match self {
            WEntropyCoefficients::GradientFlow { k } => {
                check_positive_time(t)?;
                Ok((2.0 - 2.0 * k) * t.powf(1.0 - 2.0 * k))
            }
            WEntropyCoefficients::Geodesic { k } => {
                check_positive_time(t)?;
                Ok((1.0 / k - 1.0) * (1.0 / k - 2.0) * t.powf(1.0 / k - 3.0) * t)
            }
            WEntropyCoefficients::Damped(d) => d.sample(t, &d.db, &d.d2b),
        }
    }

    /// `W = a H + b H'` at one instant.
    pub fn w_at(&self, t: f64, h: f64, h_dot: f64) -> Result<f64> {
        Ok(self.a_at(t)? * h + self.b_at(t)? * h_dot)
    }
}

fn check_positive_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "closed-form coefficients need t > 0, got {t}"
        )))
    }
}

impl DampedWCoefficients {
    fn sample(&self, t: f64, values: &[f64], slopes: &[f64]) -> Result<f64> {
        let last = *self.times.last().unwrap();
        if t < self.delta - 1e-12 || t > last + 1e-12 {
            return Err(Error::invalid(format!(
                "time {t} outside the coefficient horizon [{}, {last}]",
                self.delta
            )));
        }
        let pos = ((t - self.delta) / self.dt).floor();
        let j = (pos as usize).min(self.times.len() - 2);
        let s = (t - self.times[j]) / self.dt;
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * values[j]
            + (s3 - 2.0 * s2 + s) * slopes[j] * self.dt
            + (-2.0 * s3 + 3.0 * s2) * values[j + 1]
            + (s3 - s2) * slopes[j + 1] * self.dt)
    }
}

fn rk4_step4(
    y: [f64; 4],
    dt: f64,
    rhs: &impl Fn(&[f64; 4]) -> Result<[f64; 4]>,
) -> Result<[f64; 4]> {
    let add = |a: &[f64; 4], b: &[f64; 4], w: f64| {
        [a[0] + w * b[0], a[1] + w * b[1], a[2] + w * b[2], a[3] + w * b[3]]
    };
    let k1 = rhs(&y)?;
    let k2 = rhs(&add(&y, &k1, 0.5 * dt))?;
    let k3 = rhs(&add(&y, &k2, 0.5 * dt))?;
    let k4 = rhs(&add(&y, &k3, dt))?;
    let mut out = y;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Relative quantities against a moving profile
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RelativeQuantities {
    /// entropy of the state minus the profile's closed form
    pub h: f64,
    /// dissipation-formula entropy rate minus the profile's closed form
    pub h_dot: f64,
    /// Fisher information minus the profile's closed form
    pub i_rel: f64,
}

pub fn relative_quantities(
    model: &SelfSimilarModel,
    grid: &Grid,
    mu: &WeightedMeasure,
    rho: &DensityField,
    phi: &PotentialField,
    t: f64,
) -> Result<RelativeQuantities> {
    if grid.is_periodic() {
        return Err(Error::Unsupported(
            "relative quantities compare a density on the line against the \
             self-similar profile; periodic densities have no matching profile"
                .into(),
        ));
    }
    let gamma = model.params.gamma;
    let h = entropy::renyi_entropy(grid, mu, rho, gamma)? - model.entropy_at(t)?;
    let h_dot =
        entropy::entropy_time_derivative(grid, mu, rho, phi, gamma)? - model.entropy_rate_at(t)?;
    let i_rel =
        entropy::fisher_information(grid, mu, rho, gamma)? - model.grad_entropy_norm_sq_at(t)?;
    Ok(RelativeQuantities { h, h_dot, i_rel })
}

/// Scalar-series form of [`relative_quantities`] for flows on any geometry:
/// subtracts the closed-form reference laws from precomputed entropy,
/// dissipation and Fisher series.  The identities built from these values are
/// insensitive to the subtraction (the reference terms cancel through the
/// coefficient equations), so this is valid even when the flow does not live
/// on the reference's line domain.
pub fn relative_series(
    model: &SelfSimilarModel,
    times: &[f64],
    ent: &[f64],
    dent_dt: &[f64],
    fisher: &[f64],
) -> Result<Vec<RelativeQuantities>> {
    check_same_len("relative series", times, &[ent, dent_dt, fisher])?;
    let mut out = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        out.push(RelativeQuantities {
            h: ent[j] - model.entropy_at(times[j])?,
            h_dot: dent_dt[j] - model.entropy_rate_at(times[j])?,
            i_rel: fisher[j] - model.grad_entropy_norm_sq_at(times[j])?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Identity assembly on diagnostic time series
// ---------------------------------------------------------------------------

/// Matched left- and right-hand sides of an identity on a shared time grid.
#[derive(Debug, Clone)]
pub struct IdentitySeries {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl IdentitySeries {
    pub fn max_residual(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max)
    }

    /// Largest magnitude on either side, the natural scale for relative
    /// residuals.
    pub fn scale(&self) -> f64 {
        self.lhs
            .iter()
            .chain(&self.rhs)
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 5 {
        return Err(Error::invalid(format!(
            "identity series needs at least 5 snapshots, got {}",
            times.len()
        )));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::invalid("identity series times must increase"));
    }
    for j in 1..times.len() {
        let expect = times[0] + j as f64 * dt;
        if (times[j] - expect).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::invalid(format!(
                "identity series must be uniformly spaced, node {j} is {} not {expect}",
                times[j]
            )));
        }
    }
    Ok(dt)
}

fn check_same_len(what: &str, times: &[f64], series: &[&[f64]]) -> Result<()> {
    for s in series {
        if s.len() != times.len() {
            return Err(Error::invalid(format!(
                "{what}: series length {} does not match {} time nodes",
                s.len(),
                times.len()
            )));
        }
    }
    Ok(())
}

/// Dissipation identities of the un-rescaled entropy.
///
/// `q0` is the curvature quadratic form at `alpha = 0` (equivalently the
/// Hessian form of the entropy with unit sign) evaluated on each snapshot.
/// The entropy second derivative is formed by differentiating the
/// dissipation-formula series `dent_dt` once, not the entropy twice.
pub fn variational_identity_sides(
    params: &ModelParams,
    times: &[f64],
    dent_dt: &[f64],
    fisher: &[f64],
    q0: &[f64],
) -> Result<IdentitySeries> {
    let dt = uniform_spacing(times)?;
    check_same_len("dissipation identity", times, &[dent_dt, fisher, q0])?;
    let d2ent = fd_derivative_uniform(dent_dt, dt)?;
    let sign = params.potential_sign.value();
    let n = times.len();
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    match params.c {
        Speed::Finite(c) => {
            let ic2 = 1.0 / (c * c);
            for j in 0..n {
                lhs.push(d2ent[j] + ic2 * dent_dt[j] + sign * ic2 * fisher[j]);
                rhs.push(q0[j]);
            }
        }
        Speed::Zero => {
            for j in 0..n {
                lhs.push(d2ent[j]);
                rhs.push(2.0 * q0[j]);
            }
        }
        Speed::Infinite => {
            for j in 0..n {
                lhs.push(d2ent[j]);
                rhs.push(q0[j]);
            }
        }
    }
    Ok(IdentitySeries { times: times.to_vec(), lhs, rhs })
}

/// Rescaled-entropy identity on a diagnostic series.
///
/// `q_alpha` holds the curvature quadratic form evaluated with the moving
/// profile's `alpha = u'/u` at each snapshot.  `W = a h + b h_dot` is
/// differenced by the wide uniform stencil, and the sides follow the regime:
/// `W'/b + i_rel/c^2 = q_alpha` at finite speed, `W' = 2 b q_alpha` in the
/// gradient-flow limit, `W' = b q_alpha` in the geodesic limit.
pub fn w_formula_sides(
    coeffs: &WEntropyCoefficients,
    times: &[f64],
    h: &[f64],
    h_dot: &[f64],
    i_rel: &[f64],
    q_alpha: &[f64],
) -> Result<IdentitySeries> {
    let dt = uniform_spacing(times)?;
    check_same_len("rescaled identity", times, &[h, h_dot, i_rel, q_alpha])?;
    let n = times.len();
    let mut w = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for j in 0..n {
        w.push(coeffs.w_at(times[j], h[j], h_dot[j])?);
        b.push(coeffs.b_at(times[j])?);
    }
    let dw = fd_derivative_uniform(&w, dt)?;
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    match coeffs.speed() {
        Speed::Finite(c) => {
            let ic2 = 1.0 / (c * c);
            for j in 0..n {
                lhs.push(dw[j] / b[j] + ic2 * i_rel[j]);
                rhs.push(q_alpha[j]);
            }
        }
        Speed::Zero => {
            for j in 0..n {
                lhs.push(dw[j]);
                rhs.push(2.0 * b[j] * q_alpha[j]);
            }
        }
        Speed::Infinite => {
            for j in 0..n {
                lhs.push(dw[j]);
                rhs.push(b[j] * q_alpha[j]);
            }
        }
    }
    Ok(IdentitySeries { times: times.to_vec(), lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSign;

    fn params(c: Speed) -> ModelParams {
        ModelParams::new(2.0, 1.0, 1.0, c, PotentialSign::Positive).unwrap()
    }

    const K: f64 = 1.0 / 3.0;

    #[test]
    fn damped_coefficients_match_independent_integration() {
        // golden values from an independent high-order solve of the joint
        // (u, u', b, b') system: c = 1, delta = 1, u(1) = 1, u'(1) = 1/3,
        // b(1) = 1, b'(1) = 4/3
        let pr = params(Speed::Finite(1.0));
        let co = WEntropyCoefficients::build(
            &pr,
            1.0,
            2.0,
            1e-4,
            ScalingInit::canonical(Speed::Finite(1.0), K, 1.0),
        )
        .unwrap();
        let b2 = co.b_at(2.0).unwrap();
        let a2 = co.a_at(2.0).unwrap();
        assert!((b2 - 4.48780561659101).abs() < 1e-10, "b(2) = {b2}");
        assert!((a2 - 1.3031332281064).abs() < 1e-9, "a(2) = {a2}");
    }

    fn fd_ratios(co: &WEntropyCoefficients, t: f64) -> (f64, f64) {
        // ((a + b')/b, a'/b) by centered differences of the public samplers
        let h = 1e-5;
        let a = co.a_at(t).unwrap();
        let b = co.b_at(t).unwrap();
        let dbv = (co.b_at(t + h).unwrap() - co.b_at(t - h).unwrap()) / (2.0 * h);
        let dav = (co.a_at(t + h).unwrap() - co.a_at(t - h).unwrap()) / (2.0 * h);
        ((a + dbv) / b, dav / b)
    }

    #[test]
    fn coefficient_ratios_in_the_three_regimes() {
        let q1 = 1.0 / K - 1.0;
        let q2 = 1.0 / K - 2.0;

        let gf = WEntropyCoefficients::build(
            &params(Speed::Zero),
            1.0,
            3.0,
            1e-3,
            ScalingInit::canonical(Speed::Zero, K, 1.0),
        )
        .unwrap();
        let geo = WEntropyCoefficients::build(
            &params(Speed::Infinite),
            1.0,
            3.0,
            1e-3,
            ScalingInit::canonical(Speed::Infinite, K, 1.0),
        )
        .unwrap();
        let pr = params(Speed::Finite(0.8));
        let damped = WEntropyCoefficients::build(
            &pr,
            1.0,
            3.0,
            1e-4,
            ScalingInit::canonical(Speed::Finite(0.8), K, 1.0),
        )
        .unwrap();
        let scaling = crate::reference::scaling_ode_solve(
            &pr,
            1.0,
            3.0,
            1e-4,
            ScalingInit::canonical(Speed::Finite(0.8), K, 1.0),
        )
        .unwrap();

        for &t in &[1.2, 1.7, 2.3] {
            let (p, q) = fd_ratios(&gf, t);
            let alpha = K / t;
            assert!((p - 4.0 * alpha * q1).abs() < 1e-7 * p.abs());
            assert!((q - 2.0 * q2 * q1 * alpha * alpha).abs() < 1e-6 * q.abs());

            let (p, q) = fd_ratios(&geo, t);
            let alpha = 1.0 / t;
            assert!((p - 2.0 * alpha * q1).abs() < 1e-7 * p.abs());
            assert!((q - q2 * q1 * alpha * alpha).abs() < 1e-6 * q.abs());

            let (p, q) = fd_ratios(&damped, t);
            let alpha = scaling.alpha1_at(t).unwrap();
            let want_p = 2.0 * alpha * q1 + 1.0 / 0.64;
            let want_q = q2 * q1 * alpha * alpha;
            assert!((p - want_p).abs() < 1e-6 * want_p.abs(), "{p} vs {want_p}");
            assert!((q - want_q).abs() < 1e-5 * want_q.abs(), "{q} vs {want_q}");
        }
    }

    #[test]
    fn coefficient_sign_loss_is_reported() {
        let pr = params(Speed::Finite(1.0));
        let res = WEntropyCoefficients::build_with(
            &pr,
            1.0,
            3.0,
            1e-3,
            ScalingInit::canonical(Speed::Finite(1.0), K, 1.0),
            1.0,
            -20.0,
        );
        assert!(matches!(res, Err(Error::Degenerate(_))));
    }

    #[test]
    fn nonuniform_series_is_rejected() {
        let co = WEntropyCoefficients::GradientFlow { k: K };
        let times = [1.0, 1.1, 1.25, 1.3, 1.4];
        let z = [0.0; 5];
        assert!(w_formula_sides(&co, &times, &z, &z, &z, &z).is_err());
    }

    #[test]
    fn w_matches_differenced_rescaled_entropy() {
        // in the gradient-flow regime a = b', so a H + b H' is the exact
        // derivative of b(t) H(t); differencing b H on a smooth synthetic
        // series must reproduce w_at up to the stencil's truncation error
        let co = WEntropyCoefficients::GradientFlow { k: K };
        let dt = 0.1;
        let times: Vec<f64> = (0..9).map(|j| 1.0 + dt * j as f64).collect();
        let h: Vec<f64> = times.iter().map(|&t| (0.3 * t).sin() + 0.5 * t).collect();
        let h_dot: Vec<f64> = times.iter().map(|&t| 0.3 * (0.3 * t).cos() + 0.5).collect();
        let bh: Vec<f64> = times
            .iter()
            .zip(&h)
            .map(|(&t, &v)| t.powf(2.0 - 2.0 * K) * v)
            .collect();
        let dbh = fd_derivative_uniform(&bh, dt).unwrap();
        for j in 0..times.len() {
            let w = co.w_at(times[j], h[j], h_dot[j]).unwrap();
            assert!(
                (w - dbh[j]).abs() < 1e-4,
                "node {j}: product-rule value {w} vs differenced {}",
                dbh[j]
            );
        }
    }

    #[test]
    fn identities_vanish_on_the_moving_profile() {
        // sample the exact self-similar state on a fine line grid; both
        // sides of the rescaled identity and of the dissipation identity
        // must be small compared to the natural scale A of the entropy
        let pr = params(Speed::Finite(1.0));
        let init = ScalingInit::canonical(Speed::Finite(1.0), K, 1.0);
        let model = SelfSimilarModel::build(&pr, 1.0, 2.0, 1e-4, init).unwrap();
        let co = WEntropyCoefficients::build(&pr, 1.0, 2.0, 1e-4, init).unwrap();
        let grid = Grid::radial(4096, 4.0, 1).unwrap();
        let mu = WeightedMeasure::flat(&grid);

        let times: Vec<f64> = (0..9).map(|j| 1.2 + 0.05 * j as f64).collect();
        let mut h = Vec::new();
        let mut h_dot = Vec::new();
        let mut i_rel = Vec::new();
        let mut q_alpha = Vec::new();
        let mut dent = Vec::new();
        let mut fisher = Vec::new();
        let mut q0 = Vec::new();
        for &t in &times {
            let (rho, phi) = model.state_at(&grid, t).unwrap();
            let rq = relative_quantities(&model, &grid, &mu, &rho, &phi, t).unwrap();
            h.push(rq.h);
            h_dot.push(rq.h_dot);
            i_rel.push(rq.i_rel);
            let alpha = model.scaling.alpha1_at(t).unwrap();
            q_alpha.push(entropy::bochner_rhs(&grid, &mu, &rho, &phi, alpha, &pr).unwrap());
            dent.push(entropy::entropy_time_derivative(&grid, &mu, &rho, &phi, pr.gamma).unwrap());
            fisher.push(entropy::fisher_information(&grid, &mu, &rho, pr.gamma).unwrap());
            q0.push(entropy::bochner_rhs(&grid, &mu, &rho, &phi, 0.0, &pr).unwrap());
        }

        let w_sides = w_formula_sides(&co, &times, &h, &h_dot, &i_rel, &q_alpha).unwrap();
        let scale = model.profile.entropy;
        assert!(
            w_sides.max_residual() < 2e-2 * scale,
            "rescaled identity residual {} on the exact profile",
            w_sides.max_residual()
        );

        let v_sides = variational_identity_sides(&pr, &times, &dent, &fisher, &q0).unwrap();
        // on the profile both sides are genuinely nonzero; they must agree
        let vscale = v_sides.scale();
        assert!(vscale > 0.01, "dissipation identity sides degenerate: {vscale}");
        assert!(
            v_sides.max_residual() < 2e-2 * vscale,
            "dissipation identity residual {} at scale {vscale}",
            v_sides.max_residual()
        );
    }
}
