//! Differential operators and quadrature against the weighted measure.
//!
//! Periodic grids are differentiated spectrally (exact on resolved modes, the
//! Nyquist bin of odd-order derivatives is zeroed).  Radial grids use
//! second-order central differences with an even/odd mirror across `r = 0`
//! (cell-centered nodes make the reflection exact) and one-sided closures at
//! the outer edge.
//!
//! Sign conventions:
//!
//! * weighted adjoint of the gradient: `div*_mu X = -X' + f' X` on the line,
//!   `-X' - (d-1) X / r + f' X` radially, so that
//!   `<grad u, X>_mu = <u, div*_mu X>_mu`;
//! * Witten Laplacian `L u = -div*_mu grad u = u'' + (d-1) u'/r - f' u'`;
//! * Bakry-Emery tensor on flat geometry: `Ric_{m,n}(L) = f'' - (f')^2/(m-n)`
//!   (radial component), with `m = n` admissible only for constant `f`.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind};
use crate::measure::WeightedMeasure;

pub mod spectral {
    //! FFT-based derivatives on the periodic grid, with per-size plan reuse.

    use rustfft::num_complex::Complex;
    use rustfft::{Fft, FftPlanner};
    use std::cell::RefCell;
    use std::collections::HashMap;
    use std::rc::Rc;
    use std::sync::Arc;

    struct Plans {
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    }

    thread_local! {
        static PLAN_CACHE: RefCell<HashMap<usize, Rc<Plans>>> = RefCell::new(HashMap::new());
    }

    fn plans_for(n: usize) -> Rc<Plans> {
        PLAN_CACHE.with(|cache| {
            cache
                .borrow_mut()
                .entry(n)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    Rc::new(Plans {
                        fwd: planner.plan_fft_forward(n),
                        inv: planner.plan_fft_inverse(n),
                    })
                })
                .clone()
        })
    }

    /// Differentiation engine bound to one grid size and period.
    pub struct Spectral {
        n: usize,
        /// 2 pi j / L with the Nyquist bin zeroed; used for odd derivatives.
        k_odd: Vec<f64>,
        /// full squared wavenumbers, used for even derivatives.
        k_sq: Vec<f64>,
        plans: Rc<Plans>,
        buf: RefCell<Vec<Complex<f64>>>,
    }

    impl Spectral {
        pub fn new(n: usize, period: f64) -> Self {
            let base = 2.0 * std::f64::consts::PI / period;
            let mut k_odd = vec![0.0; n];
            let mut k_sq = vec![0.0; n];
            for j in 0..n {
                let jj = if 2 * j < n { j as f64 } else { j as f64 - n as f64 };
                let k = base * jj;
                k_sq[j] = k * k;
                k_odd[j] = if n % 2 == 0 && j == n / 2 { 0.0 } else { k };
            }
            Spectral {
                n,
                k_odd,
                k_sq,
                plans: plans_for(n),
                buf: RefCell::new(vec![Complex::default(); n]),
            }
        }

        fn transform(&self, v: &[f64], out: &mut [f64], scale: impl Fn(usize) -> Complex<f64>) {
            let mut buf = self.buf.borrow_mut();
            for (b, &x) in buf.iter_mut().zip(v) {
                *b = Complex::new(x, 0.0);
            }
            self.plans.fwd.process(&mut buf);
            for (j, b) in buf.iter_mut().enumerate() {
                *b *= scale(j);
            }
            self.plans.inv.process(&mut buf);
            let norm = 1.0 / self.n as f64;
            for (o, b) in out.iter_mut().zip(buf.iter()) {
                *o = b.re * norm;
            }
        }

        pub fn derivative_into(&self, v: &[f64], out: &mut [f64]) {
            debug_assert_eq!(v.len(), self.n);
            self.transform(v, out, |j| Complex::new(0.0, self.k_odd[j]));
        }

        pub fn second_derivative_into(&self, v: &[f64], out: &mut [f64]) {
            debug_assert_eq!(v.len(), self.n);
            self.transform(v, out, |j| Complex::new(-self.k_sq[j], 0.0));
        }

        pub fn derivative(&self, v: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; self.n];
            self.derivative_into(v, &mut out);
            out
        }

        pub fn second_derivative(&self, v: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; self.n];
            self.second_derivative_into(v, &mut out);
            out
        }
    }
}

pub(crate) mod stencil {
    //! Central differences on the cell-centered radial grid.

    /// Parity of the even/odd reflection across r = 0.  Scalars extend
    /// evenly; radial components of vector fields extend oddly.
    #[derive(Clone, Copy, PartialEq, Eq)]
    pub enum Parity {
        Even,
        Odd,
    }

    impl Parity {
        fn sign(self) -> f64 {
            match self {
                Parity::Even => 1.0,
                Parity::Odd => -1.0,
            }
        }
    }

    /// First derivative: central interior, mirrored at r = 0, one-sided
    /// 3-point at the outer edge.
    pub fn derivative(v: &[f64], h: f64, parity: Parity) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; n];
        let s = parity.sign();
        out[0] = (v[1] - s * v[0]) / (2.0 * h);
        for i in 1..n - 1 {
            out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        }
        out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        out
    }

    /// Second derivative: central interior, mirrored at r = 0, one-sided
    /// 5-point at the outer edge.
    pub fn second_derivative(v: &[f64], h: f64, parity: Parity) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; n];
        let h2 = h * h;
        let s = parity.sign();
        out[0] = (v[1] - 2.0 * v[0] + s * v[0]) / h2;
        for i in 1..n - 1 {
            out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
        }
        out[n - 1] = (35.0 * v[n - 1] - 104.0 * v[n - 2] + 114.0 * v[n - 3] - 56.0 * v[n - 4]
            + 11.0 * v[n - 5])
            / (12.0 * h2);
        out
    }
}

/// Neumaier-compensated sum; quadrature tolerances in this crate sit near
/// 1e-12 and naive accumulation over 10^5 nodes would eat the budget.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// d/dx of a scalar field (radial component on radial grids).
pub fn gradient(grid: &Grid, v: &[f64]) -> Vec<f64> {
    match grid.kind() {
        GridKind::Periodic1d => {
            spectral::Spectral::new(grid.len(), grid.extent()).derivative(v)
        }
        GridKind::Radial { .. } => stencil::derivative(v, grid.spacing(), stencil::Parity::Even),
    }
}

/// d^2/dx^2 of a scalar field.
pub fn second_derivative(grid: &Grid, v: &[f64]) -> Vec<f64> {
    match grid.kind() {
        GridKind::Periodic1d => {
            spectral::Spectral::new(grid.len(), grid.extent()).second_derivative(v)
        }
        GridKind::Radial { .. } => {
            stencil::second_derivative(v, grid.spacing(), stencil::Parity::Even)
        }
    }
}

/// Weighted adjoint `div*_mu X` of the gradient, acting on the radial
/// component `X` of a vector field.
pub fn weighted_divergence_adjoint(grid: &Grid, mu: &WeightedMeasure, x: &[f64]) -> Vec<f64> {
    match grid.kind() {
        GridKind::Periodic1d => {
            let dx = spectral::Spectral::new(grid.len(), grid.extent()).derivative(x);
            (0..grid.len()).map(|i| -dx[i] + mu.df()[i] * x[i]).collect()
        }
        GridKind::Radial { ambient_dim } => {
            let parity = if ambient_dim % 2 == 0 {
                // r^{d-1} X extends with sign (-1)^d across r = 0
                stencil::Parity::Even
            } else {
                stencil::Parity::Odd
            };
            let nodes = grid.nodes();
            let w: Vec<f64> = (0..grid.len())
                .map(|i| nodes[i].powi(ambient_dim as i32 - 1) * mu.exp_neg_f()[i] * x[i])
                .collect();
            let dw = stencil::derivative(&w, grid.spacing(), parity);
            (0..grid.len())
                .map(|i| -dw[i] / (nodes[i].powi(ambient_dim as i32 - 1) * mu.exp_neg_f()[i]))
                .collect()
        }
    }
}

/// Witten Laplacian `L u = Delta u - f' u'`.
pub fn witten_laplacian(grid: &Grid, mu: &WeightedMeasure, u: &[f64]) -> Vec<f64> {
    match grid.kind() {
        GridKind::Periodic1d => {
            let sp = spectral::Spectral::new(grid.len(), grid.extent());
            let du = sp.derivative(u);
            let d2u = sp.second_derivative(u);
            (0..grid.len()).map(|i| d2u[i] - mu.df()[i] * du[i]).collect()
        }
        GridKind::Radial { ambient_dim } => {
            let du = stencil::derivative(u, grid.spacing(), stencil::Parity::Even);
            let d2u = stencil::second_derivative(u, grid.spacing(), stencil::Parity::Even);
            let nodes = grid.nodes();
            (0..grid.len())
                .map(|i| {
                    d2u[i] + (ambient_dim as f64 - 1.0) * du[i] / nodes[i] - mu.df()[i] * du[i]
                })
                .collect()
        }
    }
}

/// Radial component of `Ric_{m,n}(L) = Ric + Hess f - (f' (x) f')/(m-n)` on
/// flat ambient geometry: `f'' - (f')^2 / (m - n)`.
///
/// The degenerate case `m = n` is admissible only when the weight is
/// constant, in which case the tensor vanishes identically.
pub fn bakry_emery_curvature(
    grid: &Grid,
    mu: &WeightedMeasure,
    m: f64,
    n: f64,
) -> Result<Vec<f64>> {
    if m < n {
        return Err(Error::invalid(format!("curvature needs m >= n, got m = {m}, n = {n}")));
    }
    if (m - n).abs() < 1e-14 {
        if !mu.is_constant() {
            return Err(Error::invalid(
                "m = n requires a constant weight; nonconstant f has no finite \
                 dimensional correction"
                    .to_string(),
            ));
        }
        return Ok(vec![0.0; grid.len()]);
    }
    Ok((0..grid.len())
        .map(|i| mu.d2f()[i] - mu.df()[i] * mu.df()[i] / (m - n))
        .collect())
}

/// `int v dmu` by the rectangle rule (periodic) or the cell-centered midpoint
/// rule carrying the `omega_{d-1} r^{d-1}` volume weight (radial).
pub fn integrate(grid: &Grid, mu: &WeightedMeasure, v: &[f64]) -> f64 {
    debug_assert_eq!(v.len(), grid.len());
    compensated_sum(
        (0..grid.len()).map(|i| v[i] * grid.volume_weight(i) * mu.exp_neg_f()[i]),
    )
}

/// `int a b dmu`.
pub fn inner_mu(grid: &Grid, mu: &WeightedMeasure, a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(
        (0..grid.len()).map(|i| a[i] * b[i] * grid.volume_weight(i) * mu.exp_neg_f()[i]),
    )
}

/// Per-node quadrature scale factors restricting integration to the closed
/// ball of the given radius.
///
/// With `erode_cells = 0` the cell straddling the support boundary keeps the
/// covered fraction of its weight (the integrands in question vanish
/// continuously at the edge, so the fractional midpoint weight is second-order
/// accurate).  Stencil-based integrands pass `erode_cells >= 2` to discard
/// every node whose difference stencil could reach across the free boundary,
/// where one-sided kinks of the analytic profiles would otherwise produce
/// arbitrarily large pointwise errors.
pub fn support_weights(grid: &Grid, radius: f64, erode_cells: usize) -> Vec<f64> {
    let h = grid.spacing();
    let cut = radius - erode_cells as f64 * h;
    grid.nodes()
        .iter()
        .map(|&r| {
            let lo = r - 0.5 * h;
            let hi = r + 0.5 * h;
            if hi <= cut {
                1.0
            } else if lo >= cut {
                0.0
            } else {
                (cut - lo) / h
            }
        })
        .collect()
}

/// `int v dmu` restricted to the closed support of a profile of known radius.
pub fn integrate_supported(grid: &Grid, mu: &WeightedMeasure, v: &[f64], radius: f64) -> f64 {
    if grid.is_periodic() {
        return integrate(grid, mu, v);
    }
    let w = support_weights(grid, radius, 0);
    compensated_sum(
        (0..grid.len()).map(|i| v[i] * w[i] * grid.volume_weight(i) * mu.exp_neg_f()[i]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n: usize) -> Grid {
        Grid::periodic(n, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn spectral_derivative_of_sine_is_cosine() {
        let g = torus(64);
        let v: Vec<f64> = g.nodes().iter().map(|&x| x.sin()).collect();
        let d = gradient(&g, &v);
        for (i, &x) in g.nodes().iter().enumerate() {
            assert!((d[i] - x.cos()).abs() < 1e-12, "node {i}");
        }
        let d2 = second_derivative(&g, &v);
        for (i, &x) in g.nodes().iter().enumerate() {
            assert!((d2[i] + x.sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn adjoint_of_constant_field_is_weight_slope() {
        // div*_mu X = f' for X = 1; with f = a cos x this is -a sin x.
        let g = torus(128);
        let mu = WeightedMeasure::cosine(&g, 0.7, 1).unwrap();
        let x = vec![1.0; g.len()];
        let out = weighted_divergence_adjoint(&g, &mu, &x);
        for (i, &xx) in g.nodes().iter().enumerate() {
            assert!((out[i] + 0.7 * xx.sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn witten_laplacian_of_quadratic_under_gaussian_weight() {
        // f = r^2/2, u = r^2/2 on a line grid: L u = u'' - f' u' = 1 - r^2.
        let g = Grid::radial(512, 2.0, 1).unwrap();
        let mu = WeightedMeasure::quadratic(&g, 1.0).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|&r| r * r / 2.0).collect();
        let lu = witten_laplacian(&g, &mu, &u);
        // quadratics are differentiated exactly by the central stencils
        for (i, &r) in g.nodes().iter().enumerate().take(g.len() - 1) {
            assert!((lu[i] - (1.0 - r * r)).abs() < 1e-9, "node {i}: {}", lu[i]);
        }
    }

    #[test]
    fn bakry_emery_on_gaussian_weight() {
        // f = r^2/2, m = 2, n = 1: Ric_{m,n} = 1 - r^2.
        let g = Grid::radial(64, 1.5, 1).unwrap();
        let mu = WeightedMeasure::quadratic(&g, 1.0).unwrap();
        let ric = bakry_emery_curvature(&g, &mu, 2.0, 1.0).unwrap();
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((ric[i] - (1.0 - r * r)).abs() < 1e-13);
        }
        // m = n demands a constant weight
        assert!(bakry_emery_curvature(&g, &mu, 1.0, 1.0).is_err());
        let flat = WeightedMeasure::flat(&g);
        assert!(bakry_emery_curvature(&g, &flat, 1.0, 1.0)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn periodic_quadrature_of_trig_polynomials_is_exact() {
        let g = torus(32);
        let mu = WeightedMeasure::flat(&g);
        let v: Vec<f64> = g.nodes().iter().map(|&x| 1.0 + 0.5 * (3.0 * x).cos()).collect();
        assert!((integrate(&g, &mu, &v) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn radial_quadrature_weights_include_sphere_area() {
        // int_{R^3} exp with rho = 1 over ball of radius 1: 4 pi / 3.
        let g = Grid::radial(4096, 1.0, 3).unwrap();
        let mu = WeightedMeasure::flat(&g);
        let one = vec![1.0; g.len()];
        let vol = integrate(&g, &mu, &one);
        assert!((vol - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-6);
    }

    #[test]
    fn supported_quadrature_splits_the_boundary_cell() {
        // integrate 1 over [0, radius] on a line grid; exact value 2*radius
        // (the d = 1 weight doubles the half-line).
        let g = Grid::radial(100, 1.0, 1).unwrap();
        let mu = WeightedMeasure::flat(&g);
        let one = vec![1.0; g.len()];
        let radius = 0.4937;
        let got = integrate_supported(&g, &mu, &one, radius);
        assert!((got - 2.0 * radius).abs() < 1e-12, "{got}");
    }

    #[test]
    fn support_weights_erode_whole_cells() {
        let g = Grid::radial(100, 1.0, 1).unwrap();
        let w = support_weights(&g, 0.5, 2);
        let h = g.spacing();
        for (i, &r) in g.nodes().iter().enumerate() {
            if r + 0.5 * h <= 0.5 - 2.0 * h {
                assert_eq!(w[i], 1.0);
            }
            if r - 0.5 * h >= 0.5 - 2.0 * h {
                assert_eq!(w[i], 0.0);
            }
        }
    }
}
