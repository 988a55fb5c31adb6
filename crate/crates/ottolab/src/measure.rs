//! Weighted reference measure `d mu = e^{-f} dx`.
//!
//! The weight enters every operator through analytic samples of `f`, `f'` and
//! `f''`; differentiating the weight numerically would contaminate the
//! curvature checks, so the three arrays are always supplied together.

use crate::error::{ensure_finite, Result};
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    f: Vec<f64>,
    df: Vec<f64>,
    d2f: Vec<f64>,
    /// e^{-f}, cached because it multiplies every quadrature weight.
    exp_neg_f: Vec<f64>,
    constant: bool,
}

impl WeightedMeasure {
    pub fn new(grid: &Grid, f: Vec<f64>, df: Vec<f64>, d2f: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if f.len() != n || df.len() != n || d2f.len() != n {
            return Err(crate::error::Error::invalid(format!(
                "weight sample lengths ({}, {}, {}) do not match grid size {}",
                f.len(),
                df.len(),
                d2f.len(),
                n
            )));
        }
        ensure_finite("weight f", &f)?;
        ensure_finite("weight f'", &df)?;
        ensure_finite("weight f''", &d2f)?;
        let exp_neg_f = f.iter().map(|v| (-v).exp()).collect();
        let constant = df.iter().all(|&v| v == 0.0) && d2f.iter().all(|&v| v == 0.0);
        Ok(WeightedMeasure {
            f,
            df,
            d2f,
            exp_neg_f,
            constant,
        })
    }

    /// Sample an analytic weight: `parts(x) = (f, f', f'')`.
    pub fn from_fn(grid: &Grid, parts: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self> {
        let mut f = Vec::with_capacity(grid.len());
        let mut df = Vec::with_capacity(grid.len());
        let mut d2f = Vec::with_capacity(grid.len());
        for &x in grid.nodes() {
            let (a, b, c) = parts(x);
            f.push(a);
            df.push(b);
            d2f.push(c);
        }
        Self::new(grid, f, df, d2f)
    }

    /// Unweighted Lebesgue measure, `f = 0`.
    pub fn flat(grid: &Grid) -> Self {
        let n = grid.len();
        WeightedMeasure {
            f: vec![0.0; n],
            df: vec![0.0; n],
            d2f: vec![0.0; n],
            exp_neg_f: vec![1.0; n],
            constant: true,
        }
    }

    /// `f(x) = a cos(2 pi mode x / L)`; periodic weight for torus runs.
    pub fn cosine(grid: &Grid, amplitude: f64, mode: u32) -> Result<Self> {
        let w = 2.0 * std::f64::consts::PI * mode as f64 / grid.extent();
        Self::from_fn(grid, |x| {
            (
                amplitude * (w * x).cos(),
                -amplitude * w * (w * x).sin(),
                -amplitude * w * w * (w * x).cos(),
            )
        })
    }

    /// `f(r) = a r^2 / 2`; the Gaussian-type weight used on line grids.
    pub fn quadratic(grid: &Grid, amplitude: f64) -> Result<Self> {
        Self::from_fn(grid, |r| (amplitude * r * r / 2.0, amplitude * r, amplitude))
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn df(&self) -> &[f64] {
        &self.df
    }

    pub fn d2f(&self) -> &[f64] {
        &self.d2f
    }

    pub fn exp_neg_f(&self) -> &[f64] {
        &self.exp_neg_f
    }

    /// True when f' and f'' vanish identically (flat measure up to an
    /// additive constant in f).
    pub fn is_constant(&self) -> bool {
        self.constant
    }
}
