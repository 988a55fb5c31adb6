//! Grid-sampled fields with their validity invariants.

use crate::error::{ensure_finite, Error, Result};
use crate::grid::Grid;

/// Plain finite-valued samples on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        ensure_finite("scalar field", &values)?;
        Ok(ScalarField { values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Probability-density samples: finite, nonnegative everywhere.
///
/// `support_radius` is analytic metadata attached by the self-similar profile
/// constructors; quadrature of such fields is restricted to the closed
/// support with the boundary cell split at the exact radius, and stencil-based
/// integrands retreat two cells from the edge so that one-sided kinks of the
/// profile cannot leak into rigidity checks.  Numerically evolved densities
/// carry `None` and are integrated over the full grid.
#[derive(Debug, Clone)]
pub struct DensityField {
    values: Vec<f64>,
    support_radius: Option<f64>,
}

impl DensityField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        ensure_finite("density", &values)?;
        if let Some((index, &min)) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            if min < 0.0 {
                return Err(Error::NegativeDensity {
                    what: "density".into(),
                    min,
                    index,
                });
            }
        }
        Ok(DensityField {
            values,
            support_radius: None,
        })
    }

    /// Accept raw solver output whose undershoot is below `tol`, clamping the
    /// stray negatives to zero.  Larger undershoot is a stability failure.
    pub fn from_raw_clamped(grid: &Grid, mut values: Vec<f64>, tol: f64) -> Result<Self> {
        check_len(grid, values.len())?;
        ensure_finite("density", &values)?;
        let mut min = 0.0f64;
        let mut index = 0;
        for (i, v) in values.iter().enumerate() {
            if *v < min {
                min = *v;
                index = i;
            }
        }
        if min < -tol {
            return Err(Error::NegativeDensity {
                what: "solver density".into(),
                min,
                index,
            });
        }
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(DensityField {
            values,
            support_radius: None,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Velocity potential samples; no sign constraint.
#[derive(Debug, Clone)]
pub struct PotentialField {
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        ensure_finite("potential", &values)?;
        Ok(PotentialField { values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::invalid(format!(
            "field length {len} does not match grid size {}",
            grid.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_rejects_negatives_and_nan() {
        let g = Grid::periodic(16, 1.0).unwrap();
        let mut v = vec![1.0; 16];
        v[3] = -1e-3;
        assert!(DensityField::new(&g, v.clone()).is_err());
        v[3] = f64::NAN;
        assert!(DensityField::new(&g, v).is_err());
    }

    #[test]
    fn clamped_constructor_tolerates_tiny_undershoot() {
        let g = Grid::periodic(16, 1.0).unwrap();
        let mut v = vec![1.0; 16];
        v[5] = -1e-14;
        let d = DensityField::from_raw_clamped(&g, v, 1e-10).unwrap();
        assert_eq!(d.values()[5], 0.0);
        let mut w = vec![1.0; 16];
        w[5] = -1e-6;
        assert!(DensityField::from_raw_clamped(&g, w, 1e-10).is_err());
    }
}
