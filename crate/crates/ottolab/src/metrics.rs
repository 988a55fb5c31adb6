//! Distances between density fields: weighted L^p norms and the 1-D
//! quadratic Wasserstein distance.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measure::WeightedMeasure;
use crate::ops::compensated_sum;

/// `int |a - b| dmu`.
pub fn l1_distance(grid: &Grid, mu: &WeightedMeasure, a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(
        (0..grid.len()).map(|i| (a[i] - b[i]).abs() * grid.volume_weight(i) * mu.exp_neg_f()[i]),
    )
}

/// `(int |a - b|^2 dmu)^{1/2}`.
pub fn l2_distance(grid: &Grid, mu: &WeightedMeasure, a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(
        (0..grid.len())
            .map(|i| (a[i] - b[i]).powi(2) * grid.volume_weight(i) * mu.exp_neg_f()[i]),
    )
    .sqrt()
}

/// Piecewise-linear CDF segment bookkeeping for the quantile transform.
struct QuantileSegments {
    /// cumulative mass at segment starts, normalized to total mass 1
    s_lo: Vec<f64>,
    s_hi: Vec<f64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
}

impl QuantileSegments {
    fn build(grid: &Grid, mu: &WeightedMeasure, rho: &[f64]) -> Result<Self> {
        let h = grid.spacing();
        let mut masses = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let w = rho[i] * grid.volume_weight(i) * mu.exp_neg_f()[i];
            if w < 0.0 {
                return Err(Error::invalid("negative mass cell in quantile transform"));
            }
            masses.push(w);
        }
        let total: f64 = compensated_sum(masses.iter().cloned());
        if total <= 0.0 {
            return Err(Error::invalid("cannot build quantiles of a zero-mass density"));
        }
        let mut s_lo = Vec::new();
        let mut s_hi = Vec::new();
        let mut x_lo = Vec::new();
        let mut x_hi = Vec::new();
        let mut acc = 0.0;
        for (i, &w) in masses.iter().enumerate() {
            if w > 0.0 {
                let x = grid.nodes()[i];
                s_lo.push(acc / total);
                acc += w;
                s_hi.push(acc / total);
                x_lo.push(x - 0.5 * h);
                x_hi.push(x + 0.5 * h);
            } else {
                acc += w;
            }
        }
        if let Some(last) = s_hi.last_mut() {
            *last = 1.0;
        }
        Ok(QuantileSegments {
            s_lo,
            s_hi,
            x_lo,
            x_hi,
        })
    }

    /// Quantile value at level s within segment `seg` (mass spreads uniformly
    /// over the cell).
    fn eval(&self, seg: usize, s: f64) -> f64 {
        let span = self.s_hi[seg] - self.s_lo[seg];
        let t = if span > 0.0 { (s - self.s_lo[seg]) / span } else { 0.0 };
        self.x_lo[seg] + t.clamp(0.0, 1.0) * (self.x_hi[seg] - self.x_lo[seg])
    }
}

/// Quadratic Wasserstein distance between two densities on the same 1-D grid
/// by exact integration of the squared quantile difference.
///
/// Both densities are normalized to unit mass first, so the distance compares
/// shapes even when the inputs carry slightly different discrete masses.  On
/// the periodic grid this is the cut-at-origin surrogate: the circle is
/// unrolled to `[0, L)` and quantiles are matched there, which upper-bounds
/// the true circular distance and is adequate for convergence-rate studies.
pub fn wasserstein2_1d(
    grid: &Grid,
    mu: &WeightedMeasure,
    rho_a: &[f64],
    rho_b: &[f64],
) -> Result<f64> {
    let qa = QuantileSegments::build(grid, mu, rho_a)?;
    let qb = QuantileSegments::build(grid, mu, rho_b)?;

    // merge segment breakpoints of both quantile functions
    let mut breaks: Vec<f64> = Vec::with_capacity(qa.s_lo.len() + qb.s_lo.len() + 2);
    breaks.extend(qa.s_lo.iter().cloned());
    breaks.extend(qa.s_hi.iter().cloned());
    breaks.extend(qb.s_lo.iter().cloned());
    breaks.extend(qb.s_hi.iter().cloned());
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup();

    let mut ia = 0;
    let mut ib = 0;
    let mut acc = 0.0;
    let mut comp = 0.0;
    for w in breaks.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 <= s0 {
            continue;
        }
        while ia + 1 < qa.s_lo.len() && qa.s_hi[ia] <= s0 {
            ia += 1;
        }
        while ib + 1 < qb.s_lo.len() && qb.s_hi[ib] <= s0 {
            ib += 1;
        }
        // both quantiles are linear on (s0, s1); Simpson integrates the
        // squared difference exactly
        let sm = 0.5 * (s0 + s1);
        let d0 = qa.eval(ia, s0) - qb.eval(ib, s0);
        let dm = qa.eval(ia, sm) - qb.eval(ib, sm);
        let d1 = qa.eval(ia, s1) - qb.eval(ib, s1);
        let piece = (s1 - s0) / 6.0 * (d0 * d0 + 4.0 * dm * dm + d1 * d1);
        let t = acc + piece;
        comp += if acc.abs() >= piece.abs() { (acc - t) + piece } else { (piece - t) + acc };
        acc = t;
    }
    Ok((acc + comp).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wasserstein_between_uniform_blocks() {
        // uniform on [0,1] vs uniform on [0,2]: W2 = 1/sqrt(3)
        let grid = Grid::radial(2000, 2.0, 1).unwrap();
        let mu = WeightedMeasure::flat(&grid);
        let a: Vec<f64> = grid.nodes().iter().map(|&x| if x < 1.0 { 1.0 } else { 0.0 }).collect();
        let b = vec![0.5; grid.len()];
        let w = wasserstein2_1d(&grid, &mu, &a, &b).unwrap();
        let exact = 1.0 / 3.0f64.sqrt();
        assert!((w - exact).abs() < 1e-6, "got {w}, want {exact}");
    }

    #[test]
    fn wasserstein_of_identical_densities_vanishes() {
        let grid = Grid::periodic(128, 2.0 * std::f64::consts::PI).unwrap();
        let mu = WeightedMeasure::flat(&grid);
        let a: Vec<f64> = grid.nodes().iter().map(|&x| 1.0 + 0.3 * x.sin()).collect();
        let w = wasserstein2_1d(&grid, &mu, &a, &a).unwrap();
        assert!(w < 1e-12);
    }

    #[test]
    fn wasserstein_of_shifted_blocks_matches_translation() {
        // uniform on [0,1] vs uniform on [1,2]: pure translation by 1
        let grid = Grid::radial(4000, 2.0, 1).unwrap();
        let mu = WeightedMeasure::flat(&grid);
        let a: Vec<f64> = grid.nodes().iter().map(|&x| if x < 1.0 { 1.0 } else { 0.0 }).collect();
        let b: Vec<f64> = grid.nodes().iter().map(|&x| if x >= 1.0 { 1.0 } else { 0.0 }).collect();
        let w = wasserstein2_1d(&grid, &mu, &a, &b).unwrap();
        assert!((w - 1.0).abs() < 1e-6, "got {w}");
    }

    #[test]
    fn zero_mass_is_rejected() {
        let grid = Grid::periodic(16, 1.0).unwrap();
        let mu = WeightedMeasure::flat(&grid);
        let z = vec![0.0; 16];
        let a = vec![1.0; 16];
        assert!(wasserstein2_1d(&grid, &mu, &z, &a).is_err());
    }
}
