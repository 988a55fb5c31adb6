//! Discretization domains.
//!
//! Two grid kinds cover every experiment in this crate:
//!
//! * `Periodic1d`: uniform nodes `x_i = i·h` on a circle of circumference `L`,
//!   `h = L/n`.  Smooth positive states live here and are differentiated
//!   spectrally.
//! * `Radial`: cell-centered nodes `r_i = (i + 1/2)·h` on `(0, R)`, `h = R/n`,
//!   carrying the ambient volume weight `omega_{d-1} r^{d-1}`.  Compactly
//!   supported profiles live here; `d = 1` doubles the half-line integral and
//!   is the "line" geometry used for self-similar states.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Periodic1d,
    Radial { ambient_dim: u32 },
}

#[derive(Debug, Clone)]
pub struct Grid {
    kind: GridKind,
    n: usize,
    length: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Uniform periodic grid on a circle of circumference `length`.
    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        Self::validate(n, length)?;
        let h = length / n as f64;
        let nodes = (0..n).map(|i| i as f64 * h).collect();
        Ok(Grid {
            kind: GridKind::Periodic1d,
            n,
            length,
            h,
            nodes,
        })
    }

    /// Cell-centered radial grid on `(0, radius)` with ambient dimension `d`.
    pub fn radial(n: usize, radius: f64, ambient_dim: u32) -> Result<Self> {
        Self::validate(n, radius)?;
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        let h = radius / n as f64;
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        Ok(Grid {
            kind: GridKind::Radial { ambient_dim },
            n,
            length: radius,
            h,
            nodes,
        })
    }

    fn validate(n: usize, length: f64) -> Result<()> {
        if n < MIN_POINTS {
            return Err(Error::invalid(format!(
                "grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("grid extent must be positive, got {length}")));
        }
        Ok(())
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Circumference (periodic) or outer radius (radial).
    pub fn extent(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, GridKind::Periodic1d)
    }

    pub fn ambient_dim(&self) -> u32 {
        match self.kind {
            GridKind::Periodic1d => 1,
            GridKind::Radial { ambient_dim } => ambient_dim,
        }
    }

    /// Quadrature weight of node `i` against the unweighted volume element:
    /// `h` on the circle, `omega_{d-1} r_i^{d-1} h` on the radial grid.
    pub fn volume_weight(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::Periodic1d => self.h,
            GridKind::Radial { ambient_dim } => {
                sphere_area(ambient_dim) * self.nodes[i].powi(ambient_dim as i32 - 1) * self.h
            }
        }
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.kind == other.kind && self.n == other.n && self.length == other.length
    }
}

/// Surface measure `omega_{d-1} = 2 pi^{d/2} / Gamma(d/2)` of the unit sphere
/// in `R^d`; `omega_0 = 2` makes the `d = 1` radial grid integrate even
/// functions over the whole line.
pub fn sphere_area(d: u32) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(d)
}

/// Gamma(d/2) for positive integer d, by the half-integer recurrence.
fn gamma_half_integer(d: u32) -> f64 {
    let mut x = d as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 1.0).abs() < 1e-12 {
        acc
    } else {
        // x == 1/2
        acc * std::f64::consts::PI.sqrt()
    }
}

/// `omega_{m-1}` for real dimension `m >= 1`; profiles with a synthetic
/// (non-integer) dimension need the continuous extension.
pub fn sphere_area_real(m: f64) -> f64 {
    2.0 * std::f64::consts::PI.powf(m / 2.0) / gamma_real(m / 2.0)
}

/// Lanczos approximation of Gamma(x) for x > 0 (g = 7, n = 9 coefficients);
/// relative error below 1e-13 on the range used here.
pub(crate) fn gamma_real(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma_real(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}
