//! Numerical laboratory for the damped Hamiltonian flow
//!
//! ```text
//!     dt rho = adj_mu(rho grad phi),
//!     c^2 (dt phi + |grad phi|^2 / 2) = -phi - s gamma rho^{gamma-1} / (gamma - 1),
//! ```
//!
//! which interpolates between the porous-medium gradient flow of the Renyi
//! entropy (`c -> 0`) and transport geodesics (`c -> infinity`) on 1-D
//! weighted domains: a flat circle or a radially symmetric line carrying the
//! measure `e^{-f} dx`.
//!
//! The crate provides the two domain kinds and their calculus ([`grid`],
//! [`measure`], [`ops`]), entropy and information functionals with dual-route
//! cross-checks ([`entropy`]), exact self-similar solutions built from the
//! scaling ODE ([`reference`]), time steppers for the flow, its two limits
//! and its symmetrizable first-order form ([`solver`]), rescaled-entropy
//! monotonicity diagnostics ([`wentropy`]), and series utilities for run
//! post-processing ([`diagnostics`], [`metrics`]).
//!
//! Conventions throughout: densities are nonnegative and finite, grids are
//! uniform, all tolerances live in [`tol`], and every solver refuses a step
//! it cannot take stably instead of returning a polluted state.

pub mod diagnostics;
pub mod entropy;
pub mod error;
pub mod field;
pub mod grid;
pub mod measure;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod reference;
pub mod solver;
pub mod tol;
pub mod wentropy;

pub use error::{Error, Result};
pub use field::{DensityField, PotentialField};
pub use grid::Grid;
pub use measure::WeightedMeasure;
pub use model::{ModelParams, PotentialSign, Speed};
pub use reference::{ScalingInit, SelfSimilarModel};
pub use solver::{
    geodesic_solve, hyperbolic_solve, langevin_solve, pme_solve, HyperbolicState, Scheme,
    Snapshot, SolverConfig, Trajectory,
};
