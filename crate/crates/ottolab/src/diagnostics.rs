//! Per-snapshot diagnostics rows and time-series derivative stencils.
//!
//! Every simulation writes the same sixteen columns so that downstream
//! tooling never has to sniff a schema.  Quantities that a given run cannot
//! define (the Hamiltonian at `c = 0`, the relative entropies without a
//! reference solution) are written as `0` and flagged in the run's sidecar.

use crate::error::{Error, Result};

/// Column order of every diagnostics CSV.
pub const CSV_HEADER: &str = "t,mass,ent_gamma,dent_dt,fisher,grad_ent_norm_sq,second_moment,\
kinetic,hamiltonian,lagrangian,bochner_rhs,H_cm,W_cm,I_cm,lhs_w_formula,residual";

/// One diagnostics snapshot.  Field order matches [`CSV_HEADER`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub ent_gamma: f64,
    pub dent_dt: f64,
    pub fisher: f64,
    pub grad_ent_norm_sq: f64,
    pub second_moment: f64,
    pub kinetic: f64,
    pub hamiltonian: f64,
    pub lagrangian: f64,
    pub bochner_rhs: f64,
    pub h_cm: f64,
    pub w_cm: f64,
    pub i_cm: f64,
    pub lhs_w_formula: f64,
    pub residual: f64,
}

impl DiagnosticsRecord {
    /// Comma-joined row using the shortest round-trip float formatting, so
    /// identical runs produce byte-identical files.
    pub fn to_csv_row(&self) -> String {
        let v = [
            self.t,
            self.mass,
            self.ent_gamma,
            self.dent_dt,
            self.fisher,
            self.grad_ent_norm_sq,
            self.second_moment,
            self.kinetic,
            self.hamiltonian,
            self.lagrangian,
            self.bochner_rhs,
            self.h_cm,
            self.w_cm,
            self.i_cm,
            self.lhs_w_formula,
            self.residual,
        ];
        let mut row = String::with_capacity(16 * 24);
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                row.push(',');
            }
            row.push_str(&format!("{x}"));
        }
        row
    }
}

fn check_series(name: &str, values: &[f64], dt: f64) -> Result<()> {
    if values.len() < 5 {
        return Err(Error::invalid(format!(
            "{name} needs at least 5 samples for the wide stencils, got {}",
            values.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("{name} spacing must be positive, got {dt}")));
    }
    Ok(())
}

/// First derivative of a uniformly sampled series, fourth-order five-point
/// stencils throughout (one-sided at both ends).
pub fn fd_derivative_uniform(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_series("derivative series", values, dt)?;
    let n = values.len();
    let s = 1.0 / (12.0 * dt);
    let mut out = vec![0.0; n];
    out[0] = s * (-25.0 * values[0] + 48.0 * values[1] - 36.0 * values[2] + 16.0 * values[3]
        - 3.0 * values[4]);
    out[1] = s * (-3.0 * values[0] - 10.0 * values[1] + 18.0 * values[2] - 6.0 * values[3]
        + values[4]);
    for j in 2..n - 2 {
        out[j] = s * (values[j - 2] - 8.0 * values[j - 1] + 8.0 * values[j + 1] - values[j + 2]);
    }
    out[n - 2] = s * (3.0 * values[n - 1] + 10.0 * values[n - 2] - 18.0 * values[n - 3]
        + 6.0 * values[n - 4]
        - values[n - 5]);
    out[n - 1] = s * (25.0 * values[n - 1] - 48.0 * values[n - 2] + 36.0 * values[n - 3]
        - 16.0 * values[n - 4]
        + 3.0 * values[n - 5]);
    Ok(out)
}

/// Second derivative of a uniformly sampled series, five-point stencils
/// (fourth order inside, third order at the ends).
pub fn fd_second_derivative_uniform(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_series("second derivative series", values, dt)?;
    let n = values.len();
    let s = 1.0 / (12.0 * dt * dt);
    let mut out = vec![0.0; n];
    out[0] = s * (35.0 * values[0] - 104.0 * values[1] + 114.0 * values[2] - 56.0 * values[3]
        + 11.0 * values[4]);
    out[1] = s * (11.0 * values[0] - 20.0 * values[1] + 6.0 * values[2] + 4.0 * values[3]
        - values[4]);
    for j in 2..n - 2 {
        out[j] = s * (-values[j - 2] + 16.0 * values[j - 1] - 30.0 * values[j]
            + 16.0 * values[j + 1]
            - values[j + 2]);
    }
    out[n - 2] = s * (11.0 * values[n - 1] - 20.0 * values[n - 2] + 6.0 * values[n - 3]
        + 4.0 * values[n - 4]
        - values[n - 5]);
    out[n - 1] = s * (35.0 * values[n - 1] - 104.0 * values[n - 2] + 114.0 * values[n - 3]
        - 56.0 * values[n - 4]
        + 11.0 * values[n - 5]);
    Ok(out)
}
