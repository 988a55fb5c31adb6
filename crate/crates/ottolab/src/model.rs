//! Model parameters shared by every functional and solver.

use crate::error::{Error, Result};

/// Transition speed `c` of the damped flow.  The two limiting regimes are
/// distinguished variants, never floating-point sentinels: `c = 0` is the
/// gradient-flow (porous-medium) regime and `c = infinity` the geodesic one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Zero,
    Finite(f64),
    Infinite,
}

impl Speed {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "0" | "0.0" => Ok(Speed::Zero),
            "inf" | "infinity" => Ok(Speed::Infinite),
            other => {
                let c: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse speed '{other}'")))?;
                Speed::finite_or_limit(c)
            }
        }
    }

    /// Classify a raw number, mapping 0 to `Zero` and rejecting negatives.
    pub fn finite_or_limit(c: f64) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::invalid(format!("speed must lie in [0, inf], got {c}")));
        }
        if c == 0.0 {
            Ok(Speed::Zero)
        } else if c.is_infinite() {
            Ok(Speed::Infinite)
        } else {
            Ok(Speed::Finite(c))
        }
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            Speed::Finite(c) => Some(*c),
            _ => None,
        }
    }

    /// `1/c^2` for finite positive speed; the limiting regimes drop the term.
    pub fn inv_c2(&self) -> Option<f64> {
        self.finite_value().map(|c| 1.0 / (c * c))
    }
}

impl std::fmt::Display for Speed {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Speed::Zero => write!(fm, "0"),
            Speed::Finite(c) => write!(fm, "{c}"),
            Speed::Infinite => write!(fm, "inf"),
        }
    }
}

/// Sign of the driving potential `sign * Ent_gamma`.  `Negative` is the
/// entropy-as-negative-potential convention under which the Lagrangian of the
/// flow is convex in time; `Positive` is the relaxation system whose `c -> 0`
/// limit is the porous-medium equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSign {
    Positive,
    Negative,
}

impl PotentialSign {
    pub fn value(&self) -> f64 {
        match self {
            PotentialSign::Positive => 1.0,
            PotentialSign::Negative => -1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "+1" | "1" | "+" | "positive" => Ok(PotentialSign::Positive),
            "-1" | "-" | "negative" => Ok(PotentialSign::Negative),
            other => Err(Error::invalid(format!("cannot parse potential sign '{other}'"))),
        }
    }
}

/// Parameters of the Renyi-entropy model.
///
/// `gamma > 1` is the entropy exponent, `m >= n >= 1` the synthetic and
/// topological dimensions entering the curvature condition, and
/// `k = 1/(m(gamma-1)+2)` the self-similar scaling exponent.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub gamma: f64,
    pub m: f64,
    pub n: f64,
    pub c: Speed,
    pub potential_sign: PotentialSign,
}

impl ModelParams {
    pub fn new(gamma: f64, m: f64, n: f64, c: Speed, potential_sign: PotentialSign) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::invalid(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(n.is_finite() && n >= 1.0) {
            return Err(Error::invalid(format!("n must be at least 1, got {n}")));
        }
        if !(m.is_finite() && m >= n) {
            return Err(Error::invalid(format!("m must satisfy m >= n, got m = {m}, n = {n}")));
        }
        if let Speed::Finite(c) = c {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("finite speed must be positive, got {c}")));
            }
        }
        Ok(ModelParams {
            gamma,
            m,
            n,
            c,
            potential_sign,
        })
    }

    /// Scaling exponent `k = 1/(m(gamma-1)+2)`; always in (0, 1/2).
    pub fn k(&self) -> f64 {
        1.0 / (self.m * (self.gamma - 1.0) + 2.0)
    }

    /// `m(gamma-1) + 1 = 1/k - 1`, the coefficient that drives the
    /// entropy-dissipation bookkeeping.
    pub fn m_gamma_one(&self) -> f64 {
        self.m * (self.gamma - 1.0) + 1.0
    }

    pub fn with_speed(mut self, c: Speed) -> Self {
        self.c = c;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_matches_its_defining_identity() {
        let p = ModelParams::new(2.0, 1.0, 1.0, Speed::Zero, PotentialSign::Positive).unwrap();
        assert!((p.k() - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.m_gamma_one() - (1.0 / p.k() - 1.0)).abs() < 1e-12);
        let q = ModelParams::new(2.5, 3.0, 1.0, Speed::Infinite, PotentialSign::Negative).unwrap();
        assert!((q.k() - 1.0 / 6.5).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ModelParams::new(1.0, 1.0, 1.0, Speed::Zero, PotentialSign::Positive).is_err());
        assert!(ModelParams::new(2.0, 1.0, 2.0, Speed::Zero, PotentialSign::Positive).is_err());
        assert!(ModelParams::new(2.0, 1.0, 0.5, Speed::Zero, PotentialSign::Positive).is_err());
        assert!(
            ModelParams::new(2.0, 1.0, 1.0, Speed::Finite(-1.0), PotentialSign::Positive).is_err()
        );
    }

    #[test]
    fn speed_parses_limits_and_numbers() {
        assert_eq!(Speed::parse("0").unwrap(), Speed::Zero);
        assert_eq!(Speed::parse("inf").unwrap(), Speed::Infinite);
        assert_eq!(Speed::parse("0.4").unwrap(), Speed::Finite(0.4));
        assert!(Speed::parse("-2").is_err());
        assert!((Speed::Finite(2.0).inv_c2().unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(Speed::Zero.inv_c2(), None);
    }
}
