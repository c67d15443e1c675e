//! Norms, polar decomposition and angular predicates.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Choice of ℓp norm, `p ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    p: f64,
}

impl NormSpec {
    pub const L1: NormSpec = NormSpec { p: 1.0 };
    pub const L2: NormSpec = NormSpec { p: 2.0 };
    pub const LINF: NormSpec = NormSpec { p: f64::INFINITY };

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "norm exponent must lie in [1, inf], got {p}"
            )));
        }
        Ok(NormSpec { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_infinite(&self) -> bool {
        self.p.is_infinite()
    }

    /// Norm of a vector already known to be finite.
    pub fn norm(&self, x: &[f64]) -> f64 {
        if self.p == 1.0 {
            return x.iter().map(|v| v.abs()).sum();
        }
        let max = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if self.p.is_infinite() || max == 0.0 {
            return max;
        }
        // Scale by the largest magnitude so that large p or large entries
        // cannot overflow.
        if self.p == 2.0 {
            let s: f64 = x.iter().map(|v| (v / max) * (v / max)).sum();
            return max * s.sqrt();
        }
        let s: f64 = x.iter().map(|v| (v.abs() / max).powf(self.p)).sum();
        max * s.powf(1.0 / self.p)
    }
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec::L2
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.p)
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(NormSpec::LINF);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse norm exponent {s:?}")))?;
        NormSpec::new(p)
    }
}

/// ℓp norm of `x`; rejects non-finite components.
pub fn lp_norm(x: &[f64], spec: NormSpec) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("norm of an empty vector".into()));
    }
    crate::error::check_finite(x, "x")?;
    Ok(spec.norm(x))
}

/// Radius and angle of a non-zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPoint {
    pub radius: f64,
    pub angle: Vec<f64>,
}

impl PolarPoint {
    pub fn reconstruct(&self) -> Vec<f64> {
        self.angle.iter().map(|a| a * self.radius).collect()
    }
}

pub fn polar(x: &[f64], spec: NormSpec) -> Result<PolarPoint> {
    let radius = lp_norm(x, spec)?;
    if radius == 0.0 {
        return Err(Error::ZeroVector { context: None });
    }
    Ok(PolarPoint {
        radius,
        angle: x.iter().map(|v| v / radius).collect(),
    })
}

/// Smallest angle component; near-axis angles have values close to zero.
pub fn angle_min(angle: &[f64]) -> f64 {
    angle.iter().copied().fold(f64::INFINITY, f64::min)
}
