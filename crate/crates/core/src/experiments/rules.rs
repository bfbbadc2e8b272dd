use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Node density as a function of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityRule {
    /// `λ = c`.
    Const(f64),
    /// `λ = N^p`.
    Pow(f64),
}

impl DensityRule {
    pub fn density(self, n: usize) -> Result<f64> {
        let lambda = match self {
            DensityRule::Const(c) => c,
            DensityRule::Pow(p) => (n as f64).powf(p),
        };
        if lambda.is_finite() && lambda > 0.0 {
            Ok(lambda)
        } else {
            Err(Error::invalid(format!(
                "density rule {self} gives λ = {lambda} at N = {n}"
            )))
        }
    }
}

impl fmt::Display for DensityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityRule::Const(c) => write!(f, "const:{c}"),
            DensityRule::Pow(p) => write!(f, "pow:{p}"),
        }
    }
}

fn parse_finite(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse {what} from {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{what} must be finite, got {s:?}")))
    }
}

impl FromStr for DensityRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("const:") {
            let c = parse_finite(v, "density")?;
            if c <= 0.0 {
                return Err(Error::invalid(format!("density must be positive, got {c}")));
            }
            Ok(DensityRule::Const(c))
        } else if let Some(v) = s.strip_prefix("pow:") {
            Ok(DensityRule::Pow(parse_finite(v, "density exponent")?))
        } else {
            Err(Error::invalid(format!(
                "density rule {s:?} must look like const:1 or pow:-0.5"
            )))
        }
    }
}

/// Interference budget as a function of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// `ε = N/2`.
    HalfN,
}

impl EpsilonRule {
    pub fn epsilon(self, n: usize) -> Result<f64> {
        let eps = match self {
            EpsilonRule::Fixed(e) => e,
            EpsilonRule::HalfN => n as f64 / 2.0,
        };
        if eps.is_finite() && eps > 0.0 {
            Ok(eps)
        } else {
            Err(Error::invalid(format!("budget rule {self} gives ε = {eps} at N = {n}")))
        }
    }
}

impl fmt::Display for EpsilonRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonRule::Fixed(e) => write!(f, "{e}"),
            EpsilonRule::HalfN => f.write_str("N/2"),
        }
    }
}

impl FromStr for EpsilonRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("N/2") {
            return Ok(EpsilonRule::HalfN);
        }
        let e = parse_finite(s, "budget")?;
        if e <= 0.0 {
            return Err(Error::invalid(format!("budget must be positive, got {e}")));
        }
        Ok(EpsilonRule::Fixed(e))
    }
}
