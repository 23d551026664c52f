//! Uncertainty-carrying scalars.
//!
//! A [`Quantity`] is a central value with a 1σ interval and a unit tag.
//! Arithmetic assumes independent Gaussian errors; general functions go
//! through [`propagate`], which linearizes with central differences.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "Hz")]
    Hz,
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "m^2")]
    SquareMeter,
    #[serde(rename = "m^3")]
    CubicMeter,
    #[serde(rename = "rad")]
    Radian,
    #[serde(rename = "1")]
    Dimensionless,
    #[serde(rename = "V")]
    Volt,
    #[serde(rename = "ppm")]
    Ppm,
    #[serde(rename = "s")]
    Second,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Hz => "Hz",
            Unit::Meter => "m",
            Unit::SquareMeter => "m^2",
            Unit::CubicMeter => "m^3",
            Unit::Radian => "rad",
            Unit::Dimensionless => "1",
            Unit::Volt => "V",
            Unit::Ppm => "ppm",
            Unit::Second => "s",
        };
        f.write_str(s)
    }
}

/// Physical scalar with a (possibly asymmetric) 1σ interval.
///
/// Asymmetric intervals only arise from clamping a derived value against a
/// physical bound; arithmetic on them is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantity")]
pub struct Quantity {
    #[serde(with = "crate::decimal")]
    pub value: f64,
    #[serde(with = "crate::decimal")]
    pub sigma_minus: f64,
    #[serde(with = "crate::decimal")]
    pub sigma_plus: f64,
    pub unit: Unit,
}

#[derive(Deserialize)]
struct RawQuantity {
    #[serde(with = "crate::decimal")]
    value: f64,
    #[serde(with = "crate::decimal")]
    sigma_minus: f64,
    #[serde(with = "crate::decimal")]
    sigma_plus: f64,
    unit: Unit,
}

impl TryFrom<RawQuantity> for Quantity {
    type Error = String;

    fn try_from(r: RawQuantity) -> std::result::Result<Self, String> {
        if !(r.sigma_minus >= 0.0 && r.sigma_plus >= 0.0) {
            return Err(format!("negative uncertainty ({}, {})", r.sigma_minus, r.sigma_plus));
        }
        Ok(Quantity {
            value: r.value,
            sigma_minus: r.sigma_minus,
            sigma_plus: r.sigma_plus,
            unit: r.unit,
        })
    }
}

impl Quantity {
    /// Symmetric quantity. Panics if `sigma` is negative or NaN.
    pub fn new(value: f64, sigma: f64, unit: Unit) -> Self {
        assert!(sigma >= 0.0, "uncertainty must be non-negative, got {sigma}");
        Quantity {
            value,
            sigma_minus: sigma,
            sigma_plus: sigma,
            unit,
        }
    }

    pub fn exact(value: f64, unit: Unit) -> Self {
        Self::new(value, 0.0, unit)
    }

    pub fn asymmetric(value: f64, sigma_minus: f64, sigma_plus: f64, unit: Unit) -> Self {
        assert!(sigma_minus >= 0.0 && sigma_plus >= 0.0);
        Quantity {
            value,
            sigma_minus,
            sigma_plus,
            unit,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.sigma_minus == self.sigma_plus
    }

    /// The larger of the two one-sided uncertainties.
    pub fn sigma(&self) -> f64 {
        self.sigma_minus.max(self.sigma_plus)
    }

    pub fn symmetric_sigma(&self) -> Result<f64> {
        if self.is_symmetric() {
            Ok(self.sigma_plus)
        } else {
            Err(Error::Asymmetric)
        }
    }

    pub fn relative_sigma(&self) -> f64 {
        self.sigma() / self.value.abs()
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self::new(self.value, sigma, self.unit)
    }

    fn require_unit(&self, other: &Quantity) -> Result<()> {
        if self.unit != other.unit {
            return Err(Error::UnitMismatch {
                left: self.unit,
                right: other.unit,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_symmetric() {
            write!(f, "{} ± {} {}", self.value, self.sigma_plus, self.unit)
        } else {
            write!(
                f,
                "{} +{}/-{} {}",
                self.value, self.sigma_plus, self.sigma_minus, self.unit
            )
        }
    }
}

/// How the uncertainty of a difference of two instrument readings is booked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Independent Gaussian errors added in quadrature.
    #[default]
    Quadrature,
    /// The difference inherits the instrument resolution (the larger input sigma).
    Resolution,
}

impl Propagation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Propagation::Quadrature => "quadrature",
            Propagation::Resolution => "resolution",
        }
    }
}

/// `a - b` with independent-Gaussian quadrature of the sigmas.
pub fn q_sub(a: &Quantity, b: &Quantity) -> Result<Quantity> {
    a.require_unit(b)?;
    let sa = a.symmetric_sigma()?;
    let sb = b.symmetric_sigma()?;
    Ok(Quantity::new(a.value - b.value, sa.hypot(sb), a.unit))
}

pub fn q_add(a: &Quantity, b: &Quantity) -> Result<Quantity> {
    a.require_unit(b)?;
    let sa = a.symmetric_sigma()?;
    let sb = b.symmetric_sigma()?;
    Ok(Quantity::new(a.value + b.value, sa.hypot(sb), a.unit))
}

/// Difference of two readings under the selected bookkeeping.
pub fn difference(a: &Quantity, b: &Quantity, mode: Propagation) -> Result<Quantity> {
    match mode {
        Propagation::Quadrature => q_sub(a, b),
        Propagation::Resolution => {
            a.require_unit(b)?;
            let s = a.symmetric_sigma()?.max(b.symmetric_sigma()?);
            Ok(Quantity::new(a.value - b.value, s, a.unit))
        }
    }
}

/// First-order propagation of independent symmetric inputs through `f`.
///
/// Partials are central differences with step `max(|x|·1e-7, σ·1e-3)`;
/// inputs with zero sigma contribute nothing and are not differentiated.
pub fn propagate<F>(unit: Unit, inputs: &[Quantity], f: F) -> Result<Quantity>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x: Vec<f64> = inputs.iter().map(|q| q.value).collect();
    let center = f(&x);
    if !center.is_finite() {
        return Err(Error::NonFinite("propagate: central value"));
    }
    let mut var = 0.0;
    for (i, q) in inputs.iter().enumerate() {
        let sigma = q.symmetric_sigma()?;
        if sigma == 0.0 {
            continue;
        }
        let h = (q.value.abs() * 1e-7).max(sigma * 1e-3);
        let x0 = x[i];
        x[i] = x0 + h;
        let up = f(&x);
        x[i] = x0 - h;
        let down = f(&x);
        x[i] = x0;
        let partial = (up - down) / (2.0 * h);
        if !partial.is_finite() {
            return Err(Error::NonFinite("propagate: difference quotient"));
        }
        var += (partial * sigma).powi(2);
    }
    Ok(Quantity::new(center, var.sqrt(), unit))
}
