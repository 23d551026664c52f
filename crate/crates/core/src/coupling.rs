//! Single-atom coupling strength and the strong-coupling criterion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{RB87_D2_LINEWIDTH_HZ, RB87_D2_LINEWIDTH_SIGMA_HZ, RB87_D2_WAVELENGTH_M, SPEED_OF_LIGHT as C};
use crate::error::Result;
use crate::geometry::{check_stable, expect_unit, positive};
use crate::quantity::{propagate, Quantity, Unit};

/// Atomic transition coupled to the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicLine {
    /// Polarization decay rate γ/2π (half the natural linewidth).
    pub gamma_over_2pi: Quantity,
    pub wavelength: Quantity,
    pub label: String,
}

impl AtomicLine {
    /// Rb-87 D2 cycling transition, 2γ = 2π·6.065(9) MHz.
    pub fn rb87_d2() -> Self {
        AtomicLine {
            gamma_over_2pi: Quantity::new(RB87_D2_LINEWIDTH_HZ / 2.0, RB87_D2_LINEWIDTH_SIGMA_HZ / 2.0, Unit::Hz),
            wavelength: Quantity::exact(RB87_D2_WAVELENGTH_M, Unit::Meter),
            label: "87Rb D2 F=2 -> F'=3".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        positive(&self.gamma_over_2pi, Unit::Hz, "atomic decay rate")?;
        positive(&self.wavelength, Unit::Meter, "atomic wavelength")
    }
}

impl Default for AtomicLine {
    fn default() -> Self {
        Self::rb87_d2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub g0_over_2pi: Quantity,
    pub kappa_over_2pi: Quantity,
    pub gamma_over_2pi: Quantity,
    pub strong: bool,
    /// g0² / (κγ)
    #[serde(with = "crate::decimal")]
    pub margin: f64,
}

/// Maximal coupling g0/2π for an atom at an antinode on the mode waist:
///
/// `g0/2π = sqrt(3 / (2√2 π²)) · sqrt(cλ / sqrt(R L³) · γ/π)` with γ in rad/s.
pub fn g0_max(length: Quantity, radius: Quantity, line: &AtomicLine) -> Result<Quantity> {
    expect_unit(&length, Unit::Meter)?;
    expect_unit(&radius, Unit::Meter)?;
    check_stable(length.value, radius.value)?;
    line.validate()?;
    let prefactor = (3.0 / (2.0 * 2f64.sqrt() * PI * PI)).sqrt();
    propagate(Unit::Hz, &[length, radius, line.gamma_over_2pi, line.wavelength], |x| {
        let (l, r, gamma, lambda) = (x[0], x[1], 2.0 * PI * x[2], x[3]);
        prefactor * (C * lambda / (r * l.powi(3)).sqrt() * gamma / PI).sqrt()
    })
}

/// Evaluates g0² > κγ. All rates are taken in /2π units; the 2π factors
/// cancel in the ratio.
pub fn strong_coupling(g0_over_2pi: Quantity, kappa_over_2pi: Quantity, line: &AtomicLine) -> Result<CouplingResult> {
    positive(&g0_over_2pi, Unit::Hz, "g0")?;
    positive(&kappa_over_2pi, Unit::Hz, "kappa")?;
    line.validate()?;
    let gamma = line.gamma_over_2pi;
    let margin = g0_over_2pi.value.powi(2) / (kappa_over_2pi.value * gamma.value);
    Ok(CouplingResult {
        g0_over_2pi,
        kappa_over_2pi,
        gamma_over_2pi: gamma,
        strong: margin > 1.0,
        margin,
    })
}
