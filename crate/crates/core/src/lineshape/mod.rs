//! Lorentzian transmission lines, finesse, and polarization comparison.

pub mod fit;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::positive;
use crate::quantity::{propagate, Quantity, Unit};

pub use fit::{fit_lorentzian, LorentzianFit};
pub use trace::{synth_trace, AbscissaKind, Grid, TransmissionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    /// Peak height above the offset.
    #[serde(with = "crate::decimal")]
    pub amplitude: f64,
    #[serde(with = "crate::decimal")]
    pub center: f64,
    #[serde(with = "crate::decimal")]
    pub fwhm: f64,
    #[serde(with = "crate::decimal")]
    pub offset: f64,
}

impl LorentzianParams {
    pub fn new(amplitude: f64, center: f64, fwhm: f64, offset: f64) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::NonPositive {
                what: "amplitude",
                value: amplitude,
            });
        }
        if !(fwhm > 0.0) {
            return Err(Error::NonPositive {
                what: "FWHM",
                value: fwhm,
            });
        }
        Ok(LorentzianParams {
            amplitude,
            center,
            fwhm,
            offset,
        })
    }
}

/// `offset + amplitude / (1 + (2(x − center)/fwhm)²)`
pub fn lorentzian_eval(p: &LorentzianParams, x: f64) -> f64 {
    let u = 2.0 * (x - p.center) / p.fwhm;
    p.offset + p.amplitude / (1.0 + u * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinesseResult {
    pub fwhm: Quantity,
    pub fsr: Quantity,
    pub finesse: Quantity,
    /// Field decay rate κ/2π; the intensity FWHM equals 2κ.
    pub kappa_over_2pi: Quantity,
    pub total_loss_ppm: Quantity,
}

/// `F = ν_fsr / FWHM` and the round-trip loss `2π/F`.
pub fn finesse_from_fwhm(fwhm: Quantity, fsr: Quantity) -> Result<FinesseResult> {
    positive(&fwhm, Unit::Hz, "FWHM")?;
    positive(&fsr, Unit::Hz, "free spectral range")?;
    if fwhm.value >= fsr.value {
        return Err(Error::OutOfRange {
            what: "FWHM",
            value: fwhm.value,
            range: "(0, fsr)",
        });
    }
    let inputs = [fsr, fwhm];
    let finesse = propagate(Unit::Dimensionless, &inputs, |x| x[0] / x[1])?;
    let loss = propagate(Unit::Ppm, &inputs, |x| 2.0 * std::f64::consts::PI * 1e6 / (x[0] / x[1]))?;
    Ok(FinesseResult {
        fwhm,
        fsr,
        finesse,
        kappa_over_2pi: Quantity::new(fwhm.value / 2.0, fwhm.symmetric_sigma()? / 2.0, Unit::Hz),
        total_loss_ppm: loss,
    })
}

/// Mean of repeated FWHM results with the standard error of the mean.
/// A single entry keeps its own uncertainty.
pub fn average_fwhm(values: &[Quantity]) -> Result<Quantity> {
    match values {
        [] => Err(Error::TooFew {
            what: "FWHM values",
            needed: 1,
            got: 0,
        }),
        [one] => Ok(*one),
        _ => {
            let n = values.len() as f64;
            let mean = values.iter().map(|q| q.value).sum::<f64>() / n;
            let var = values.iter().map(|q| (q.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(Quantity::new(mean, (var / n).sqrt(), values[0].unit))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirefringenceVerdict {
    pub max_pairwise_diff: Quantity,
    #[serde(with = "crate::decimal")]
    pub combined_sigma: f64,
    pub distinguishable: bool,
    /// Labels of the pair with the largest difference.
    pub pair: (String, String),
}

/// Largest pairwise FWHM difference between polarizations, flagged as
/// distinguishable when it exceeds twice the pair's combined sigma.
pub fn compare_polarizations(fits: &[(String, Quantity)]) -> Result<BirefringenceVerdict> {
    if fits.len() < 2 {
        return Err(Error::TooFew {
            what: "polarizations",
            needed: 2,
            got: fits.len(),
        });
    }
    let unit = fits[0].1.unit;
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..fits.len() {
        if fits[i].1.unit != unit {
            return Err(Error::UnitMismatch {
                left: unit,
                right: fits[i].1.unit,
            });
        }
        for j in i + 1..fits.len() {
            let d = (fits[i].1.value - fits[j].1.value).abs();
            if best.is_none_or(|(_, _, b)| d > b) {
                best = Some((i, j, d));
            }
        }
    }
    let (i, j, diff) = best.expect("at least one pair");
    let combined = fits[i].1.symmetric_sigma()?.hypot(fits[j].1.symmetric_sigma()?);
    Ok(BirefringenceVerdict {
        max_pairwise_diff: Quantity::new(diff, combined, unit),
        combined_sigma: combined,
        distinguishable: diff > 2.0 * combined,
        pair: (fits[i].0.clone(), fits[j].0.clone()),
    })
}
