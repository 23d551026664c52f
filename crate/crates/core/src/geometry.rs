//! Closed-form relations of a symmetric two-mirror Gaussian resonator.
//!
//! Both mirrors share the radius of curvature `R`; the spacing is `L`.
//! Stability requires `0 < L < 2R`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT as C;
use crate::error::{Error, Result};
use crate::quantity::{propagate, Quantity, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub fsr: Quantity,
    pub length_l: Quantity,
    pub gouy: Quantity,
    pub radius_r: Quantity,
    pub waist_w0: Quantity,
    pub rayleigh_z0: Quantity,
    pub mode_volume_vc: Quantity,
    pub wavelength_lambda: Quantity,
}

pub(crate) fn expect_unit(q: &Quantity, unit: Unit) -> Result<()> {
    if q.unit != unit {
        return Err(Error::UnitMismatch {
            left: q.unit,
            right: unit,
        });
    }
    Ok(())
}

pub(crate) fn positive(q: &Quantity, unit: Unit, what: &'static str) -> Result<()> {
    expect_unit(q, unit)?;
    if !(q.value > 0.0) || !q.value.is_finite() {
        return Err(Error::NonPositive { what, value: q.value });
    }
    Ok(())
}

pub(crate) fn check_stable(length: f64, radius: f64) -> Result<()> {
    if length > 0.0 && radius > 0.0 && length < 2.0 * radius {
        Ok(())
    } else {
        Err(Error::Unstable { length, radius })
    }
}

fn check_gouy(gouy: &Quantity) -> Result<()> {
    expect_unit(gouy, Unit::Radian)?;
    if gouy.value > 0.0 && gouy.value < PI {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "Gouy phase",
            value: gouy.value,
            range: "(0, pi)",
        })
    }
}

pub fn length_from_fsr(fsr: Quantity) -> Result<Quantity> {
    positive(&fsr, Unit::Hz, "free spectral range")?;
    propagate(Unit::Meter, &[fsr], |x| C / (2.0 * x[0]))
}

pub fn fsr_from_length(length: Quantity) -> Result<Quantity> {
    positive(&length, Unit::Meter, "cavity length")?;
    propagate(Unit::Hz, &[length], |x| C / (2.0 * x[0]))
}

/// Round-trip Gouy phase `2·atan(sqrt(L/(2R − L)))`.
pub fn gouy_from_geometry(length: Quantity, radius: Quantity) -> Result<Quantity> {
    expect_unit(&length, Unit::Meter)?;
    expect_unit(&radius, Unit::Meter)?;
    check_stable(length.value, radius.value)?;
    propagate(Unit::Radian, &[length, radius], |x| {
        2.0 * (x[0] / (2.0 * x[1] - x[0])).sqrt().atan()
    })
}

/// Inverse of [`gouy_from_geometry`]: `R = L / (2·sin²(Δζ/2))`.
pub fn radius_from_gouy(gouy: Quantity, length: Quantity) -> Result<Quantity> {
    check_gouy(&gouy)?;
    positive(&length, Unit::Meter, "cavity length")?;
    propagate(Unit::Meter, &[gouy, length], |x| {
        x[1] / (2.0 * (x[0] / 2.0).sin().powi(2))
    })
}

pub fn trans_spacing_from_gouy(gouy: Quantity, fsr: Quantity) -> Result<Quantity> {
    check_gouy(&gouy)?;
    positive(&fsr, Unit::Hz, "free spectral range")?;
    propagate(Unit::Hz, &[gouy, fsr], |x| x[0] * x[1] / PI)
}

pub fn gouy_from_trans(trans: Quantity, fsr: Quantity) -> Result<Quantity> {
    positive(&fsr, Unit::Hz, "free spectral range")?;
    expect_unit(&trans, Unit::Hz)?;
    if !(trans.value > 0.0 && trans.value < fsr.value) {
        return Err(Error::OutOfRange {
            what: "transverse mode spacing",
            value: trans.value,
            range: "(0, fsr)",
        });
    }
    propagate(Unit::Radian, &[trans, fsr], |x| PI * x[0] / x[1])
}

/// Mode waist `(L(2R − L)λ²/4π²)^(1/4)`.
pub fn waist(length: Quantity, radius: Quantity, lambda: Quantity) -> Result<Quantity> {
    expect_unit(&length, Unit::Meter)?;
    expect_unit(&radius, Unit::Meter)?;
    positive(&lambda, Unit::Meter, "wavelength")?;
    check_stable(length.value, radius.value)?;
    propagate(Unit::Meter, &[length, radius, lambda], |x| {
        (x[0] * (2.0 * x[1] - x[0]) * x[2] * x[2] / (4.0 * PI * PI)).powf(0.25)
    })
}

/// Rayleigh range `π·w0²/λ`.
pub fn rayleigh(w0: Quantity, lambda: Quantity) -> Result<Quantity> {
    positive(&w0, Unit::Meter, "mode waist")?;
    positive(&lambda, Unit::Meter, "wavelength")?;
    propagate(Unit::Meter, &[w0, lambda], |x| PI * x[0] * x[0] / x[1])
}

/// Standing-wave mode volume `π·w0²·L/4`.
pub fn mode_volume(w0: Quantity, length: Quantity) -> Result<Quantity> {
    positive(&w0, Unit::Meter, "mode waist")?;
    positive(&length, Unit::Meter, "cavity length")?;
    propagate(Unit::CubicMeter, &[w0, length], |x| PI * x[0] * x[0] * x[1] / 4.0)
}

/// Resonance frequency of longitudinal order `n` and total transverse order
/// (`m + n` of TEMmn), relative to an arbitrary common offset.
pub fn mode_frequency(n: i64, transverse_order: u32, fsr: Quantity, gouy: Quantity) -> Result<Quantity> {
    expect_unit(&fsr, Unit::Hz)?;
    expect_unit(&gouy, Unit::Radian)?;
    let n = n as f64;
    let order = transverse_order as f64;
    propagate(Unit::Hz, &[fsr, gouy], |x| n * x[0] + order * x[1] * x[0] / PI)
}

impl CavityGeometry {
    /// Builds the full parameter set from a known `(L, R)` and wavelength.
    pub fn from_length_radius(length: Quantity, radius: Quantity, lambda: Quantity) -> Result<Self> {
        let fsr = fsr_from_length(length)?;
        let gouy = gouy_from_geometry(length, radius)?;
        let w0 = waist(length, radius, lambda)?;
        Ok(CavityGeometry {
            fsr,
            length_l: length,
            gouy,
            radius_r: radius,
            waist_w0: w0,
            rayleigh_z0: rayleigh(w0, lambda)?,
            mode_volume_vc: mode_volume(w0, length)?,
            wavelength_lambda: lambda,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: f64) -> Quantity {
        Quantity::exact(v, Unit::Meter)
    }
    fn hz(v: f64) -> Quantity {
        Quantity::exact(v, Unit::Hz)
    }
    fn rad(v: f64) -> Quantity {
        Quantity::exact(v, Unit::Radian)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    const L_REF: f64 = 151.686e-6;
    const LAMBDA_780: f64 = 780.245e-9;

    #[test]
    fn length_and_fsr() {
        assert!((length_from_fsr(hz(0.98820e12)).unwrap().value - L_REF).abs() < 0.5e-9);
        assert!(rel(length_from_fsr(hz(149_896_229.0)).unwrap().value, 1.0) < 1e-15);
        assert!(rel(fsr_from_length(m(L_REF)).unwrap().value, 0.98820e12) < 1e-5);
        assert_eq!(fsr_from_length(m(1.0)).unwrap().value, 149_896_229.0);
        assert_eq!(fsr_from_length(m(0.5)).unwrap().value, 299_792_458.0);
        let x = hz(1.234_567e12);
        assert!(rel(fsr_from_length(length_from_fsr(x).unwrap()).unwrap().value, x.value) < 1e-12);
        assert!(matches!(length_from_fsr(hz(0.0)), Err(Error::NonPositive { .. })));
        assert!(matches!(fsr_from_length(m(-1.0)), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn gouy_phase() {
        let g = gouy_from_geometry(m(L_REF), m(0.1007)).unwrap();
        assert!((g.value - 54.90e-3).abs() < 0.01e-3, "{}", g.value);
        let g = gouy_from_geometry(m(0.05), m(0.05)).unwrap();
        assert!((g.value - PI / 2.0).abs() < 1e-12);
        let g = gouy_from_geometry(m(1e-12), m(0.1)).unwrap();
        assert!(g.value < 1e-5);
        assert!(matches!(
            gouy_from_geometry(m(0.2), m(0.1)),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            gouy_from_geometry(m(0.0), m(0.1)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn radius_inversion() {
        let r = radius_from_gouy(rad(54.90e-3), m(L_REF)).unwrap();
        assert!((r.value - 0.1007).abs() < 0.0001, "{}", r.value);
        let r = radius_from_gouy(rad(PI / 2.0), m(0.03)).unwrap();
        assert!(rel(r.value, 0.03) < 1e-12);
        assert!(matches!(
            radius_from_gouy(rad(PI), m(0.03)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            radius_from_gouy(rad(0.0), m(0.03)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn transverse_spacing() {
        let t = trans_spacing_from_gouy(rad(54.90e-3), hz(0.98820e12)).unwrap();
        assert!((t.value - 17.27e9).abs() < 0.005e9);
        let t = trans_spacing_from_gouy(rad(PI / 2.0), hz(2e12)).unwrap();
        assert!(rel(t.value, 1e12) < 1e-15);
        let g = gouy_from_trans(hz(17.270e9), Quantity::new(0.98820e12, 10e6, Unit::Hz));
        let g = g.unwrap();
        assert!((g.value - 54.90e-3).abs() < 0.005e-3);
        let g = gouy_from_trans(
            Quantity::new(17.270e9, 10e6, Unit::Hz),
            Quantity::new(0.98820e12, 10e6, Unit::Hz),
        )
        .unwrap();
        assert!((g.sigma() - 0.03e-3).abs() < 0.005e-3, "{}", g.sigma());
        assert!(rel(gouy_from_trans(hz(0.5e12), hz(1e12)).unwrap().value, PI / 2.0) < 1e-15);
        assert!(rel(gouy_from_trans(hz(0.1e12), hz(1e12)).unwrap().value, 0.1 * PI) < 1e-15);
        assert!(gouy_from_trans(hz(1e12), hz(1e12)).is_err());
        assert!(gouy_from_trans(hz(-1.0), hz(1e12)).is_err());
    }

    #[test]
    fn gouy_trans_round_trip() {
        let g = rad(0.731);
        let f = hz(3.3e11);
        let back = gouy_from_trans(trans_spacing_from_gouy(g, f).unwrap(), f).unwrap();
        assert!(rel(back.value, g.value) < 1e-12);
    }

    #[test]
    fn waist_rayleigh_volume() {
        let w0 = waist(m(L_REF), m(0.1007), m(LAMBDA_780)).unwrap();
        assert!((w0.value - 26.19e-6).abs() < 0.01e-6, "{}", w0.value);
        // confocal reduction w0 = sqrt(Lλ/2π)
        let w = waist(m(0.02), m(0.02), m(LAMBDA_780)).unwrap();
        assert!(rel(w.value, (0.02 * LAMBDA_780 / (2.0 * PI)).sqrt()) < 1e-12);
        let w2 = waist(m(L_REF), m(0.1007), m(2.0 * LAMBDA_780)).unwrap();
        assert!(rel(w2.value / w0.value, 2f64.sqrt()) < 1e-12);

        let z0 = rayleigh(m(26.192e-6), m(LAMBDA_780)).unwrap();
        assert!((z0.value - 2.762e-3).abs() < 0.001e-3, "{}", z0.value);
        let z0b = rayleigh(m(2.0 * 26.192e-6), m(LAMBDA_780)).unwrap();
        assert!(rel(z0b.value, 4.0 * z0.value) < 1e-12);

        let vc = mode_volume(m(26.192e-6), m(L_REF)).unwrap();
        assert!((vc.value - 81.73e-15).abs() < 0.01e-15, "{}", vc.value);
        assert!(rel(mode_volume(m(1.0), m(4.0 / PI)).unwrap().value, 1.0) < 1e-15);
        assert!(
            rel(
                mode_volume(m(1e-5), m(3e-4)).unwrap().value,
                3.0 * mode_volume(m(1e-5), m(1e-4)).unwrap().value
            ) < 1e-12
        );
        assert!(rayleigh(m(0.0), m(LAMBDA_780)).is_err());
        assert!(mode_volume(m(1e-5), m(-1.0)).is_err());
    }

    #[test]
    fn rayleigh_identity_from_waist() {
        let (l, r) = (L_REF, 0.1007);
        let w0 = waist(m(l), m(r), m(LAMBDA_780)).unwrap();
        let z0 = rayleigh(w0, m(LAMBDA_780)).unwrap();
        assert!(rel(z0.value, (l * (2.0 * r - l)).sqrt() / 2.0) < 1e-6);
    }

    #[test]
    fn mode_ladder() {
        let fsr = hz(0.98820e12);
        let gouy = rad(PI * 17.27e9 / 0.98820e12);
        let n = 388;
        let base = mode_frequency(n, 0, fsr, gouy).unwrap().value;
        let next00 = mode_frequency(n + 1, 0, fsr, gouy).unwrap().value;
        let next10 = mode_frequency(n + 1, 1, fsr, gouy).unwrap().value;
        assert!((next00 - base - 0.98820e12).abs() < 1e-3);
        assert!((next10 - base - 1.00547e12).abs() < 1.0);
        assert_eq!(mode_frequency(n, 0, fsr, gouy).unwrap().value - base, 0.0);
    }

    #[test]
    fn zero_sigma_in_zero_sigma_out() {
        let g = CavityGeometry::from_length_radius(m(L_REF), m(0.1007), m(LAMBDA_780)).unwrap();
        for q in [g.fsr, g.gouy, g.waist_w0, g.rayleigh_z0, g.mode_volume_vc] {
            assert_eq!(q.sigma(), 0.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stable() -> impl Strategy<Value = (f64, f64)> {
            (1e-5f64..1.0, 0.001f64..0.999).prop_map(|(r, frac)| (2.0 * r * frac, r))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn gouy_radius_round_trip((l, r) in stable()) {
                let g = gouy_from_geometry(m(l), m(r)).unwrap();
                prop_assert!(g.value > 0.0 && g.value < PI);
                let back = radius_from_gouy(g, m(l)).unwrap();
                prop_assert!(rel(back.value, r) < 1e-9);
            }

            #[test]
            fn length_fsr_round_trip(l in 1e-6f64..10.0) {
                let back = length_from_fsr(fsr_from_length(m(l)).unwrap()).unwrap();
                prop_assert!(rel(back.value, l) < 1e-12);
            }

            #[test]
            fn rayleigh_is_wavelength_independent((l, r) in stable(), lam in 700e-9f64..900e-9) {
                let w0 = waist(m(l), m(r), m(lam)).unwrap();
                let z0 = rayleigh(w0, m(lam)).unwrap();
                prop_assert!(rel(z0.value, (l * (2.0 * r - l)).sqrt() / 2.0) < 1e-6);
            }

            #[test]
            fn half_gouy_tangent((l, r) in stable()) {
                let g = gouy_from_geometry(m(l), m(r)).unwrap();
                let z0 = (l * (2.0 * r - l)).sqrt() / 2.0;
                prop_assert!(rel((g.value / 2.0).tan(), l / (2.0 * z0)) < 1e-9);
            }
        }
    }
}
