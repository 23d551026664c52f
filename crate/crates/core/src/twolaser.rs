//! Reduction of simultaneous two-laser wavelength-meter readings.
//!
//! One laser sits on the TEM00 mode of longitudinal order `n` (the
//! reference). A second laser is tuned onto either the TEM00 or the TEM10
//! mode of order `n + 1`. Because both frequencies are read at the same
//! instant, cavity drift drops out of their difference and only the meter
//! resolution limits the result.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT as C;
use crate::error::{Error, Result};
use crate::geometry::{self, CavityGeometry};
use crate::quantity::{difference, propagate, Propagation, Quantity, Unit};

/// A measured laser frequency plus the cavity mode it was tuned onto.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserLine {
    pub label: String,
    pub frequency: Quantity,
    /// 0 for mode `n`, 1 for mode `n + 1`.
    pub longitudinal_offset: i64,
    /// 0 for TEM00, 1 for TEM10/TEM01.
    pub transverse_order: u32,
}

impl LaserLine {
    pub fn new(
        label: impl Into<String>,
        frequency_hz: f64,
        sigma_hz: f64,
        longitudinal_offset: i64,
        transverse_order: u32,
    ) -> Result<Self> {
        if !(frequency_hz > 0.0) || !frequency_hz.is_finite() {
            return Err(Error::NonPositive {
                what: "laser frequency",
                value: frequency_hz,
            });
        }
        if !(sigma_hz >= 0.0) {
            return Err(Error::Config(format!("negative frequency sigma {sigma_hz}")));
        }
        Ok(LaserLine {
            label: label.into(),
            frequency: Quantity::new(frequency_hz, sigma_hz, Unit::Hz),
            longitudinal_offset,
            transverse_order,
        })
    }

    fn assignment(&self) -> (i64, u32) {
        (self.longitudinal_offset, self.transverse_order)
    }

    /// Vacuum wavelength `c/ν` with propagated sigma.
    pub fn wavelength(&self) -> Result<Quantity> {
        geometry::positive(&self.frequency, Unit::Hz, "laser frequency")?;
        propagate(Unit::Meter, &[self.frequency], |x| C / x[0])
    }
}

/// Two lines read simultaneously: a TEM00 reference on mode `n` and a probe
/// on mode `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePairing {
    pub reference: LaserLine,
    pub probe: LaserLine,
}

impl ModePairing {
    pub fn new(reference: LaserLine, probe: LaserLine) -> Result<Self> {
        if reference.assignment() != (0, 0) {
            return Err(Error::ModeAssignment(format!(
                "reference '{}' must be TEM00 of order n, got offset {} order {}",
                reference.label, reference.longitudinal_offset, reference.transverse_order
            )));
        }
        if probe.longitudinal_offset != 1 {
            return Err(Error::ModeAssignment(format!(
                "probe '{}' must sit on longitudinal order n+1",
                probe.label
            )));
        }
        if probe.frequency.value <= reference.frequency.value {
            return Err(Error::ModeAssignment(format!(
                "probe '{}' ({} Hz) is not above reference '{}' ({} Hz)",
                probe.label, probe.frequency.value, reference.label, reference.frequency.value
            )));
        }
        Ok(ModePairing { reference, probe })
    }
}

/// Free spectral range from a TEM00/TEM00 pairing of adjacent orders.
pub fn reduce_fsr(pairing: &ModePairing, mode: Propagation) -> Result<Quantity> {
    if pairing.probe.transverse_order != 0 {
        return Err(Error::ModeAssignment("FSR reduction needs a TEM00 probe".into()));
    }
    let fsr = difference(&pairing.probe.frequency, &pairing.reference.frequency, mode)?;
    if !(fsr.value > 0.0) {
        return Err(Error::ModeAssignment("non-positive FSR".into()));
    }
    Ok(fsr)
}

/// Transverse mode spacing from a TEM00/TEM10 pairing and a known FSR.
///
/// The probe and reference are treated as independent of the readings that
/// produced `fsr`. When the reference reading is shared, use
/// [`reduce_lines`], which cancels it.
pub fn reduce_trans(pairing: &ModePairing, fsr: Quantity, mode: Propagation) -> Result<Quantity> {
    if pairing.probe.transverse_order != 1 {
        return Err(Error::ModeAssignment("transverse reduction needs a TEM10 probe".into()));
    }
    let separation = difference(&pairing.probe.frequency, &pairing.reference.frequency, mode)?;
    let trans = difference(&separation, &fsr, mode)?;
    check_trans(trans, fsr)?;
    Ok(trans)
}

fn check_trans(trans: Quantity, fsr: Quantity) -> Result<()> {
    if trans.value > 0.0 && trans.value < fsr.value {
        Ok(())
    } else {
        Err(Error::ModeAssignment(format!(
            "transverse spacing {} Hz is outside (0, {}) Hz; transverse order misassigned",
            trans.value, fsr.value
        )))
    }
}

/// The spectral inputs to [`solve_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    pub fsr: Quantity,
    pub trans: Quantity,
    pub lambda: Quantity,
}

/// Reduces the standard three-line set: reference TEM00 on `n`, TEM00 on
/// `n + 1`, and TEM10 on `n + 1`, all against the same reference reading.
///
/// The reference cancels in `ν_trans = ν(n+1,10) − ν(n+1,00)`, so the
/// transverse spacing carries only the two probe readings. The wavelength is
/// that of the TEM00 probe.
pub fn reduce_lines(lines: &[LaserLine], mode: Propagation) -> Result<Spectra> {
    let find = |assign: (i64, u32)| lines.iter().find(|l| l.assignment() == assign);
    let reference = find((0, 0)).ok_or(Error::MissingLine("missing reference TEM00 line"))?;
    let adjacent = find((1, 0)).ok_or(Error::MissingLine("missing adjacent TEM00 probe"))?;
    let transverse = find((1, 1)).ok_or(Error::MissingLine("missing transverse probe"))?;

    let fsr = reduce_fsr(&ModePairing::new(reference.clone(), adjacent.clone())?, mode)?;
    let pairing = ModePairing::new(reference.clone(), transverse.clone())?;
    let separation = pairing.probe.frequency.value - pairing.reference.frequency.value;
    let shared = difference(&transverse.frequency, &adjacent.frequency, mode)?;
    let trans = Quantity::new(separation - fsr.value, shared.symmetric_sigma()?, Unit::Hz);
    check_trans(trans, fsr)?;
    Ok(Spectra {
        fsr,
        trans,
        lambda: adjacent.wavelength()?,
    })
}

/// Full geometry from `(ν_fsr, ν_trans, λ)`, each output propagated end to end
/// from these three inputs.
pub fn solve_geometry(fsr: Quantity, trans: Quantity, lambda: Quantity) -> Result<CavityGeometry> {
    geometry::positive(&lambda, Unit::Meter, "wavelength")?;
    // domain checks with the individual relations
    let gouy = geometry::gouy_from_trans(trans, fsr)?;
    let length = geometry::length_from_fsr(fsr)?;
    let radius = geometry::radius_from_gouy(gouy, length)?;
    geometry::check_stable(length.value, radius.value)?;

    let inputs = [fsr, trans, lambda];
    let field = |unit: Unit, pick: fn(&Chain) -> f64| propagate(unit, &inputs, |x| pick(&Chain::new(x[0], x[1], x[2])));
    Ok(CavityGeometry {
        fsr,
        length_l: field(Unit::Meter, |c| c.length)?,
        gouy: field(Unit::Radian, |c| c.gouy)?,
        radius_r: field(Unit::Meter, |c| c.radius)?,
        waist_w0: field(Unit::Meter, |c| c.waist)?,
        rayleigh_z0: field(Unit::Meter, |c| c.rayleigh)?,
        mode_volume_vc: field(Unit::CubicMeter, |c| c.volume)?,
        wavelength_lambda: lambda,
    })
}

struct Chain {
    length: f64,
    gouy: f64,
    radius: f64,
    waist: f64,
    rayleigh: f64,
    volume: f64,
}

impl Chain {
    fn new(fsr: f64, trans: f64, lambda: f64) -> Self {
        let length = C / (2.0 * fsr);
        let gouy = PI * trans / fsr;
        let radius = length / (2.0 * (gouy / 2.0).sin().powi(2));
        let waist = (length * (2.0 * radius - length) * lambda * lambda / (4.0 * PI * PI)).powf(0.25);
        Chain {
            length,
            gouy,
            radius,
            waist,
            rayleigh: PI * waist * waist / lambda,
            volume: PI * waist * waist * length / 4.0,
        }
    }
}

/// Convenience wrapper: lines straight to geometry.
pub fn geometry_from_lines(lines: &[LaserLine], mode: Propagation) -> Result<CavityGeometry> {
    let s = reduce_lines(lines, mode)?;
    solve_geometry(s.fsr, s.trans, s.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NU_782: f64 = 383.23957e12;
    const NU_780: f64 = 384.22777e12;
    const SEP_10: f64 = 1.00547e12;

    fn measured_lines(sigma: f64) -> Vec<LaserLine> {
        vec![
            LaserLine::new("782", NU_782, sigma, 0, 0).unwrap(),
            LaserLine::new("780", NU_780, sigma, 1, 0).unwrap(),
            LaserLine::new("780-TEM10", NU_782 + SEP_10, sigma, 1, 1).unwrap(),
        ]
    }

    #[test]
    fn fsr_from_measured_readings() {
        let lines = measured_lines(10e6);
        let p = ModePairing::new(lines[0].clone(), lines[1].clone()).unwrap();
        let fsr = reduce_fsr(&p, Propagation::Quadrature).unwrap();
        assert!((fsr.value - 0.98820e12).abs() < 1.0);
        assert!((fsr.sigma() - 14.142e6).abs() < 0.01e6);
        let fsr = reduce_fsr(&p, Propagation::Resolution).unwrap();
        assert_eq!(fsr.sigma(), 10e6);
    }

    #[test]
    fn identical_frequencies_rejected() {
        let a = LaserLine::new("a", NU_782, 10e6, 0, 0).unwrap();
        let b = LaserLine::new("b", NU_782, 10e6, 1, 0).unwrap();
        assert!(matches!(ModePairing::new(a, b), Err(Error::ModeAssignment(_))));
    }

    #[test]
    fn same_assignment_rejected() {
        let a = LaserLine::new("a", NU_782, 10e6, 0, 0).unwrap();
        let b = LaserLine::new("b", NU_780, 10e6, 0, 0).unwrap();
        assert!(ModePairing::new(a, b).is_err());
    }

    #[test]
    fn trans_from_measured_readings() {
        let lines = measured_lines(10e6);
        let fsr = Quantity::new(0.98820e12, 10e6, Unit::Hz);
        let p = ModePairing::new(lines[0].clone(), lines[2].clone()).unwrap();
        let t = reduce_trans(&p, fsr, Propagation::Quadrature).unwrap();
        assert!((t.value - 17.270e9).abs() < 1e3);
    }

    #[test]
    fn trans_equal_to_fsr_means_tem00() {
        let a = LaserLine::new("a", NU_782, 10e6, 0, 0).unwrap();
        let b = LaserLine::new("b", NU_780, 10e6, 1, 1).unwrap();
        let p = ModePairing::new(a, b).unwrap();
        let fsr = Quantity::new(NU_780 - NU_782, 10e6, Unit::Hz);
        assert!(matches!(
            reduce_trans(&p, fsr, Propagation::Quadrature),
            Err(Error::ModeAssignment(_))
        ));
    }

    #[test]
    fn wrong_probe_order_rejected() {
        let lines = measured_lines(10e6);
        let p = ModePairing::new(lines[0].clone(), lines[2].clone()).unwrap();
        assert!(reduce_fsr(&p, Propagation::Quadrature).is_err());
    }

    #[test]
    fn missing_lines_are_reported() {
        let lines = measured_lines(10e6);
        let err = reduce_lines(&lines[..2], Propagation::Quadrature).unwrap_err();
        assert_eq!(err.to_string(), "missing transverse probe");
        let err = reduce_lines(&lines[1..], Propagation::Quadrature).unwrap_err();
        assert!(matches!(err, Error::MissingLine(_)));
    }

    #[test]
    fn measured_geometry() {
        let g = geometry_from_lines(&measured_lines(10e6), Propagation::Quadrature).unwrap();
        assert!((g.length_l.value - 151.686e-6).abs() < 0.001e-6);
        assert!((g.gouy.value - 54.90e-3).abs() < 0.01e-3);
        assert!((g.radius_r.value - 0.1007).abs() < 0.0001);
        assert!((g.waist_w0.value - 26.19e-6).abs() < 0.01e-6);
        assert!((g.rayleigh_z0.value - 2.762e-3).abs() < 0.002e-3);
        assert!((g.mode_volume_vc.value - 81.73e-15).abs() < 0.05e-15);
        assert!((1.5e-9..=2.5e-9).contains(&g.length_l.sigma()));
        assert!((25e-6..=45e-6).contains(&g.gouy.sigma()), "{}", g.gouy.sigma());
    }

    #[test]
    fn swapping_labels_changes_nothing() {
        let mut lines = measured_lines(10e6);
        let a = geometry_from_lines(&lines, Propagation::Quadrature).unwrap();
        lines[0].label = "780".into();
        lines[1].label = "782".into();
        lines.reverse();
        let b = geometry_from_lines(&lines, Propagation::Quadrature).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn independent_pairing_books_both_sigmas() {
        let lines = measured_lines(10e6);
        let p = ModePairing::new(lines[0].clone(), lines[2].clone()).unwrap();
        let fsr = Quantity::new(0.98820e12, 14.142e6, Unit::Hz);
        let t = reduce_trans(&p, fsr, Propagation::Quadrature).unwrap();
        assert!((t.sigma() - 20.0e6).abs() < 0.01e6);
    }

    mod props {
        use super::*;
        use crate::geometry::{fsr_from_length, gouy_from_geometry, trans_spacing_from_gouy};
        use proptest::prelude::*;

        fn m(v: f64) -> Quantity {
            Quantity::exact(v, Unit::Meter)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn closed_loop_recovers_length_and_radius(
                l in 10e-6f64..0.1, r_over_l in 0.51f64..1e3, lam in 700e-9f64..900e-9
            ) {
                let r = l * r_over_l;
                let fsr = fsr_from_length(m(l)).unwrap();
                let trans = trans_spacing_from_gouy(gouy_from_geometry(m(l), m(r)).unwrap(), fsr).unwrap();
                let g = solve_geometry(fsr, trans, m(lam)).unwrap();
                prop_assert!(((g.length_l.value - l) / l).abs() < 1e-9);
                prop_assert!(((g.radius_r.value - r) / r).abs() < 1e-9);
                prop_assert_eq!(g.radius_r.sigma(), 0.0);
            }

            #[test]
            fn sigmas_monotone_in_input_sigmas(s1 in 1e5f64..1e8, k in 1.0f64..10.0) {
                let lam = Quantity::exact(780.2e-9, Unit::Meter);
                let small = solve_geometry(
                    Quantity::new(0.98820e12, s1, Unit::Hz),
                    Quantity::new(17.27e9, s1, Unit::Hz), lam).unwrap();
                let big = solve_geometry(
                    Quantity::new(0.98820e12, s1 * k, Unit::Hz),
                    Quantity::new(17.27e9, s1 * k, Unit::Hz), lam).unwrap();
                for (a, b) in [(small.length_l, big.length_l), (small.gouy, big.gouy),
                               (small.radius_r, big.radius_r), (small.waist_w0, big.waist_w0),
                               (small.rayleigh_z0, big.rayleigh_z0), (small.mode_volume_vc, big.mode_volume_vc)] {
                    prop_assert!(b.sigma() >= a.sigma() * (1.0 - 1e-9));
                }
            }
        }
    }
}
