//! Mirror transmission statistics, total loss and outcoupling efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::positive;
use crate::quantity::{propagate, Quantity, Unit};

/// Transmittances of mirrors from one coating run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSet {
    pub transmittances: Vec<Quantity>,
    pub wavelength: Quantity,
    /// Powermeter linearity as a fraction of the statistical sigma.
    #[serde(with = "crate::decimal")]
    pub systematic_fraction: f64,
}

impl MirrorSet {
    pub fn from_ppm(values: &[f64], wavelength_m: f64, systematic_fraction: f64) -> Result<Self> {
        let set = MirrorSet {
            transmittances: values.iter().map(|&v| Quantity::exact(v, Unit::Ppm)).collect(),
            wavelength: Quantity::exact(wavelength_m, Unit::Meter),
            systematic_fraction,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.transmittances.is_empty() {
            return Err(Error::TooFew {
                what: "mirror transmittances",
                needed: 1,
                got: 0,
            });
        }
        for t in &self.transmittances {
            positive(t, Unit::Ppm, "transmittance")?;
            if t.value >= 1e6 {
                return Err(Error::OutOfRange {
                    what: "transmittance",
                    value: t.value,
                    range: "(0, 1e6) ppm",
                });
            }
        }
        if !(self.systematic_fraction >= 0.0) {
            return Err(Error::Config(format!(
                "negative systematic fraction {}",
                self.systematic_fraction
            )));
        }
        Ok(())
    }
}

/// Mean transmittance; sigma is the sample standard deviation with the
/// systematic term added in quadrature.
pub fn mirror_stats(set: &MirrorSet) -> Result<Quantity> {
    set.validate()?;
    let vals = &set.transmittances;
    let n = vals.len() as f64;
    let mean = vals.iter().map(|q| q.value).sum::<f64>() / n;
    let stat = if vals.len() == 1 {
        vals[0].symmetric_sigma()?
    } else {
        (vals.iter().map(|q| (q.value - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let total = stat.hypot(set.systematic_fraction * stat);
    Ok(Quantity::new(mean, total, Unit::Ppm))
}

/// Round-trip loss `2π/F` in ppm.
pub fn total_loss_from_finesse(finesse: Quantity) -> Result<Quantity> {
    positive(&finesse, Unit::Dimensionless, "finesse")?;
    propagate(Unit::Ppm, &[finesse], |x| 2.0 * std::f64::consts::PI * 1e6 / x[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcouplingResult {
    pub efficiency: Quantity,
    pub transmittance_t: Quantity,
    pub total_loss: Quantity,
    pub clamped: bool,
}

/// `T / L_tot`; the upper interval is clamped so the efficiency never
/// exceeds unity.
pub fn outcoupling(t: Quantity, total_loss: Quantity) -> Result<OutcouplingResult> {
    positive(&t, Unit::Ppm, "transmittance")?;
    positive(&total_loss, Unit::Ppm, "total loss")?;
    if t.value > total_loss.value {
        return Err(Error::OutOfRange {
            what: "transmittance / total loss",
            value: t.value / total_loss.value,
            range: "[0, 1]",
        });
    }
    let eff = propagate(Unit::Dimensionless, &[t, total_loss], |x| x[0] / x[1])?;
    let sigma = eff.sigma();
    let (efficiency, clamped) = if eff.value + sigma > 1.0 {
        let plus = (1.0 - eff.value).max(0.0);
        (Quantity::asymmetric(eff.value, sigma, plus, Unit::Dimensionless), true)
    } else {
        (eff, false)
    };
    Ok(OutcouplingResult {
        efficiency,
        transmittance_t: t,
        total_loss,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm(v: f64, s: f64) -> Quantity {
        Quantity::new(v, s, Unit::Ppm)
    }

    /// Eight values with mean 218 and sample standard deviation 9.
    fn synthetic_780_set() -> Vec<f64> {
        let k = 9.0 * (7.0f64 / 8.0).sqrt();
        (0..8).map(|i| 218.0 + if i % 2 == 0 { k } else { -k }).collect()
    }

    #[test]
    fn summary_statistics_of_constructed_set() {
        let set = MirrorSet::from_ppm(&synthetic_780_set(), 780e-9, 0.0).unwrap();
        let t = mirror_stats(&set).unwrap();
        assert!((t.value - 218.0).abs() < 1e-12);
        assert!((t.sigma() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_mirror() {
        let set = MirrorSet::from_ppm(&[220.0], 795e-9, 0.0).unwrap();
        let t = mirror_stats(&set).unwrap();
        assert_eq!(t.value, 220.0);
        assert_eq!(t.sigma(), 0.0);
    }

    #[test]
    fn systematic_term_in_quadrature() {
        let k = 4.0 * (7.0f64 / 8.0).sqrt();
        let vals: Vec<f64> = (0..8).map(|i| 220.0 + if i % 2 == 0 { k } else { -k }).collect();
        let set = MirrorSet::from_ppm(&vals, 795e-9, 0.02).unwrap();
        let t = mirror_stats(&set).unwrap();
        assert!((t.sigma() - 4.0008).abs() < 1e-4);
    }

    #[test]
    fn invalid_sets() {
        assert!(MirrorSet::from_ppm(&[], 780e-9, 0.0).is_err());
        assert!(MirrorSet::from_ppm(&[0.0], 780e-9, 0.0).is_err());
        assert!(MirrorSet::from_ppm(&[2e6], 780e-9, 0.0).is_err());
    }

    #[test]
    fn loss_from_finesse() {
        let l = total_loss_from_finesse(Quantity::new(2.66e4, 0.06e4, Unit::Dimensionless)).unwrap();
        assert!((l.value - 236.0).abs() < 1.0);
        assert!((l.sigma() - 5.3).abs() < 0.1);
        let l = total_loss_from_finesse(Quantity::new(2.84e4, 0.07e4, Unit::Dimensionless)).unwrap();
        assert!((l.value - 221.0).abs() < 1.0);
        assert!((l.sigma() - 5.5).abs() < 0.1);
        let l =
            total_loss_from_finesse(Quantity::exact(2.0 * std::f64::consts::PI * 1e6, Unit::Dimensionless)).unwrap();
        assert!((l.value - 1.0).abs() < 1e-12);
        assert!(total_loss_from_finesse(Quantity::exact(0.0, Unit::Dimensionless)).is_err());
    }

    #[test]
    fn outcoupling_780() {
        let r = outcoupling(ppm(218.0, 9.0), ppm(236.0, 6.0)).unwrap();
        assert!((r.efficiency.value - 0.92).abs() < 0.005);
        assert!((r.efficiency.sigma() - 0.04).abs() < 0.005);
        assert!(!r.clamped);
    }

    #[test]
    fn outcoupling_795_is_clamped() {
        let r = outcoupling(ppm(220.0, 4.0), ppm(221.0, 6.0)).unwrap();
        assert!(r.clamped);
        assert!(r.efficiency.value >= 0.99);
        assert!((r.efficiency.sigma_minus - 0.03).abs() < 0.005);
        assert!((r.efficiency.sigma_plus - (1.0 - r.efficiency.value)).abs() < 1e-15);
        assert!(r.efficiency.value + r.efficiency.sigma_plus <= 1.0);
    }

    #[test]
    fn unity_boundary_not_clamped() {
        let r = outcoupling(ppm(230.0, 0.0), ppm(230.0, 0.0)).unwrap();
        assert_eq!(r.efficiency.value, 1.0);
        assert!(!r.clamped);
        assert!(outcoupling(ppm(0.0, 0.0), ppm(230.0, 0.0)).is_err());
        assert!(outcoupling(ppm(231.0, 0.0), ppm(230.0, 0.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scale_invariance(l in 1.0f64..1e3, frac in 0.01f64..1.0, st in 0.0f64..0.1,
                                sl in 0.0f64..0.1, k in 1e-3f64..1e3) {
                let t = frac * l;
                let a = outcoupling(ppm(t, st * t), ppm(l, sl * l)).unwrap();
                let b = outcoupling(ppm(k * t, k * st * t), ppm(k * l, k * sl * l)).unwrap();
                let rel = |x: f64, y: f64| if y == 0.0 { x.abs() } else { ((x - y) / y).abs() };
                prop_assert!(rel(a.efficiency.value, b.efficiency.value) < 1e-12);
                prop_assert!(rel(a.efficiency.sigma_minus, b.efficiency.sigma_minus) < 1e-6);
                prop_assert_eq!(a.clamped, b.clamped);
            }

            #[test]
            fn clamping_keeps_center_and_bound(l in 1.0f64..1e3, frac in 0.01f64..1.0,
                                               st in 0.0f64..0.3, sl in 0.0f64..0.3) {
                let t = frac * l;
                let raw = t / l;
                let r = outcoupling(ppm(t, st * t), ppm(l, sl * l)).unwrap();
                prop_assert!((r.efficiency.value - raw).abs() <= 1e-15 * raw);
                if r.clamped {
                    prop_assert!(r.efficiency.value + r.efficiency.sigma_plus <= 1.0 + 1e-15);
                }
            }

            #[test]
            fn mean_within_range(vals in proptest::collection::vec(1.0f64..1e5, 1..20)) {
                let set = MirrorSet::from_ppm(&vals, 780e-9, 0.0).unwrap();
                let t = mirror_stats(&set).unwrap();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(t.value >= lo * (1.0 - 1e-12) && t.value <= hi * (1.0 + 1e-12));
                let all_equal = vals.iter().all(|v| *v == vals[0]);
                prop_assert_eq!(t.sigma() == 0.0, all_equal);
            }
        }
    }
}
