//! Analysis report and merging of per-command fragments.

use serde::{Deserialize, Serialize};

use crate::budget::OutcouplingResult;
use crate::coupling::CouplingResult;
use crate::error::{Error, Result};
use crate::geometry::CavityGeometry;
use crate::io::InputHash;
use crate::lineshape::{BirefringenceVerdict, FinesseResult};
use crate::mech::{DipReport, ReferenceMatch, SweepAxis};
use crate::quantity::{Propagation, Quantity};

pub const TOOL: &str = "cavchar";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinesseEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<Quantity>,
    pub fwhm_per_trace: Vec<Quantity>,
    pub result: FinesseResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationFwhm {
    pub label: String,
    pub fwhm: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirefringenceEntry {
    pub wavelength: Quantity,
    pub polarizations: Vec<PolarizationFwhm>,
    pub verdict: BirefringenceVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub wavelength: Quantity,
    pub mirror_transmittance: Quantity,
    pub finesse: Quantity,
    pub result: OutcouplingResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechSource {
    Simulated,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechEntry {
    pub source: MechSource,
    pub axis: SweepAxis,
    pub dips: DipReport,
    pub matches: Vec<ReferenceMatch>,
}

/// A trace that could not be analysed; the batch it belongs to fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFailure {
    pub trace: String,
    pub code: String,
    pub message: String,
}

impl TraceFailure {
    pub fn new(trace: impl Into<String>, err: &Error) -> Self {
        TraceFailure {
            trace: trace.into(),
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub propagation: Propagation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
}

impl Provenance {
    pub fn new(propagation: Propagation, inputs: Vec<InputHash>) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            propagation,
            seed: None,
            inputs,
        }
    }
}

/// Full report, or a fragment of one when only some sections are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<CavityGeometry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub finesse: Vec<FinesseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub birefringence: Vec<BirefringenceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budget: Vec<BudgetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mech: Vec<MechEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<TraceFailure>,
    pub provenance: Provenance,
}

impl Report {
    pub fn empty(provenance: Provenance) -> Self {
        Report {
            geometry: None,
            finesse: Vec::new(),
            birefringence: Vec::new(),
            budget: Vec::new(),
            coupling: None,
            mech: Vec::new(),
            failures: Vec::new(),
            provenance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Appends `other`'s sections. Single-valued sections must agree when
    /// both fragments carry them; list sections keep fragment order.
    pub fn merge(&mut self, other: Report) -> Result<()> {
        fn single<T: PartialEq>(slot: &mut Option<T>, new: Option<T>, what: &str) -> Result<()> {
            match (slot.as_ref(), new) {
                (_, None) => Ok(()),
                (None, Some(v)) => {
                    *slot = Some(v);
                    Ok(())
                }
                (Some(a), Some(b)) if *a == b => Ok(()),
                (Some(_), Some(_)) => Err(Error::Config(format!("fragments disagree on {what}"))),
            }
        }
        if self.provenance.propagation != other.provenance.propagation {
            return Err(Error::Config(format!(
                "fragments use different propagation modes ({} vs {})",
                self.provenance.propagation.as_str(),
                other.provenance.propagation.as_str()
            )));
        }
        single(&mut self.geometry, other.geometry, "geometry")?;
        single(&mut self.coupling, other.coupling, "coupling")?;
        single(&mut self.provenance.seed, other.provenance.seed, "seed")?;
        self.finesse.extend(other.finesse);
        self.birefringence.extend(other.birefringence);
        self.budget.extend(other.budget);
        self.mech.extend(other.mech);
        self.failures.extend(other.failures);
        for h in other.provenance.inputs {
            if !self.provenance.inputs.contains(&h) {
                self.provenance.inputs.push(h);
            }
        }
        Ok(())
    }
}

/// Merges fragments in the given order.
pub fn merge_all(fragments: Vec<Report>) -> Result<Report> {
    let mut it = fragments.into_iter();
    let mut out = it.next().ok_or(Error::TooFew {
        what: "report fragments",
        needed: 1,
        got: 0,
    })?;
    for f in it {
        out.merge(f)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantity::Unit;

    fn prov(mode: Propagation) -> Provenance {
        Provenance::new(mode, vec![InputHash::of("m.json", b"{}")])
    }

    fn geometry_fragment() -> Report {
        let m = |v: f64| Quantity::new(v, v * 1e-5, Unit::Meter);
        let g = CavityGeometry::from_length_radius(m(151.686e-6), m(0.1007), m(780.24e-9)).unwrap();
        Report {
            geometry: Some(g),
            ..Report::empty(prov(Propagation::Quadrature))
        }
    }

    #[test]
    fn json_round_trip() {
        let r = geometry_fragment();
        let text = r.to_json().unwrap();
        assert!(text.contains("\"unit\": \"m\""));
        assert_eq!(Report::from_json(&text).unwrap(), r);
        assert_eq!(Report::from_json(&text).unwrap().to_json().unwrap(), text);
    }

    #[test]
    fn merge_combines_sections() {
        let mut a = geometry_fragment();
        let mut b = Report::empty(Provenance::new(
            Propagation::Quadrature,
            vec![InputHash::of("t.csv", b"1")],
        ));
        b.failures.push(TraceFailure::new("t.csv", &Error::Degenerate("flat")));
        a.merge(b).unwrap();
        assert!(a.geometry.is_some());
        assert_eq!(a.failures.len(), 1);
        assert_eq!(a.provenance.inputs.len(), 2);
        a.merge(geometry_fragment()).unwrap();
        assert_eq!(a.provenance.inputs.len(), 2);
    }

    #[test]
    fn merge_rejects_conflicts() {
        let mut a = geometry_fragment();
        let mut b = geometry_fragment();
        b.geometry.as_mut().unwrap().fsr.value += 1.0;
        assert!(a.merge(b).is_err());
        let mut a = geometry_fragment();
        let b = Report::empty(prov(Propagation::Resolution));
        assert!(a.merge(b).is_err());
        assert!(merge_all(vec![]).is_err());
    }
}
