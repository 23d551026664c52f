//! Measurement-file schema and loading of referenced trace files.
//!
//! A measurement file is JSON; every real number is written as a decimal
//! string (plain JSON numbers are accepted on input). Trace paths are
//! resolved relative to the directory holding the measurement file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::MirrorSet;
use crate::constants::{wlm_resolution_from_env, PZT_VOLTS_PER_FSR, WLM_RESOLUTION_HZ};
use crate::coupling::AtomicLine;
use crate::error::{Error, Result};
use crate::lineshape::TransmissionTrace;
use crate::mech::{default_modes, ChirpSpec, MechMode, REFERENCE_MODES_HZ};
use crate::quantity::{Quantity, Unit};
use crate::twolaser::LaserLine;

/// WLM sigma applied to lines that do not carry their own.
pub fn default_wlm_sigma() -> f64 {
    wlm_resolution_from_env().unwrap_or(WLM_RESOLUTION_HZ)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserRecord {
    pub label: String,
    #[serde(with = "crate::decimal")]
    pub frequency_hz: f64,
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
    pub longitudinal_offset: i64,
    pub transverse_order: u32,
}

impl LaserRecord {
    pub fn to_line(&self, default_sigma_hz: f64) -> Result<LaserLine> {
        LaserLine::new(
            self.label.clone(),
            self.frequency_hz,
            self.sigma_hz.unwrap_or(default_sigma_hz),
            self.longitudinal_offset,
            self.transverse_order,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceRole {
    Finesse,
    Polarization,
    Chirp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRef {
    pub path: String,
    pub role: TraceRole,
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorRecord {
    #[serde(with = "crate::decimal")]
    pub wavelength_m: f64,
    #[serde(with = "crate::decimal::vec")]
    pub transmittances_ppm: Vec<f64>,
    /// Per-mirror sigma; only used when a single summary value is given.
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub sigma_ppm: Option<f64>,
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub systematic_fraction: Option<f64>,
    /// Finesse to use instead of the one fitted from traces at this wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finesse: Option<Quantity>,
}

impl MirrorRecord {
    pub fn to_set(&self) -> Result<MirrorSet> {
        let sigma = self.sigma_ppm.unwrap_or(0.0);
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!("negative sigma_ppm {sigma}")));
        }
        let set = MirrorSet {
            transmittances: self
                .transmittances_ppm
                .iter()
                .map(|&v| Quantity::new(v, sigma, Unit::Ppm))
                .collect(),
            wavelength: Quantity::exact(self.wavelength_m, Unit::Meter),
            systematic_fraction: self.systematic_fraction.unwrap_or(0.0),
        };
        set.validate()?;
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PztRecord {
    #[serde(with = "crate::decimal")]
    pub volts_per_fsr: f64,
    /// Defaults to the FSR reduced from the laser lines.
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub fsr_hz: Option<f64>,
}

impl Default for PztRecord {
    fn default() -> Self {
        PztRecord {
            volts_per_fsr: PZT_VOLTS_PER_FSR,
            fsr_hz: None,
        }
    }
}

fn default_min_prominence() -> f64 {
    0.02
}

fn default_match_tolerance() -> f64 {
    2e3
}

fn default_reference() -> Vec<f64> {
    REFERENCE_MODES_HZ.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    #[serde(default)]
    pub chirp: ChirpSpec,
    #[serde(default = "default_modes")]
    pub modes: Vec<MechMode>,
    #[serde(default = "default_reference", with = "crate::decimal::vec")]
    pub reference_hz: Vec<f64>,
    #[serde(default = "default_min_prominence", with = "crate::decimal")]
    pub min_prominence: f64,
    #[serde(default = "default_match_tolerance", with = "crate::decimal")]
    pub match_tolerance_hz: f64,
    /// Cavity half-width; defaults to κ/2π from the finesse traces.
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub hwhm_hz: Option<f64>,
    /// Normalization bounds; defaults to the trace minimum and maximum.
    #[serde(default, with = "crate::decimal::vec", skip_serializing_if = "Vec::is_empty")]
    pub normalize: Vec<f64>,
}

impl Default for MechanicsConfig {
    fn default() -> Self {
        MechanicsConfig {
            chirp: ChirpSpec::default(),
            modes: default_modes(),
            reference_hz: default_reference(),
            min_prominence: default_min_prominence(),
            match_tolerance_hz: default_match_tolerance(),
            hwhm_hz: None,
            normalize: Vec::new(),
        }
    }
}

impl MechanicsConfig {
    pub fn bounds(&self) -> Result<Option<(f64, f64)>> {
        match self.normalize.as_slice() {
            [] => Ok(None),
            [lo, hi] => Ok(Some((*lo, *hi))),
            other => Err(Error::Config(format!(
                "normalize needs [lower, upper], got {} values",
                other.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    #[serde(default)]
    pub lasers: Vec<LaserRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_transmittances: Option<Vec<MirrorRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic_line: Option<AtomicLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pzt_calibration: Option<PztRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanics: Option<MechanicsConfig>,
    /// Overrides the κ/2π derived from finesse traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_over_2pi: Option<Quantity>,
}

impl MeasurementFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn laser_lines(&self, default_sigma_hz: f64) -> Result<Vec<LaserLine>> {
        self.lasers.iter().map(|r| r.to_line(default_sigma_hz)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub name: String,
    pub sha256: String,
}

impl InputHash {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        InputHash {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// A parsed measurement file together with its traces, in file order.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub file: MeasurementFile,
    pub traces: Vec<(TraceRef, TransmissionTrace)>,
    pub inputs: Vec<InputHash>,
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("{} is not UTF-8: {e}", path.display())))
}

impl Measurement {
    /// Reads the measurement file and every trace it references.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let mut inputs = vec![InputHash::of(path.display().to_string(), &bytes)];
        let file = MeasurementFile::from_json(&utf8(path, bytes)?)?;
        let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut traces = Vec::with_capacity(file.traces.len());
        for r in &file.traces {
            let p = base.join(&r.path);
            let bytes = read_bytes(&p)?;
            inputs.push(InputHash::of(r.path.clone(), &bytes));
            let trace =
                TransmissionTrace::from_csv(&utf8(&p, bytes)?).map_err(|e| Error::Trace(format!("{}: {e}", r.path)))?;
            traces.push((r.clone(), trace));
        }
        Ok(Measurement { file, traces, inputs })
    }

    /// Builds a measurement from in-memory parts; trace CSV text is hashed
    /// exactly as it would be written to disk.
    pub fn from_parts(name: &str, file: MeasurementFile, traces: Vec<TransmissionTrace>) -> Result<Self> {
        if traces.len() != file.traces.len() {
            return Err(Error::Config(format!(
                "{} trace references but {} traces",
                file.traces.len(),
                traces.len()
            )));
        }
        let mut inputs = vec![InputHash::of(name, file.to_json()?.as_bytes())];
        for (r, t) in file.traces.iter().zip(&traces) {
            inputs.push(InputHash::of(r.path.clone(), t.to_csv(None)?.as_bytes()));
        }
        let traces = file.traces.iter().cloned().zip(traces).collect();
        Ok(Measurement { file, traces, inputs })
    }

    pub fn traces_with_role(&self, role: TraceRole) -> impl Iterator<Item = &(TraceRef, TransmissionTrace)> {
        self.traces.iter().filter(move |(r, _)| r.role == role)
    }
}

/// Wavelength equality used to group traces and mirror sets.
pub fn same_wavelength(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
      "lasers": [
        {"label": "782", "frequency_hz": "383239570000000", "longitudinal_offset": 0, "transverse_order": 0},
        {"label": "780", "frequency_hz": 384227770000000, "sigma_hz": "1e6", "longitudinal_offset": 1, "transverse_order": 0}
      ],
      "mirror_transmittances": [{"wavelength_m": "780e-9", "transmittances_ppm": ["218"], "sigma_ppm": "9"}],
      "mechanics": {"min_prominence": "0.05"}
    }"#;

    #[test]
    fn parses_strings_and_numbers() {
        let f = MeasurementFile::from_json(SAMPLE).unwrap();
        let lines = f.laser_lines(10e6).unwrap();
        assert_eq!(lines[0].frequency.value, 383.23957e12);
        assert_eq!(lines[0].frequency.sigma(), 10e6);
        assert_eq!(lines[1].frequency.sigma(), 1e6);
        let m = f.mechanics.as_ref().unwrap();
        assert_eq!(m.min_prominence, 0.05);
        assert_eq!(m.modes.len(), 5);
        assert_eq!(m.reference_hz, REFERENCE_MODES_HZ.to_vec());
        let set = f.mirror_transmittances.as_ref().unwrap()[0].to_set().unwrap();
        assert_eq!(set.transmittances[0].sigma(), 9.0);
    }

    #[test]
    fn json_round_trip() {
        let f = MeasurementFile::from_json(SAMPLE).unwrap();
        let back = MeasurementFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(MeasurementFile::from_json(r#"{"lasers": [], "extra": 1}"#).is_err());
        let e = MeasurementFile::from_json("{not json").unwrap_err();
        assert!(e.is_input_error());
    }

    #[test]
    fn missing_trace_file_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"traces": [{"path": "nope.csv", "role": "finesse"}]}"#).unwrap();
        let e = Measurement::load(&p).unwrap_err();
        assert!(e.is_input_error());
        assert_eq!(e.code(), "E_IO");
    }

    #[test]
    fn load_resolves_relative_paths_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("tr")).unwrap();
        std::fs::write(dir.path().join("tr/a.csv"), "detuning_hz,value\n-1,0.5\n0,1\n1,0.5\n").unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(
            &p,
            r#"{"traces": [{"path": "tr/a.csv", "role": "finesse", "wavelength_m": "780e-9"}]}"#,
        )
        .unwrap();
        let m = Measurement::load(&p).unwrap();
        assert_eq!(m.traces.len(), 1);
        assert_eq!(m.inputs.len(), 2);
        assert_eq!(m.inputs[1].name, "tr/a.csv");
        assert_eq!(m.inputs[1].sha256.len(), 64);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            InputHash::of("x", b"").sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
