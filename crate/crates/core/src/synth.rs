//! Seeded synthetic measurement campaigns with known ground truth.
//!
//! Laser lines are placed on the exact mode frequencies of the configured
//! cavity and then rounded to the wavelength-meter grid; transmission
//! traces are Lorentzians with Gaussian noise. Running the analysis on the
//! output must reproduce the ground truth within the reported sigmas.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{SPEED_OF_LIGHT as C, WLM_RESOLUTION_HZ};
use crate::coupling::AtomicLine;
use crate::error::{Error, Result};
use crate::geometry::{self, check_stable, CavityGeometry};
use crate::io::{
    write_text, LaserRecord, Measurement, MeasurementFile, MechanicsConfig, MirrorRecord, PztRecord, TraceRef,
    TraceRole,
};
use crate::lineshape::{synth_trace, Grid, LorentzianParams, TransmissionTrace};
use crate::mech::{simulate_sweep, PztCalibration, SweepAxis};
use crate::quantity::{Quantity, Unit};

fn default_wavelength() -> f64 {
    780.2467e-9
}

fn default_quantum() -> f64 {
    WLM_RESOLUTION_HZ
}

fn one() -> usize {
    1
}

fn default_noise() -> f64 {
    0.02
}

fn default_points() -> usize {
    1001
}

fn default_half_span() -> f64 {
    150e6
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceGroup {
    pub role: TraceRole,
    #[serde(with = "crate::decimal")]
    pub wavelength_m: f64,
    #[serde(with = "crate::decimal")]
    pub fwhm_hz: f64,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default = "default_noise", with = "crate::decimal")]
    pub noise_sigma: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_half_span", with = "crate::decimal")]
    pub half_span_hz: f64,
    #[serde(default = "default_amplitude", with = "crate::decimal")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpTraceConfig {
    #[serde(default)]
    pub axis: SweepAxis,
    #[serde(default, with = "crate::decimal")]
    pub noise_sigma: f64,
}

/// Ground truth plus everything needed to emit a measurement file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(with = "crate::decimal")]
    pub length_m: f64,
    #[serde(with = "crate::decimal")]
    pub radius_m: f64,
    /// Lines are placed on the longitudinal orders nearest this wavelength.
    #[serde(default = "default_wavelength", with = "crate::decimal")]
    pub wavelength_m: f64,
    #[serde(default = "default_quantum", with = "crate::decimal")]
    pub quantization_hz: f64,
    /// Written into each laser record; left out when unset so the reader's
    /// default applies.
    #[serde(default, with = "crate::decimal::option", skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_transmittances: Option<Vec<MirrorRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic_line: Option<AtomicLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pzt_calibration: Option<PztRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanics: Option<MechanicsConfig>,
    /// Emit a simulated chirp trace from `mechanics`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp_trace: Option<ChirpTraceConfig>,
}

impl SynthConfig {
    pub fn cavity(length_m: f64, radius_m: f64) -> Self {
        SynthConfig {
            length_m,
            radius_m,
            wavelength_m: default_wavelength(),
            quantization_hz: default_quantum(),
            sigma_hz: None,
            traces: Vec::new(),
            mirror_transmittances: None,
            atomic_line: None,
            pzt_calibration: None,
            mechanics: None,
            chirp_trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub geometry: CavityGeometry,
    pub trans: Quantity,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub measurement: MeasurementFile,
    pub traces: Vec<TransmissionTrace>,
    pub truth: SynthTruth,
}

pub const MEASUREMENT_FILE: &str = "measurement.json";
pub const TRUTH_FILE: &str = "truth.json";

impl SynthOutput {
    pub fn to_measurement(&self) -> Result<Measurement> {
        Measurement::from_parts(MEASUREMENT_FILE, self.measurement.clone(), self.traces.clone())
    }

    /// Writes the measurement file, ground truth and traces under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(MEASUREMENT_FILE), &self.measurement.to_json()?)?;
        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        write_text(&dir.join(TRUTH_FILE), &truth)?;
        for (r, t) in self.measurement.traces.iter().zip(&self.traces) {
            write_text(&dir.join(&r.path), &t.to_csv(None)?)?;
        }
        Ok(())
    }
}

fn quantize(nu: f64, q: f64) -> f64 {
    if q > 0.0 {
        (nu / q).round() * q
    } else {
        nu
    }
}

pub fn cmd_synth(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    let exact = |v: f64| Quantity::exact(v, Unit::Meter);
    check_stable(cfg.length_m, cfg.radius_m)?;
    if !(cfg.wavelength_m > 0.0) || !(cfg.quantization_hz >= 0.0) {
        return Err(Error::Config(
            "wavelength_m must be positive and quantization_hz non-negative".into(),
        ));
    }
    let truth_geometry =
        CavityGeometry::from_length_radius(exact(cfg.length_m), exact(cfg.radius_m), exact(cfg.wavelength_m))?;
    let fsr = truth_geometry.fsr;
    let gouy = truth_geometry.gouy;
    let n = (C / cfg.wavelength_m / fsr.value).round() as i64 - 1;
    let line = |label: &str, offset: i64, order: u32| -> Result<LaserRecord> {
        let nu = geometry::mode_frequency(n + offset, order, fsr, gouy)?.value;
        Ok(LaserRecord {
            label: label.to_string(),
            frequency_hz: quantize(nu, cfg.quantization_hz),
            sigma_hz: cfg.sigma_hz,
            longitudinal_offset: offset,
            transverse_order: order,
        })
    };
    let lasers = vec![
        line("reference TEM00 n", 0, 0)?,
        line("probe TEM00 n+1", 1, 0)?,
        line("probe TEM10 n+1", 1, 1)?,
    ];
    let trans = geometry::trans_spacing_from_gouy(gouy, fsr)?;
    // Exact truth is recomputed at the wavelength the analysis will use.
    let lambda = Quantity::exact(C / lasers[1].frequency_hz, Unit::Meter);
    let truth_geometry = CavityGeometry::from_length_radius(exact(cfg.length_m), exact(cfg.radius_m), lambda)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut refs = Vec::new();
    let mut traces = Vec::new();
    for (gi, g) in cfg.traces.iter().enumerate() {
        if g.role == TraceRole::Chirp {
            return Err(Error::Config("chirp traces come from chirp_trace, not traces".into()));
        }
        let p = LorentzianParams::new(g.amplitude, 0.0, g.fwhm_hz, 0.0)?;
        for i in 0..g.count {
            let t = synth_trace(
                &p,
                Grid::centered(0.0, g.half_span_hz, g.points),
                g.noise_sigma,
                rng.next_u64(),
            )?;
            refs.push(TraceRef {
                path: format!("traces/g{gi:02}-{}-{i:03}.csv", role_name(g.role)),
                role: g.role,
                wavelength_m: Some(g.wavelength_m),
                polarization: g.polarization.clone(),
            });
            traces.push(t);
        }
    }
    if let Some(chirp) = &cfg.chirp_trace {
        let mech = cfg
            .mechanics
            .as_ref()
            .ok_or_else(|| Error::Config("chirp_trace needs a mechanics section".into()))?;
        let hwhm = match mech.hwhm_hz {
            Some(h) => h,
            None => cfg
                .traces
                .iter()
                .find(|g| g.role == TraceRole::Finesse)
                .map(|g| g.fwhm_hz / 2.0)
                .ok_or_else(|| Error::Config("chirp_trace needs mechanics.hwhm_hz or a finesse group".into()))?,
        };
        let volts = cfg
            .pzt_calibration
            .as_ref()
            .map_or(PztRecord::default().volts_per_fsr, |p| p.volts_per_fsr);
        let cal = PztCalibration::new(Quantity::exact(volts, Unit::Volt), fsr)?;
        let mut t = simulate_sweep(&mech.chirp, &mech.modes, &cal, hwhm, chirp.axis)?;
        let trace_seed = rng.next_u64();
        if chirp.noise_sigma > 0.0 {
            let mut noise_rng = ChaCha8Rng::seed_from_u64(trace_seed);
            let normal = Normal::new(0.0, chirp.noise_sigma).map_err(|e| Error::Config(format!("chirp noise: {e}")))?;
            let noisy: Vec<f64> = t.values().iter().map(|v| v + normal.sample(&mut noise_rng)).collect();
            let meta = std::mem::take(&mut t.meta);
            t = TransmissionTrace::new(t.abscissa().to_vec(), noisy, t.kind)?;
            t.meta = meta;
        }
        refs.push(TraceRef {
            path: "traces/chirp.csv".into(),
            role: TraceRole::Chirp,
            wavelength_m: None,
            polarization: None,
        });
        traces.push(t.with_meta("seed", trace_seed.to_string()));
    }

    Ok(SynthOutput {
        measurement: MeasurementFile {
            lasers,
            traces: refs,
            mirror_transmittances: cfg.mirror_transmittances.clone(),
            atomic_line: cfg.atomic_line.clone(),
            pzt_calibration: cfg.pzt_calibration.clone(),
            mechanics: cfg.mechanics.clone(),
            kappa_over_2pi: None,
        },
        traces,
        truth: SynthTruth {
            geometry: truth_geometry,
            trans,
            seed,
        },
    })
}

fn role_name(role: TraceRole) -> &'static str {
    match role {
        TraceRole::Finesse => "finesse",
        TraceRole::Polarization => "polarization",
        TraceRole::Chirp => "chirp",
    }
}
