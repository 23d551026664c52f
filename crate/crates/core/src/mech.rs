//! Chirped PZT drive, mechanical response of the cavity assembly, and
//! transmission-dip detection.
//!
//! The cavity is held on resonance with a probe laser while the PZT is driven
//! by a slow chirp. Each mechanical mode amplifies the drive near its
//! frequency; the resulting length oscillation of amplitude `D` (in Hz of
//! cavity detuning) lowers the time-averaged transmission to
//! `1/sqrt(1 + (D/hwhm)²)`. The closed form assumes the mechanical period is
//! long compared with the cavity lifetime and short compared with the sweep
//! dwell time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PZT_VOLTS_PER_FSR;
use crate::error::{Error, Result};
use crate::geometry::positive;
use crate::lineshape::{AbscissaKind, TransmissionTrace};
use crate::quantity::{Quantity, Unit};

/// `V(t) = V0·sin(2π((f_f − f_i)t/T + f_i)t)` for `0 ≤ t ≤ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub v0: Quantity,
    #[serde(with = "crate::decimal")]
    pub f_i: f64,
    #[serde(with = "crate::decimal")]
    pub f_f: f64,
    #[serde(with = "crate::decimal")]
    pub duration_t: f64,
    #[serde(with = "crate::decimal")]
    pub sample_rate: f64,
}

impl Default for ChirpSpec {
    /// 10 mV, 0 to 90 kHz in 0.5 s, sampled at 400 kHz.
    fn default() -> Self {
        ChirpSpec {
            v0: Quantity::exact(10e-3, Unit::Volt),
            f_i: 0.0,
            f_f: 90e3,
            duration_t: 0.5,
            sample_rate: 400e3,
        }
    }
}

impl ChirpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_f > self.f_i && self.f_i >= 0.0) {
            return Err(Error::Config(format!(
                "chirp needs f_f > f_i >= 0, got {} -> {}",
                self.f_i, self.f_f
            )));
        }
        if !(self.duration_t > 0.0) {
            return Err(Error::Config("chirp duration must be positive".into()));
        }
        if !(self.sample_rate > 4.0 * self.f_f) {
            return Err(Error::Config(format!(
                "sample rate {} must exceed 4·f_f = {}",
                self.sample_rate,
                4.0 * self.f_f
            )));
        }
        if self.v0.unit != Unit::Volt {
            return Err(Error::UnitMismatch {
                left: self.v0.unit,
                right: Unit::Volt,
            });
        }
        Ok(())
    }

    /// Sweep parameter `f_i + (f_f − f_i)·t/T`.
    pub fn sweep_frequency(&self, t: f64) -> f64 {
        self.f_i + (self.f_f - self.f_i) * t / self.duration_t
    }

    /// Instantaneous frequency of the phase in [`chirp_waveform`],
    /// `f_i + 2(f_f − f_i)·t/T`.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_i + 2.0 * (self.f_f - self.f_i) * t / self.duration_t
    }
}

/// Which frequency labels the drive at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// The drive frequency is the linear sweep parameter; spans `[f_i, f_f]`.
    #[default]
    Sweep,
    /// The drive frequency is the instantaneous frequency of the printed
    /// chirp phase; spans `[f_i, 2f_f − f_i]`.
    Instantaneous,
}

impl SweepAxis {
    pub fn frequency_at(&self, spec: &ChirpSpec, t: f64) -> f64 {
        match self {
            SweepAxis::Sweep => spec.sweep_frequency(t),
            SweepAxis::Instantaneous => spec.instantaneous_frequency(t),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Sweep => "sweep",
            SweepAxis::Instantaneous => "instantaneous",
        }
    }
}

pub fn chirp_waveform(spec: &ChirpSpec, t: f64) -> Result<f64> {
    if !(0.0..=spec.duration_t).contains(&t) {
        return Err(Error::OutOfRange {
            what: "chirp time",
            value: t,
            range: "[0, T]",
        });
    }
    let phase = 2.0 * PI * ((spec.f_f - spec.f_i) * t / spec.duration_t + spec.f_i) * t;
    Ok(spec.v0.value * phase.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechMode {
    #[serde(with = "crate::decimal")]
    pub frequency: f64,
    #[serde(with = "crate::decimal")]
    pub quality_q: f64,
    /// Projection of the mirror motion onto the cavity axis, in [0, 1].
    #[serde(with = "crate::decimal")]
    pub axial_coupling: f64,
}

impl MechMode {
    pub fn new(frequency: f64, quality_q: f64, axial_coupling: f64) -> Result<Self> {
        let m = MechMode {
            frequency,
            quality_q,
            axial_coupling,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0) {
            return Err(Error::NonPositive {
                what: "mode frequency",
                value: self.frequency,
            });
        }
        if !(self.quality_q > 0.0) {
            return Err(Error::NonPositive {
                what: "quality factor",
                value: self.quality_q,
            });
        }
        if !(0.0..=1.0).contains(&self.axial_coupling) {
            return Err(Error::OutOfRange {
                what: "axial coupling",
                value: self.axial_coupling,
                range: "[0, 1]",
            });
        }
        Ok(())
    }
}

/// Modes chosen so the simulated sweep shows the two dominant axial dips at
/// 21 and 53 kHz plus three weaker, mostly transverse ones.
pub fn default_modes() -> Vec<MechMode> {
    [(21e3, 1.0), (29e3, 0.2), (53e3, 0.8), (78e3, 0.2), (82e3, 0.2)]
        .into_iter()
        .map(|(f, a)| MechMode {
            frequency: f,
            quality_q: 50.0,
            axial_coupling: a,
        })
        .collect()
}

/// Modal frequencies from the finite-element analysis of the assembly, Hz.
pub const REFERENCE_MODES_HZ: [f64; 5] = [21e3, 28e3, 54e3, 78e3, 80e3];

/// Steady-state gain of a driven damped oscillator, normalized to 1 at DC.
pub fn oscillator_response(mode: &MechMode, f: f64) -> f64 {
    let r = f / mode.frequency;
    1.0 / ((1.0 - r * r).powi(2) + (r / mode.quality_q).powi(2)).sqrt()
}

/// Phase average of a Lorentzian line swept sinusoidally with amplitude `d`.
pub fn avg_transmission(d: f64, hwhm: f64) -> Result<f64> {
    if !(hwhm > 0.0) {
        return Err(Error::NonPositive {
            what: "cavity half-width",
            value: hwhm,
        });
    }
    if !(d >= 0.0) {
        return Err(Error::OutOfRange {
            what: "detuning amplitude",
            value: d,
            range: "[0, inf)",
        });
    }
    Ok(1.0 / (1.0 + (d / hwhm).powi(2)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PztCalibration {
    pub volts_per_fsr: Quantity,
    pub fsr: Quantity,
}

impl PztCalibration {
    pub fn new(volts_per_fsr: Quantity, fsr: Quantity) -> Result<Self> {
        positive(&volts_per_fsr, Unit::Volt, "volts per FSR")?;
        positive(&fsr, Unit::Hz, "free spectral range")?;
        Ok(PztCalibration { volts_per_fsr, fsr })
    }

    /// One FSR per 770 V.
    pub fn with_fsr(fsr: Quantity) -> Result<Self> {
        Self::new(Quantity::exact(PZT_VOLTS_PER_FSR, Unit::Volt), fsr)
    }
}

pub fn volts_to_detuning(volts: f64, cal: &PztCalibration) -> f64 {
    volts * cal.fsr.value / cal.volts_per_fsr.value
}

/// Detuning amplitude at drive frequency `f`: the direct PZT stroke plus
/// each mode's amplified axial motion, summed in magnitude.
pub fn detuning_amplitude(d0: f64, modes: &[MechMode], f: f64) -> f64 {
    d0 * (1.0
        + modes
            .iter()
            .map(|m| m.axial_coupling * oscillator_response(m, f))
            .sum::<f64>())
}

/// Transmission versus drive frequency for a chirped PZT drive, sampled at
/// the chirp's sample rate.
pub fn simulate_sweep(
    spec: &ChirpSpec,
    modes: &[MechMode],
    cal: &PztCalibration,
    hwhm: f64,
    axis: SweepAxis,
) -> Result<TransmissionTrace> {
    spec.validate()?;
    for m in modes {
        m.validate()?;
    }
    if !(hwhm > 0.0) {
        return Err(Error::NonPositive {
            what: "cavity half-width",
            value: hwhm,
        });
    }
    let d0 = volts_to_detuning(spec.v0.value.abs(), cal);
    let n = (spec.duration_t * spec.sample_rate).round() as usize + 1;
    let dt = spec.duration_t / (n - 1) as f64;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let f = axis.frequency_at(spec, i as f64 * dt);
        xs.push(f);
        ys.push(avg_transmission(detuning_amplitude(d0, modes, f), hwhm)?);
    }
    Ok(TransmissionTrace::new(xs, ys, AbscissaKind::SweepFrequency)?.with_meta("axis", axis.as_str()))
}

/// Affine map of `[lower, upper]` onto `[0, 1]`, clipped.
pub fn normalize_trace(trace: &TransmissionTrace, lower: f64, upper: f64) -> Result<TransmissionTrace> {
    if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
        return Err(Error::Config(format!(
            "normalization bounds must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    let span = upper - lower;
    trace.map_values(|v| ((v - lower) / span).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    #[serde(with = "crate::decimal")]
    pub frequency: f64,
    #[serde(with = "crate::decimal")]
    pub depth: f64,
    #[serde(with = "crate::decimal")]
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DipReport {
    pub dips: Vec<Dip>,
}

/// Local minima of a normalized sweep trace whose prominence reaches
/// `min_prominence`, located by three-point parabolic interpolation.
pub fn detect_dips(trace: &TransmissionTrace, min_prominence: f64) -> Result<DipReport> {
    if trace.kind != AbscissaKind::SweepFrequency {
        return Err(Error::Trace(format!(
            "dip detection expects a sweep_hz axis, got {}",
            trace.kind.column()
        )));
    }
    if !(min_prominence > 0.0 && min_prominence < 1.0) {
        return Err(Error::OutOfRange {
            what: "minimum prominence",
            value: min_prominence,
            range: "(0, 1)",
        });
    }
    let xs = trace.abscissa();
    let ys = trace.values();
    let mut dips = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        if !(ys[i] < ys[i - 1] && ys[i] <= ys[i + 1]) {
            continue;
        }
        let prominence = prominence_of_minimum(ys, i);
        if prominence < min_prominence {
            continue;
        }
        let (x, y) = parabolic_vertex((xs[i - 1], ys[i - 1]), (xs[i], ys[i]), (xs[i + 1], ys[i + 1]));
        dips.push(Dip {
            frequency: x,
            depth: (1.0 - y).clamp(f64::MIN_POSITIVE, 1.0),
            prominence,
        });
    }
    Ok(DipReport { dips })
}

/// Height of the lowest barrier separating the minimum at `i` from any
/// lower sample (or from the trace ends).
fn prominence_of_minimum(ys: &[f64], i: usize) -> f64 {
    let v = ys[i];
    let walk = |it: &mut dyn Iterator<Item = usize>| {
        let mut highest = v;
        for j in it {
            if ys[j] < v {
                break;
            }
            highest = highest.max(ys[j]);
        }
        highest
    };
    let left = walk(&mut (0..i).rev());
    let right = walk(&mut (i + 1..ys.len()));
    left.min(right) - v
}

fn parabolic_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !(curvature > 0.0) {
        return b;
    }
    // y = y1 + s·(x − x1) + curvature·(x − x1)²
    let slope = d01 + curvature * (x1 - x0);
    let dx = -slope / (2.0 * curvature);
    let dx = dx.clamp(x0 - x1, x2 - x1);
    (x1 + dx, y1 + slope * dx + curvature * dx * dx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMatch {
    #[serde(with = "crate::decimal")]
    pub reference: f64,
    #[serde(with = "crate::decimal::option")]
    pub detected: Option<f64>,
    #[serde(with = "crate::decimal::option")]
    pub delta: Option<f64>,
}

/// Pairs reference frequencies with detected dips, closest pairs first, each
/// dip used at most once; pairs farther apart than `tolerance` stay unmatched.
pub fn match_reference(dips: &DipReport, reference: &[f64], tolerance: f64) -> Vec<ReferenceMatch> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ri, r) in reference.iter().enumerate() {
        for (di, d) in dips.dips.iter().enumerate() {
            let dist = (d.frequency - r).abs();
            if dist <= tolerance {
                pairs.push((dist, ri, di));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out: Vec<ReferenceMatch> = reference
        .iter()
        .map(|&r| ReferenceMatch {
            reference: r,
            detected: None,
            delta: None,
        })
        .collect();
    let mut used = vec![false; dips.dips.len()];
    for (_, ri, di) in pairs {
        if out[ri].detected.is_none() && !used[di] {
            let f = dips.dips[di].frequency;
            out[ri].detected = Some(f);
            out[ri].delta = Some(f - reference[ri]);
            used[di] = true;
        }
    }
    out
}
