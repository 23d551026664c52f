//! Browser bindings for three interactive views: cavity geometry, a noisy
//! Lorentzian fit, and a chirped PZT sweep. Each call returns a JSON string
//! with plain numbers for plotting.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cavchar::coupling::{g0_max, strong_coupling, AtomicLine};
use cavchar::lineshape::{fit_lorentzian, lorentzian_eval, synth_trace, Grid, LorentzianParams};
use cavchar::mech::{
    default_modes, detect_dips, match_reference, normalize_trace, simulate_sweep, ChirpSpec, PztCalibration, SweepAxis,
    REFERENCE_MODES_HZ,
};
use cavchar::{CavityGeometry, Quantity, Result, Unit};

const PLOT_POINTS: usize = 1500;

pub fn cavity_json(length_um: f64, radius_cm: f64, wavelength_nm: f64, kappa_mhz: f64) -> Result<Value> {
    let m = |v: f64| Quantity::exact(v, Unit::Meter);
    let g = CavityGeometry::from_length_radius(m(length_um * 1e-6), m(radius_cm * 1e-2), m(wavelength_nm * 1e-9))?;
    let line = AtomicLine::rb87_d2();
    let g0 = g0_max(g.length_l, g.radius_r, &line)?;
    let c = strong_coupling(g0, Quantity::exact(kappa_mhz * 1e6, Unit::Hz), &line)?;
    Ok(json!({
        "fsr_hz": g.fsr.value,
        "gouy_rad": g.gouy.value,
        "transverse_spacing_hz": g.fsr.value * g.gouy.value / std::f64::consts::PI,
        "waist_m": g.waist_w0.value,
        "rayleigh_m": g.rayleigh_z0.value,
        "mode_volume_m3": g.mode_volume_vc.value,
        "g0_over_2pi_hz": g0.value,
        "gamma_over_2pi_hz": line.gamma_over_2pi.value,
        "margin": c.margin,
        "strong": c.strong,
    }))
}

pub fn fit_json(fwhm_mhz: f64, noise: f64, seed: u64) -> Result<Value> {
    let truth = LorentzianParams::new(1.0, 0.0, fwhm_mhz * 1e6, 0.0)?;
    let grid = Grid::centered(0.0, 4.0 * truth.fwhm, 801);
    let trace = synth_trace(&truth, grid, noise, seed)?;
    let fit = fit_lorentzian(&trace, None)?;
    let curve: Vec<f64> = trace
        .abscissa()
        .iter()
        .map(|&x| lorentzian_eval(&fit.params, x))
        .collect();
    let p = |l: &LorentzianParams| json!({ "amplitude": l.amplitude, "center": l.center, "fwhm": l.fwhm, "offset": l.offset });
    Ok(json!({
        "x": trace.abscissa(),
        "y": trace.values(),
        "fit": curve,
        "params": p(&fit.params),
        "sigmas": p(&fit.sigmas),
        "iterations": fit.iterations,
    }))
}

/// Keeps the minimum of each bucket so narrow dips survive decimation.
fn bucket_min(x: &[f64], y: &[f64], buckets: usize) -> (Vec<f64>, Vec<f64>) {
    let size = x.len().div_ceil(buckets.max(1)).max(1);
    x.chunks(size)
        .zip(y.chunks(size))
        .map(|(xs, ys)| {
            let i = (0..ys.len()).fold(0, |best, k| if ys[k] < ys[best] { k } else { best });
            (xs[i], ys[i])
        })
        .unzip()
}

pub fn chirp_json(v0_mv: f64, hwhm_mhz: f64, fsr_ghz: f64, min_prominence: f64, instantaneous: bool) -> Result<Value> {
    let spec = ChirpSpec {
        v0: Quantity::exact(v0_mv * 1e-3, Unit::Volt),
        ..ChirpSpec::default()
    };
    let axis = if instantaneous {
        SweepAxis::Instantaneous
    } else {
        SweepAxis::Sweep
    };
    let modes = default_modes();
    let cal = PztCalibration::with_fsr(Quantity::exact(fsr_ghz * 1e9, Unit::Hz))?;
    let trace = simulate_sweep(&spec, &modes, &cal, hwhm_mhz * 1e6, axis)?;
    let (lo, hi) = trace
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let dips = detect_dips(&normalize_trace(&trace, lo, hi)?, min_prominence)?;
    let matches = match_reference(&dips, &REFERENCE_MODES_HZ, 2e3);
    let (f, t) = bucket_min(trace.abscissa(), trace.values(), PLOT_POINTS);
    Ok(json!({
        "frequency_hz": f,
        "transmission": t,
        "dips": dips.dips.iter().map(|d| json!({ "frequency_hz": d.frequency, "depth": d.depth, "prominence": d.prominence })).collect::<Vec<_>>(),
        "matches": matches.iter().map(|m| json!({ "reference_hz": m.reference, "detected_hz": m.detected })).collect::<Vec<_>>(),
    }))
}

fn to_js(r: Result<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn cavity(length_um: f64, radius_cm: f64, wavelength_nm: f64, kappa_mhz: f64) -> Result<String, JsError> {
    to_js(cavity_json(length_um, radius_cm, wavelength_nm, kappa_mhz))
}

#[wasm_bindgen]
pub fn fit(fwhm_mhz: f64, noise: f64, seed: u32) -> Result<String, JsError> {
    to_js(fit_json(fwhm_mhz, noise, seed as u64))
}

#[wasm_bindgen]
pub fn chirp(
    v0_mv: f64,
    hwhm_mhz: f64,
    fsr_ghz: f64,
    min_prominence: f64,
    instantaneous: bool,
) -> Result<String, JsError> {
    to_js(chirp_json(v0_mv, hwhm_mhz, fsr_ghz, min_prominence, instantaneous))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_matches_reference_build() {
        let v = cavity_json(151.686, 10.067, 780.2467, 18.55).unwrap();
        assert!((v["g0_over_2pi_hz"].as_f64().unwrap() / 1e6 - 16.04).abs() < 0.01);
        assert!(v["strong"].as_bool().unwrap());
        assert!((v["fsr_hz"].as_f64().unwrap() / 1e12 - 0.9882).abs() < 1e-4);
    }

    #[test]
    fn unstable_cavity_is_an_error() {
        assert!(cavity_json(300e3, 10.0, 780.0, 18.0).is_err());
    }

    #[test]
    fn fit_recovers_width() {
        let v = fit_json(37.1, 0.02, 1).unwrap();
        let fwhm = v["params"]["fwhm"].as_f64().unwrap();
        let s = v["sigmas"]["fwhm"].as_f64().unwrap();
        assert!((fwhm - 37.1e6).abs() < 4.0 * s);
        assert_eq!(v["x"].as_array().unwrap().len(), 801);
    }

    #[test]
    fn chirp_finds_every_mode() {
        let v = chirp_json(10.0, 18.55, 988.2, 0.02, false).unwrap();
        assert_eq!(v["dips"].as_array().unwrap().len(), 5);
        assert!(v["matches"]
            .as_array()
            .unwrap()
            .iter()
            .all(|m| !m["detected_hz"].is_null()));
        assert!(v["frequency_hz"].as_array().unwrap().len() <= PLOT_POINTS);
    }

    #[test]
    fn bucket_min_keeps_narrow_minimum() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let mut y = vec![1.0; 100];
        y[37] = 0.2;
        let (bx, by) = bucket_min(&x, &y, 10);
        assert_eq!(bx.len(), 10);
        assert!(by.contains(&0.2) && bx.contains(&37.0));
    }
}
