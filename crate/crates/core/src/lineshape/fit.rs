//! Damped least-squares fit of a single Lorentzian with baseline.
//!
//! The problem is solved in scaled coordinates (abscissa in units of the
//! initial FWHM around the initial center, ordinate in units of the data
//! range) so the normal matrix stays well conditioned for abscissas in Hz.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::trace::{AbscissaKind, TransmissionTrace};
use super::LorentzianParams;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-12;
const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub params: LorentzianParams,
    /// 1σ of each parameter, in the same layout as `params`.
    pub sigmas: LorentzianParams,
    pub iterations: usize,
    /// Sum of squared residuals.
    #[serde(with = "crate::decimal")]
    pub cost: f64,
}

/// Initial guess from the data: baseline at the minimum, peak at the
/// maximum, width from linearly interpolated half-maximum crossings.
pub fn initial_guess(trace: &TransmissionTrace) -> Result<LorentzianParams> {
    let xs = trace.abscissa();
    let ys = trace.values();
    if xs.is_empty() {
        return Err(Error::Degenerate("empty trace"));
    }
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let amp = ymax - ymin;
    if !(amp > 0.0) {
        return Err(Error::Degenerate("flat trace"));
    }
    let half = ymin + amp / 2.0;

    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if ys[i] < half {
                let t = (half - ys[i]) / (ys[prev] - ys[i]);
                return Some(xs[i] + t * (xs[prev] - xs[i]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..xs.len()));
    let center = xs[imax];
    let span = xs[xs.len() - 1] - xs[0];
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (center - l),
        (None, Some(r)) => 2.0 * (r - center),
        (None, None) => span / 4.0,
    };
    let fwhm = if fwhm > 0.0 { fwhm } else { span / 4.0 };
    LorentzianParams::new(amp, center, fwhm.max(f64::MIN_POSITIVE), ymin)
}

/// Fits `trace` (detuning axis) with the Lorentzian-plus-offset model.
pub fn fit_lorentzian(trace: &TransmissionTrace, init: Option<LorentzianParams>) -> Result<LorentzianFit> {
    if trace.kind != AbscissaKind::Detuning {
        return Err(Error::Trace(format!(
            "Lorentzian fit expects a detuning axis, got {}",
            trace.kind.column()
        )));
    }
    let n = trace.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFew {
            what: "fit samples",
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let ys = trace.values();
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let yrange = ymax - ymin;
    if !(yrange > 0.0) {
        return Err(Error::Degenerate("flat trace"));
    }
    let init = match init {
        Some(p) => p,
        None => initial_guess(trace)?,
    };

    let x0 = init.center;
    let xs_scale = init.fwhm;
    let xs: Vec<f64> = trace.abscissa().iter().map(|x| (x - x0) / xs_scale).collect();
    let ys: Vec<f64> = ys.iter().map(|y| (y - ymin) / yrange).collect();
    let mut p = Vector4::new(init.amplitude / yrange, 0.0, 1.0, (init.offset - ymin) / yrange);

    let mut cost = cost_of(&xs, &ys, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&xs, &ys, &p);
        let mut damped = jtj;
        for i in 0..4 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        let small_step = relative_step(&step, &p) < STEP_TOL;
        let trial_cost = if trial[0] > 0.0 && trial[2] > 0.0 {
            cost_of(&xs, &ys, &trial)
        } else {
            f64::INFINITY
        };
        if trial_cost < cost {
            let drop = (cost - trial_cost) / cost;
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if small_step || drop < COST_TOL || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            if small_step {
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // no descent direction left at machine precision
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(iterations));
    }

    let (jtj, _) = normal_equations(&xs, &ys, &p);
    let dof = (n - 4) as f64;
    let variance = cost / dof;
    let cov = jtj
        .try_inverse()
        .ok_or(Error::Degenerate("singular normal matrix at the optimum"))?
        * variance;
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();

    let params = LorentzianParams {
        amplitude: p[0] * yrange,
        center: x0 + p[1] * xs_scale,
        fwhm: p[2] * xs_scale,
        offset: ymin + p[3] * yrange,
    };
    if !(params.amplitude > 0.0 && params.fwhm > 0.0) {
        return Err(Error::Degenerate("fit collapsed to a non-positive peak"));
    }
    Ok(LorentzianFit {
        params,
        sigmas: LorentzianParams {
            amplitude: sd(0) * yrange,
            center: sd(1) * xs_scale,
            fwhm: sd(2) * xs_scale,
            offset: sd(3) * yrange,
        },
        iterations,
        cost: cost * yrange * yrange,
    })
}

fn model(x: f64, p: &Vector4<f64>) -> f64 {
    let u = 2.0 * (x - p[1]) / p[2];
    p[3] + p[0] / (1.0 + u * u)
}

fn cost_of(xs: &[f64], ys: &[f64], p: &Vector4<f64>) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - model(x, p)).powi(2)).sum()
}

fn normal_equations(xs: &[f64], ys: &[f64], p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
    let (a, c, w) = (p[0], p[1], p[2]);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let u = 2.0 * (x - c) / w;
        let d = 1.0 + u * u;
        let shape = 1.0 / d;
        let j = Vector4::new(shape, 4.0 * a * u / (w * d * d), 2.0 * a * u * u / (w * d * d), 1.0);
        let r = y - (p[3] + a * shape);
        jtj += j * j.transpose();
        jtr += j * r;
    }
    (jtj, jtr)
}

/// Largest step relative to the natural scale of each parameter. Center is
/// measured against the width, offset against the amplitude.
fn relative_step(step: &Vector4<f64>, p: &Vector4<f64>) -> f64 {
    let scales = [p[0].abs(), p[2].abs(), p[2].abs(), p[0].abs()];
    (0..4)
        .map(|i| step[i].abs() / scales[i].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::trace::{synth_trace, Grid};

    fn reference_line() -> LorentzianParams {
        LorentzianParams::new(1.0, 0.0, 37.1e6, 0.0).unwrap()
    }

    fn grid() -> Grid {
        Grid::centered(0.0, 150e6, 1001)
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let p = reference_line();
        let t = synth_trace(&p, grid(), 0.0, 0).unwrap();
        let fit = fit_lorentzian(&t, None).unwrap();
        assert!((fit.params.amplitude - 1.0).abs() < 1e-8);
        assert!(fit.params.center.abs() / p.fwhm < 1e-8);
        assert!((fit.params.fwhm / p.fwhm - 1.0).abs() < 1e-8);
        assert!(fit.params.offset.abs() < 1e-8);
    }

    #[test]
    fn seeded_noisy_fit_regression() {
        let t = synth_trace(&reference_line(), grid(), 0.02, 42).unwrap();
        let fit = fit_lorentzian(&t, None).unwrap();
        assert!((fit.params.fwhm - 37.1e6).abs() < 1e6);
        // frozen from the first run of this seed
        assert!((fit.params.fwhm - SEED42_FWHM).abs() < 1.0, "{}", fit.params.fwhm);
        assert!(fit.sigmas.fwhm > 0.0);
    }

    const SEED42_FWHM: f64 = 36_852_338.57;

    #[test]
    fn flat_trace_is_degenerate() {
        let t = TransmissionTrace::new(
            (0..20).map(|i| i as f64).collect(),
            vec![0.3; 20],
            AbscissaKind::Detuning,
        )
        .unwrap();
        assert!(matches!(fit_lorentzian(&t, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_samples() {
        let t = synth_trace(&reference_line(), Grid::centered(0.0, 1e8, 5), 0.0, 0).unwrap();
        assert!(matches!(fit_lorentzian(&t, None), Err(Error::TooFew { .. })));
    }

    #[test]
    fn wrong_axis_rejected() {
        let t = TransmissionTrace::new(
            (0..20).map(|i| i as f64).collect(),
            (0..20).map(|i| (i as f64 - 10.0).abs()).collect(),
            AbscissaKind::SweepFrequency,
        )
        .unwrap();
        assert!(matches!(fit_lorentzian(&t, None), Err(Error::Trace(_))));
    }

    #[test]
    fn translation_and_scale_invariance() {
        let p = LorentzianParams::new(0.8, 3e6, 30e6, 0.05).unwrap();
        let base = fit_lorentzian(&synth_trace(&p, grid(), 0.01, 5).unwrap(), None).unwrap();

        let shift = 41.5e6;
        let shifted = LorentzianParams {
            center: p.center + shift,
            ..p
        };
        let g = Grid::centered(shift, 150e6, 1001);
        let moved = fit_lorentzian(&synth_trace(&shifted, g, 0.01, 5).unwrap(), None).unwrap();
        assert!((moved.params.center - base.params.center - shift).abs() / p.fwhm < 1e-8);
        assert!((moved.params.fwhm / base.params.fwhm - 1.0).abs() < 1e-8);

        let k = 7.5;
        let scaled = LorentzianParams {
            amplitude: p.amplitude * k,
            offset: p.offset * k,
            ..p
        };
        let big = fit_lorentzian(&synth_trace(&scaled, grid(), 0.01 * k, 5).unwrap(), None).unwrap();
        assert!((big.params.fwhm / base.params.fwhm - 1.0).abs() < 1e-8);
        assert!((big.params.amplitude / base.params.amplitude - k).abs() < 1e-7);
    }

    #[test]
    fn explicit_init_is_used() {
        let p = reference_line();
        let t = synth_trace(&p, grid(), 0.0, 0).unwrap();
        let init = LorentzianParams::new(0.7, 10e6, 50e6, 0.1).unwrap();
        let fit = fit_lorentzian(&t, Some(init)).unwrap();
        assert!((fit.params.fwhm / p.fwhm - 1.0).abs() < 1e-8);
    }
}
