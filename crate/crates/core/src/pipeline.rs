//! Report-producing commands over a loaded [`Measurement`].

use std::cell::OnceCell;

use crate::budget::{mirror_stats, outcoupling, total_loss_from_finesse};
use crate::coupling::{g0_max, strong_coupling, AtomicLine};
use crate::error::{Error, Result};
use crate::io::{default_wlm_sigma, same_wavelength, Measurement, TraceRole};
use crate::lineshape::{
    average_fwhm, compare_polarizations, finesse_from_fwhm, fit_lorentzian, lorentzian_eval, LorentzianFit,
    TransmissionTrace,
};
use crate::mech::{detect_dips, match_reference, normalize_trace, simulate_sweep, PztCalibration, SweepAxis};
use crate::quantity::{Propagation, Quantity, Unit};
use crate::report::{
    BirefringenceEntry, BudgetEntry, FinesseEntry, MechEntry, MechSource, PolarizationFwhm, Provenance, Report,
    TraceFailure,
};
use crate::twolaser::{reduce_lines, solve_geometry, Spectra};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub propagation: Propagation,
    pub axis: SweepAxis,
    pub default_sigma_hz: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            propagation: Propagation::default(),
            axis: SweepAxis::default(),
            default_sigma_hz: default_wlm_sigma(),
        }
    }
}

/// FWHM of a single trace with its fitted sigma.
pub fn fit_fwhm(trace: &TransmissionTrace) -> Result<(Quantity, LorentzianFit)> {
    let fit = fit_lorentzian(trace, None)?;
    Ok((Quantity::new(fit.params.fwhm, fit.sigmas.fwhm, Unit::Hz), fit))
}

/// Tidy CSV of a trace with its fitted curve as a third column.
pub fn fit_curve_csv(trace: &TransmissionTrace, fit: &LorentzianFit) -> Result<String> {
    let curve: Vec<f64> = trace
        .abscissa()
        .iter()
        .map(|&x| lorentzian_eval(&fit.params, x))
        .collect();
    trace.to_csv(Some(("fit", &curve)))
}

fn require_wavelength(path: &str, w: Option<f64>) -> Result<f64> {
    w.filter(|v| *v > 0.0)
        .ok_or_else(|| Error::Config(format!("trace {path} needs a positive wavelength_m")))
}

struct Group<T> {
    wavelength: f64,
    items: Vec<T>,
}

fn push_grouped<T>(groups: &mut Vec<Group<T>>, wavelength: f64, item: T) {
    match groups.iter_mut().find(|g| same_wavelength(g.wavelength, wavelength)) {
        Some(g) => g.items.push(item),
        None => groups.push(Group {
            wavelength,
            items: vec![item],
        }),
    }
}

fn finesse_entry(wavelength: Option<f64>, fwhms: Vec<Quantity>, fsr: Quantity) -> Result<FinesseEntry> {
    let mean = average_fwhm(&fwhms)?;
    Ok(FinesseEntry {
        wavelength: wavelength.map(|w| Quantity::exact(w, Unit::Meter)),
        result: finesse_from_fwhm(mean, fsr)?,
        fwhm_per_trace: fwhms,
    })
}

fn birefringence_entries(m: &Measurement) -> Result<(Vec<BirefringenceEntry>, Vec<TraceFailure>)> {
    let mut groups: Vec<Group<(String, Quantity)>> = Vec::new();
    let mut failures = Vec::new();
    for (r, trace) in m.traces_with_role(TraceRole::Polarization) {
        let w = require_wavelength(&r.path, r.wavelength_m)?;
        let label = r
            .polarization
            .clone()
            .ok_or_else(|| Error::Config(format!("polarization trace {} has no label", r.path)))?;
        match fit_fwhm(trace) {
            Ok((q, _)) => push_grouped(&mut groups, w, (label, q)),
            Err(e) => failures.push(TraceFailure::new(r.path.clone(), &e)),
        }
    }
    let mut out = Vec::new();
    for g in groups {
        let mut labels: Vec<(String, Vec<Quantity>)> = Vec::new();
        for (label, q) in g.items {
            match labels.iter_mut().find(|(l, _)| *l == label) {
                Some((_, qs)) => qs.push(q),
                None => labels.push((label, vec![q])),
            }
        }
        let per_label = labels
            .into_iter()
            .map(|(l, qs)| Ok((l, average_fwhm(&qs)?)))
            .collect::<Result<Vec<_>>>()?;
        out.push(BirefringenceEntry {
            wavelength: Quantity::exact(g.wavelength, Unit::Meter),
            verdict: compare_polarizations(&per_label)?,
            polarizations: per_label
                .into_iter()
                .map(|(label, fwhm)| PolarizationFwhm { label, fwhm })
                .collect(),
        });
    }
    Ok((out, failures))
}

/// Fits standalone trace files against a known FSR; several traces are
/// averaged into one entry.
pub fn cmd_fit(
    traces: &[(String, TransmissionTrace)],
    fsr: Quantity,
    wavelength_m: Option<f64>,
    provenance: Provenance,
) -> Result<(Report, Vec<Option<LorentzianFit>>)> {
    let mut report = Report::empty(provenance);
    let mut fwhms = Vec::new();
    let mut fits = Vec::new();
    for (name, t) in traces {
        match fit_fwhm(t) {
            Ok((q, fit)) => {
                fwhms.push(q);
                fits.push(Some(fit));
            }
            Err(e) => {
                report.failures.push(TraceFailure::new(name.clone(), &e));
                fits.push(None);
            }
        }
    }
    if report.failures.is_empty() {
        report.finesse.push(finesse_entry(wavelength_m, fwhms, fsr)?);
    }
    Ok((report, fits))
}

fn mech_entry(trace: &TransmissionTrace, m: &Measurement, source: MechSource, axis: SweepAxis) -> Result<MechEntry> {
    let cfg = m.file.mechanics.clone().unwrap_or_default();
    let (lo, hi) = match cfg.bounds()? {
        Some(b) => b,
        None => {
            let v = trace.values();
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let dips = detect_dips(&normalize_trace(trace, lo, hi)?, cfg.min_prominence)?;
    let matches = match_reference(&dips, &cfg.reference_hz, cfg.match_tolerance_hz);
    Ok(MechEntry {
        source,
        axis,
        dips,
        matches,
    })
}

/// Per-wavelength finesse from the finesse traces. Traces that fail to fit
/// are kept as failures and left out of their group.
struct Fitted {
    entries: Vec<FinesseEntry>,
    failures: Vec<TraceFailure>,
}

/// One pipeline run; the line reduction and the finesse fits are computed
/// at most once and shared between sections.
struct Context<'a> {
    m: &'a Measurement,
    opt: &'a Options,
    spectra: OnceCell<Spectra>,
    fitted: OnceCell<Fitted>,
}

impl<'a> Context<'a> {
    fn new(m: &'a Measurement, opt: &'a Options) -> Self {
        Context {
            m,
            opt,
            spectra: OnceCell::new(),
            fitted: OnceCell::new(),
        }
    }

    fn fragment(&self) -> Report {
        Report::empty(Provenance::new(self.opt.propagation, self.m.inputs.clone()))
    }

    fn spectra(&self) -> Result<&Spectra> {
        if let Some(s) = self.spectra.get() {
            return Ok(s);
        }
        let s = reduce_lines(
            &self.m.file.laser_lines(self.opt.default_sigma_hz)?,
            self.opt.propagation,
        )?;
        Ok(self.spectra.get_or_init(|| s))
    }

    fn fitted(&self) -> Result<&Fitted> {
        if let Some(f) = self.fitted.get() {
            return Ok(f);
        }
        let fsr = self.spectra()?.fsr;
        let mut groups: Vec<Group<Quantity>> = Vec::new();
        let mut failures = Vec::new();
        for (r, trace) in self.m.traces_with_role(TraceRole::Finesse) {
            let w = require_wavelength(&r.path, r.wavelength_m)?;
            match fit_fwhm(trace) {
                Ok((q, _)) => push_grouped(&mut groups, w, q),
                Err(e) => failures.push(TraceFailure::new(r.path.clone(), &e)),
            }
        }
        let entries = groups
            .into_iter()
            .map(|g| finesse_entry(Some(g.wavelength), g.items, fsr))
            .collect::<Result<_>>()?;
        Ok(self.fitted.get_or_init(|| Fitted { entries, failures }))
    }

    fn geometry(&self) -> Result<Report> {
        let s = self.spectra()?;
        Ok(Report {
            geometry: Some(solve_geometry(s.fsr, s.trans, s.lambda)?),
            ..self.fragment()
        })
    }

    fn finesse(&self) -> Result<Report> {
        let fitted = self.fitted()?;
        let (birefringence, more) = birefringence_entries(self.m)?;
        let mut failures = fitted.failures.clone();
        failures.extend(more);
        if fitted.entries.is_empty() && birefringence.is_empty() && failures.is_empty() {
            return Err(Error::Config("no finesse or polarization traces".into()));
        }
        Ok(Report {
            finesse: fitted.entries.clone(),
            birefringence,
            failures,
            ..self.fragment()
        })
    }

    fn budget(&self) -> Result<Report> {
        let records = self
            .m
            .file
            .mirror_transmittances
            .as_deref()
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::Config("no mirror_transmittances in measurement file".into()))?;
        let mut report = self.fragment();
        let mut fitted: &[FinesseEntry] = &[];
        if records.iter().any(|r| r.finesse.is_none()) {
            let f = self.fitted()?;
            if !f.failures.is_empty() {
                report.failures = f.failures.clone();
                return Ok(report);
            }
            fitted = &f.entries;
        }
        for r in records {
            let finesse = match r.finesse {
                Some(f) => f,
                None => fitted
                    .iter()
                    .find(|e| e.wavelength.is_some_and(|w| same_wavelength(w.value, r.wavelength_m)))
                    .map(|e| e.result.finesse)
                    .ok_or_else(|| Error::Config(format!("no finesse available at wavelength {} m", r.wavelength_m)))?,
            };
            let t = mirror_stats(&r.to_set()?)?;
            let result = outcoupling(t, total_loss_from_finesse(finesse)?)?;
            report.budget.push(BudgetEntry {
                wavelength: Quantity::exact(r.wavelength_m, Unit::Meter),
                mirror_transmittance: t,
                finesse,
                result,
            });
        }
        Ok(report)
    }

    /// κ/2π from the override, else from the finesse group at `wavelength`
    /// or the first group. Fit failures are returned instead.
    fn kappa(&self, wavelength: f64) -> Result<std::result::Result<Option<Quantity>, Vec<TraceFailure>>> {
        if let Some(k) = self.m.file.kappa_over_2pi {
            return Ok(Ok(Some(k)));
        }
        let f = self.fitted()?;
        if !f.failures.is_empty() {
            return Ok(Err(f.failures.clone()));
        }
        Ok(Ok(f
            .entries
            .iter()
            .find(|e| e.wavelength.is_some_and(|w| same_wavelength(w.value, wavelength)))
            .or(f.entries.first())
            .map(|e| e.result.kappa_over_2pi)))
    }

    fn coupling(&self) -> Result<Report> {
        let s = self.spectra()?;
        let g = solve_geometry(s.fsr, s.trans, s.lambda)?;
        let line = self.m.file.atomic_line.clone().unwrap_or_else(AtomicLine::rb87_d2);
        let mut report = self.fragment();
        let kappa = match self.kappa(line.wavelength.value)? {
            Ok(k) => {
                k.ok_or_else(|| Error::Config("no finesse traces or kappa_over_2pi for the coupling check".into()))?
            }
            Err(failures) => {
                report.failures = failures;
                return Ok(report);
            }
        };
        let g0 = g0_max(g.length_l, g.radius_r, &line)?;
        report.coupling = Some(strong_coupling(g0, kappa, &line)?);
        Ok(report)
    }

    fn chirp_sim(&self) -> Result<(Report, TransmissionTrace)> {
        let m = self.m;
        let cfg = m
            .file
            .mechanics
            .clone()
            .ok_or_else(|| Error::Config("no mechanics section in measurement file".into()))?;
        let pzt = m.file.pzt_calibration.clone().unwrap_or_default();
        let fsr = match pzt.fsr_hz {
            Some(f) => Quantity::exact(f, Unit::Hz),
            None => self.spectra()?.fsr,
        };
        let cal = PztCalibration::new(Quantity::exact(pzt.volts_per_fsr, Unit::Volt), fsr)?;
        let hwhm = match cfg.hwhm_hz {
            Some(h) => h,
            None => {
                let lambda = m.file.atomic_line.clone().unwrap_or_default().wavelength.value;
                self.kappa(lambda)?
                    .map_err(|_| Error::Degenerate("finesse traces failed, cavity half-width unavailable"))?
                    .ok_or_else(|| Error::Config("mechanics.hwhm_hz not set and no finesse traces".into()))?
                    .value
            }
        };
        let trace = simulate_sweep(&cfg.chirp, &cfg.modes, &cal, hwhm, self.opt.axis)?;
        let mut report = self.fragment();
        report
            .mech
            .push(mech_entry(&trace, m, MechSource::Simulated, self.opt.axis)?);
        Ok((report, trace))
    }

    fn dips(&self) -> Result<Report> {
        let mut report = self.fragment();
        for (r, trace) in self.m.traces_with_role(TraceRole::Chirp) {
            let axis = match trace.meta.get("axis").map(String::as_str) {
                Some("instantaneous") => SweepAxis::Instantaneous,
                Some("sweep") | None => self.opt.axis,
                Some(other) => return Err(Error::Trace(format!("{}: unknown axis '{other}'", r.path))),
            };
            report.mech.push(mech_entry(trace, self.m, MechSource::Measured, axis)?);
        }
        if report.mech.is_empty() {
            return Err(Error::Config("no chirp traces in measurement file".into()));
        }
        Ok(report)
    }
}

pub fn cmd_geometry(m: &Measurement, opt: &Options) -> Result<Report> {
    Context::new(m, opt).geometry()
}

/// Finesse and birefringence sections. Any trace failure is recorded in the
/// report and the caller should treat the batch as failed.
pub fn cmd_finesse(m: &Measurement, opt: &Options) -> Result<Report> {
    Context::new(m, opt).finesse()
}

pub fn cmd_budget(m: &Measurement, opt: &Options) -> Result<Report> {
    Context::new(m, opt).budget()
}

pub fn cmd_coupling(m: &Measurement, opt: &Options) -> Result<Report> {
    Context::new(m, opt).coupling()
}

/// Simulated chirp sweep and its dip analysis. Returns the raw trace too.
pub fn cmd_chirp_sim(m: &Measurement, opt: &Options) -> Result<(Report, TransmissionTrace)> {
    Context::new(m, opt).chirp_sim()
}

/// Dip analysis of measured chirp traces.
pub fn cmd_dips(m: &Measurement, opt: &Options) -> Result<Report> {
    Context::new(m, opt).dips()
}

/// Every section the measurement file has inputs for, merged in a fixed order.
pub fn cmd_report(m: &Measurement, opt: &Options) -> Result<Report> {
    let cx = Context::new(m, opt);
    let mut report = cx.fragment();
    let has = |role| m.traces_with_role(role).next().is_some();
    if !m.file.lasers.is_empty() {
        report.merge(cx.geometry()?)?;
        if has(TraceRole::Finesse) || has(TraceRole::Polarization) {
            report.merge(cx.finesse()?)?;
            if !report.failures.is_empty() {
                return Ok(report);
            }
        }
        if has(TraceRole::Finesse) || m.file.kappa_over_2pi.is_some() {
            report.merge(cx.coupling()?)?;
        }
    }
    if m.file.mirror_transmittances.as_ref().is_some_and(|r| !r.is_empty()) {
        report.merge(cx.budget()?)?;
    }
    if m.file.mechanics.is_some() {
        report.merge(cx.chirp_sim()?.0)?;
    }
    if has(TraceRole::Chirp) {
        report.merge(cx.dips()?)?;
    }
    Ok(report)
}
