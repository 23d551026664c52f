use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{lorentzian_eval, LorentzianParams};
use crate::decimal::format_f64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    Detuning,
    SweepFrequency,
    Time,
}

impl AbscissaKind {
    /// Column name used in the trace CSV header.
    pub fn column(&self) -> &'static str {
        match self {
            AbscissaKind::Detuning => "detuning_hz",
            AbscissaKind::SweepFrequency => "sweep_hz",
            AbscissaKind::Time => "time_s",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        match name.trim() {
            "detuning_hz" => Some(AbscissaKind::Detuning),
            "sweep_hz" => Some(AbscissaKind::SweepFrequency),
            "time_s" => Some(AbscissaKind::Time),
            _ => None,
        }
    }
}

/// Sampled transmission: strictly increasing abscissa, finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    abscissa: Vec<f64>,
    values: Vec<f64>,
    pub kind: AbscissaKind,
    pub meta: BTreeMap<String, String>,
}

impl TransmissionTrace {
    pub fn new(abscissa: Vec<f64>, values: Vec<f64>, kind: AbscissaKind) -> Result<Self> {
        if abscissa.len() != values.len() {
            return Err(Error::Trace(format!(
                "length mismatch: {} abscissa vs {} values",
                abscissa.len(),
                values.len()
            )));
        }
        if let Some(i) = abscissa.iter().chain(&values).position(|v| !v.is_finite()) {
            return Err(Error::Trace(format!("non-finite sample at index {i}")));
        }
        if let Some(i) = abscissa.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Trace(format!(
                "abscissa not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(TransmissionTrace {
            abscissa,
            values,
            kind,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same abscissa, new values (validated).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut t = TransmissionTrace::new(
            self.abscissa.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.kind,
        )?;
        t.meta = self.meta.clone();
        Ok(t)
    }

    /// CSV text: `# key=value` metadata lines, a header naming the abscissa
    /// unit, then `abscissa,value[,extra]` rows.
    pub fn to_csv(&self, extra: Option<(&str, &[f64])>) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        match extra {
            Some((name, col)) => {
                if col.len() != self.len() {
                    return Err(Error::Trace("extra column length mismatch".into()));
                }
                w.write_record([self.kind.column(), "value", name])?;
                for ((x, y), c) in self.abscissa.iter().zip(&self.values).zip(col) {
                    w.write_record([format_f64(*x), format_f64(*y), format_f64(*c)])?;
                }
            }
            None => {
                w.write_record([self.kind.column(), "value"])?;
                for (x, y) in self.abscissa.iter().zip(&self.values) {
                    w.write_record([format_f64(*x), format_f64(*y)])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Trace(format!("csv flush: {e}")))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut body = String::with_capacity(text.len());
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            } else if !line.trim().is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let headers = r.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Trace("need at least two columns".into()));
        }
        let kind = AbscissaKind::from_column(&headers[0]).ok_or_else(|| {
            Error::Trace(format!(
                "unknown abscissa column '{}', expected detuning_hz, sweep_hz or time_s",
                &headers[0]
            ))
        })?;
        if headers[1].trim() != "value" {
            return Err(Error::Trace(format!(
                "second column must be 'value', got '{}'",
                &headers[1]
            )));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Trace(format!("row {}: missing column {i}", row + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Trace(format!("row {}: {e}", row + 1)))
            };
            xs.push(parse(0)?);
            ys.push(parse(1)?);
        }
        let mut t = TransmissionTrace::new(xs, ys, kind)?;
        t.meta = meta;
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text)
    }
}

/// Uniform sampling grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Grid { start, stop, points }
    }

    pub fn centered(center: f64, half_span: f64, points: usize) -> Self {
        Grid::new(center - half_span, center + half_span, points)
    }

    pub fn samples(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::Trace("empty grid".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        if !(self.stop > self.start) {
            return Err(Error::Trace("grid stop must exceed start".into()));
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

/// Lorentzian samples plus seeded i.i.d. Gaussian noise on a detuning axis.
pub fn synth_trace(p: &LorentzianParams, grid: Grid, noise_sigma: f64, seed: u64) -> Result<TransmissionTrace> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::Config(format!("negative noise sigma {noise_sigma}")));
    }
    let xs = grid.samples()?;
    let mut ys: Vec<f64> = xs.iter().map(|&x| lorentzian_eval(p, x)).collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("finite positive sigma");
        for y in &mut ys {
            *y += normal.sample(&mut rng);
        }
    }
    Ok(TransmissionTrace::new(xs, ys, AbscissaKind::Detuning)?
        .with_meta("seed", seed.to_string())
        .with_meta("noise_sigma", format_f64(noise_sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LorentzianParams {
        LorentzianParams::new(1.0, 0.0, 37.1e6, 0.0).unwrap()
    }

    #[test]
    fn noiseless_synth_is_the_model() {
        let p = params();
        let t = synth_trace(&p, Grid::centered(0.0, 150e6, 101), 0.0, 1).unwrap();
        for (x, y) in t.abscissa().iter().zip(t.values()) {
            assert_eq!(*y, lorentzian_eval(&p, *x));
        }
    }

    #[test]
    fn seeded_synth_is_deterministic() {
        let p = params();
        let g = Grid::centered(0.0, 150e6, 201);
        let a = synth_trace(&p, g, 0.01, 7).unwrap();
        let b = synth_trace(&p, g, 0.01, 7).unwrap();
        let c = synth_trace(&p, g, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(synth_trace(&params(), Grid::new(0.0, 1.0, 0), 0.0, 0).is_err());
    }

    #[test]
    fn invalid_traces_rejected() {
        assert!(TransmissionTrace::new(vec![0.0, 1.0], vec![1.0], AbscissaKind::Detuning).is_err());
        assert!(TransmissionTrace::new(vec![1.0, 1.0], vec![1.0, 2.0], AbscissaKind::Detuning).is_err());
        assert!(TransmissionTrace::new(vec![0.0, 1.0], vec![f64::NAN, 2.0], AbscissaKind::Detuning).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_bits_and_meta() {
        let t = synth_trace(&params(), Grid::centered(1.5e6, 150e6, 51), 0.02, 3)
            .unwrap()
            .with_meta("polarization", "H");
        let text = t.to_csv(None).unwrap();
        assert!(text.contains("detuning_hz,value"));
        let back = TransmissionTrace::from_csv(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_header_is_checked() {
        assert!(TransmissionTrace::from_csv("freq,value\n1,2\n").is_err());
        assert!(TransmissionTrace::from_csv("sweep_hz,amp\n1,2\n").is_err());
        let t = TransmissionTrace::from_csv("sweep_hz,value,fit\n1,0.5,0.4\n2,0.6,0.5\n").unwrap();
        assert_eq!(t.kind, AbscissaKind::SweepFrequency);
        assert_eq!(t.values(), &[0.5, 0.6]);
    }
}
