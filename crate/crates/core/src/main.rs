#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cavchar::io::{read_bytes, write_text, InputHash, Measurement};
use cavchar::lineshape::TransmissionTrace;
use cavchar::mech::SweepAxis;
use cavchar::pipeline::{self, Options};
use cavchar::report::{merge_all, Provenance, Report};
use cavchar::synth::{cmd_synth, SynthConfig};
use cavchar::{Error, Propagation, Quantity, Result, Unit};

#[derive(Parser)]
#[command(name = "cavchar", version, about = "Fabry-Perot cavity characterization")]
struct Cli {
    /// Uncertainty bookkeeping for frequency differences.
    #[arg(long, value_enum, global = true, default_value_t = PropagationArg::Quadrature)]
    propagation: PropagationArg,

    /// Frequency axis of chirped sweeps.
    #[arg(long, value_enum, global = true, default_value_t = AxisArg::Sweep)]
    axis: AxisArg,

    /// Default wavelength-meter sigma per laser line, Hz.
    #[arg(long, global = true, env = "CAVCHAR_PRECISION", default_value_t = 10e6)]
    precision: f64,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropagationArg {
    Quadrature,
    Resolution,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Sweep,
    Instantaneous,
}

#[derive(Args)]
struct InOut {
    /// Measurement file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cavity geometry from the laser lines.
    Geometry(InOut),
    /// Finesse and birefringence from the referenced traces.
    Finesse(InOut),
    /// Fit standalone trace files against a given FSR.
    Fit {
        traces: Vec<PathBuf>,
        #[arg(long)]
        fsr_hz: f64,
        #[arg(long, default_value_t = 0.0)]
        fsr_sigma_hz: f64,
        #[arg(long)]
        wavelength_m: Option<f64>,
        /// Directory for tidy CSV files with the fitted curve.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Outcoupling efficiency from mirror transmittances and finesse.
    Budget(InOut),
    /// Single-atom coupling and the strong-coupling check.
    Coupling(InOut),
    /// Simulate a chirped PZT sweep and locate its dips.
    ChirpSim {
        #[command(flatten)]
        io: InOut,
        /// Write the simulated trace as CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Locate dips in measured chirp traces.
    Dips(InOut),
    /// Generate a synthetic measurement campaign from a ground-truth config.
    Synth {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Merge report fragments, optionally running every section of a measurement file first.
    Report {
        fragments: Vec<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(report: &Report, out: Option<&Path>) -> Result<bool> {
    emit(&report.to_json()?, out)?;
    for f in &report.failures {
        eprintln!("error[{}]: {}: {}", f.code, f.trace, f.message);
    }
    Ok(report.failures.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    let opt = Options {
        propagation: match cli.propagation {
            PropagationArg::Quadrature => Propagation::Quadrature,
            PropagationArg::Resolution => Propagation::Resolution,
        },
        axis: match cli.axis {
            AxisArg::Sweep => SweepAxis::Sweep,
            AxisArg::Instantaneous => SweepAxis::Instantaneous,
        },
        default_sigma_hz: cli.precision,
    };
    if !(opt.default_sigma_hz >= 0.0) {
        return Err(Error::Config(format!("invalid precision {}", opt.default_sigma_hz)));
    }
    match cli.cmd {
        Cmd::Geometry(a) => emit_report(
            &pipeline::cmd_geometry(&Measurement::load(&a.input)?, &opt)?,
            a.out.as_deref(),
        ),
        Cmd::Finesse(a) => emit_report(
            &pipeline::cmd_finesse(&Measurement::load(&a.input)?, &opt)?,
            a.out.as_deref(),
        ),
        Cmd::Budget(a) => emit_report(
            &pipeline::cmd_budget(&Measurement::load(&a.input)?, &opt)?,
            a.out.as_deref(),
        ),
        Cmd::Coupling(a) => emit_report(
            &pipeline::cmd_coupling(&Measurement::load(&a.input)?, &opt)?,
            a.out.as_deref(),
        ),
        Cmd::Dips(a) => emit_report(
            &pipeline::cmd_dips(&Measurement::load(&a.input)?, &opt)?,
            a.out.as_deref(),
        ),
        Cmd::ChirpSim { io, trace_out } => {
            let (report, trace) = pipeline::cmd_chirp_sim(&Measurement::load(&io.input)?, &opt)?;
            if let Some(p) = trace_out {
                write_text(&p, &trace.to_csv(None)?)?;
            }
            emit_report(&report, io.out.as_deref())
        }
        Cmd::Fit {
            traces,
            fsr_hz,
            fsr_sigma_hz,
            wavelength_m,
            curves,
            out,
        } => {
            if traces.is_empty() {
                return Err(Error::Config("no trace files given".into()));
            }
            if !(fsr_sigma_hz >= 0.0) {
                return Err(Error::Config(format!("invalid FSR sigma {fsr_sigma_hz}")));
            }
            let mut loaded = Vec::new();
            let mut inputs = Vec::new();
            for p in &traces {
                let text = read_text(p)?;
                inputs.push(InputHash::of(p.display().to_string(), text.as_bytes()));
                let t =
                    TransmissionTrace::from_csv(&text).map_err(|e| Error::Trace(format!("{}: {e}", p.display())))?;
                loaded.push((p.display().to_string(), t));
            }
            let fsr = Quantity::new(fsr_hz, fsr_sigma_hz, Unit::Hz);
            let (report, fits) =
                pipeline::cmd_fit(&loaded, fsr, wavelength_m, Provenance::new(opt.propagation, inputs))?;
            if let Some(dir) = curves {
                for ((path, (_, trace)), fit) in traces.iter().zip(&loaded).zip(&fits) {
                    if let Some(fit) = fit {
                        let name = path
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default();
                        write_text(
                            &dir.join(format!("{name}.fit.csv")),
                            &pipeline::fit_curve_csv(trace, fit)?,
                        )?;
                    }
                }
            }
            emit_report(&report, out.as_deref())
        }
        Cmd::Synth { input, out, seed } => {
            let cfg: SynthConfig = serde_json::from_str(&read_text(&input)?)?;
            cmd_synth(&cfg, seed)?.write(&out)?;
            Ok(true)
        }
        Cmd::Report { fragments, input, out } => {
            let mut parts = Vec::new();
            if let Some(p) = input {
                parts.push(pipeline::cmd_report(&Measurement::load(&p)?, &opt)?);
            }
            for p in &fragments {
                parts.push(Report::from_json(&read_text(p)?)?);
            }
            emit_report(&merge_all(parts)?, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
