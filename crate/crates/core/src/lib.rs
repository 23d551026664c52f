//! Characterization toolkit for short high-finesse Fabry-Perot cavities.
//!
//! The pipeline turns simultaneous wavelength-meter readings of two lasers
//! into the cavity geometry, fits transmission lines for finesse and
//! birefringence, books mirror losses and outcoupling, evaluates the
//! single-atom coupling, and simulates chirped PZT sweeps to locate
//! mechanical resonances. Every number carries a propagated uncertainty.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod constants;
pub mod coupling;
pub mod decimal;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lineshape;
pub mod mech;
pub mod pipeline;
pub mod quantity;
pub mod report;
pub mod synth;
pub mod twolaser;

pub use error::{Error, Result};
pub use geometry::CavityGeometry;
pub use quantity::{Propagation, Quantity, Unit};
