//! Time-harmonic scattering in branched Neumann waveguides.
//!
//! The crate solves `Δu + k²u = 0` in a strip with vertical branches, with
//! modal transparent conditions at the ports, and builds the asymptotic and
//! design tools that sit on top of the solver.

// `!(x > 0.0)` style checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod design;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod modes;
pub mod report;
pub mod scattering;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;
