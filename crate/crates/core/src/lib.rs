//! Polynomial curves, their harmonic moments, and the normal matrix ensembles
//! whose droplets they bound.

pub mod balayage;
pub mod cli;
pub mod coulomb;
pub mod curve;
mod dual;
pub mod error;
pub mod inversion;
pub mod io;
pub mod moments;
mod poly;
pub mod schwarz;
mod solve;

pub use curve::{ContourGrid, PolynomialCurve, Polyline};
pub use error::{Error, Result};
pub use moments::HarmonicMoments;
