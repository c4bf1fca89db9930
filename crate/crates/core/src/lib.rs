//! Computational toolkit for integer toral automorphisms and their smooth
//! perturbations: exact classification, numerical conjugacy solving and the
//! Fourier-side diagnostics used to judge the regularity of the solutions.

pub mod classify;
pub mod cli;
pub mod conjugacy;
pub mod error;
pub mod exact_algebra;
pub mod fit;
pub mod harmonic;
pub mod jets;
pub mod mixing;
pub mod spectral;
pub mod torus_maps;

pub use error::{Error, Result};
