//! Dirichlet Laplacian spectra on prefractals of iterated function systems.
//!
//! The pipeline: describe an IFS of affine similarities ([`ifs`]), rasterize
//! its prefractals onto integer cell lattices and Dirichlet grids ([`grid`]),
//! assemble and diagonalize the discrete Laplacian ([`spectrum`]), split the
//! spectrum into its self-similar (diaperiodic) and interconnective parts
//! ([`diaperiodic`]), evaluate modal Green's functions and their self-similar
//! renormalization ([`green`]), and estimate spectral, box-counting and
//! similarity dimensions side by side ([`dimension`]).

pub mod diaperiodic;
pub mod dimension;
mod error;
pub mod green;
pub mod grid;
pub mod ifs;
pub mod presets;
pub mod spectrum;

pub use error::{Error, Result};
