//! Periodic aggregation-diffusion equations with one or two species:
//! kernel spectra, linear stability, bifurcation catalogs, stationary
//! states, time stepping and derivative checks of the fixed-point map.

pub mod catalog;
pub mod config;
pub mod dynamics;
pub mod emit;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod model;
pub mod operator;
pub mod stability;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::TorusGrid;
pub use kernels::{cosine_transform, kernel_summary, KernelSpec, KernelSummary, SpectralKernel};
pub use model::{Discrete, GridState, ParamKind, System};
pub use stability::{ScalarParams, TwoSpeciesParams};
