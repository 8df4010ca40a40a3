//! Numerical harmonic analysis on the Heisenberg group built around the
//! scalar-valued (Strichartz) Fourier transform.
//!
//! Modules, bottom-up:
//! - [`hgroup`]: group law, periodic grids, sampled functions, `L^p` norms.
//! - [`specfun`]: Laguerre polynomials and functions, `c_{n,k}`, eigenvalues.
//! - [`fan`]: the discretised Heisenberg fan, its measures, symbols and
//!   Lorentz-type functionals.
//! - [`sft`]: twisted convolution and the normalised forward/inverse transform.
//! - [`multiplier`]: Fourier multipliers and their convolution kernels.
//! - [`verify`]: test corpora and inequality-ratio reports.
//! - [`pde`]: heat semigroup and Picard/Duhamel solvers.
//! - [`cli`]: the `hsfm` command-line surface.

pub mod cli;
pub mod error;
pub mod fan;
pub mod hgroup;
pub mod multiplier;
pub mod pde;
pub mod reduce;
pub mod sft;
pub mod specfun;
pub mod verify;

mod container;

pub use error::{Error, Result};
