//! Near-field LoS MIMO toolkit.
//!
//! Builds spherical-wave and planar-wave channels between linear apertures,
//! splits them into communication modes and evaluates the DoF family of
//! metrics (DoF, EDoF₁, EDoF₂, EDoF₃) alongside water-filling capacity. The
//! continuous-aperture counterpart is handled by discretizing the Hermitian
//! kernel of the scalar Green's function with Gauss–Legendre quadrature.
//!
//! The experiment runner in [`experiment`] turns a JSON config into CSV/JSON
//! tables; the `nfdof` binary is a thin wrapper around it.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod kernel;
mod linalg;
pub mod link;
pub mod modes;
pub mod quadrature;

pub use error::{Error, ErrorKind, Result};

/// Complex scalar used for every channel coefficient.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Toolkit version embedded in provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
