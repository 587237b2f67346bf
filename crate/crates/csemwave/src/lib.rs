//! 3D frequency-domain controlled-source electromagnetic (CSEM) forward
//! modelling and resistivity inversion using fictitious-wave-domain time
//! stepping.
//!
//! The diffusive Maxwell system is turned into a wave equation through the
//! substitution `eps = sigma / (2 omega0)`, stepped explicitly on a staggered
//! grid with convolutional PML, and frequency samples are accumulated on the
//! fly with a decaying oscillatory kernel. Inversion gradients come from one
//! forward and one adjoint simulation per source; the time-domain adjoint
//! sources are synthesized from a handful of frequency-domain residuals via a
//! small set of precomputed basis functions.
//!
//! All numeric kernels are generic over the scalar type ([`Real`]); `f64` is
//! the default precision used by the CLI, with `f32` available for
//! memory-bound forward runs.

pub mod adjoint_source;
pub mod config;
pub mod error;
pub mod fdtd;
pub mod fileio;
pub mod gradient;
pub mod grid;
pub mod inversion;
pub mod medium;
pub mod oracle;
pub mod scalar;
pub mod survey;
pub mod vol;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};
pub use vol::Vol;

/// Default-precision aliases.
pub type Grid3D64 = grid::Grid3D<f64>;
pub type Medium64 = medium::Medium<f64>;
pub type ModelParam64 = medium::ModelParam<f64>;
pub type BasisSet64 = adjoint_source::BasisSet<f64>;
pub type Survey64 = survey::Survey<f64>;
pub type DataSet64 = survey::DataSet<f64>;
