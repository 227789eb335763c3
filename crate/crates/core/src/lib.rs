//! Poisson problems on plane sectors with corner boundary conditions.
//!
//! Modules, roughly in dependency order:
//! - [`sector`]: geometry, spectra, grids, fields, cutoffs, quadrature
//! - [`poly_lift`]: particular solutions of `-Delta p = x^i y^j` with corner conditions
//! - [`modal`]: angular eigen-projection and radial Green's kernels
//! - [`mellin`]: Mellin transform on shifted lines and residue extraction
//! - [`sif`]: stress intensity coefficients and solution decomposition
//! - [`besov`]: weighted norms, K-functionals and regularity exponents
//! - [`cli`]: configuration, experiments and reports
//! - [`verify`]: the acceptance suite behind `cornerlab verify`

pub mod besov;
pub mod cli;
pub mod error;
pub mod mellin;
pub mod modal;
pub mod oracle;
pub mod poly_lift;
pub(crate) mod product;
pub mod sector;
pub mod sif;
pub mod verify;

pub use error::{CornerError, Result};
