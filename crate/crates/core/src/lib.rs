//! Inverse scattering transform for a 2+1 dimensional three-wave system.
//!
//! The linear problem is the nonstationary Dirac-type system
//!
//! ```text
//! psi_y - sigma psi_x - Q(x, y) psi = 0,    sigma = diag(1, 1, -1)
//! ```
//!
//! Pipeline: [`scattering`] maps a potential to the kernels `{F13, F23, G31, G32}`,
//! [`evolution`] moves them in time by exact shifts and [`marchenko`] recovers the potential.
//! [`threewave`] is an independent direct solver of the nonlinear system and [`lax`]
//! checks the Lax-pair identities numerically.

pub mod convergence;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod interp;
pub mod io;
pub mod lax;
pub mod linalg;
pub mod marchenko;
pub mod pipeline;
pub mod scattering;
pub mod threewave;
pub mod types;

pub use error::{Error, Result};
pub use grid::{characteristic_coords, from_characteristic, relative_l2, Axis, CharAxis, Field, Grid2D};
pub use num_complex::Complex64;
pub use scattering::ScatteringData;
pub use types::{AsymptoticProfile, GaussianBump, LaxParameters, Potential, WaveField};
