//! Constructive solver for heteroclinic traveling waves of the
//! Frenkel-Kontorova advance-delay equation
//!
//! c^2 u'' - (u(x+1) - 2u(x) + u(x-1)) + alpha u - alpha psi'(u) = 0.
//!
//! Profiles are split into closed-form parts and decaying spectral correctors;
//! the corrector equations are solved by deflated Fourier inversion and a
//! Picard iteration, then checked against the physical chain in time.

pub mod dispersion;
pub mod error;
pub mod fields;
pub mod lattice;
pub mod linsolve;
pub mod profiles;
pub mod twotrans;
pub mod waves;

pub use dispersion::Params;
pub use error::{Result, WaveError};
