//! Worldvolume geometry of extended objects in curved backgrounds: embeddings,
//! induced and extrinsic geometry, normal deformations, action variations,
//! the Jacobi operator and covariant symplectic currents on a finite-difference
//! grid.

pub mod actions;
pub mod background;
pub mod deformation;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linearized;
pub mod solver;
pub mod symplectic;

pub use error::{BraneError, Result};
