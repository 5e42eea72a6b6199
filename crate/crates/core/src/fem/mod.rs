//! Finite element machinery: shape functions, quadrature, DOF management,
//! and element/system assembly for the mixed Stokes-Darcy problems.

pub mod assembly;
pub mod dofs;
pub mod quadrature;
pub mod shape;

pub use assembly::{assemble, DarcyLaw, SystemSpec};
pub use dofs::{frame_matrix, DofMap, DofStatus, Resolved};
