//! Two-scale finite element toolkit for steady flow of Newtonian and
//! regularized-Bingham fluids around rigid reinforcing bars.
//!
//! The flow around the bars can either be fully resolved (every bar meshed
//! as a circular hole) or replaced by a Darcy law whose permeability is
//! upscaled from a periodic unit-cell (RVE) Stokes problem, coupled to the
//! surrounding free-fluid Stokes region through Beavers-Joseph-Saffman
//! interface conditions.

pub mod app;
pub mod constitutive;
pub mod error;
pub mod fem;
pub mod linsolve;
pub mod micro;
pub mod mesh;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
