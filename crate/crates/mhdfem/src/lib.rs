//! Mixed finite element solver for time-dependent incompressible
//! magnetohydrodynamics.
//!
//! The discretization couples Taylor-Hood velocity/pressure pairs with
//! first-kind Nedelec edge elements for the magnetic field and advances in time
//! with a linearized backward Euler scheme (optionally BDF2) whose explicit
//! skew-symmetric structure preserves the discrete energy balance exactly and
//! keeps the magnetic field weakly divergence-free step over step.
//!
//! Conventions used throughout:
//! - Domains are the unit square/cube meshed into structured simplices.
//! - 2D geometry is embedded in 3D arithmetic (`z = 0`); the scalar 2D curl is
//!   the z-component of the embedded curl, which makes one assembly path serve
//!   both dimensions.
//! - Global edges are oriented from lower to higher vertex index; every edge
//!   degree of freedom is defined against that orientation.

pub mod assembly;
pub mod cases;
pub mod config;
mod dense;
pub mod diagnostics;
pub mod error;
pub mod fespace;
pub mod linsolve;
pub mod mesh;
pub mod quadrature;
pub mod timeloop;
pub mod vtk;

pub use error::Error;
