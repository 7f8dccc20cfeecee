//! Contour-dynamics laboratory for uniformly rotating vortex patches of the
//! 2D incompressible Euler equations.
//!
//! The crate computes m-fold symmetric rotating patches (Kelvin waves) close
//! to the disc by Newton iteration on a boundary-integral formulation, checks
//! their variational stability through the linearized energy quadratic form,
//! evolves patch boundaries under their self-induced velocity, and runs the
//! headline experiments: long-time L1 stability of the rotating wave,
//! rotation-angle tracking through the complex moment, and perimeter growth
//! (filamentation). An annulus module covers the two-boundary analogue.
//!
//! Everything is dimensionless with unit patch vorticity; the reference
//! radius of the disc branch is fixed to 1.

pub mod annulus;
pub mod evolution;
pub mod experiments;
pub mod field;
pub mod geometry;
pub(crate) mod kernel;
pub mod raster;
pub mod spectral;
pub mod svg;
pub mod vstate;

pub use geometry::{torus_project, Diagnostics, FourierBoundary, NodeContour, Vec2};
pub use raster::{check_m_fold, min_rotation_distance, symmetric_difference_area};
