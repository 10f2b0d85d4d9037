//! Trace finite elements for linear elastic membranes on implicitly defined
//! surfaces.
//!
//! The pipeline runs on a structured tetrahedral background mesh of order
//! one or two:
//!
//! 1. [`mesh`] builds the background mesh and its oriented face adjacency.
//! 2. [`levelset`] provides analytic signed distance fields and their nodal
//!    interpolants.
//! 3. [`reconstruct`] classifies every element on a parametric sampling
//!    grid, finds zero-level points on edges and faces with a safeguarded
//!    Newton search and emits curved `tri6` / `quad8` surface elements.
//! 4. [`surfgeom`] evaluates frames, normals and quadrature on those
//!    elements.
//! 5. [`membrane`] assembles the membrane bilinear form together with the
//!    gradient and Hessian jump (ghost penalty) terms and solves the system.
//! 6. [`analysis`] measures stress, distance and normal errors and searches
//!    for good stabilization parameters.
//! 7. [`study`] drives full refinement studies from JSON configs and writes
//!    CSV and legacy VTK output.

pub mod analysis;
pub mod basis;
pub mod error;
pub mod export;
pub mod levelset;
pub mod linalg;
pub mod membrane;
pub mod mesh;
pub mod optimize;
pub mod reconstruct;
pub mod study;
pub mod surfgeom;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
