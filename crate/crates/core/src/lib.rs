//! Finite-volume solver for the quasi-geostrophic equations in
//! stream-function / potential-vorticity form, together with a POD-Galerkin
//! reduced-order pipeline with an optional linear differential filter
//! (BV-α) closure.
//!
//! The offline stage runs [`fom::run_fom`] to collect snapshots, extracts
//! lifted POD bases with [`pod`], and assembles the reduced operators in
//! [`rom::ReducedOperators::assemble`]. The online stage integrates the
//! reduced coefficients with [`rom::run_rom`].

pub mod bench;
pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod fom;
pub mod fv;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod pod;
pub mod rom;

pub use error::{Error, Result};
pub use field::Field;
pub use mesh::{Bounds, Mesh};
