//! Hybrid high-order (HHO) discretizations of the biharmonic problem
//! `Δ²u = f` on polygonal meshes of the unit square.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! threaded executor live in the `hho` companion crate.
//!
//! Pipeline: [`mesh`] → [`quadrature`] / [`polyspace`] → [`localops`] →
//! [`assembly`] (static condensation) → [`solve`] → [`post`] →
//! [`convergence`].
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod convergence;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod localops;
pub mod manufactured;
pub mod mesh;
pub mod polyspace;
pub mod post;
pub mod quadrature;
pub mod solve;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::{Mesh, Point};
