//! Command-line front end, file formats and threaded execution for
//! [`hho_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod mesh_io;
pub mod report;

pub use error::{HhoError, Result};
