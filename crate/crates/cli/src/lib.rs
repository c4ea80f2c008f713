//! Configuration, file formats, the stage pipeline and the acceptance suite
//! behind the `kinrep` binary.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod suite;
