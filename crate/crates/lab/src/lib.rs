//! Command line, file formats, oracle cache and parallel campaigns for
//! `muchnik-core`.

pub mod campaign;
pub mod cli;
pub mod formats;
pub mod manifest;
pub mod oracle_io;
