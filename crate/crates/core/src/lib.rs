//! Desk-scale laboratory for covering-family constructions and secret-message
//! experiments on a toy resource-bounded complexity oracle.
//!
//! The crate is `no_std` with `alloc`. Everything here is pure computation:
//! file formats, the command line and parallel campaign drivers live in the
//! `muchnik-lab` companion crate.
//!
//! Module map:
//!
//! * [`bits`]: bit strings, extensional function tables and families.
//! * [`bounds`]: log2-domain failure bounds for both lemmas and parameter scans.
//! * [`covering`]: random covering families and worst-case half-subfamily checks.
//! * [`rejection`]: rejection / covering predicates over `A -> B` families.
//! * [`oracle`]: the reference toy machine and exhaustive program search.
//! * [`messaging`]: fresh-pair filter, XOR messages and secrecy measurements.
//! * [`negative`]: the label-indexed family and eavesdropper pipeline.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bits;
pub mod bitset;
pub mod bounds;
pub mod covering;
pub mod ddouble;
pub mod messaging;
pub mod negative;
pub mod oracle;
pub mod ratio;
pub mod rejection;
pub mod rng;

pub use bits::{BitString, Family, FunctionTable, UniverseError};
pub use ddouble::DoubleDouble;
pub use ratio::Rational;
