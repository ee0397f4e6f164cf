//! Low-rank double-Hankel models for spectral compressed sensing.
//!
//! The crate is `no_std` with `alloc`; the `std` feature (on by default) only
//! switches the linear-algebra and RNG backends to their `std` builds.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod diag;
pub mod error;
pub mod hankel;
pub mod linalg;
pub mod math;
pub mod model;
pub mod retrieve;
pub mod signal;
pub mod solve;

pub use error::{Error, Result};
pub use hankel::{LevelShape, Model};
pub use model::{SampleSet, SpectralParams};
pub use signal::{nmse, Signal};
