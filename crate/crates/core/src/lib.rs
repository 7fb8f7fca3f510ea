#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod barrier;
pub mod doubleslit;
pub mod error;
pub mod numerics;
pub mod planewave;
pub mod subprocess;
pub mod timing;
#[cfg(feature = "std")]
pub mod validation;
pub mod wavepacket;
#[cfg(test)]
mod testutil;
#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use num_complex::Complex64;
