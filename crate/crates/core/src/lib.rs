//! Discrete and hybrid kinetic Monte Carlo samplers.
//!
//! The crate covers persistent (Zig-Zag) walks on `Z` and `Z^d`, the
//! continuous-time Zig-Zag process simulated by thinning, a split
//! drift/jump/diffusion integrator for periodic Lennard-Jones systems, and
//! the statistics used to validate all of them.

pub mod continuous_zz;
pub mod error;
pub mod hybrid;
pub mod potentials;
pub mod rng;
pub mod stats;
pub mod thinning;
pub mod zigzag1d;
pub mod zigzagd;

pub use error::{Error, Result};
