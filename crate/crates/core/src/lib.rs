//! Periodic nonlocal (fractional) perimeter of cylindrically symmetric,
//! periodic sets.
//!
//! The slab `S = [-1/2, 1/2] × R^{n-1}` is one period of the horizontal
//! lattice. Competitors are sets of revolution `{|x'| <= f(x1)}` with `f`
//! even and nonincreasing on `[0, 1/2]`. The crate evaluates the periodic
//! functional `P_S`, the free fractional perimeter `Per_s`, their
//! decomposition and the boundary interaction term, minimizes `P_S` under a
//! volume constraint, and runs the numerical experiments in [`analysis`].

pub mod analysis;
pub mod cli;
pub mod energy;
mod error;
pub mod io;
pub mod kernel;
pub mod minimize;
pub mod quad;
pub mod shapes;
pub mod special;

pub use error::{Error, Result};
