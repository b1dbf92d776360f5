//! Brownian coagulation on the circle.
//!
//! This crate holds the algorithmic core of the simulator and is `no_std`
//! (it needs `alloc`). It covers
//!
//! * [`kernels`]: coagulation rate `Φ`, diffusivity `a`, the derived rate
//!   `κ = Φ·(a + a')`, the dominating functions `ω`, `ϖ`, and a grid-based
//!   validator for the standing assumptions on them;
//! * [`particle`]: the `N`-particle system of circle Brownian motions that
//!   coagulate at a rate `Φ/N` per unit of intersection local time;
//! * [`local_time`]: expected local time of a Brownian bridge, used as the
//!   per-step hazard of a pair;
//! * [`measures`]: empirical and gridded measures on `𝕋 × ℝ₊` and the weak
//!   distance used to compare them;
//! * [`massflow`]: the deterministic mass-flow equation (heat/coagulation
//!   splitting) and the truncated Picard scheme for its homogeneous
//!   reduction.
//!
//! IO, configuration and the CLI live in the `smolcircle` crate.

#![no_std]

extern crate alloc;

mod error;
mod fft;
pub mod kernels;
pub mod local_time;
pub mod massflow;
pub mod measures;
pub mod particle;
pub mod quadrature;
pub mod special;
pub mod streams;

pub use error::{Error, Result};
