//! Core numerics for rank-based Brownian particle systems ("Atlas" models).
//!
//! The crate is `no_std` with `alloc`. It contains:
//!
//! - [`model`]: particle configurations, spacings and initial-law samplers;
//! - [`dynamics`]: rank-frozen Euler–Maruyama stepping with rank maintenance;
//! - [`measure`]: rescaled empirical measures, quantiles, density histograms
//!   and a computable surrogate of the locally-finite weak metric;
//! - [`stefan`]: the closed-form one-sided Stefan solution and its front
//!   coefficient, plus the monotone boundary iteration;
//! - [`fd`]: an independent front-fixing finite-difference Stefan solver;
//! - [`stats`]: Kolmogorov–Smirnov and tail-probability helpers.
//!
//! Particle names are zero-based indices; rank 0 is the leftmost particle.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod fd;
pub mod measure;
pub mod model;
pub mod rng;
pub mod special;
pub mod stats;
pub mod stefan;

pub use error::{Error, Result};
