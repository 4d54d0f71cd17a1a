//! Cooperative perception error models for desk-scale driving simulation.
//!
//! A perception error model (PEM) replaces a vehicle's sensing and
//! perception stack with a statistical surrogate: per object, a detection
//! draw and a position error sampled from a condition-dependent Gaussian.
//! A coPEM combines the ego's PEM with those of roadside or other units,
//! fuses their outputs and optionally delays the result.

// Range checks are written `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod experiment;
pub mod export;
pub mod fusion;
pub mod geometry;
pub mod linalg;
pub mod pem;
pub mod policy;
pub mod rng;
pub mod scenario;
