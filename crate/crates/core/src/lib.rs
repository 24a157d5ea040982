//! Attention as a nonlinear Markov transport on empirical measures.
//!
//! The crate is organised around the pieces of that model:
//!
//! * [`measures`]: point clouds, empirical measures, the barycentric projection.
//! * [`potentials`]: interaction potentials `G(x, y) = exp(a(x, y))` and their
//!   regularity constants.
//! * [`kernels`]: softmatch, lookup, attention, multi-head and Transformer kernels,
//!   plus the textbook matrix-form attention used as an oracle.
//! * [`transport`]: exact 1-Wasserstein distances (ℓ1 ground metric) via
//!   integer min-cost flow, an assignment fast path and small brute-force oracles.
//! * [`bounds`]: closed-form contraction bounds with per-ingredient provenance.
//! * [`probes`]: randomized checks that sampled contraction ratios stay under
//!   those bounds, plus numerical checks of the supporting lemmas.
//! * [`dynamics`]: particle trajectories, deep-equilibrium fixed points and
//!   residual-block inversion.
//!
//! Everything here is pure computation on `alloc`; the crate builds with
//! `--no-default-features` for `no_std` targets. File formats and the CLI live
//! in the companion `wattn` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bounds;
pub mod dynamics;
mod error;
pub mod kernels;
pub mod linalg;
mod math;
pub mod measures;
pub mod potentials;
pub mod probes;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use measures::{DomainBox, EmpiricalMeasure, PointCloud};
