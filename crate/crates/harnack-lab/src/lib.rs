//! A finite-difference laboratory for sharp Harnack constants, strong
//! maximum principles and Landis-type decay bounds for elliptic
//! operators with unbounded lower-order coefficients.
//!
//! The crate solves divergence-form, non-divergence-form and Pucci
//! extremal Dirichlet problems on 1D intervals and 2D boxes, disks and
//! annuli, and measures the quantitative objects attached to them:
//! aggregate coefficient sizes in uniformly local norms, Harnack
//! sup/inf ratios against the e^(C0 A R) law, chain-cover geometry,
//! dead-core profiles and M_delta decay traces, and exponential decay
//! rates of positive solutions on exterior domains.

pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod harnack;
pub mod landis;
pub mod operators;
pub mod report;
pub mod rng;
pub mod runner;
pub mod smp;
pub mod solver;

pub use error::{Error, Result};
