//! Oblivious lp subspace embeddings built from hashed sign matrices composed
//! with reciprocal-exponential rescaling, plus the machinery that turns them
//! into working lp solvers: well-conditioning (QR and minimum-volume
//! ellipsoid), leverage-score row sampling, sketch-and-solve lp regression
//! for 1 <= p < 2 and p > 2, and a simulated multi-machine protocol with
//! exact communication accounting.
//!
//! Entry points worth knowing:
//! - [`sketch::build_sketch`] / [`sketch::apply_sketch`] build and apply an
//!   embedding operator to a sparse matrix in one pass.
//! - [`regression::lp_regress_low`] / [`regression::lp_regress_high`] run the
//!   full sketch, condition, sample, solve pipelines.
//! - [`distributed::dist_regress_low`] / [`distributed::dist_regress_high`]
//!   run the same pipelines across k simulated machines and record every
//!   message in a [`distributed::CommLedger`].
//!
//! The `examples/` directory has one runnable example per capability; start
//! with `cargo run --example embed_distortion`.

pub mod conditioning;
pub mod distributed;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod randsource;
pub mod regression;
pub mod sampling;
pub mod sketch;
pub mod stats;

pub use error::{Error, Result};
