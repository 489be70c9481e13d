//! Sampling and verification for multi-draft speculative decoding.
//!
//! The crate covers the token-level layer only: given a target distribution
//! `p` and a draft distribution `q`, how drafts are sampled, how one of them
//! is accepted, and how often that happens.
//!
//! - [`simplex`]: distributions, temperature softmax, residuals.
//! - [`draftjoint`]: joint draft designs (independent, without replacement, hub-sparse).
//! - [`verify`]: single-draft, recursive rejection sampling (with and without
//!   replacement) and SpecHub, their closed-form rates, and an exact
//!   enumeration oracle.
//! - [`coupling`]: the optimal two-draft acceptance plan via maximum flow,
//!   full coupling reconstruction and membership cost.
//! - [`treesim`]: token-tree decoding simulation.
//! - [`synthlab`]: synthetic distribution pairs and the acceptance-rate experiments.
//! - [`cli`]: command implementations behind the `spechub` binary.

pub mod error;
pub mod sampling;
pub mod simplex;
pub mod draftjoint;
pub mod verify;
pub mod coupling;
pub mod synthlab;
pub mod treesim;
pub mod cli;

pub use error::{Error, Result};
pub use simplex::{Distribution, Logits, Token};
