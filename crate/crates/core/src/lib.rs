//! Experiment-constrained D-optimal design.
//!
//! Given a factor space with levels and linear side constraints, a monomial
//! model and a budget `k`, the crate computes integer designs by
//! pricing-based local search and bounds their quality through a
//! column-generation solve of the continuous relaxation with dual
//! certificates.
//!
//! Modules:
//! - [`model`]: experiment spaces, monomial models, instance generators.
//! - [`linalg`]: PSD kernel (log-det, rank-one updates, pricing matrices).
//! - [`pricing`]: the pricing problem `max p(x)ᵀ G p(x)` over allowable experiments.
//! - [`local_search`]: exchange-based local search with certification.
//! - [`relaxation`]: column generation, dual certificates, sparsification.
//! - [`bench`]: brute-force oracles and instance suites.
//! - [`cli`]: the `dopt` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bench;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod local_search;
pub mod model;
pub mod pricing;
pub mod relaxation;

pub use error::{Error, Result};
