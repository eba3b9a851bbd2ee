//! Weakly-supervised instance discovery and max-instance classifier training.
//!
//! The pipeline has two halves:
//!
//! 1. **Discovery.** Instances of positive bags are linked to their nearest
//!    neighbors from other bags ([`graph`]). A truncated, concave covering
//!    objective over that graph is maximized greedily ([`cover`]) and the
//!    selected nodes, together with the boxes they cover, become an initial
//!    positive training set.
//! 2. **Refinement.** A linear max-instance classifier is trained either as a
//!    latent SVM with alternating imputation ([`lsvm`]) or as a smoothed latent
//!    SVM whose inner maximum is replaced by a strongly-concave regularized
//!    maximum over the simplex ([`smooth`]), minimized with L-BFGS ([`optim`]).
//!
//! [`eval`] provides bag-level accuracy and the cross-validation harness and
//! [`cli`] wires everything into the `covertrain` binary.
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cover;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod loss;
pub mod lsvm;
pub mod optim;
pub mod pipeline;
pub mod smooth;

pub use error::{Error, ErrorKind, Result};
