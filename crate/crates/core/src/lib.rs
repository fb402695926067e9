//! Meta-quantum ensemble for binary intrusion detection.
//!
//! Two quantum learners are simulated exactly on a dense statevector:
//! a fidelity-kernel SVM ([`qsvm`]) and a variational classifier built from
//! strongly entangling layers ([`qnn`]). Their per-sample outputs are turned
//! into two-column meta-feature tables ([`fusion`]) and fused by a
//! random-forest meta-learner ([`forest`]). [`prep`] covers the tabular
//! preprocessing, [`metrics`] the evaluation suite, and [`pipeline`] wires the
//! stages together with out-of-fold stacking and noise injection.
//!
//! The crate is `no_std` (with `alloc`). Enable `parallel` to spread kernel
//! entries, trajectories, batch gradients and trees over a rayon pool, and
//! `serde` to derive serialization for the model types.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod forest;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod prep;
pub mod qnn;
pub mod qsim;
pub mod qsvm;
pub mod rng;

mod par;

pub use error::{Error, Result};
pub use linalg::Matrix;
