//! Step-selection analysis toolkit.
//!
//! Fits step-selection functions under a shared conditional-logit likelihood
//! with three model families — a Newton-Raphson conditional-logistic GLM, a
//! ridge-penalized B-spline conditional logit, and a from-scratch feed-forward
//! network with optional categorical embeddings — and extracts interpretable
//! effects from any of them via average conditional effects, permutation
//! importance, accumulated local effects, and embedding bi-plots.
//!
//! The crate also ships a simulation kit for generating synthetic strata
//! datasets (including trajectory-based social simulations) and a benchmark
//! harness that runs five canned experiments with calibration metrics.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod modelfile;
pub mod net;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod xai;

mod linalg;

pub use data::{StepRecord, StrataDataset, ValidationReport};
