//! InfoMin-Max automated graph contrastive learning.
//!
//! The crate is organized around five subsystems:
//!
//! - [`tensor`]: dense 2-D reverse-mode autodiff, optimizers, initializers;
//! - [`graphdata`]: graph types, TUDataset/edge-list ingestion, synthetic
//!   generators, adjacency normalization, batching and splits;
//! - [`viewgen`]: the adversarially trained importance-graph generator and
//!   the stochastic view sampler;
//! - [`contrast`]: the InfoNCE view-comparison encoders for node- and
//!   graph-level representation learning;
//! - [`eval`]: downstream classifiers, cross-validated evaluation, ablation
//!   variants and the sampling-rate sensitivity sweep.

pub mod checkpoint;
pub mod contrast;
pub mod error;
pub mod eval;
pub mod graphdata;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod viewgen;

pub use error::{Error, Result};
pub use graphdata::{FeatureMode, Graph, GraphDataset, Task};
pub use tensor::{Tape, Tensor, Var};
