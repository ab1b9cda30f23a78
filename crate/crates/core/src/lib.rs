//! Fully-inductive node classification over closed-form linear graph models.
//!
//! A graph is turned into a small set of *channels*: feature matrices
//! propagated by fixed operators (identity, low-pass `Ā^k`, high-pass
//! `(I - Ā)^k`, Chebyshev terms, personalized PageRank). Each channel is
//! solved in closed form with a minimum-norm least-squares fit on the labeled
//! nodes, giving one probability matrix per channel. Per node, the pairwise
//! distances between channel predictions are turned into entropy-normalized
//! similarity features, and a small MLP maps them to attention weights that
//! fuse the channel predictions.
//!
//! Only the MLP is trained, and it only ever sees `t(t-1)` features and `t`
//! attention logits, so a model trained on one graph applies unchanged to any
//! graph with a different feature dimension or number of classes.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, caching and the
//! command line live in the `gfuse` crate.
#![no_std]
#![forbid(unsafe_code)]

#[cfg(test)]
#[macro_use]
extern crate std;
extern crate alloc;

pub mod attention;
pub mod conv;
pub mod digest;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
mod math;
pub mod matrix;
pub mod model_codec;
pub mod solver;
pub mod synth;
pub mod trainer;

pub use crate::attention::{AttentionModel, MlpParams};
pub use crate::conv::{ChannelKind, ChannelSpec, FeatureCache, PropagationConfig};
pub use crate::error::{Error, Result};
pub use crate::features::SimilarityFeatures;
pub use crate::graph::{DatasetMeta, GraphDataset, SparseAdjacency, Split, Splits};
pub use crate::matrix::Matrix;
pub use crate::solver::{ChannelPrediction, SolveConfig};
pub use crate::trainer::{Metrics, TrainConfig};
