//! Oblique decision trees grown by reflecting node data with Householder
//! matrices built from class covariance eigenvectors, so that cheap
//! axis-parallel sweeps in the reflected space find oblique splits in the
//! original one. Includes Twoing-impurity split search, CRIMCOORD handling
//! of qualitative features, cost-complexity pruning against a holdout, and
//! a cross-validation benchmark harness.
//!
//! Two search variants exist: `A` reflects along every eigenvector of every
//! class's covariance matrix, `D` along each class's dominant eigenvector
//! only. `AxisParallel` disables reflections and serves as the baseline.
//!
//! The `parallel` feature (default) runs split candidates and
//! cross-validation folds on rayon; the sequential build produces identical
//! output.

// indexed loops are the house style in the dense numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod crimcoord;
pub mod data;
pub mod eval;
mod exec;
pub mod linalg;
pub mod prune;
pub mod splitter;
pub mod tree;

pub use data::{DataPartition, Dataset, FeatureKind, FeatureSchema, FeatureValue};
pub use eval::{cross_validate, scaling_probe, train_test, EvalConfig, EvalReport};
pub use prune::{prune_sequence, select_subtree, PruneSequence};
pub use splitter::{find_best_split, SplitterParams, Variant};
pub use tree::{grow, GrowParams, Tree};
