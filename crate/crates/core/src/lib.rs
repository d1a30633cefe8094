//! Decompose-cluster-map.
//!
//! Textual features (keywords, n-grams, skip-grams, bags of words) are counted
//! per day, correlated against a daily event series, and then merged: the
//! feature/day matrix is factored with a thin SVD, the feature representations
//! are clustered with multi-restart k-means, and the raw daily counts of every
//! cluster member are summed into the cluster medoid. The merged medoid series
//! usually correlate with the events far better than any single member.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`ingest`]: tweet and event-series loading, day bucketing
//! - [`text`]: cleaning, lemmatization, Lancaster stemming, feature extraction
//! - [`matrix`]: the sparse feature/day count matrix and top-K selection
//! - [`correlation`]: Pearson, Spearman, Kendall tau-b, distance correlation, MI
//! - [`factorization`]: thin SVD via a Jacobi eigensolver on the Gram matrix
//! - [`clustering`]: Lloyd k-means, medoid lookup, merge and re-correlation
//! - [`pipeline`]: configuration, checkpoints, reports, synthetic corpora

pub mod clustering;
pub mod correlation;
pub mod error;
pub mod factorization;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod pipeline;
pub mod text;

pub use error::{Error, Result};
