//! Multiscale network analysis of mountaineering expedition records.
//!
//! Climbers are projected onto a six-feature co-occurrence graph per expedition;
//! expeditions are nodes of a five-layer similarity multiplex, which is correlated
//! with summit success, aggregated and partitioned into communities. Numerical
//! kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

// `!(x > y)` is used deliberately so NaN lands on the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bipartite;
pub mod centrality;
pub mod community;
pub mod error;
pub mod graphdist;
pub mod matrix;
pub mod multiplex;
pub mod num;
pub mod partners;
pub mod pipeline;
pub mod records;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use num::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type FeatureGraph = bipartite::IntraExpeditionGraph<f64>;
pub type Centrality = centrality::CentralityVector<f64>;
pub type Distances = graphdist::DistanceMatrix<f64>;
pub type Multiplex = multiplex::MultiplexGraph<f64>;
pub type Similarity = multiplex::SimilarityGraph<f64>;
pub type Regression = stats::RegressionProjection<f64>;
pub type Correlations = stats::CorrelationReport<f64>;
pub type CommunityPartition = community::Partition<f64>;
