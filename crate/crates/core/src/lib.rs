//! Outlier removal for finite metric spaces.
//!
//! Given a distance matrix, find a small set of points whose removal leaves
//! an ultrametric, a tree metric, or a subset of `R^d`, and build the
//! embedding of what remains. Every removal comes with a certificate that
//! can be re-checked against the input.

pub mod bicriteria;
#[cfg(feature = "cli")]
pub mod cli;
mod combin;
pub mod euclidean;
pub mod instances;
pub mod io;
pub mod metric;
pub mod oracle;
pub mod outliers;
pub mod tree;
pub mod tree_outliers;
pub mod ultrametric;
mod unionfind;

pub use metric::{DistanceMatrix, ToleranceConfig};
pub use outliers::{OutlierResult, Witness};
pub use tree::WeightedTree;
