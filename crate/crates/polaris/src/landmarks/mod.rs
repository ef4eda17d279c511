//! Landmark candidate extraction from covariance gridmaps.
//!
//! Point candidates come from a CFAR-style detector that thresholds the
//! Wishart dissimilarity between each cell and its annular neighborhood
//! average, so scattering-mechanism anomalies are found even at equal
//! reflection power. Line candidates are extracted from the power map
//! alone via median filtering, Hessian ridge detection, skeletonization,
//! and a Hough segment search.

mod pcfar;
mod ridge;

pub use pcfar::{pcfar_detect, PcfarParams, PointCandidate};
pub use ridge::{ridge_lines, LineCandidate, RidgeParams};
