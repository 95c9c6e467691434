use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("need at least {needed} correspondences, got {got}")]
    TooFewCorrespondences { needed: usize, got: usize },

    #[error("point maps to infinity under the homography")]
    PointAtInfinity,

    #[error("ransac found no consensus: best sample explains {best_inliers} of {total} points")]
    RansacFailure { best_inliers: usize, total: usize },

    #[error("singular matrix: {0}")]
    Singular(String),
}
