//! Projective geometry for gaze registration: homography estimation (DLT and
//! RANSAC) and the error analysis of homographic projection for points that
//! do not lie on the inducing plane, including world-space error formulas,
//! their bounds, and a Monte-Carlo verification suite.

mod dlt;
mod error;
mod homography;
mod ransac;
mod scene;
mod suite;

pub use dlt::estimate_homography_dlt;
pub use error::GeometryError;
pub use homography::Homography;
pub use ransac::{ransac_homography, RansacOutcome, RansacParams};
pub use scene::{
    check_bound_observation1, metric_error_camera_frame, metric_error_plane_frame,
    projection_error_bound, ray_plane_oracle, BoundDiagnostics, CameraScene, ObservationCheck,
};
pub use suite::{monte_carlo_bound_suite, BoundSuiteReport, SceneSampler};

pub type Result<V> = std::result::Result<V, GeometryError>;
