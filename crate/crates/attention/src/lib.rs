//! Driver focus-of-attention laboratory.
//!
//! Builds ground-truth fixation maps from projected gaze, trains and runs the
//! multi-branch coarse/refine 3D-convolutional attention model at desk scale,
//! evaluates with the CC / KL / information-gain metric suite, reproduces the
//! padded-convolution central-bias experiment, and renders foveated frames.

pub mod bias;
mod error;
pub mod fixmap;
pub mod foveation;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod resize;
pub mod shift;
pub mod synth;

pub use error::AttentionError;
pub use fixmap::FixationMap;

pub type Result<V> = std::result::Result<V, AttentionError>;
