//! Minimal dense-tensor numerics with reverse-mode differentiation.
//!
//! The layer set is exactly what a coarse/refine 3D-convolutional attention
//! model needs: 3D convolution, 3D max-pooling, bilinear upsampling,
//! ReLU/LeakyReLU, channel concatenation and a KL-divergence loss, plus an
//! Adam optimizer and a flat binary tensor format.
//!
//! All operations are pure functions over immutable inputs. Values are stored
//! in the element type `T` (`f32` in production, `f64` for finite-difference
//! verification) while every reduction accumulates in `f64`.

mod activation;
mod concat;
mod conv;
mod error;
mod io;
mod loss;
mod optim;
mod pool;
mod real;
mod resample;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_backward, relu, relu_backward};
pub use concat::{concat_channels, split_channels_backward};
pub use conv::{conv3d_backward, conv3d_forward, Conv3dKernel, KernelGradients, Padding};
pub use error::TensorError;
pub use io::{read_tensor, write_tensor};
pub use loss::kl_loss;
pub use optim::{Adam, AdamState};
pub use pool::{maxpool3d, maxpool3d_backward, maxpool3d_with_argmax};
pub use real::Real;
pub use resample::{bilinear_upsample, bilinear_upsample_backward};
pub use tensor::ClipTensor;

/// Crate-wide result type.
pub type Result<V> = std::result::Result<V, TensorError>;
