use crate::{ClipTensor, Real, Result, TensorError};

/// Element-wise max(0, x).
pub fn relu<T: Real>(input: &ClipTensor<T>) -> ClipTensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of [`relu`]; the kink at zero routes no gradient.
pub fn relu_backward<T: Real>(
    input: &ClipTensor<T>,
    upstream: &ClipTensor<T>,
) -> Result<ClipTensor<T>> {
    mask_backward(input, upstream, T::zero(), "relu_backward")
}

/// Element-wise LeakyReLU with negative slope `alpha`.
pub fn leaky_relu<T: Real>(input: &ClipTensor<T>, alpha: f64) -> ClipTensor<T> {
    let a = T::from_f64(alpha);
    input.map(|v| if v > T::zero() { v } else { v * a })
}

/// Gradient of [`leaky_relu`].
pub fn leaky_relu_backward<T: Real>(
    input: &ClipTensor<T>,
    upstream: &ClipTensor<T>,
    alpha: f64,
) -> Result<ClipTensor<T>> {
    mask_backward(input, upstream, T::from_f64(alpha), "leaky_relu_backward")
}

fn mask_backward<T: Real>(
    input: &ClipTensor<T>,
    upstream: &ClipTensor<T>,
    negative_slope: T,
    context: &'static str,
) -> Result<ClipTensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(TensorError::ShapeMismatch {
            context,
            expected: format!("{:?}", input.shape()),
            got: format!("{:?}", upstream.shape()),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data().iter())
        .map(|(&x, &u)| if x > T::zero() { u } else { u * negative_slope })
        .collect();
    ClipTensor::new(input.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let input = ClipTensor::new((1, 1, 1, 4), vec![-1.0f32, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(relu(&input).data(), &[0.0, 0.0, 0.5, 2.0]);
    }

    #[test]
    fn leaky_relu_scales_negatives() {
        let input = ClipTensor::new((1, 1, 1, 2), vec![-2.0f64, 3.0]).unwrap();
        let out = leaky_relu(&input, 1e-3);
        assert_eq!(out.data(), &[-2e-3, 3.0]);
    }

    #[test]
    fn backward_masks_by_input_sign() {
        let input = ClipTensor::new((1, 1, 1, 3), vec![-1.0f64, 0.0, 1.0]).unwrap();
        let up = ClipTensor::full((1, 1, 1, 3), 2.0f64);
        let din = leaky_relu_backward(&input, &up, 0.25).unwrap();
        assert_eq!(din.data(), &[0.5, 0.5, 2.0]);
    }
}
