use super::config::RefineConfig;
use super::params::RefineParams;
use crate::{AttentionError, Result};
use foa_tensor::{
    concat_channels, conv3d_backward, conv3d_forward, leaky_relu, leaky_relu_backward, relu,
    relu_backward, split_channels_backward, ClipTensor, KernelGradients, Real,
};

pub struct RefineCache<T: Real> {
    layer_inputs: Vec<ClipTensor<T>>,
    preacts: Vec<ClipTensor<T>>,
    frame_channels: usize,
}

pub struct RefineGrads<T: Real> {
    pub convs: Vec<KernelGradients<T>>,
}

/// Refinement pass: the rough map is stacked with the clip's last frame and
/// sharpened by 2-D convolutions, LeakyReLU activations between layers and a
/// final ReLU on the single-channel output.
pub fn refine_forward<T: Real>(
    cfg: &RefineConfig,
    params: &RefineParams<T>,
    coarse_map: &ClipTensor<T>,
    last_frame: &ClipTensor<T>,
) -> Result<(ClipTensor<T>, RefineCache<T>)> {
    if coarse_map.shape().0 != 1 || last_frame.shape().0 != 1 {
        return Err(AttentionError::InvalidInput {
            context: "refine_forward",
            detail: "refinement operates on single frames".into(),
        });
    }
    let frame_channels = last_frame.channels();
    let mut current = concat_channels(last_frame, coarse_map)?;
    let mut layer_inputs = Vec::with_capacity(params.convs.len());
    let mut preacts = Vec::with_capacity(params.convs.len());
    let last = params.convs.len() - 1;
    for (i, kernel) in params.convs.iter().enumerate() {
        let pre = conv3d_forward(&current, kernel)?;
        let post = if i == last {
            relu(&pre)
        } else {
            leaky_relu(&pre, cfg.leaky_alpha)
        };
        layer_inputs.push(current);
        preacts.push(pre);
        current = post;
    }
    Ok((
        current,
        RefineCache {
            layer_inputs,
            preacts,
            frame_channels,
        },
    ))
}

/// Backward pass; returns parameter gradients plus the gradient flowing into
/// the coarse map (the frame is data and its gradient is discarded).
pub fn refine_backward<T: Real>(
    cfg: &RefineConfig,
    params: &RefineParams<T>,
    cache: &RefineCache<T>,
    upstream: &ClipTensor<T>,
) -> Result<(RefineGrads<T>, ClipTensor<T>)> {
    let last = params.convs.len() - 1;
    let mut d_post = upstream.clone();
    let mut conv_grads: Vec<Option<KernelGradients<T>>> =
        (0..params.convs.len()).map(|_| None).collect();
    for i in (0..params.convs.len()).rev() {
        let d_pre = if i == last {
            relu_backward(&cache.preacts[i], &d_post)?
        } else {
            leaky_relu_backward(&cache.preacts[i], &d_post, cfg.leaky_alpha)?
        };
        let (grads, d_input) = conv3d_backward(&cache.layer_inputs[i], &params.convs[i], &d_pre)?;
        conv_grads[i] = Some(grads);
        d_post = d_input;
    }
    let (_d_frame, d_coarse) = split_channels_backward(&d_post, cache.frame_channels)?;
    Ok((
        RefineGrads {
            convs: conv_grads.into_iter().map(|g| g.expect("filled")).collect(),
        },
        d_coarse,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use foa_tensor::{Conv3dKernel, Padding};

    /// A head wired to pass the coarse channel straight through.
    fn passthrough_params(frame_channels: usize) -> (RefineConfig, RefineParams<f64>) {
        let cfg = RefineConfig {
            widths: vec![1],
            leaky_alpha: 1e-3,
        };
        let in_ch = frame_channels + 1;
        let mut weights = vec![0.0; in_ch * 9];
        // Center tap of the coarse channel (last input channel).
        let kernel_center = ((in_ch - 1) * 3 + 1) * 3 + 1;
        weights[kernel_center] = 2.5;
        let kernel =
            Conv3dKernel::new(1, in_ch, (3, 3, 1), Padding::ZeroSame, weights, vec![0.0]).unwrap();
        (cfg, RefineParams { convs: vec![kernel] })
    }

    #[test]
    fn passthrough_head_scales_coarse_map() {
        let (cfg, params) = passthrough_params(2);
        let coarse = ClipTensor::new(
            (1, 4, 4, 1),
            (0..16).map(|v| v as f64 * 0.1).collect(),
        )
        .unwrap();
        let frame = ClipTensor::full((1, 4, 4, 2), 0.7);
        let (out, _) = refine_forward(&cfg, &params, &coarse, &frame).unwrap();
        for (o, c) in out.data().iter().zip(coarse.data().iter()) {
            assert!((o - 2.5 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn all_negative_final_preactivation_yields_zero_map() {
        let (cfg, mut params) = passthrough_params(1);
        params.convs[0].bias_mut()[0] = -10.0;
        let coarse = ClipTensor::full((1, 4, 4, 1), 0.2);
        let frame = ClipTensor::full((1, 4, 4, 1), 0.2);
        let (out, _) = refine_forward(&cfg, &params, &coarse, &frame).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let (cfg, params) = passthrough_params(1);
        let coarse = ClipTensor::<f64>::zeros((1, 4, 4, 1));
        let frame = ClipTensor::<f64>::zeros((1, 5, 4, 1));
        assert!(refine_forward(&cfg, &params, &coarse, &frame).is_err());
    }
}
