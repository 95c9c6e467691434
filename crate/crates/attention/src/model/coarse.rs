use super::config::CoarseConfig;
use super::params::CoarseParams;
use crate::{AttentionError, Result};
use foa_tensor::{
    bilinear_upsample, bilinear_upsample_backward, conv3d_backward, conv3d_forward,
    maxpool3d_backward, maxpool3d_with_argmax, relu, relu_backward, ClipTensor, KernelGradients,
    Real,
};

/// Every intermediate needed to run the encoder backward.
pub struct CoarseCache<T: Real> {
    stage_inputs: Vec<ClipTensor<T>>,
    conv_outs: Vec<ClipTensor<T>>,
    pool_inputs: Vec<ClipTensor<T>>,
    argmaxes: Vec<Vec<usize>>,
    pooled: ClipTensor<T>,
    upsampled: ClipTensor<T>,
    head_out: ClipTensor<T>,
}

pub struct CoarseGrads<T: Real> {
    pub convs: Vec<KernelGradients<T>>,
    pub head: KernelGradients<T>,
}

/// Encoder pass: conv/ReLU/pool stages collapse the temporal axis entirely,
/// bilinear upsampling restores the input resolution, and the 2-D head
/// produces a non-negative single-channel rough attention map.
pub fn coarse_forward<T: Real>(
    cfg: &CoarseConfig,
    params: &CoarseParams<T>,
    clip: &ClipTensor<T>,
) -> Result<(ClipTensor<T>, CoarseCache<T>)> {
    let (t, h, w, c) = clip.shape();
    if t != cfg.frames || h != cfg.input_size || w != cfg.input_size || c != cfg.in_channels {
        return Err(AttentionError::ShapeMismatch {
            context: "coarse_forward",
            expected: format!(
                "({}, {}, {}, {})",
                cfg.frames, cfg.input_size, cfg.input_size, cfg.in_channels
            ),
            got: format!("{:?}", clip.shape()),
        });
    }

    let mut stage_inputs = Vec::with_capacity(params.convs.len());
    let mut conv_outs = Vec::with_capacity(params.convs.len());
    let mut pool_inputs = Vec::with_capacity(params.convs.len());
    let mut argmaxes = Vec::with_capacity(params.convs.len());
    let mut current = clip.clone();
    for (kernel, &(pt, ps)) in params.convs.iter().zip(cfg.pools.iter()) {
        let conv_out = conv3d_forward(&current, kernel)?;
        let activated = relu(&conv_out);
        let (pooled, argmax) = maxpool3d_with_argmax(&activated, (pt, ps, ps))?;
        stage_inputs.push(current);
        conv_outs.push(conv_out);
        pool_inputs.push(activated);
        argmaxes.push(argmax);
        current = pooled;
    }
    if current.frames() != 1 {
        return Err(AttentionError::InvalidInput {
            context: "coarse_forward",
            detail: format!(
                "temporal axis not collapsed: {} frames remain after pooling",
                current.frames()
            ),
        });
    }

    let upsampled = bilinear_upsample(&current, (cfg.input_size, cfg.input_size))?;
    let head_out = conv3d_forward(&upsampled, &params.head)?;
    let output = relu(&head_out);
    Ok((
        output,
        CoarseCache {
            stage_inputs,
            conv_outs,
            pool_inputs,
            argmaxes,
            pooled: current,
            upsampled,
            head_out,
        },
    ))
}

/// Backward pass; `upstream` is the gradient on the encoder's output map.
/// Returns parameter gradients (the clip gradient is not needed: clips are
/// data, and the refinement head backpropagates into the coarse map, not
/// into the encoder input).
pub fn coarse_backward<T: Real>(
    params: &CoarseParams<T>,
    cache: &CoarseCache<T>,
    upstream: &ClipTensor<T>,
) -> Result<CoarseGrads<T>> {
    let d_head_out = relu_backward(&cache.head_out, upstream)?;
    let (head_grads, d_upsampled) = conv3d_backward(&cache.upsampled, &params.head, &d_head_out)?;
    let mut d_current = bilinear_upsample_backward(cache.pooled.shape(), &d_upsampled)?;

    let mut conv_grads: Vec<Option<KernelGradients<T>>> = (0..params.convs.len()).map(|_| None).collect();
    for i in (0..params.convs.len()).rev() {
        let d_activated =
            maxpool3d_backward(cache.pool_inputs[i].shape(), &cache.argmaxes[i], &d_current)?;
        let d_conv_out = relu_backward(&cache.conv_outs[i], &d_activated)?;
        let (grads, d_input) =
            conv3d_backward(&cache.stage_inputs[i], &params.convs[i], &d_conv_out)?;
        conv_grads[i] = Some(grads);
        d_current = d_input;
    }
    Ok(CoarseGrads {
        convs: conv_grads.into_iter().map(|g| g.expect("filled")).collect(),
        head: head_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::BranchParams;
    use crate::model::config::{BranchConfig, BranchDomain, RefineConfig};

    fn tiny_cfg() -> CoarseConfig {
        CoarseConfig {
            frames: 4,
            input_size: 8,
            in_channels: 2,
            widths: vec![3, 4],
            pools: vec![(2, 2), (2, 2)],
        }
    }

    fn tiny_params(seed: u64) -> CoarseParams<f64> {
        let cfg = BranchConfig {
            domain: BranchDomain::Rgb,
            coarse: tiny_cfg(),
            refine: RefineConfig::default(),
        };
        BranchParams::<f64>::init(&cfg, seed).unwrap().coarse
    }

    #[test]
    fn zero_clip_zero_bias_gives_zero_map() {
        let cfg = tiny_cfg();
        let mut params = tiny_params(1);
        for k in params.convs.iter_mut().chain(std::iter::once(&mut params.head)) {
            k.bias_mut().fill(0.0);
        }
        let clip = ClipTensor::zeros((4, 8, 8, 2));
        let (out, _) = coarse_forward(&cfg, &params, &clip).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_has_input_resolution_and_one_channel() {
        let cfg = tiny_cfg();
        let params = tiny_params(2);
        let clip = ClipTensor::full((4, 8, 8, 2), 0.3);
        let (out, _) = coarse_forward(&cfg, &params, &clip).unwrap();
        assert_eq!(out.shape(), (1, 8, 8, 1));
        out.check_finite("coarse output").unwrap();
    }

    #[test]
    fn rejects_wrong_frame_count() {
        let cfg = tiny_cfg();
        let params = tiny_params(3);
        let clip = ClipTensor::<f64>::zeros((2, 8, 8, 2));
        assert!(coarse_forward(&cfg, &params, &clip).is_err());
    }

    #[test]
    fn temporal_axis_is_collapsed_but_frame_order_matters() {
        // The encoder ends time-independent in shape (one frame out), yet the
        // temporal convolutions make the value depend on frame order: the
        // identity permutation is a no-op and a cross-window swap is not.
        // Within-window permutation invariance belongs to the pooling op and
        // is covered by its own tests.
        let cfg = tiny_cfg();
        let params = tiny_params(4);
        let mut data = Vec::new();
        for t in 0..4 {
            for i in 0..8 * 8 * 2 {
                data.push(((t * 131 + i) as f64 * 0.37).sin());
            }
        }
        let clip = ClipTensor::new((4, 8, 8, 2), data).unwrap();
        let (base, _) = coarse_forward(&cfg, &params, &clip).unwrap();
        assert_eq!(base.frames(), 1);

        let (replay, _) = coarse_forward(&cfg, &params, &clip.clone()).unwrap();
        assert_eq!(replay.data(), base.data());

        let swap_frames = |a: usize, b: usize| {
            let mut t = clip.clone();
            let stride = 8 * 8 * 2;
            for i in 0..stride {
                let (x, y) = (a * stride + i, b * stride + i);
                t.data_mut().swap(x, y);
            }
            t
        };
        let (cross_window, _) = coarse_forward(&cfg, &params, &swap_frames(0, 2)).unwrap();
        assert_ne!(cross_window.data(), base.data());
    }
}
