use super::branch::branch_predict;
use super::coarse::{coarse_backward, coarse_forward};
use super::config::ModelConfig;
use super::params::{BranchGrads, BranchParams};
use super::refine::{refine_backward, refine_forward};
use super::sample::CropResizePair;
use crate::{AttentionError, FixationMap, Result};
use foa_tensor::{kl_loss, ClipTensor, Real};

/// Loss terms and per-branch gradients of one fine-tuning iteration.
pub struct FusionEval<T: Real> {
    pub crop_kl: f64,
    pub refine_kl: f64,
    pub grads: Vec<BranchGrads<T>>,
}

impl<T: Real> FusionEval<T> {
    pub fn loss(&self) -> f64 {
        self.crop_kl + self.refine_kl
    }
}

fn add_tensors<T: Real>(tensors: &[ClipTensor<T>]) -> ClipTensor<T> {
    let mut out = tensors[0].clone();
    for t in &tensors[1..] {
        for (a, b) in out.data_mut().iter_mut().zip(t.data().iter()) {
            *a += *b;
        }
    }
    out
}

/// One fine-tuning iteration over all branches: branch outputs are summed,
/// the sums normalized (inside the KL), and each branch receives the same
/// upstream gradient. `pairs[i]` must be the same sample prepared in branch
/// `i`'s domain with identical crop placement.
pub fn fusion_loss_and_grads<T: Real>(
    cfg: &ModelConfig,
    params: &[BranchParams<T>],
    pairs: &[CropResizePair<T>],
    eps: f64,
) -> Result<FusionEval<T>> {
    if params.len() != cfg.branches.len() || pairs.len() != cfg.branches.len() {
        return Err(AttentionError::InvalidInput {
            context: "fusion_loss_and_grads",
            detail: format!(
                "expected {} branches, got {} params and {} pairs",
                cfg.branches.len(),
                params.len(),
                pairs.len()
            ),
        });
    }

    let mut crop_outs = Vec::with_capacity(params.len());
    let mut crop_caches = Vec::with_capacity(params.len());
    let mut refined_outs = Vec::with_capacity(params.len());
    let mut refine_caches = Vec::with_capacity(params.len());
    let mut res_caches = Vec::with_capacity(params.len());
    for ((branch_cfg, branch_params), pair) in
        cfg.branches.iter().zip(params.iter()).zip(pairs.iter())
    {
        let (crop_out, crop_cache) =
            coarse_forward(&branch_cfg.coarse, &branch_params.coarse, &pair.cropped_clip)?;
        let (res_out, res_cache) =
            coarse_forward(&branch_cfg.coarse, &branch_params.coarse, &pair.resized_clip)?;
        let last_frame = pair.resized_clip.frame(branch_cfg.coarse.frames - 1);
        let (refined, refine_cache) = refine_forward(
            &branch_cfg.refine,
            &branch_params.refine,
            &res_out,
            &last_frame,
        )?;
        crop_outs.push(crop_out);
        crop_caches.push(crop_cache);
        refined_outs.push(refined);
        refine_caches.push(refine_cache);
        res_caches.push(res_cache);
    }

    let as_t = |data: &[f64]| -> Vec<T> { data.iter().map(|&v| T::from_f64(v)).collect() };
    // The same constant floor as the branch loss keeps the divergence
    // defined when every rectified output loses mass at once.
    let floored = |t: &ClipTensor<T>| -> Vec<T> {
        t.data().iter().map(|&v| v + T::from_f64(eps)).collect()
    };
    let fused_crop = add_tensors(&crop_outs);
    let fused_refined = add_tensors(&refined_outs);
    // Targets are shared across domains; use the first pair's maps.
    let (crop_kl, d_fused_crop) =
        kl_loss(&as_t(pairs[0].cropped_map.data()), &floored(&fused_crop), eps)?;
    let (refine_kl, d_fused_refined) =
        kl_loss(&as_t(pairs[0].resized_map.data()), &floored(&fused_refined), eps)?;
    let d_fused_crop = ClipTensor::new(fused_crop.shape(), d_fused_crop)?;
    let d_fused_refined = ClipTensor::new(fused_refined.shape(), d_fused_refined)?;

    let mut grads = Vec::with_capacity(params.len());
    for (i, (branch_cfg, branch_params)) in cfg.branches.iter().zip(params.iter()).enumerate() {
        // The sum routes the same gradient to every branch output.
        let mut coarse_grads =
            coarse_backward(&branch_params.coarse, &crop_caches[i], &d_fused_crop)?;
        let (refine_grads, d_coarse_map) = refine_backward(
            &branch_cfg.refine,
            &branch_params.refine,
            &refine_caches[i],
            &d_fused_refined,
        )?;
        let res_grads = coarse_backward(&branch_params.coarse, &res_caches[i], &d_coarse_map)?;
        for (a, b) in coarse_grads.convs.iter_mut().zip(res_grads.convs.iter()) {
            for (x, y) in a.weights.iter_mut().zip(b.weights.iter()) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += *y;
            }
        }
        for (x, y) in coarse_grads
            .head
            .weights
            .iter_mut()
            .zip(res_grads.head.weights.iter())
        {
            *x += *y;
        }
        for (x, y) in coarse_grads
            .head
            .bias
            .iter_mut()
            .zip(res_grads.head.bias.iter())
        {
            *x += *y;
        }
        grads.push(BranchGrads {
            coarse: coarse_grads.convs,
            head: coarse_grads.head,
            refine: refine_grads.convs,
        });
    }

    let total = crop_kl + refine_kl;
    if !total.is_finite() {
        return Err(AttentionError::Diverged(format!(
            "fusion loss is {total}"
        )));
    }
    Ok(FusionEval {
        crop_kl,
        refine_kl,
        grads,
    })
}

/// Inference outcome; `uniform_fallback` is set when the fused map carried
/// no mass and a uniform distribution was substituted.
pub struct Inference {
    pub map: FixationMap,
    pub uniform_fallback: bool,
}

/// Test-time prediction: only the refined resize-stream outputs are used;
/// branch maps are summed and normalized into a probability map.
/// `clips[i]` is the resized clip in branch `i`'s domain.
pub fn infer<T: Real>(
    cfg: &ModelConfig,
    params: &[BranchParams<T>],
    clips: &[ClipTensor<T>],
) -> Result<Inference> {
    if params.len() != cfg.branches.len() || clips.len() != cfg.branches.len() {
        return Err(AttentionError::InvalidInput {
            context: "infer",
            detail: format!(
                "expected {} branches, got {} params and {} clips",
                cfg.branches.len(),
                params.len(),
                clips.len()
            ),
        });
    }
    let mut outputs = Vec::with_capacity(params.len());
    for ((branch_cfg, branch_params), clip) in
        cfg.branches.iter().zip(params.iter()).zip(clips.iter())
    {
        outputs.push(branch_predict(branch_cfg, branch_params, clip)?);
    }
    let fused = add_tensors(&outputs);
    let (_, h, w, _) = fused.shape();
    let total = fused.sum_f64();
    if !(total.is_finite() && total > f64::MIN_POSITIVE) {
        return Ok(Inference {
            map: FixationMap::uniform(h, w),
            uniform_fallback: true,
        });
    }
    let map = FixationMap::from_values(h, w, fused.data())?.normalize()?;
    Ok(Inference {
        map,
        uniform_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{BranchConfig, BranchDomain, CoarseConfig, RefineConfig};

    fn tiny_model(domains: &[(BranchDomain, usize)]) -> ModelConfig {
        ModelConfig {
            source_size: 16,
            input_size: 8,
            eps: 1e-8,
            branches: domains
                .iter()
                .map(|&(domain, channels)| BranchConfig {
                    domain,
                    coarse: CoarseConfig {
                        frames: 4,
                        input_size: 8,
                        in_channels: channels,
                        widths: vec![3, 4],
                        pools: vec![(2, 2), (2, 2)],
                    },
                    refine: RefineConfig {
                        widths: vec![4, 1],
                        leaky_alpha: 1e-3,
                    },
                })
                .collect(),
        }
    }

    fn random_clip(seed: usize, channels: usize) -> ClipTensor<f64> {
        ClipTensor::new(
            (4, 8, 8, channels),
            (0..4 * 64 * channels)
                .map(|v| (((v + seed * 977) as f64) * 0.017).sin().abs())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fused_map_is_a_probability_distribution() {
        let cfg = tiny_model(&[
            (BranchDomain::Rgb, 2),
            (BranchDomain::Flow, 2),
            (BranchDomain::Seg, 3),
        ]);
        let params: Vec<BranchParams<f64>> = cfg
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| BranchParams::init(b, 100 + i as u64).unwrap())
            .collect();
        let clips = vec![random_clip(0, 2), random_clip(1, 2), random_clip(2, 3)];
        let out = infer(&cfg, &params, &clips).unwrap();
        assert!(!out.uniform_fallback);
        assert!((out.map.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_branches_fuse_to_the_same_map() {
        let cfg = tiny_model(&[(BranchDomain::Rgb, 2), (BranchDomain::Flow, 2)]);
        let params = BranchParams::<f64>::init(&cfg.branches[0], 7).unwrap();
        let clip = random_clip(3, 2);
        let solo_cfg = tiny_model(&[(BranchDomain::Rgb, 2)]);
        let solo = infer(&solo_cfg, &[params.clone()], &[clip.clone()]).unwrap();
        let fused = infer(&cfg, &[params.clone(), params], &[clip.clone(), clip]).unwrap();
        for (a, b) in solo.map.data().iter().zip(fused.map.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_fall_back_to_uniform() {
        let cfg = tiny_model(&[(BranchDomain::Rgb, 2)]);
        let mut params = BranchParams::<f64>::init(&cfg.branches[0], 9).unwrap();
        for k in params
            .coarse
            .convs
            .iter_mut()
            .chain(std::iter::once(&mut params.coarse.head))
            .chain(params.refine.convs.iter_mut())
        {
            k.weights_mut().fill(0.0);
            k.bias_mut().fill(0.0);
        }
        let out = infer(&cfg, &[params], &[random_clip(4, 2)]).unwrap();
        assert!(out.uniform_fallback);
        assert_eq!(out.map, FixationMap::uniform(8, 8));
    }

    #[test]
    fn missing_branch_is_rejected() {
        let cfg = tiny_model(&[(BranchDomain::Rgb, 2), (BranchDomain::Flow, 2)]);
        let params = vec![BranchParams::<f64>::init(&cfg.branches[0], 7).unwrap()];
        let clips = vec![random_clip(0, 2)];
        assert!(infer(&cfg, &params, &clips).is_err());
    }
}
