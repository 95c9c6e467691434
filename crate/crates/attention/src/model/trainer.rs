use super::branch::branch_loss_and_grads;
use super::config::ModelConfig;
use super::fusion::fusion_loss_and_grads;
use super::params::{BranchGrads, BranchParams};
use super::sample::{apply_crop_resize, draw_crop_decision, CropResizePair};
use crate::{AttentionError, FixationMap, Result};
use foa_tensor::{Adam, AdamState, ClipTensor, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// One sample carrying every branch domain: `clips[i]` pairs with branch `i`
/// of the model config; the map belongs to the last frame.
#[derive(Clone, Debug)]
pub struct MultiDomainSample<T: Real> {
    pub clips: Vec<ClipTensor<T>>,
    pub map: FixationMap,
}

/// Adam wrapped around one branch's tensors in a fixed traversal order.
pub struct BranchOptimizer {
    adam: Adam,
    states: Vec<AdamState>,
}

impl BranchOptimizer {
    pub fn new<T: Real>(adam: Adam, params: &BranchParams<T>) -> Self {
        let mut states = Vec::new();
        for k in &params.coarse.convs {
            states.push(AdamState::new(k.weights().len()));
            states.push(AdamState::new(k.bias().len()));
        }
        states.push(AdamState::new(params.coarse.head.weights().len()));
        states.push(AdamState::new(params.coarse.head.bias().len()));
        for k in &params.refine.convs {
            states.push(AdamState::new(k.weights().len()));
            states.push(AdamState::new(k.bias().len()));
        }
        Self { adam, states }
    }

    pub fn step<T: Real>(&mut self, params: &mut BranchParams<T>, grads: &BranchGrads<T>) {
        let mut idx = 0;
        let mut apply = |p: &mut [T], g: &[T], states: &mut Vec<AdamState>, adam: &Adam| {
            adam.step(p, g, &mut states[idx]);
            idx += 1;
        };
        for (k, g) in params.coarse.convs.iter_mut().zip(grads.coarse.iter()) {
            apply(k.weights_mut(), &g.weights, &mut self.states, &self.adam);
            apply(k.bias_mut(), &g.bias, &mut self.states, &self.adam);
        }
        apply(
            params.coarse.head.weights_mut(),
            &grads.head.weights,
            &mut self.states,
            &self.adam,
        );
        apply(
            params.coarse.head.bias_mut(),
            &grads.head.bias,
            &mut self.states,
            &self.adam,
        );
        for (k, g) in params.refine.convs.iter_mut().zip(grads.refine.iter()) {
            apply(k.weights_mut(), &g.weights, &mut self.states, &self.adam);
            apply(k.bias_mut(), &g.bias, &mut self.states, &self.adam);
        }
    }
}

/// One line of the training log.
#[derive(Clone, Copy, Debug)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub crop_kl: f64,
    pub refine_kl: f64,
    pub total: f64,
}

pub fn write_train_log<W: Write>(mut sink: W, rows: &[TrainLogRow]) -> Result<()> {
    writeln!(sink, "iteration,crop_kl,refine_kl,total")?;
    for r in rows {
        writeln!(
            sink,
            "{},{},{},{}",
            r.iteration, r.crop_kl, r.refine_kl, r.total
        )?;
    }
    Ok(())
}

/// Crop policy used when preparing training pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CropPolicy {
    /// Uniform random placement (the model's anti-central-bias scheme).
    Random,
    /// Fixed central placement, kept for the robustness comparison.
    Center,
}

/// Training hyperparameters. Paper values: batch 32 and lr 1e-4 for branch
/// pre-training, batch 4 and lr 1e-5 for fusion fine-tuning.
#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mirror_probability: f64,
    pub crop_policy: CropPolicy,
    pub seed: u64,
}

impl TrainOptions {
    pub fn branch_defaults() -> Self {
        Self {
            iterations: 500,
            batch_size: 32,
            learning_rate: 1e-4,
            mirror_probability: 0.5,
            crop_policy: CropPolicy::Random,
            seed: 0,
        }
    }

    pub fn fusion_defaults() -> Self {
        Self {
            iterations: 200,
            batch_size: 4,
            learning_rate: 1e-5,
            mirror_probability: 0.5,
            crop_policy: CropPolicy::Random,
            seed: 0,
        }
    }
}

fn prepare_pair<T: Real>(
    model: &ModelConfig,
    sample: &MultiDomainSample<T>,
    branch_index: usize,
    policy: CropPolicy,
    mirror_probability: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CropResizePair<T>> {
    let decision = match policy {
        CropPolicy::Random => {
            draw_crop_decision(model.source_size, model.input_size, mirror_probability, rng)
        }
        CropPolicy::Center => {
            let offset = (model.source_size - model.input_size) / 2;
            let mut d = draw_crop_decision(model.source_size, model.input_size, mirror_probability, rng);
            d.top = offset;
            d.left = offset;
            d
        }
    };
    apply_crop_resize(
        &sample.clips[branch_index],
        &sample.map,
        model.input_size,
        decision,
    )
}

/// Pre-trains one branch against its own two-stream loss. Returns the
/// per-iteration log; aborts on a non-finite loss.
pub fn train_branch<T: Real>(
    model: &ModelConfig,
    branch_index: usize,
    params: &mut BranchParams<T>,
    dataset: &[MultiDomainSample<T>],
    opts: &TrainOptions,
) -> Result<Vec<TrainLogRow>> {
    if dataset.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "train_branch",
            detail: "empty dataset".into(),
        });
    }
    let cfg = &model.branches[branch_index];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut optimizer = BranchOptimizer::new(Adam::with_lr(opts.learning_rate), params);
    let mut log = Vec::with_capacity(opts.iterations);
    for iteration in 0..opts.iterations {
        let mut pairs = Vec::with_capacity(opts.batch_size);
        for _ in 0..opts.batch_size {
            let sample = &dataset[rng.gen_range(0..dataset.len())];
            pairs.push(prepare_pair(
                model,
                sample,
                branch_index,
                opts.crop_policy,
                opts.mirror_probability,
                &mut rng,
            )?);
        }
        let evals: Vec<_> = pairs
            .par_iter()
            .map(|pair| branch_loss_and_grads(cfg, params, pair, model.eps))
            .collect::<Result<_>>()?;

        let scale = 1.0 / evals.len() as f64;
        let mut grads = BranchGrads::zeros_like(params);
        let mut crop_kl = 0.0;
        let mut refine_kl = 0.0;
        for eval in &evals {
            grads.add_assign(&eval.grads);
            crop_kl += eval.crop_kl * scale;
            refine_kl += eval.refine_kl * scale;
        }
        grads.scale(scale);
        optimizer.step(params, &grads);
        log.push(TrainLogRow {
            iteration,
            crop_kl,
            refine_kl,
            total: crop_kl + refine_kl,
        });
    }
    Ok(log)
}

/// Fine-tunes all branches jointly against the fused loss. One crop decision
/// is drawn per sample and shared across domains.
pub fn finetune_fusion<T: Real>(
    model: &ModelConfig,
    params: &mut [BranchParams<T>],
    dataset: &[MultiDomainSample<T>],
    opts: &TrainOptions,
) -> Result<Vec<TrainLogRow>> {
    if dataset.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "finetune_fusion",
            detail: "empty dataset".into(),
        });
    }
    if params.len() != model.branches.len() {
        return Err(AttentionError::InvalidInput {
            context: "finetune_fusion",
            detail: "need pre-trained parameters for every branch".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut optimizers: Vec<BranchOptimizer> = params
        .iter()
        .map(|p| BranchOptimizer::new(Adam::with_lr(opts.learning_rate), p))
        .collect();
    let mut log = Vec::with_capacity(opts.iterations);
    for iteration in 0..opts.iterations {
        // Batch of samples, each prepared in every domain with one shared
        // crop decision.
        let mut batch = Vec::with_capacity(opts.batch_size);
        for _ in 0..opts.batch_size {
            let sample = &dataset[rng.gen_range(0..dataset.len())];
            let decision = match opts.crop_policy {
                CropPolicy::Random => draw_crop_decision(
                    model.source_size,
                    model.input_size,
                    opts.mirror_probability,
                    &mut rng,
                ),
                CropPolicy::Center => {
                    let offset = (model.source_size - model.input_size) / 2;
                    let mut d = draw_crop_decision(
                        model.source_size,
                        model.input_size,
                        opts.mirror_probability,
                        &mut rng,
                    );
                    d.top = offset;
                    d.left = offset;
                    d
                }
            };
            let pairs: Vec<CropResizePair<T>> = sample
                .clips
                .iter()
                .map(|clip| apply_crop_resize(clip, &sample.map, model.input_size, decision))
                .collect::<Result<_>>()?;
            batch.push(pairs);
        }
        let evals: Vec<_> = batch
            .par_iter()
            .map(|pairs| fusion_loss_and_grads(model, params, pairs, model.eps))
            .collect::<Result<_>>()?;

        let scale = 1.0 / evals.len() as f64;
        let mut crop_kl = 0.0;
        let mut refine_kl = 0.0;
        let mut averaged: Vec<BranchGrads<T>> =
            params.iter().map(BranchGrads::zeros_like).collect();
        for eval in &evals {
            for (acc, g) in averaged.iter_mut().zip(eval.grads.iter()) {
                acc.add_assign(g);
            }
            crop_kl += eval.crop_kl * scale;
            refine_kl += eval.refine_kl * scale;
        }
        for ((p, opt), g) in params
            .iter_mut()
            .zip(optimizers.iter_mut())
            .zip(averaged.iter_mut())
        {
            g.scale(scale);
            opt.step(p, g);
        }
        log.push(TrainLogRow {
            iteration,
            crop_kl,
            refine_kl,
            total: crop_kl + refine_kl,
        });
    }
    Ok(log)
}
