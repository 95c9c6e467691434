//! The multi-branch attention predictor: a 3D-convolutional encoder shared
//! between a random-crop stream and a resized stream, a 2-D refinement head
//! over the resized stream, per-branch pre-training, joint fine-tuning of
//! the fused prediction, and fused inference.

mod branch;
mod checkpoint;
mod coarse;
mod config;
mod fusion;
mod params;
mod refine;
mod sample;
mod trainer;

pub use branch::{branch_loss_and_grads, branch_predict, BranchEval};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use coarse::{coarse_backward, coarse_forward, CoarseCache, CoarseGrads};
pub use config::{BranchConfig, BranchDomain, CoarseConfig, ModelConfig, RefineConfig};
pub use fusion::{fusion_loss_and_grads, infer, FusionEval, Inference};
pub use params::{BranchGrads, BranchParams, CoarseParams, RefineParams};
pub use refine::{refine_backward, refine_forward, RefineCache, RefineGrads};
pub use sample::{
    apply_crop_resize, crop_resize_sample, draw_crop_decision, CropDecision, CropResizePair,
    TrainSample,
};
pub use trainer::{
    finetune_fusion, train_branch, write_train_log, BranchOptimizer, CropPolicy,
    MultiDomainSample, TrainLogRow, TrainOptions,
};
