use crate::{AttentionError, Result};
use serde::{Deserialize, Serialize};

/// Input domain of one branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchDomain {
    Rgb,
    Flow,
    Seg,
}

impl BranchDomain {
    pub fn name(&self) -> &'static str {
        match self {
            BranchDomain::Rgb => "rgb",
            BranchDomain::Flow => "flow",
            BranchDomain::Seg => "seg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rgb" => Some(Self::Rgb),
            "flow" => Some(Self::Flow),
            "seg" => Some(Self::Seg),
            _ => None,
        }
    }
}

/// Shape of the 3D-convolutional encoder: conv stages (all 3x3x3 kernels,
/// border-preserving zero padding, ReLU) each followed by a max-pool whose
/// temporal sizes multiply to the clip length, so the temporal axis is fully
/// collapsed; then bilinear upsampling back to the input resolution and a
/// single-channel 2-D head convolution with ReLU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseConfig {
    pub frames: usize,
    pub input_size: usize,
    pub in_channels: usize,
    /// Output channels of each conv stage.
    pub widths: Vec<usize>,
    /// (temporal, spatial) pooling size-and-stride per stage.
    pub pools: Vec<(usize, usize)>,
}

impl CoarseConfig {
    /// Stage layout used throughout: four stages with pooling sizes
    /// (1,2,2,4) along time and (2,2,2,1) along space, collapsing 16 frames
    /// to one and dividing the spatial size by 8.
    pub fn with_defaults(input_size: usize, in_channels: usize) -> Self {
        Self {
            frames: 16,
            input_size,
            in_channels,
            widths: vec![16, 32, 64, 64],
            pools: vec![(1, 2), (2, 2), (2, 2), (4, 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.len() != self.pools.len() {
            return Err(AttentionError::InvalidInput {
                context: "CoarseConfig",
                detail: format!(
                    "need matching non-empty widths/pools, got {} and {}",
                    self.widths.len(),
                    self.pools.len()
                ),
            });
        }
        let t_product: usize = self.pools.iter().map(|p| p.0).product();
        if t_product != self.frames {
            return Err(AttentionError::InvalidInput {
                context: "CoarseConfig",
                detail: format!(
                    "temporal pooling product {} must equal clip length {}",
                    t_product, self.frames
                ),
            });
        }
        let s_product: usize = self.pools.iter().map(|p| p.1).product();
        if s_product == 0 || self.input_size % s_product != 0 {
            return Err(AttentionError::InvalidInput {
                context: "CoarseConfig",
                detail: format!(
                    "input size {} not divisible by spatial pooling product {}",
                    self.input_size, s_product
                ),
            });
        }
        if self.in_channels == 0 || self.widths.iter().any(|&w| w == 0) {
            return Err(AttentionError::InvalidInput {
                context: "CoarseConfig",
                detail: "channel counts must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// Side length of the encoder output before upsampling.
    pub fn pooled_size(&self) -> usize {
        self.input_size / self.pools.iter().map(|p| p.1).product::<usize>()
    }
}

/// Shape of the refinement head: a stack of 3x3 2-D convolutions over the
/// coarse map concatenated with the clip's last frame. LeakyReLU between
/// layers, ReLU after the final single-channel one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub widths: Vec<usize>,
    pub leaky_alpha: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            widths: vec![32, 16, 8, 1],
            leaky_alpha: 1e-3,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.last() != Some(&1) {
            return Err(AttentionError::InvalidInput {
                context: "RefineConfig",
                detail: "final refinement layer must output one channel".into(),
            });
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(AttentionError::InvalidInput {
                context: "RefineConfig",
                detail: "widths must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// One branch: shared-weight encoder plus refinement head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub domain: BranchDomain,
    pub coarse: CoarseConfig,
    pub refine: RefineConfig,
}

impl BranchConfig {
    pub fn validate(&self) -> Result<()> {
        self.coarse.validate()?;
        self.refine.validate()
    }
}

/// The full multi-branch model plus its data-preparation geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Source resolution clips are stored at (resize target before crops).
    pub source_size: usize,
    /// Model input resolution (crop size and resize target).
    pub input_size: usize,
    /// Stability constant of every KL term.
    pub eps: f64,
    pub branches: Vec<BranchConfig>,
}

impl ModelConfig {
    /// Paper-scale geometry: 256 source, 112 input, eps 1e-8, three branches
    /// (RGB 3, flow 3, segmentation 19 channels).
    pub fn paper_default() -> Self {
        Self::with_sizes(256, 112, &[(BranchDomain::Rgb, 3), (BranchDomain::Flow, 3), (BranchDomain::Seg, 19)])
    }

    pub fn with_sizes(
        source_size: usize,
        input_size: usize,
        domains: &[(BranchDomain, usize)],
    ) -> Self {
        Self {
            source_size,
            input_size,
            eps: 1e-8,
            branches: domains
                .iter()
                .map(|&(domain, channels)| BranchConfig {
                    domain,
                    coarse: CoarseConfig::with_defaults(input_size, channels),
                    refine: RefineConfig::default(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(AttentionError::InvalidInput {
                context: "ModelConfig",
                detail: "need at least one branch".into(),
            });
        }
        if self.input_size > self.source_size {
            return Err(AttentionError::InvalidInput {
                context: "ModelConfig",
                detail: format!(
                    "input size {} exceeds source size {}",
                    self.input_size, self.source_size
                ),
            });
        }
        for b in &self.branches {
            b.validate()?;
            if b.coarse.input_size != self.input_size {
                return Err(AttentionError::InvalidInput {
                    context: "ModelConfig",
                    detail: "branch input size must match the model input size".into(),
                });
            }
        }
        Ok(())
    }

    pub fn branch(&self, domain: BranchDomain) -> Option<&BranchConfig> {
        self.branches.iter().find(|b| b.domain == domain)
    }
}
