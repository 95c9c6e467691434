use super::config::{BranchConfig, CoarseConfig, RefineConfig};
use crate::Result;
use foa_tensor::{Conv3dKernel, KernelGradients, Padding, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Learnable state of the encoder: one 3D kernel per stage plus the 2-D
/// single-channel head applied after upsampling.
#[derive(Clone, Debug)]
pub struct CoarseParams<T: Real> {
    pub convs: Vec<Conv3dKernel<T>>,
    pub head: Conv3dKernel<T>,
}

/// Learnable state of the refinement head.
#[derive(Clone, Debug)]
pub struct RefineParams<T: Real> {
    pub convs: Vec<Conv3dKernel<T>>,
}

/// All weights of one branch. The same `coarse` instance evaluates both the
/// crop and the resize stream, which is what weight sharing means here.
#[derive(Clone, Debug)]
pub struct BranchParams<T: Real> {
    pub coarse: CoarseParams<T>,
    pub refine: RefineParams<T>,
}

fn kaiming_uniform<T: Real>(
    rng: &mut ChaCha8Rng,
    out_ch: usize,
    in_ch: usize,
    k: (usize, usize, usize),
) -> Conv3dKernel<T> {
    let fan_in = (in_ch * k.0 * k.1 * k.2) as f64;
    let bound = (6.0 / fan_in).sqrt();
    let n = out_ch * in_ch * k.0 * k.1 * k.2;
    let weights = (0..n)
        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    // Small positive bias keeps the rectified maps alive at the start of
    // training.
    let bias = vec![T::from_f64(0.01); out_ch];
    Conv3dKernel::new(out_ch, in_ch, k, Padding::ZeroSame, weights, bias)
        .expect("generated kernel is valid")
}

impl<T: Real> BranchParams<T> {
    /// Seeded random initialization (no pre-trained weights at desk scale).
    pub fn init(cfg: &BranchConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            coarse: CoarseParams::init(&cfg.coarse, &mut rng),
            refine: RefineParams::init(&cfg.refine, cfg.coarse.in_channels, &mut rng),
        })
    }

    /// Parameter tensors in a fixed traversal order, paired with gradients
    /// by the optimizer.
    pub fn tensor_count(&self) -> usize {
        // weights + bias per kernel
        2 * (self.coarse.convs.len() + 1 + self.refine.convs.len())
    }

    pub fn cast<U: Real>(&self) -> BranchParams<U> {
        BranchParams {
            coarse: CoarseParams {
                convs: self.coarse.convs.iter().map(cast_kernel).collect(),
                head: cast_kernel(&self.coarse.head),
            },
            refine: RefineParams {
                convs: self.refine.convs.iter().map(cast_kernel).collect(),
            },
        }
    }
}

pub(crate) fn cast_kernel<T: Real, U: Real>(k: &Conv3dKernel<T>) -> Conv3dKernel<U> {
    Conv3dKernel::new(
        k.out_channels(),
        k.in_channels(),
        k.kernel_dims(),
        k.padding(),
        k.weights().iter().map(|v| U::from_f64(v.as_f64())).collect(),
        k.bias().iter().map(|v| U::from_f64(v.as_f64())).collect(),
    )
    .expect("cast preserves validity")
}

impl<T: Real> CoarseParams<T> {
    fn init(cfg: &CoarseConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut convs = Vec::with_capacity(cfg.widths.len());
        let mut in_ch = cfg.in_channels;
        for &out_ch in &cfg.widths {
            convs.push(kaiming_uniform(rng, out_ch, in_ch, (3, 3, 3)));
            in_ch = out_ch;
        }
        let head = kaiming_uniform(rng, 1, in_ch, (3, 3, 1));
        Self { convs, head }
    }
}

impl<T: Real> RefineParams<T> {
    fn init(cfg: &RefineConfig, frame_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut convs = Vec::with_capacity(cfg.widths.len());
        // The head consumes the last frame stacked with the coarse map.
        let mut in_ch = frame_channels + 1;
        for &out_ch in &cfg.widths {
            convs.push(kaiming_uniform(rng, out_ch, in_ch, (3, 3, 1)));
            in_ch = out_ch;
        }
        Self { convs }
    }
}

/// Gradients mirroring [`BranchParams`].
#[derive(Clone, Debug)]
pub struct BranchGrads<T: Real> {
    pub coarse: Vec<KernelGradients<T>>,
    pub head: KernelGradients<T>,
    pub refine: Vec<KernelGradients<T>>,
}

impl<T: Real> BranchGrads<T> {
    pub fn zeros_like(params: &BranchParams<T>) -> Self {
        let zero = |k: &Conv3dKernel<T>| KernelGradients {
            weights: vec![T::zero(); k.weights().len()],
            bias: vec![T::zero(); k.bias().len()],
        };
        Self {
            coarse: params.coarse.convs.iter().map(zero).collect(),
            head: zero(&params.coarse.head),
            refine: params.refine.convs.iter().map(zero).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        let add = |a: &mut KernelGradients<T>, b: &KernelGradients<T>| {
            for (x, y) in a.weights.iter_mut().zip(b.weights.iter()) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += *y;
            }
        };
        for (a, b) in self.coarse.iter_mut().zip(other.coarse.iter()) {
            add(a, b);
        }
        add(&mut self.head, &other.head);
        for (a, b) in self.refine.iter_mut().zip(other.refine.iter()) {
            add(a, b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        let f = T::from_f64(factor);
        let scale = |g: &mut KernelGradients<T>| {
            for v in g.weights.iter_mut().chain(g.bias.iter_mut()) {
                *v *= f;
            }
        };
        for g in &mut self.coarse {
            scale(g);
        }
        scale(&mut self.head);
        for g in &mut self.refine {
            scale(g);
        }
    }
}
