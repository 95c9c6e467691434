use super::config::ModelConfig;
use super::params::{BranchParams, CoarseParams, RefineParams};
use crate::{AttentionError, Result};
use foa_tensor::{ClipTensor, Conv3dKernel, Padding};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Checkpoint layout: `manifest.json` (config, seed, iteration count) next
/// to `params.bin`, a stream of tensor-format blobs in a fixed traversal
/// order (per branch: encoder kernels, head, refinement kernels; weights
/// then bias each).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub model: ModelConfig,
    pub seed: u64,
    pub iterations: u64,
}

fn write_kernel<W: Write>(sink: &mut W, kernel: &Conv3dKernel<f32>) -> Result<()> {
    let (kh, kw, kt) = kernel.kernel_dims();
    let weights = ClipTensor::new(
        (kernel.out_channels() * kernel.in_channels(), kh, kw, kt),
        kernel.weights().to_vec(),
    )?;
    foa_tensor::write_tensor(&mut *sink, &weights)?;
    let bias = ClipTensor::new((1, 1, 1, kernel.out_channels()), kernel.bias().to_vec())?;
    foa_tensor::write_tensor(&mut *sink, &bias)?;
    Ok(())
}

fn read_kernel<R: Read>(
    source: &mut R,
    out_ch: usize,
    in_ch: usize,
    k: (usize, usize, usize),
) -> Result<Conv3dKernel<f32>> {
    let weights: ClipTensor<f32> = foa_tensor::read_tensor(&mut *source)?;
    let bias: ClipTensor<f32> = foa_tensor::read_tensor(&mut *source)?;
    if weights.shape() != (out_ch * in_ch, k.0, k.1, k.2) || bias.len() != out_ch {
        return Err(AttentionError::ShapeMismatch {
            context: "checkpoint kernel",
            expected: format!("{:?} weights, {out_ch} biases", (out_ch * in_ch, k.0, k.1, k.2)),
            got: format!("{:?}, {}", weights.shape(), bias.len()),
        });
    }
    Ok(Conv3dKernel::new(
        out_ch,
        in_ch,
        k,
        Padding::ZeroSame,
        weights.into_data(),
        bias.into_data(),
    )?)
}

pub fn save_checkpoint(
    dir: &Path,
    manifest: &CheckpointManifest,
    params: &[BranchParams<f32>],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest_file = File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(manifest_file), manifest).map_err(|e| {
        AttentionError::Parse {
            path: dir.join("manifest.json").display().to_string(),
            detail: e.to_string(),
        }
    })?;
    let mut sink = BufWriter::new(File::create(dir.join("params.bin"))?);
    for branch in params {
        for kernel in &branch.coarse.convs {
            write_kernel(&mut sink, kernel)?;
        }
        write_kernel(&mut sink, &branch.coarse.head)?;
        for kernel in &branch.refine.convs {
            write_kernel(&mut sink, kernel)?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointManifest, Vec<BranchParams<f32>>)> {
    let manifest_file = File::open(dir.join("manifest.json"))?;
    let manifest: CheckpointManifest = serde_json::from_reader(BufReader::new(manifest_file))
        .map_err(|e| AttentionError::Parse {
            path: dir.join("manifest.json").display().to_string(),
            detail: e.to_string(),
        })?;
    manifest.model.validate()?;
    let mut source = BufReader::new(File::open(dir.join("params.bin"))?);
    let mut params = Vec::with_capacity(manifest.model.branches.len());
    for branch_cfg in &manifest.model.branches {
        let mut convs = Vec::with_capacity(branch_cfg.coarse.widths.len());
        let mut in_ch = branch_cfg.coarse.in_channels;
        for &out_ch in &branch_cfg.coarse.widths {
            convs.push(read_kernel(&mut source, out_ch, in_ch, (3, 3, 3))?);
            in_ch = out_ch;
        }
        let head = read_kernel(&mut source, 1, in_ch, (3, 3, 1))?;
        let mut refine_convs = Vec::with_capacity(branch_cfg.refine.widths.len());
        let mut r_in = branch_cfg.coarse.in_channels + 1;
        for &out_ch in &branch_cfg.refine.widths {
            refine_convs.push(read_kernel(&mut source, out_ch, r_in, (3, 3, 1))?);
            r_in = out_ch;
        }
        params.push(BranchParams {
            coarse: CoarseParams { convs, head },
            refine: RefineParams { convs: refine_convs },
        });
    }
    Ok((manifest, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{BranchConfig, BranchDomain, CoarseConfig, RefineConfig};

    #[test]
    fn checkpoint_round_trips_bit_exact() {
        let model = ModelConfig {
            source_size: 16,
            input_size: 8,
            eps: 1e-8,
            branches: vec![BranchConfig {
                domain: BranchDomain::Flow,
                coarse: CoarseConfig {
                    frames: 4,
                    input_size: 8,
                    in_channels: 2,
                    widths: vec![3, 4],
                    pools: vec![(2, 2), (2, 2)],
                },
                refine: RefineConfig {
                    widths: vec![4, 1],
                    leaky_alpha: 1e-3,
                },
            }],
        };
        let params = vec![BranchParams::<f32>::init(&model.branches[0], 21).unwrap()];
        let manifest = CheckpointManifest {
            model,
            seed: 21,
            iterations: 17,
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &manifest, &params).unwrap();
        let (back_manifest, back_params) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back_manifest.iterations, 17);
        assert_eq!(back_manifest.model, manifest.model);
        for (a, b) in params.iter().zip(back_params.iter()) {
            for (ka, kb) in a.coarse.convs.iter().zip(b.coarse.convs.iter()) {
                assert_eq!(ka.weights(), kb.weights());
                assert_eq!(ka.bias(), kb.bias());
            }
            assert_eq!(a.coarse.head.weights(), b.coarse.head.weights());
            for (ka, kb) in a.refine.convs.iter().zip(b.refine.convs.iter()) {
                assert_eq!(ka.weights(), kb.weights());
            }
        }
    }
}
