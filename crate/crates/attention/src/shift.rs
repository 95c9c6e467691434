//! Shift-robustness evaluation: translate input clips horizontally with
//! mirror fill, shift the ground truth the same way, and trace KL as a
//! function of the shift for a predictor.

use crate::model::{infer, BranchParams, ModelConfig};
use crate::resize::{resize_clip, resize_map, shift_clip_mirror, shift_map_mirror};
use crate::{metrics, AttentionError, FixationMap, Result};
use foa_tensor::ClipTensor;
use std::io::Write;

/// Anything that turns per-domain resized clips into an attention map.
/// Implemented by the trained model and by test oracles.
pub trait ShiftPredictor {
    fn predict(&self, resized_clips: &[ClipTensor<f32>]) -> Result<FixationMap>;
}

/// The trained multi-branch model as a predictor.
pub struct ModelPredictor<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a [BranchParams<f32>],
}

impl ShiftPredictor for ModelPredictor<'_> {
    fn predict(&self, resized_clips: &[ClipTensor<f32>]) -> Result<FixationMap> {
        Ok(infer(self.config, self.params, resized_clips)?.map)
    }
}

/// One evaluation clip: per-domain source-resolution clips plus the map.
pub struct ShiftEvalClip {
    pub clips: Vec<ClipTensor<f32>>,
    pub map: FixationMap,
}

/// Mean and standard deviation of KL at one shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftPoint {
    pub shift_px: i64,
    pub mean_kl: f64,
    pub std_kl: f64,
}

/// KL-versus-shift curve for one predictor.
#[derive(Clone, Debug, Default)]
pub struct ShiftCurve {
    pub points: Vec<ShiftPoint>,
}

impl ShiftCurve {
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "shift_px,mean_kl,std_kl")?;
        for p in &self.points {
            writeln!(sink, "{},{},{}", p.shift_px, p.mean_kl, p.std_kl)?;
        }
        Ok(())
    }
}

/// Evaluates a predictor across horizontal shifts. Shifts are applied to the
/// source-resolution clips and ground truth (mirror fill), then clips are
/// resized to the model input; a zero shift reproduces plain evaluation.
pub fn shift_robustness_eval<P: ShiftPredictor>(
    predictor: &P,
    clips: &[ShiftEvalClip],
    shifts: &[i64],
    input_size: usize,
    eps: f64,
) -> Result<ShiftCurve> {
    if clips.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "shift_robustness_eval",
            detail: "need at least one evaluation clip".into(),
        });
    }
    let mut points = Vec::with_capacity(shifts.len());
    for &shift in shifts {
        let mut kls = Vec::with_capacity(clips.len());
        for clip in clips {
            let shifted: Vec<ClipTensor<f32>> = clip
                .clips
                .iter()
                .map(|c| {
                    shift_clip_mirror(c, shift)
                        .and_then(|s| resize_clip(&s, (input_size, input_size)))
                })
                .collect::<Result<_>>()?;
            let shifted_map = shift_map_mirror(&clip.map, shift)?;
            let target = resize_map(&shifted_map, (input_size, input_size))?;
            let pred = predictor.predict(&shifted)?;
            kls.push(metrics::eval_kl(&target, &pred, eps)?);
        }
        let n = kls.len() as f64;
        let mean = kls.iter().sum::<f64>() / n;
        let var = kls.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n;
        points.push(ShiftPoint {
            shift_px: shift,
            mean_kl: mean,
            std_kl: var.sqrt(),
        });
    }
    Ok(ShiftCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixmap::tests::gaussian_map;

    /// Oracle predictor that reads the ground truth back out of the clip's
    /// only channel (the fixture encodes the map there). Its curve must stay
    /// flat at (numerically) zero KL — the harness consistency check.
    struct GroundTruthOracle;

    impl ShiftPredictor for GroundTruthOracle {
        fn predict(&self, resized_clips: &[ClipTensor<f32>]) -> Result<FixationMap> {
            let clip = &resized_clips[0];
            let (_, h, w, _) = clip.shape();
            let mut data = vec![0.0f64; h * w];
            for y in 0..h {
                for x in 0..w {
                    data[y * w + x] = clip.at(0, y, x, 0).max(0.0) as f64;
                }
            }
            FixationMap::new(h, w, data)?.normalize()
        }
    }

    fn map_encoded_clip(map: &FixationMap) -> ClipTensor<f32> {
        let (h, w) = map.shape();
        let mut clip = ClipTensor::zeros((2, h, w, 1));
        for t in 0..2 {
            for y in 0..h {
                for x in 0..w {
                    *clip.at_mut(t, y, x, 0) = map.at(y, x) as f32;
                }
            }
        }
        clip
    }

    #[test]
    fn ground_truth_oracle_curve_is_flat_near_zero() {
        let map = gaussian_map(16, 16, 10.0, 8.0, 5.0);
        let clips = vec![ShiftEvalClip {
            clips: vec![map_encoded_clip(&map)],
            map: map.clone(),
        }];
        let curve =
            shift_robustness_eval(&GroundTruthOracle, &clips, &[-6, -3, 0, 3, 6], 16, 1e-8)
                .unwrap();
        for p in &curve.points {
            assert!(
                p.mean_kl.abs() < 1e-4,
                "shift {} kl {}",
                p.shift_px,
                p.mean_kl
            );
        }
    }

    #[test]
    fn zero_shift_equals_unshifted_evaluation() {
        let map = gaussian_map(16, 16, 6.0, 6.0, 4.0);
        let clips = vec![ShiftEvalClip {
            clips: vec![map_encoded_clip(&map)],
            map: map.clone(),
        }];
        let curve = shift_robustness_eval(&GroundTruthOracle, &clips, &[0], 16, 1e-8).unwrap();
        let resized = resize_clip(&map_encoded_clip(&map), (16, 16)).unwrap();
        let pred = GroundTruthOracle.predict(&[resized]).unwrap();
        let direct = metrics::eval_kl(&map, &pred, 1e-8).unwrap();
        assert!((curve.points[0].mean_kl - direct).abs() < 1e-12);
    }

    #[test]
    fn shift_beyond_width_is_rejected() {
        let map = gaussian_map(8, 8, 4.0, 4.0, 3.0);
        let clips = vec![ShiftEvalClip {
            clips: vec![map_encoded_clip(&map)],
            map,
        }];
        assert!(shift_robustness_eval(&GroundTruthOracle, &clips, &[8], 8, 1e-8).is_err());
    }
}
