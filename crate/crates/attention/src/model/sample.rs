use crate::resize::{crop_clip, crop_map, mirror_clip, mirror_map, resize_clip, resize_map};
use crate::{AttentionError, FixationMap, Result};
use foa_tensor::{ClipTensor, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One training example for one domain: a source-resolution clip and the
/// ground-truth map of its last frame.
#[derive(Clone, Debug)]
pub struct TrainSample<T: Real> {
    pub clip: ClipTensor<T>,
    pub map: FixationMap,
}

/// A sample prepared for the two-stream iteration: the clip resized to the
/// model input, and a random crop of the same size, with the matching maps
/// (cropped map renormalized).
#[derive(Clone, Debug)]
pub struct CropResizePair<T: Real> {
    pub resized_clip: ClipTensor<T>,
    pub resized_map: FixationMap,
    pub cropped_clip: ClipTensor<T>,
    pub cropped_map: FixationMap,
    pub crop_offset: (usize, usize),
    pub mirrored: bool,
}

/// Crop placement and augmentation shared across all domains of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropDecision {
    pub top: usize,
    pub left: usize,
    pub mirrored: bool,
}

/// Uniform crop offset over the valid range, optional mirror augmentation.
pub fn draw_crop_decision(
    source_size: usize,
    input_size: usize,
    mirror_probability: f64,
    rng: &mut ChaCha8Rng,
) -> CropDecision {
    let span = source_size - input_size;
    CropDecision {
        top: if span == 0 { 0 } else { rng.gen_range(0..=span) },
        left: if span == 0 { 0 } else { rng.gen_range(0..=span) },
        mirrored: rng.gen_bool(mirror_probability),
    }
}

/// Applies one decision to a clip/map pair.
pub fn apply_crop_resize<T: Real>(
    clip: &ClipTensor<T>,
    map: &FixationMap,
    input_size: usize,
    decision: CropDecision,
) -> Result<CropResizePair<T>> {
    let (_, h, w, _) = clip.shape();
    if map.shape() != (h, w) {
        return Err(AttentionError::ShapeMismatch {
            context: "apply_crop_resize",
            expected: format!("map of {h}x{w}"),
            got: format!("{:?}", map.shape()),
        });
    }
    let (clip, map) = if decision.mirrored {
        (mirror_clip(clip), mirror_map(map))
    } else {
        (clip.clone(), map.clone())
    };
    let resized_clip = resize_clip(&clip, (input_size, input_size))?;
    let resized_map = resize_map(&map, (input_size, input_size))?;
    let cropped_clip = crop_clip(&clip, decision.top, decision.left, (input_size, input_size))?;
    let cropped_map = crop_map(&map, decision.top, decision.left, (input_size, input_size))?;
    Ok(CropResizePair {
        resized_clip,
        resized_map,
        cropped_clip,
        cropped_map,
        crop_offset: (decision.top, decision.left),
        mirrored: decision.mirrored,
    })
}

/// Single-domain convenience: deterministic for a fixed seed.
pub fn crop_resize_sample<T: Real>(
    clip: &ClipTensor<T>,
    map: &FixationMap,
    input_size: usize,
    seed: u64,
    mirror_probability: f64,
) -> Result<CropResizePair<T>> {
    let (_, h, w, _) = clip.shape();
    if h != w {
        return Err(AttentionError::InvalidInput {
            context: "crop_resize_sample",
            detail: format!("source frames must be square, got {h}x{w}"),
        });
    }
    if input_size > h {
        return Err(AttentionError::InvalidInput {
            context: "crop_resize_sample",
            detail: format!("crop {input_size} larger than source {h}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decision = draw_crop_decision(h, input_size, mirror_probability, &mut rng);
    apply_crop_resize(clip, map, input_size, decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixmap::tests::gaussian_map;

    fn source() -> (ClipTensor<f32>, FixationMap) {
        let clip = ClipTensor::new(
            (2, 16, 16, 1),
            (0..512).map(|v| (v as f32 * 0.01).sin().abs()).collect(),
        )
        .unwrap();
        let map = gaussian_map(16, 16, 11.0, 5.0, 3.0);
        (clip, map)
    }

    #[test]
    fn fixed_seed_reproduces_the_pair() {
        let (clip, map) = source();
        let a = crop_resize_sample(&clip, &map, 8, 42, 0.5).unwrap();
        let b = crop_resize_sample(&clip, &map, 8, 42, 0.5).unwrap();
        assert_eq!(a.crop_offset, b.crop_offset);
        assert_eq!(a.mirrored, b.mirrored);
        assert_eq!(a.cropped_clip, b.cropped_clip);
        assert_eq!(a.cropped_map.data(), b.cropped_map.data());
    }

    #[test]
    fn crop_covering_peak_shifts_argmax_by_offset() {
        let (clip, map) = source();
        // Peak at (row 5, col 11); crop with top=2, left=6 keeps it inside.
        let pair = apply_crop_resize(
            &clip,
            &map,
            8,
            CropDecision {
                top: 2,
                left: 6,
                mirrored: false,
            },
        )
        .unwrap();
        assert_eq!(pair.cropped_map.argmax(), (3, 5));
        assert!((pair.cropped_map.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn offsets_cover_the_valid_range_roughly_uniformly() {
        let (clip, map) = source();
        let span = 8usize; // 16 - 8
        let mut counts = vec![0usize; (span + 1) * (span + 1)];
        let n = 8000;
        for seed in 0..n {
            let pair = crop_resize_sample(&clip, &map, 8, seed as u64, 0.0).unwrap();
            counts[pair.crop_offset.0 * (span + 1) + pair.crop_offset.1] += 1;
        }
        // Chi-square sanity against the uniform distribution over 81 cells.
        let expected = n as f64 / counts.len() as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 80 degrees of freedom; 1e-4 quantile is ~140.
        assert!(chi2 < 140.0, "chi2 = {chi2}");
    }

    #[test]
    fn mirrored_pair_flips_the_map() {
        let (clip, map) = source();
        let pair = apply_crop_resize(
            &clip,
            &map,
            16,
            CropDecision {
                top: 0,
                left: 0,
                mirrored: true,
            },
        )
        .unwrap();
        // Peak (5, 11) mirrors to (5, 4).
        assert_eq!(pair.resized_map.argmax(), (5, 4));
    }
}
