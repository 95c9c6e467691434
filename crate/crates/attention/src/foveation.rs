//! Foveal-vision approximation: pick fixation points from an attention map,
//! build a resolution map that halves every 2.3 degrees of eccentricity,
//! blend a low-pass pyramid accordingly, and measure average resolution.

use crate::{AttentionError, FixationMap, Result};
use foa_tensor::{ClipTensor, Real};

/// Resolution of the half-resolution falloff, in degrees of eccentricity.
pub const HALF_RESOLUTION_DEGREES: f64 = 2.3;

/// Per-pixel resolution in [0, 255]; 255 is full resolution at a fixation.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ResolutionMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// 8-bit grayscale PNG.
    pub fn write_png(&self, path: &std::path::Path) -> Result<()> {
        let mut img =
            image::GrayImage::new(self.width as u32, self.height as u32);
        for (x, y, px) in img.enumerate_pixels_mut() {
            *px = image::Luma([self.at(y as usize, x as usize).round().clamp(0.0, 255.0) as u8]);
        }
        img.save(path).map_err(|e| AttentionError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }
}

/// The `n` highest-valued pixels as (row, col), ties resolved toward the
/// earlier pixel in row-major order.
pub fn extract_fixation_points(map: &FixationMap, n: usize) -> Vec<(usize, usize)> {
    let mut indexed: Vec<(usize, f64)> = map.data().iter().cloned().enumerate().collect();
    indexed.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    indexed
        .into_iter()
        .take(n)
        .map(|(i, _)| (i / map.width(), i % map.width()))
        .collect()
}

/// Resolution decaying with distance to the nearest fixation:
/// `255 * 2^(-d / 2.3deg)` with `d` in degrees.
pub fn build_resolution_map(
    points: &[(usize, usize)],
    px_per_degree: f64,
    shape: (usize, usize),
) -> Result<ResolutionMap> {
    if points.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "build_resolution_map",
            detail: "need at least one fixation point".into(),
        });
    }
    if px_per_degree <= 0.0 {
        return Err(AttentionError::InvalidInput {
            context: "build_resolution_map",
            detail: format!("px_per_degree must be positive, got {px_per_degree}"),
        });
    }
    let (height, width) = shape;
    let mut data = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            let mut nearest_sq = f64::INFINITY;
            for &(py, px) in points {
                let dy = row as f64 - py as f64;
                let dx = col as f64 - px as f64;
                nearest_sq = nearest_sq.min(dy * dy + dx * dx);
            }
            let degrees = nearest_sq.sqrt() / px_per_degree;
            data[row * width + col] =
                (255.0 * (-degrees / HALF_RESOLUTION_DEGREES).exp2()).clamp(0.0, 255.0);
        }
    }
    Ok(ResolutionMap {
        height,
        width,
        data,
    })
}

/// Progressively low-passed and half-sampled copies of a frame; level 0 is
/// the original.
#[derive(Clone, Debug)]
pub struct FoveationPyramid<T: Real> {
    pub levels: Vec<ClipTensor<T>>,
}

impl<T: Real> FoveationPyramid<T> {
    /// Builds `level_count` levels with a separable binomial low-pass
    /// (1,4,6,4,1)/16 and factor-2 decimation, replicating borders.
    pub fn build(frame: &ClipTensor<T>, level_count: usize) -> Result<Self> {
        if level_count < 2 {
            return Err(AttentionError::InvalidInput {
                context: "FoveationPyramid::build",
                detail: format!("need at least 2 levels, got {level_count}"),
            });
        }
        let (t, _, _, _) = frame.shape();
        if t != 1 {
            return Err(AttentionError::InvalidInput {
                context: "FoveationPyramid::build",
                detail: "pyramids are built per frame (T = 1)".into(),
            });
        }
        let mut levels = vec![frame.clone()];
        for _ in 1..level_count {
            let prev = levels.last().unwrap();
            let blurred = binomial_lowpass(prev);
            levels.push(decimate2(&blurred));
        }
        Ok(Self { levels })
    }
}

/// Separable 5-tap binomial blur with replicated borders.
pub fn binomial_lowpass<T: Real>(frame: &ClipTensor<T>) -> ClipTensor<T> {
    const TAPS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (_, h, w, c) = frame.shape();
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    // Horizontal pass.
    let mut tmp = vec![0.0f64; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, tap) in TAPS.iter().enumerate() {
                    let sx = clamp(x as i64 + k as i64 - 2, w);
                    acc += tap * frame.at(0, y, sx, ch).as_f64();
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }
    // Vertical pass.
    let mut out = ClipTensor::zeros((1, h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, tap) in TAPS.iter().enumerate() {
                    let sy = clamp(y as i64 + k as i64 - 2, h);
                    acc += tap * tmp[(sy * w + x) * c + ch];
                }
                *out.at_mut(0, y, x, ch) = T::from_f64(acc);
            }
        }
    }
    out
}

fn decimate2<T: Real>(frame: &ClipTensor<T>) -> ClipTensor<T> {
    let (_, h, w, c) = frame.shape();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = ClipTensor::zeros((1, oh, ow, c));
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                *out.at_mut(0, y, x, ch) = frame.at(0, (2 * y).min(h - 1), (2 * x).min(w - 1), ch);
            }
        }
    }
    out
}

/// Renders a foveated frame: each pixel selects a pyramid depth proportional
/// to `255 - resolution` and blends the two neighbouring levels (after
/// upsampling each back to full size). Pixels at resolution 255 reproduce
/// level 0 exactly.
pub fn foveate_frame<T: Real>(
    frame: &ClipTensor<T>,
    res_map: &ResolutionMap,
    level_count: usize,
) -> Result<ClipTensor<T>> {
    let (_, h, w, c) = frame.shape();
    if (res_map.height, res_map.width) != (h, w) {
        return Err(AttentionError::ShapeMismatch {
            context: "foveate_frame",
            expected: format!("{h}x{w} resolution map"),
            got: format!("{}x{}", res_map.height, res_map.width),
        });
    }
    let pyramid = FoveationPyramid::build(frame, level_count)?;
    let upsampled: Vec<ClipTensor<T>> = pyramid
        .levels
        .iter()
        .map(|level| foa_tensor::bilinear_upsample(level, (h, w)))
        .collect::<std::result::Result<_, _>>()?;

    let mut out = ClipTensor::zeros((1, h, w, c));
    let max_level = (level_count - 1) as f64;
    for y in 0..h {
        for x in 0..w {
            // Continuous pyramid depth, 0 at full resolution.
            let depth = (255.0 - res_map.at(y, x)) / 255.0 * max_level;
            let lo = depth.floor() as usize;
            let frac = depth - lo as f64;
            for ch in 0..c {
                let v = if frac == 0.0 {
                    upsampled[lo].at(0, y, x, ch)
                } else {
                    let a = upsampled[lo].at(0, y, x, ch).as_f64();
                    let b = upsampled[lo + 1].at(0, y, x, ch).as_f64();
                    T::from_f64(a * (1.0 - frac) + b * frac)
                };
                *out.at_mut(0, y, x, ch) = v;
            }
        }
    }
    Ok(out)
}

/// Average resolution of a foveated video. The literal statistic sums all
/// pixels of each frame's resolution map and averages over frames only; the
/// per-pixel mean is reported alongside for unit clarity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VideoResolution {
    /// (1/N) * sum over frames of (sum over pixels).
    pub summed_per_frame: f64,
    /// Mean over all pixels of all frames, in [0, 255].
    pub per_pixel_mean: f64,
}

pub fn average_resolution(res_maps: &[ResolutionMap]) -> Result<VideoResolution> {
    if res_maps.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "average_resolution",
            detail: "need at least one frame".into(),
        });
    }
    let frames = res_maps.len() as f64;
    let total: f64 = res_maps.iter().map(|m| m.data.iter().sum::<f64>()).sum();
    let pixels: usize = res_maps.iter().map(|m| m.data.len()).sum();
    Ok(VideoResolution {
        summed_per_frame: total / frames,
        per_pixel_mean: total / pixels as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixmap::tests::gaussian_map;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_peak_map_yields_the_peak_pixel() {
        let map = gaussian_map(16, 16, 10.0, 6.0, 4.0);
        let points = extract_fixation_points(&map, 1);
        assert_eq!(points, vec![(6, 10)]);
    }

    #[test]
    fn uniform_map_ties_break_row_major() {
        let map = FixationMap::uniform(4, 4);
        let points = extract_fixation_points(&map, 3);
        assert_eq!(points, vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn top_n_matches_full_sort_oracle() {
        let map = gaussian_map(12, 12, 3.0, 8.0, 6.0);
        let n = 25;
        let points = extract_fixation_points(&map, n);
        let mut all: Vec<(f64, usize)> = map
            .data()
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let expect: Vec<(usize, usize)> =
            all[..n].iter().map(|&(_, i)| (i / 12, i % 12)).collect();
        assert_eq!(points, expect);
    }

    #[test]
    fn resolution_map_definition_points() {
        let points = vec![(8usize, 8usize)];
        let px_per_degree = 4.0;
        let res = build_resolution_map(&points, px_per_degree, (17, 17)).unwrap();
        assert_abs_diff_eq!(res.at(8, 8), 255.0, epsilon = 1e-12);
        // Eight pixels along the row = 2 degrees at 4 px/degree.
        let d_deg = 8.0 / px_per_degree;
        let expect = 255.0 * (-d_deg / HALF_RESOLUTION_DEGREES).exp2();
        assert_abs_diff_eq!(res.at(8, 16), expect, epsilon = 1e-9);
    }

    #[test]
    fn half_resolution_at_half_distance_scale() {
        // Choose px_per_degree so that 2.3 degrees lands on a grid point.
        let res = build_resolution_map(&[(0, 0)], 10.0 / 2.3, (1, 16)).unwrap();
        assert_abs_diff_eq!(res.at(0, 10), 127.5, epsilon = 1e-9);
    }

    #[test]
    fn nearest_point_brute_force_agreement() {
        let points = vec![(2usize, 3usize), (9, 12), (14, 1)];
        let res = build_resolution_map(&points, 3.0, (16, 16)).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                let mut best = f64::INFINITY;
                for &(py, px) in &points {
                    let d = ((row as f64 - py as f64).powi(2)
                        + (col as f64 - px as f64).powi(2))
                    .sqrt();
                    best = best.min(d);
                }
                let expect = 255.0 * (-(best / 3.0) / HALF_RESOLUTION_DEGREES).exp2();
                assert_abs_diff_eq!(res.at(row, col), expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn resolution_monotone_in_added_points() {
        let base = build_resolution_map(&[(4, 4)], 3.0, (12, 12)).unwrap();
        let more = build_resolution_map(&[(4, 4), (10, 10)], 3.0, (12, 12)).unwrap();
        for (b, m) in base.data.iter().zip(more.data.iter()) {
            assert!(m >= b);
        }
    }

    fn test_frame(h: usize, w: usize) -> ClipTensor<f64> {
        ClipTensor::new(
            (1, h, w, 1),
            (0..h * w)
                .map(|i| ((i % 7) as f64 * 0.13 + (i / 7) as f64 * 0.07) % 1.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn full_resolution_is_identity_bit_exact() {
        let frame = test_frame(16, 16);
        let res = ResolutionMap {
            height: 16,
            width: 16,
            data: vec![255.0; 256],
        };
        let out = foveate_frame(&frame, &res, 4).unwrap();
        assert_eq!(out, frame);
    }

    #[test]
    fn zero_resolution_is_coarsest_level_upsampled() {
        let frame = test_frame(16, 16);
        let res = ResolutionMap {
            height: 16,
            width: 16,
            data: vec![0.0; 256],
        };
        let out = foveate_frame(&frame, &res, 3).unwrap();
        let pyramid = FoveationPyramid::build(&frame, 3).unwrap();
        let coarsest = foa_tensor::bilinear_upsample(&pyramid.levels[2], (16, 16)).unwrap();
        assert_eq!(out, coarsest);
    }

    #[test]
    fn mid_gradient_blend_matches_per_pixel_formula() {
        let frame = test_frame(8, 8);
        let data: Vec<f64> = (0..64).map(|i| i as f64 * 4.0).collect();
        let res = ResolutionMap {
            height: 8,
            width: 8,
            data,
        };
        let levels = 3;
        let out = foveate_frame(&frame, &res, levels).unwrap();
        let pyramid = FoveationPyramid::build(&frame, levels).unwrap();
        let up: Vec<ClipTensor<f64>> = pyramid
            .levels
            .iter()
            .map(|l| foa_tensor::bilinear_upsample(l, (8, 8)).unwrap())
            .collect();
        for y in 0..8 {
            for x in 0..8 {
                let depth = (255.0 - res.at(y, x)) / 255.0 * 2.0;
                let lo = depth.floor() as usize;
                let frac = depth - lo as f64;
                let expect = if frac == 0.0 {
                    up[lo].at(0, y, x, 0)
                } else {
                    up[lo].at(0, y, x, 0) * (1.0 - frac) + up[lo + 1].at(0, y, x, 0) * frac
                };
                assert_abs_diff_eq!(out.at(0, y, x, 0), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_single_level() {
        let frame = test_frame(8, 8);
        let res = ResolutionMap {
            height: 8,
            width: 8,
            data: vec![255.0; 64],
        };
        assert!(foveate_frame(&frame, &res, 1).is_err());
    }

    #[test]
    fn lowpass_does_not_increase_total_variation() {
        let frame = test_frame(24, 24);
        let blurred = binomial_lowpass(&frame);
        let tv = |f: &ClipTensor<f64>| {
            let mut acc = 0.0;
            for y in 0..24 {
                for x in 0..23 {
                    acc += (f.at(0, y, x + 1, 0) - f.at(0, y, x, 0)).abs();
                }
            }
            for y in 0..23 {
                for x in 0..24 {
                    acc += (f.at(0, y + 1, x, 0) - f.at(0, y, x, 0)).abs();
                }
            }
            acc
        };
        assert!(tv(&blurred) <= tv(&frame) + 1e-12);
    }

    #[test]
    fn average_resolution_definitions() {
        let full = ResolutionMap {
            height: 2,
            width: 3,
            data: vec![255.0; 6],
        };
        let empty = ResolutionMap {
            height: 2,
            width: 3,
            data: vec![0.0; 6],
        };
        let v = average_resolution(&[full.clone(), empty]).unwrap();
        // Literal reading: (255*6 + 0) / 2 frames.
        assert_abs_diff_eq!(v.summed_per_frame, 255.0 * 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.per_pixel_mean, 127.5, epsilon = 1e-12);

        let solo = average_resolution(&[full]).unwrap();
        assert_abs_diff_eq!(solo.summed_per_frame, 255.0 * 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(solo.per_pixel_mean, 255.0, epsilon = 1e-12);
    }

    #[test]
    fn sparser_fixations_lower_average_resolution() {
        let many: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i * 4, j * 4)))
            .collect();
        let few = vec![(8usize, 8usize)];
        let res_many = build_resolution_map(&many, 2.0, (20, 20)).unwrap();
        let res_few = build_resolution_map(&few, 2.0, (20, 20)).unwrap();
        let v_many = average_resolution(&[res_many]).unwrap();
        let v_few = average_resolution(&[res_few]).unwrap();
        assert!(v_few.per_pixel_mean < v_many.per_pixel_mean);
    }
}
