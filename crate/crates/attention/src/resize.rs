//! Data-preparation resampling: bilinear resize (up or down), cropping and
//! mirroring for clips and maps. These feed the training pipeline and carry
//! no gradients; the differentiable upsampler lives in the tensor crate.

use crate::{AttentionError, FixationMap, Result};
use foa_tensor::{ClipTensor, Real};

fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if dst == 1 || src == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Bilinear resize of every frame, align-corners convention, any target size.
pub fn resize_clip<T: Real>(clip: &ClipTensor<T>, target: (usize, usize)) -> Result<ClipTensor<T>> {
    let (t, h, w, c) = clip.shape();
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(AttentionError::InvalidInput {
            context: "resize_clip",
            detail: "target dims must be >= 1".into(),
        });
    }
    if (th, tw) == (h, w) {
        return Ok(clip.clone());
    }
    let rows = taps(h, th);
    let cols = taps(w, tw);
    let mut out = ClipTensor::zeros((t, th, tw, c));
    for ti in 0..t {
        for (yo, &(r0, r1, rf)) in rows.iter().enumerate() {
            for (xo, &(c0, c1, cf)) in cols.iter().enumerate() {
                for ch in 0..c {
                    let v00 = clip.at(ti, r0, c0, ch).as_f64();
                    let v01 = clip.at(ti, r0, c1, ch).as_f64();
                    let v10 = clip.at(ti, r1, c0, ch).as_f64();
                    let v11 = clip.at(ti, r1, c1, ch).as_f64();
                    let top = v00 * (1.0 - cf) + v01 * cf;
                    let bot = v10 * (1.0 - cf) + v11 * cf;
                    *out.at_mut(ti, yo, xo, ch) = T::from_f64(top * (1.0 - rf) + bot * rf);
                }
            }
        }
    }
    Ok(out)
}

/// Bilinear resize of a map followed by renormalization.
pub fn resize_map(map: &FixationMap, target: (usize, usize)) -> Result<FixationMap> {
    let clip = map.to_clip_tensor::<f64>();
    let resized = resize_clip(&clip, target)?;
    FixationMap::new(target.0, target.1, resized.into_data())?.normalize()
}

/// Axis-aligned crop of every frame.
pub fn crop_clip<T: Real>(
    clip: &ClipTensor<T>,
    top: usize,
    left: usize,
    size: (usize, usize),
) -> Result<ClipTensor<T>> {
    let (t, h, w, c) = clip.shape();
    let (ch_, cw) = size;
    if top + ch_ > h || left + cw > w {
        return Err(AttentionError::InvalidInput {
            context: "crop_clip",
            detail: format!(
                "crop {top},{left}+{ch_}x{cw} exceeds frame {h}x{w}"
            ),
        });
    }
    let mut out = ClipTensor::zeros((t, ch_, cw, c));
    for ti in 0..t {
        for y in 0..ch_ {
            for x in 0..cw {
                for chn in 0..c {
                    *out.at_mut(ti, y, x, chn) = clip.at(ti, top + y, left + x, chn);
                }
            }
        }
    }
    Ok(out)
}

/// Crop of a map with renormalization; a crop with no mass (possible only at
/// extreme distances from every fixation) falls back to uniform.
pub fn crop_map(
    map: &FixationMap,
    top: usize,
    left: usize,
    size: (usize, usize),
) -> Result<FixationMap> {
    let (h, w) = map.shape();
    if top + size.0 > h || left + size.1 > w {
        return Err(AttentionError::InvalidInput {
            context: "crop_map",
            detail: format!("crop exceeds map {h}x{w}"),
        });
    }
    let mut data = Vec::with_capacity(size.0 * size.1);
    for y in 0..size.0 {
        for x in 0..size.1 {
            data.push(map.at(top + y, left + x));
        }
    }
    let cropped = FixationMap::new(size.0, size.1, data)?;
    if cropped.sum() <= f64::MIN_POSITIVE {
        return Ok(FixationMap::uniform(size.0, size.1));
    }
    cropped.normalize()
}

/// Horizontal mirror of every frame.
pub fn mirror_clip<T: Real>(clip: &ClipTensor<T>) -> ClipTensor<T> {
    let (t, h, w, c) = clip.shape();
    let mut out = ClipTensor::zeros((t, h, w, c));
    for ti in 0..t {
        for y in 0..h {
            for x in 0..w {
                for chn in 0..c {
                    *out.at_mut(ti, y, x, chn) = clip.at(ti, y, w - 1 - x, chn);
                }
            }
        }
    }
    out
}

pub fn mirror_map(map: &FixationMap) -> FixationMap {
    let (h, w) = map.shape();
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = map.at(y, w - 1 - x);
        }
    }
    let mut out = FixationMap::new(h, w, data).expect("mirror preserves invariants");
    if map.is_normalized() {
        out = out.normalize().expect("mirror preserves mass");
    }
    out
}

/// Horizontal shift with mirror fill on the vacated border, per-frame.
pub fn shift_clip_mirror<T: Real>(clip: &ClipTensor<T>, shift: i64) -> Result<ClipTensor<T>> {
    let (t, h, w, c) = clip.shape();
    if shift.unsigned_abs() as usize >= w {
        return Err(AttentionError::InvalidInput {
            context: "shift_clip_mirror",
            detail: format!("shift {shift} exceeds frame width {w}"),
        });
    }
    let mut out = ClipTensor::zeros((t, h, w, c));
    for ti in 0..t {
        for y in 0..h {
            for x in 0..w {
                let src = mirror_index(x as i64 - shift, w);
                for chn in 0..c {
                    *out.at_mut(ti, y, x, chn) = clip.at(ti, y, src, chn);
                }
            }
        }
    }
    Ok(out)
}

pub fn shift_map_mirror(map: &FixationMap, shift: i64) -> Result<FixationMap> {
    let (h, w) = map.shape();
    if shift.unsigned_abs() as usize >= w {
        return Err(AttentionError::InvalidInput {
            context: "shift_map_mirror",
            detail: format!("shift {shift} exceeds map width {w}"),
        });
    }
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = map.at(y, mirror_index(x as i64 - shift, w));
        }
    }
    FixationMap::new(h, w, data)?.normalize()
}

/// Reflects an out-of-range column index back into [0, w).
fn mirror_index(x: i64, w: usize) -> usize {
    let w = w as i64;
    let mut x = x;
    if x < 0 {
        x = -x - 1;
    }
    if x >= w {
        x = 2 * w - 1 - x;
    }
    x.clamp(0, w - 1) as usize
}
