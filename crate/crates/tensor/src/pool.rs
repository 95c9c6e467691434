use crate::{ClipTensor, Real, Result, TensorError};

fn check_window<T: Real>(
    input: &ClipTensor<T>,
    window: (usize, usize, usize),
) -> Result<(usize, usize, usize, usize)> {
    let (wt, wh, ww) = window;
    if wt == 0 || wh == 0 || ww == 0 {
        return Err(TensorError::InvalidDimension {
            context: "maxpool3d",
            detail: "zero-sized pooling window".into(),
        });
    }
    let (t, h, w, c) = input.shape();
    if t % wt != 0 || h % wh != 0 || w % ww != 0 {
        return Err(TensorError::InvalidDimension {
            context: "maxpool3d",
            detail: format!(
                "input dims {:?} not divisible by window {:?}",
                (t, h, w),
                window
            ),
        });
    }
    Ok((t / wt, h / wh, w / ww, c))
}

/// 3D max-pooling with stride equal to the window size.
pub fn maxpool3d<T: Real>(
    input: &ClipTensor<T>,
    window: (usize, usize, usize),
) -> Result<ClipTensor<T>> {
    Ok(maxpool3d_with_argmax(input, window)?.0)
}

/// Max-pooling that also records, per output cell, the flat input index of
/// the maximal element. Ties go to the first element in (t, h, w) scan order
/// so the backward routing is deterministic.
pub fn maxpool3d_with_argmax<T: Real>(
    input: &ClipTensor<T>,
    window: (usize, usize, usize),
) -> Result<(ClipTensor<T>, Vec<usize>)> {
    let (ot, oh, ow, c) = check_window(input, window)?;
    let (wt, wh, ww) = window;
    let mut out = vec![T::zero(); ot * oh * ow * c];
    let mut argmax = vec![0usize; out.len()];
    for to in 0..ot {
        for xo in 0..oh {
            for yo in 0..ow {
                for ch in 0..c {
                    let mut best = T::neg_infinity();
                    let mut best_idx = 0usize;
                    for dt in 0..wt {
                        for dh in 0..wh {
                            for dw in 0..ww {
                                let idx =
                                    input.index(to * wt + dt, xo * wh + dh, yo * ww + dw, ch);
                                let v = input.data()[idx];
                                if v > best {
                                    best = v;
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    let o = ((to * oh + xo) * ow + yo) * c + ch;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }
    Ok((ClipTensor::new((ot, oh, ow, c), out)?, argmax))
}

/// Routes the upstream gradient to each window's argmax element.
pub fn maxpool3d_backward<T: Real>(
    input_shape: (usize, usize, usize, usize),
    argmax: &[usize],
    upstream: &ClipTensor<T>,
) -> Result<ClipTensor<T>> {
    if upstream.len() != argmax.len() {
        return Err(TensorError::ShapeMismatch {
            context: "maxpool3d_backward",
            expected: format!("{} upstream elements", argmax.len()),
            got: format!("{}", upstream.len()),
        });
    }
    let mut din = ClipTensor::zeros(input_shape);
    for (up, &idx) in upstream.data().iter().zip(argmax.iter()) {
        din.data_mut()[idx] += *up;
    }
    Ok(din)
}
