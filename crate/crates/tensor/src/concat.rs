use crate::{ClipTensor, Real, Result, TensorError};

/// Concatenates two tensors along the channel axis.
pub fn concat_channels<T: Real>(a: &ClipTensor<T>, b: &ClipTensor<T>) -> Result<ClipTensor<T>> {
    let (ta, ha, wa, ca) = a.shape();
    let (tb, hb, wb, cb) = b.shape();
    if (ta, ha, wa) != (tb, hb, wb) {
        return Err(TensorError::ShapeMismatch {
            context: "concat_channels",
            expected: format!("{:?}", (ta, ha, wa)),
            got: format!("{:?}", (tb, hb, wb)),
        });
    }
    let c = ca + cb;
    let mut data = Vec::with_capacity(ta * ha * wa * c);
    for t in 0..ta {
        for h in 0..ha {
            for w in 0..wa {
                let ia = a.index(t, h, w, 0);
                let ib = b.index(t, h, w, 0);
                data.extend_from_slice(&a.data()[ia..ia + ca]);
                data.extend_from_slice(&b.data()[ib..ib + cb]);
            }
        }
    }
    ClipTensor::new((ta, ha, wa, c), data)
}

/// Splits the upstream gradient of [`concat_channels`] back into the two
/// operand gradients; `ca` is the first operand's channel count.
pub fn split_channels_backward<T: Real>(
    upstream: &ClipTensor<T>,
    ca: usize,
) -> Result<(ClipTensor<T>, ClipTensor<T>)> {
    let (t, h, w, c) = upstream.shape();
    if ca == 0 || ca >= c {
        return Err(TensorError::InvalidDimension {
            context: "split_channels_backward",
            detail: format!("split point {ca} outside 1..{c}"),
        });
    }
    let cb = c - ca;
    let mut da = Vec::with_capacity(t * h * w * ca);
    let mut db = Vec::with_capacity(t * h * w * cb);
    for ti in 0..t {
        for hi in 0..h {
            for wi in 0..w {
                let i = upstream.index(ti, hi, wi, 0);
                da.extend_from_slice(&upstream.data()[i..i + ca]);
                db.extend_from_slice(&upstream.data()[i + ca..i + c]);
            }
        }
    }
    Ok((
        ClipTensor::new((t, h, w, ca), da)?,
        ClipTensor::new((t, h, w, cb), db)?,
    ))
}
