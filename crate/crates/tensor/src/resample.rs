use crate::{ClipTensor, Real, Result, TensorError};

/// Per-axis interpolation taps under the align-corners convention:
/// endpoints map to endpoints, interior positions blend two neighbours.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
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

fn check_upsample<T: Real>(input: &ClipTensor<T>, target: (usize, usize)) -> Result<()> {
    let (t, h, w, _) = input.shape();
    if t != 1 {
        return Err(TensorError::InvalidDimension {
            context: "bilinear_upsample",
            detail: format!("expected a single-frame tensor, got T={t}"),
        });
    }
    if target.0 < h || target.1 < w {
        return Err(TensorError::Unsupported {
            context: "bilinear_upsample",
            detail: format!("downscaling {:?} -> {:?} not supported", (h, w), target),
        });
    }
    if target.0 == 0 || target.1 == 0 {
        return Err(TensorError::InvalidDimension {
            context: "bilinear_upsample",
            detail: "target dims must be >= 1".into(),
        });
    }
    Ok(())
}

/// Bilinear upsampling of a single-frame tensor to `(H', W')`,
/// align-corners = true. Identity when the target equals the source size.
pub fn bilinear_upsample<T: Real>(
    input: &ClipTensor<T>,
    target: (usize, usize),
) -> Result<ClipTensor<T>> {
    check_upsample(input, target)?;
    let (_, h, w, c) = input.shape();
    let (th, tw) = target;
    if (th, tw) == (h, w) {
        return Ok(input.clone());
    }
    let rows = axis_taps(h, th);
    let cols = axis_taps(w, tw);
    let mut out = vec![T::zero(); th * tw * c];
    for (xo, &(r0, r1, rf)) in rows.iter().enumerate() {
        for (yo, &(c0, c1, cf)) in cols.iter().enumerate() {
            for ch in 0..c {
                let v00 = input.at(0, r0, c0, ch).as_f64();
                let v01 = input.at(0, r0, c1, ch).as_f64();
                let v10 = input.at(0, r1, c0, ch).as_f64();
                let v11 = input.at(0, r1, c1, ch).as_f64();
                let top = v00 * (1.0 - cf) + v01 * cf;
                let bot = v10 * (1.0 - cf) + v11 * cf;
                out[(xo * tw + yo) * c + ch] = T::from_f64(top * (1.0 - rf) + bot * rf);
            }
        }
    }
    ClipTensor::new((1, th, tw, c), out)
}

/// Transpose of [`bilinear_upsample`]: scatters the upstream gradient back
/// through the interpolation weights.
pub fn bilinear_upsample_backward<T: Real>(
    input_shape: (usize, usize, usize, usize),
    upstream: &ClipTensor<T>,
) -> Result<ClipTensor<T>> {
    let (t, h, w, c) = input_shape;
    if t != 1 {
        return Err(TensorError::InvalidDimension {
            context: "bilinear_upsample_backward",
            detail: "input shape must have T=1".into(),
        });
    }
    let (ut, th, tw, uc) = upstream.shape();
    if ut != 1 || uc != c || th < h || tw < w {
        return Err(TensorError::ShapeMismatch {
            context: "bilinear_upsample_backward",
            expected: format!("(1, >={h}, >={w}, {c})"),
            got: format!("{:?}", upstream.shape()),
        });
    }
    if (th, tw) == (h, w) {
        return Ok(upstream.clone());
    }
    let rows = axis_taps(h, th);
    let cols = axis_taps(w, tw);
    let mut acc = vec![0f64; h * w * c];
    for (xo, &(r0, r1, rf)) in rows.iter().enumerate() {
        for (yo, &(c0, c1, cf)) in cols.iter().enumerate() {
            for ch in 0..c {
                let u = upstream.at(0, xo, yo, ch).as_f64();
                acc[(r0 * w + c0) * c + ch] += u * (1.0 - rf) * (1.0 - cf);
                acc[(r0 * w + c1) * c + ch] += u * (1.0 - rf) * cf;
                acc[(r1 * w + c0) * c + ch] += u * rf * (1.0 - cf);
                acc[(r1 * w + c1) * c + ch] += u * rf * cf;
            }
        }
    }
    ClipTensor::new(
        (1, h, w, c),
        acc.iter().map(|&v| T::from_f64(v)).collect(),
    )
}
