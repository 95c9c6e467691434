use crate::{ClipTensor, Real, Result, TensorError};

/// Border handling of a 3D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding sized to preserve the input dimensions. Padded values are
    /// constant and unrelated to the input, which is the positional signal the
    /// central-bias experiment studies.
    ZeroSame,
    /// No padding: output shrinks by (kernel - 1) along each axis.
    None,
}

/// Learnable weights of one 3D convolution.
///
/// Weights are stored row-major as `w[out][in][p][q][r]` where `p` runs along
/// height, `q` along width and `r` along time; one bias per output channel.
#[derive(Clone, Debug)]
pub struct Conv3dKernel<T: Real> {
    weights: Vec<T>,
    bias: Vec<T>,
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    kt: usize,
    padding: Padding,
}

impl<T: Real> Conv3dKernel<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        (kh, kw, kt): (usize, usize, usize),
        padding: Padding,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if kh == 0 || kw == 0 || kt == 0 || out_channels == 0 || in_channels == 0 {
            return Err(TensorError::InvalidDimension {
                context: "Conv3dKernel::new",
                detail: format!(
                    "channels and kernel dims must be >= 1, got out={out_channels} in={in_channels} k=({kh},{kw},{kt})"
                ),
            });
        }
        if padding == Padding::ZeroSame && (kh % 2 == 0 || kw % 2 == 0 || kt % 2 == 0) {
            return Err(TensorError::Unsupported {
                context: "Conv3dKernel::new",
                detail: "dimension-preserving zero padding requires odd kernel sizes".into(),
            });
        }
        let expected = out_channels * in_channels * kh * kw * kt;
        if weights.len() != expected || bias.len() != out_channels {
            return Err(TensorError::ShapeMismatch {
                context: "Conv3dKernel::new",
                expected: format!("{expected} weights, {out_channels} biases"),
                got: format!("{} weights, {} biases", weights.len(), bias.len()),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite {
                context: "Conv3dKernel::new",
            });
        }
        Ok(Self {
            weights,
            bias,
            out_channels,
            in_channels,
            kh,
            kw,
            kt,
            padding,
        })
    }

    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        k: (usize, usize, usize),
        padding: Padding,
    ) -> Self {
        let n = out_channels * in_channels * k.0 * k.1 * k.2;
        Self::new(
            out_channels,
            in_channels,
            k,
            padding,
            vec![T::zero(); n],
            vec![T::zero(); out_channels],
        )
        .expect("zero kernel is valid")
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
    pub fn kernel_dims(&self) -> (usize, usize, usize) {
        (self.kh, self.kw, self.kt)
    }
    pub fn padding(&self) -> Padding {
        self.padding
    }

    #[inline]
    pub fn weight_index(&self, j: usize, m: usize, p: usize, q: usize, r: usize) -> usize {
        (((j * self.in_channels + m) * self.kh + p) * self.kw + q) * self.kt + r
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }
    pub fn bias(&self) -> &[T] {
        &self.bias
    }
    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weights repacked as `[r][p][q][m][j]` so inner loops run contiguous.
    fn repack(&self) -> Vec<f64> {
        let (jn, mn) = (self.out_channels, self.in_channels);
        let mut packed = vec![0f64; self.weights.len()];
        for j in 0..jn {
            for m in 0..mn {
                for p in 0..self.kh {
                    for q in 0..self.kw {
                        for r in 0..self.kt {
                            let src = self.weight_index(j, m, p, q, r);
                            let dst = (((r * self.kh + p) * self.kw + q) * mn + m) * jn + j;
                            packed[dst] = self.weights[src].as_f64();
                        }
                    }
                }
            }
        }
        packed
    }

    fn output_shape(&self, input: &ClipTensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (t, h, w, c) = input.shape();
        if c != self.in_channels {
            return Err(TensorError::ShapeMismatch {
                context: "conv3d",
                expected: format!("{} input channels", self.in_channels),
                got: format!("{c}"),
            });
        }
        match self.padding {
            Padding::ZeroSame => Ok((t, h, w, self.out_channels)),
            Padding::None => {
                if h < self.kh || w < self.kw || t < self.kt {
                    return Err(TensorError::InvalidDimension {
                        context: "conv3d",
                        detail: format!(
                            "unpadded input {:?} smaller than kernel ({},{},{})",
                            (t, h, w),
                            self.kh,
                            self.kw,
                            self.kt
                        ),
                    });
                }
                Ok((
                    t - self.kt + 1,
                    h - self.kh + 1,
                    w - self.kw + 1,
                    self.out_channels,
                ))
            }
        }
    }

    fn offsets(&self) -> (isize, isize, isize) {
        match self.padding {
            Padding::ZeroSame => (
                -((self.kh as isize - 1) / 2),
                -((self.kw as isize - 1) / 2),
                -((self.kt as isize - 1) / 2),
            ),
            Padding::None => (0, 0, 0),
        }
    }
}

/// Per-parameter gradients mirroring the kernel layout.
#[derive(Clone, Debug)]
pub struct KernelGradients<T: Real> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// 3D convolution striding along height, width and time.
///
/// Each output value is the kernel bias plus the triple sum over kernel
/// offsets and input channels of weight times input, with zeros substituted
/// outside the border under [`Padding::ZeroSame`].
pub fn conv3d_forward<T: Real>(
    input: &ClipTensor<T>,
    kernel: &Conv3dKernel<T>,
) -> Result<ClipTensor<T>> {
    let (ot, oh, ow, oc) = kernel.output_shape(input)?;
    let (it, ih, iw, ic) = input.shape();
    let (dh, dw, dt) = kernel.offsets();
    let packed = kernel.repack();
    let (kh, kw, kt) = kernel.kernel_dims();
    let jn = oc;
    let mn = ic;

    let in_data = input.data();
    let mut out = vec![T::zero(); ot * oh * ow * oc];
    let mut acc = vec![0f64; jn];
    let bias: Vec<f64> = kernel.bias.iter().map(|b| b.as_f64()).collect();

    for to in 0..ot {
        for xo in 0..oh {
            for yo in 0..ow {
                acc.copy_from_slice(&bias);
                for r in 0..kt {
                    let ti = to as isize + r as isize + dt;
                    if ti < 0 || ti >= it as isize {
                        continue;
                    }
                    for p in 0..kh {
                        let xi = xo as isize + p as isize + dh;
                        if xi < 0 || xi >= ih as isize {
                            continue;
                        }
                        for q in 0..kw {
                            let yi = yo as isize + q as isize + dw;
                            if yi < 0 || yi >= iw as isize {
                                continue;
                            }
                            let in_base =
                                ((ti as usize * ih + xi as usize) * iw + yi as usize) * ic;
                            let k_base = ((r * kh + p) * kw + q) * mn * jn;
                            let in_row = &in_data[in_base..in_base + mn];
                            for (m, iv) in in_row.iter().enumerate() {
                                let x = iv.as_f64();
                                let k_row = &packed[k_base + m * jn..k_base + (m + 1) * jn];
                                for (a, kv) in acc.iter_mut().zip(k_row.iter()) {
                                    *a += x * kv;
                                }
                            }
                        }
                    }
                }
                let out_base = ((to * oh + xo) * ow + yo) * oc;
                for (o, a) in out[out_base..out_base + oc].iter_mut().zip(acc.iter()) {
                    *o = T::from_f64(*a);
                }
            }
        }
    }
    ClipTensor::new((ot, oh, ow, oc), out)
}

/// Reverse-mode pass of [`conv3d_forward`] for the scalar
/// `<upstream, output>`: returns parameter gradients and the input gradient.
pub fn conv3d_backward<T: Real>(
    input: &ClipTensor<T>,
    kernel: &Conv3dKernel<T>,
    upstream: &ClipTensor<T>,
) -> Result<(KernelGradients<T>, ClipTensor<T>)> {
    let expected = kernel.output_shape(input)?;
    if upstream.shape() != expected {
        return Err(TensorError::ShapeMismatch {
            context: "conv3d_backward",
            expected: format!("{expected:?}"),
            got: format!("{:?}", upstream.shape()),
        });
    }
    let (ot, oh, ow, oc) = expected;
    let (it, ih, iw, ic) = input.shape();
    let (dh, dw, dt) = kernel.offsets();
    let packed = kernel.repack();
    let (kh, kw, kt) = kernel.kernel_dims();
    let jn = oc;
    let mn = ic;

    let in_data = input.data();
    let up_data = upstream.data();
    // Gradients accumulate in f64; weight gradients use the packed layout
    // and are unpacked at the end.
    let mut dw_acc = vec![0f64; packed.len()];
    let mut db_acc = vec![0f64; jn];
    let mut din_acc = vec![0f64; in_data.len()];
    let mut up_row_f64 = vec![0f64; jn];

    for to in 0..ot {
        for xo in 0..oh {
            for yo in 0..ow {
                let up_base = ((to * oh + xo) * ow + yo) * oc;
                let up_row = &up_data[up_base..up_base + jn];
                for (dst, u) in up_row_f64.iter_mut().zip(up_row.iter()) {
                    *dst = u.as_f64();
                }
                for (db, u) in db_acc.iter_mut().zip(up_row_f64.iter()) {
                    *db += u;
                }
                for r in 0..kt {
                    let ti = to as isize + r as isize + dt;
                    if ti < 0 || ti >= it as isize {
                        continue;
                    }
                    for p in 0..kh {
                        let xi = xo as isize + p as isize + dh;
                        if xi < 0 || xi >= ih as isize {
                            continue;
                        }
                        for q in 0..kw {
                            let yi = yo as isize + q as isize + dw;
                            if yi < 0 || yi >= iw as isize {
                                continue;
                            }
                            let in_base =
                                ((ti as usize * ih + xi as usize) * iw + yi as usize) * ic;
                            let k_base = ((r * kh + p) * kw + q) * mn * jn;
                            for m in 0..mn {
                                let x = in_data[in_base + m].as_f64();
                                let k_row = &packed[k_base + m * jn..k_base + (m + 1) * jn];
                                let dw_row = &mut dw_acc[k_base + m * jn..k_base + (m + 1) * jn];
                                let mut din = 0f64;
                                for j in 0..jn {
                                    let u = up_row_f64[j];
                                    dw_row[j] += x * u;
                                    din += k_row[j] * u;
                                }
                                din_acc[in_base + m] += din;
                            }
                        }
                    }
                }
            }
        }
    }

    // Unpack [r][p][q][m][j] back to the kernel's [j][m][p][q][r] layout.
    let mut dw = vec![T::zero(); kernel.weights.len()];
    for j in 0..jn {
        for m in 0..mn {
            for p in 0..kh {
                for q in 0..kw {
                    for r in 0..kt {
                        let src = (((r * kh + p) * kw + q) * mn + m) * jn + j;
                        dw[kernel.weight_index(j, m, p, q, r)] = T::from_f64(dw_acc[src]);
                    }
                }
            }
        }
    }
    let grads = KernelGradients {
        weights: dw,
        bias: db_acc.iter().map(|&v| T::from_f64(v)).collect(),
    };
    let din = ClipTensor::new(
        (it, ih, iw, ic),
        din_acc.iter().map(|&v| T::from_f64(v)).collect(),
    )?;
    Ok((grads, din))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degenerate_single_element() {
        let input = ClipTensor::new((1, 1, 1, 1), vec![3.0f64]).unwrap();
        let kernel =
            Conv3dKernel::new(1, 1, (1, 1, 1), Padding::ZeroSame, vec![2.0], vec![1.0]).unwrap();
        let out = conv3d_forward(&input, &kernel).unwrap();
        assert_abs_diff_eq!(out.at(0, 0, 0, 0), 7.0);
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let data: Vec<f64> = (0..2 * 4 * 4 * 2).map(|v| (v as f64).sin()).collect();
        let input = ClipTensor::new((2, 4, 4, 2), data).unwrap();
        // Delta at the kernel center, one per matching in/out channel pair.
        let mut kernel = Conv3dKernel::zeros(2, 2, (3, 3, 3), Padding::ZeroSame);
        for j in 0..2 {
            let idx = kernel.weight_index(j, j, 1, 1, 1);
            kernel.weights_mut()[idx] = 1.0;
        }
        let out = conv3d_forward(&input, &kernel).unwrap();
        for (a, b) in out.data().iter().zip(input.data().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_backward_chain_rule() {
        let input = ClipTensor::new((1, 1, 1, 1), vec![3.0f64]).unwrap();
        let kernel =
            Conv3dKernel::new(1, 1, (1, 1, 1), Padding::ZeroSame, vec![2.0], vec![1.0]).unwrap();
        let upstream = ClipTensor::new((1, 1, 1, 1), vec![1.0f64]).unwrap();
        let (grads, din) = conv3d_backward(&input, &kernel, &upstream).unwrap();
        assert_abs_diff_eq!(grads.weights[0], 3.0);
        assert_abs_diff_eq!(grads.bias[0], 1.0);
        assert_abs_diff_eq!(din.at(0, 0, 0, 0), 2.0);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let input = ClipTensor::new((2, 3, 3, 1), vec![1.0f64; 18]).unwrap();
        let kernel = Conv3dKernel::new(
            1,
            1,
            (3, 3, 1),
            Padding::ZeroSame,
            (0..9).map(|v| v as f64).collect(),
            vec![0.5],
        )
        .unwrap();
        let upstream = ClipTensor::zeros((2, 3, 3, 1));
        let (grads, din) = conv3d_backward(&input, &kernel, &upstream).unwrap();
        assert!(grads.weights.iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
        assert!(din.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_channel_mismatch() {
        let input = ClipTensor::<f32>::zeros((1, 2, 2, 3));
        let kernel = Conv3dKernel::<f32>::zeros(1, 2, (1, 1, 1), Padding::ZeroSame);
        assert!(conv3d_forward(&input, &kernel).is_err());
    }

    #[test]
    fn rejects_even_kernel_with_same_padding() {
        assert!(Conv3dKernel::<f32>::new(
            1,
            1,
            (2, 2, 1),
            Padding::ZeroSame,
            vec![0.0; 4],
            vec![0.0]
        )
        .is_err());
    }

    #[test]
    fn unpadded_output_shrinks() {
        let input = ClipTensor::<f64>::zeros((4, 5, 6, 1));
        let kernel = Conv3dKernel::<f64>::zeros(2, 1, (3, 3, 3), Padding::None);
        let out = conv3d_forward(&input, &kernel).unwrap();
        assert_eq!(out.shape(), (2, 3, 4, 2));
    }
}
