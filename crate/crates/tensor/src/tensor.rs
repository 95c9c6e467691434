use crate::{Real, Result, TensorError};

/// Dense 4-D array over (frames, height, width, channels), row-major with
/// channels fastest. The universal carrier for video clips, flow fields and
/// score maps; 2-D data travels as `T = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipTensor<T: Real> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> ClipTensor<T> {
    /// Builds a tensor from raw data, validating the shape/data invariants.
    pub fn new(shape: (usize, usize, usize, usize), data: Vec<T>) -> Result<Self> {
        let (t, h, w, c) = shape;
        if t == 0 || h == 0 || w == 0 || c == 0 {
            return Err(TensorError::InvalidDimension {
                context: "ClipTensor::new",
                detail: format!("all dims must be >= 1, got {:?}", shape),
            });
        }
        let len = t * h * w * c;
        if data.len() != len {
            return Err(TensorError::ShapeMismatch {
                context: "ClipTensor::new",
                expected: format!("{} elements for shape {:?}", len, shape),
                got: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite {
                context: "ClipTensor::new",
            });
        }
        Ok(Self {
            shape: [t, h, w, c],
            data,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: (usize, usize, usize, usize)) -> Self {
        let (t, h, w, c) = shape;
        assert!(t >= 1 && h >= 1 && w >= 1 && c >= 1, "dims must be >= 1");
        Self {
            shape: [t, h, w, c],
            data: vec![T::zero(); t * h * w * c],
        }
    }

    /// Tensor filled with a constant.
    pub fn full(shape: (usize, usize, usize, usize), value: T) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        let [t, h, w, c] = self.shape;
        (t, h, w, c)
    }

    pub fn frames(&self) -> usize {
        self.shape[0]
    }
    pub fn height(&self) -> usize {
        self.shape[1]
    }
    pub fn width(&self) -> usize {
        self.shape[2]
    }
    pub fn channels(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline(always)]
    pub fn index(&self, t: usize, h: usize, w: usize, c: usize) -> usize {
        ((t * self.shape[1] + h) * self.shape[2] + w) * self.shape[3] + c
    }

    #[inline(always)]
    pub fn at(&self, t: usize, h: usize, w: usize, c: usize) -> T {
        self.data[self.index(t, h, w, c)]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, t: usize, h: usize, w: usize, c: usize) -> &mut T {
        let i = self.index(t, h, w, c);
        &mut self.data[i]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Element-wise map into a new tensor.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sum of all elements, accumulated in f64.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    /// Converts element type, used to run f32 graphs under f64 verification.
    pub fn cast<U: Real>(&self) -> ClipTensor<U> {
        ClipTensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Single frame extracted as a `T = 1` tensor.
    pub fn frame(&self, t: usize) -> Self {
        let (_, h, w, c) = self.shape();
        let stride = h * w * c;
        Self {
            shape: [1, h, w, c],
            data: self.data[t * stride..(t + 1) * stride].to_vec(),
        }
    }

    /// Checks every element is finite; layers call this after reductions.
    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { context });
        }
        Ok(())
    }
}
