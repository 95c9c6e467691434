use crate::{ClipTensor, Real, Result, TensorError};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// File format: a little-endian u32 header length, a JSON header and the raw
/// element bytes. Round-trips are bit-exact.
#[derive(Debug, Serialize, Deserialize)]
struct Header {
    shape: [usize; 4],
    dtype: String,
    byte_order: String,
}

/// Writes a tensor in the flat binary format.
pub fn write_tensor<T: Real, W: Write>(mut sink: W, tensor: &ClipTensor<T>) -> Result<()> {
    let (t, h, w, c) = tensor.shape();
    let header = Header {
        shape: [t, h, w, c],
        dtype: T::dtype_name().to_string(),
        byte_order: "little".to_string(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| TensorError::Header(e.to_string()))?;
    sink.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    sink.write_all(&header_bytes)?;
    for v in tensor.data() {
        sink.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a tensor written by [`write_tensor`]; the element type must match
/// the stored dtype.
pub fn read_tensor<T: Real, R: Read>(mut source: R) -> Result<ClipTensor<T>> {
    let mut len_bytes = [0u8; 4];
    source.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    source.read_exact(&mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| TensorError::Header(e.to_string()))?;
    if header.dtype != T::dtype_name() {
        return Err(TensorError::Header(format!(
            "dtype mismatch: file holds {}, requested {}",
            header.dtype,
            T::dtype_name()
        )));
    }
    if header.byte_order != "little" {
        return Err(TensorError::Header(format!(
            "unsupported byte order {}",
            header.byte_order
        )));
    }
    let [t, h, w, c] = header.shape;
    let n = t
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| TensorError::Header("shape overflow".into()))?;
    let width = T::byte_width();
    let mut raw = vec![0u8; n * width];
    source.read_exact(&mut raw)?;
    let data = raw.chunks_exact(width).map(T::from_le_bytes).collect();
    ClipTensor::new((t, h, w, c), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let data: Vec<f32> = (0..24).map(|v| (v as f32 * 0.37).sin()).collect();
        let tensor = ClipTensor::new((2, 2, 3, 2), data).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &tensor).unwrap();
        let back: ClipTensor<f32> = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(back, tensor);
    }

    #[test]
    fn dtype_mismatch_is_rejected() {
        let tensor = ClipTensor::new((1, 1, 1, 1), vec![1.0f32]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &tensor).unwrap();
        assert!(read_tensor::<f64, _>(buf.as_slice()).is_err());
    }
}
