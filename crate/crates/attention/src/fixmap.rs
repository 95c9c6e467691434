//! Ground-truth fixation maps: project per-frame gaze through homography
//! chains, place an isotropic Gaussian on each projected point, take the max
//! over the temporal window, and normalize to a probability distribution.
//! Also labels attention-drift subsequences whose maps decorrelate from the
//! sequence mean.

use crate::{metrics, AttentionError, Result};
use foa_geometry::Homography;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Non-negative 2-D attention map. Values are stored in f64 so the
/// normalization invariant (sum 1 within 1e-9) survives large maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl FixationMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(AttentionError::ShapeMismatch {
                context: "FixationMap::new",
                expected: format!("{height}x{width} = {} values", height * width),
                got: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AttentionError::InvalidInput {
                context: "FixationMap::new",
                detail: "values must be finite and non-negative".into(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
            normalized: false,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
            normalized: false,
        }
    }

    /// Uniform probability map.
    pub fn uniform(height: usize, width: usize) -> Self {
        let v = 1.0 / (height * width) as f64;
        Self {
            height,
            width,
            data: vec![v; height * width],
            normalized: true,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        self.normalized = false;
        &mut self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Index of the largest value, first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &v) in self.data.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 / self.width, best.0 % self.width)
    }

    /// Scales the map to sum 1. Errors on a map without mass.
    pub fn normalize(mut self) -> Result<Self> {
        let total = self.sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(AttentionError::InvalidInput {
                context: "FixationMap::normalize",
                detail: format!("cannot normalize map with mass {total}"),
            });
        }
        for v in &mut self.data {
            *v /= total;
        }
        self.normalized = true;
        Ok(self)
    }

    /// View of the map as a single-frame tensor, for model consumption.
    pub fn to_clip_tensor<T: foa_tensor::Real>(&self) -> foa_tensor::ClipTensor<T> {
        foa_tensor::ClipTensor::new(
            (1, self.height, self.width, 1),
            self.data.iter().map(|&v| T::from_f64(v)).collect(),
        )
        .expect("map invariants imply a valid tensor")
    }

    pub fn from_values<T: foa_tensor::Real>(
        height: usize,
        width: usize,
        values: &[T],
    ) -> Result<Self> {
        Self::new(
            height,
            width,
            values.iter().map(|v| v.as_f64().max(0.0)).collect(),
        )
    }

    /// 16-bit grayscale PNG, max-scaled; pair with the float sidecar for
    /// lossless round trips.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let peak = self.data.iter().cloned().fold(0.0f64, f64::max);
        let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
        let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
            self.width as u32,
            self.height as u32,
        );
        for (x, y, px) in img.enumerate_pixels_mut() {
            let v = self.at(y as usize, x as usize) * scale;
            *px = image::Luma([v.round().clamp(0.0, 65535.0) as u16]);
        }
        img.save(path).map_err(|e| AttentionError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    /// Exact float sidecar in the tensor binary format.
    pub fn write_sidecar<W: Write>(&self, sink: W) -> Result<()> {
        foa_tensor::write_tensor(sink, &self.to_clip_tensor::<f64>())?;
        Ok(())
    }

    pub fn read_sidecar<R: Read>(source: R) -> Result<Self> {
        let tensor: foa_tensor::ClipTensor<f64> = foa_tensor::read_tensor(source)?;
        let (t, h, w, c) = tensor.shape();
        if t != 1 || c != 1 {
            return Err(AttentionError::ShapeMismatch {
                context: "FixationMap::read_sidecar",
                expected: "(1, H, W, 1) tensor".into(),
                got: format!("{:?}", tensor.shape()),
            });
        }
        Self::new(h, w, tensor.into_data())
    }
}

/// One gaze sample in a frame's image plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeRecord {
    pub frame_id: i64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

/// Parameters of map construction. The temporal window covers offsets
/// `-k/2 ..= k/2` (integer division), i.e. 25 offsets for the default k = 25.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FixmapConfig {
    /// Sliding window length in frames.
    pub window: usize,
    /// Spatial variance of the per-fixation Gaussian, in squared pixels.
    pub sigma_sq: f64,
    /// Optional evaluation cutoff radius in units of sigma; `None` evaluates
    /// the full support. A cutoff of 4 is indistinguishable at desk
    /// resolutions and faster on large maps.
    pub truncate_sigmas: Option<f64>,
}

impl Default for FixmapConfig {
    fn default() -> Self {
        Self {
            window: 25,
            sigma_sq: 200.0,
            truncate_sigmas: None,
        }
    }
}

impl FixmapConfig {
    /// Inclusive window offsets around the center frame.
    pub fn offsets(&self) -> std::ops::RangeInclusive<i64> {
        let half = (self.window / 2) as i64;
        -half..=half
    }
}

/// Result of building one map, with enough context to surface data problems.
#[derive(Clone, Debug)]
pub struct BuiltMap {
    pub map: FixationMap,
    /// Projected fixations that contributed; 0 means the window was all
    /// invalid and the map fell back to uniform.
    pub used_fixations: usize,
}

/// Builds the fixation map for one window: each valid gaze point is projected
/// into the center frame through its homography, a Gaussian is centered on
/// it, and each pixel takes the max over the window before normalization.
///
/// `gaze[i]` pairs with `homographies[i]`. Invalid records are skipped; an
/// all-invalid window yields a uniform map (callers should warn).
pub fn build_fixation_map(
    gaze: &[GazeRecord],
    homographies: &[Homography],
    cfg: &FixmapConfig,
    shape: (usize, usize),
) -> Result<BuiltMap> {
    if gaze.len() != homographies.len() {
        return Err(AttentionError::ShapeMismatch {
            context: "build_fixation_map",
            expected: format!("{} homographies", gaze.len()),
            got: format!("{}", homographies.len()),
        });
    }
    if cfg.sigma_sq <= 0.0 {
        return Err(AttentionError::InvalidInput {
            context: "build_fixation_map",
            detail: format!("sigma_sq must be positive, got {}", cfg.sigma_sq),
        });
    }
    let (height, width) = shape;
    let mut centers = Vec::new();
    for (record, hom) in gaze.iter().zip(homographies.iter()) {
        if !record.valid {
            continue;
        }
        // Points projected out of the frame still contribute their tail.
        let p = hom.project([record.x, record.y])?;
        centers.push(p);
    }
    if centers.is_empty() {
        return Ok(BuiltMap {
            map: FixationMap::uniform(height, width),
            used_fixations: 0,
        });
    }

    let map = max_of_gaussians(&centers, cfg, shape)?;
    Ok(BuiltMap {
        map: map.normalize()?,
        used_fixations: centers.len(),
    })
}

/// Unnormalized max-over-Gaussians accumulation.
fn max_of_gaussians(
    centers: &[[f64; 2]],
    cfg: &FixmapConfig,
    (height, width): (usize, usize),
) -> Result<FixationMap> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * cfg.sigma_sq);
    let inv_two_sigma = 1.0 / (2.0 * cfg.sigma_sq);
    let cutoff_sq = cfg
        .truncate_sigmas
        .map(|r| r * r * cfg.sigma_sq)
        .unwrap_or(f64::INFINITY);
    let mut map = FixationMap::zeros(height, width);
    for center in centers {
        for row in 0..height {
            let dy = row as f64 - center[1];
            for col in 0..width {
                let dx = col as f64 - center[0];
                let dist_sq = dx * dx + dy * dy;
                if dist_sq > cutoff_sq {
                    continue;
                }
                let value = norm * (-dist_sq * inv_two_sigma).exp();
                let cell = &mut map.data_mut()[row * width + col];
                if value > *cell {
                    *cell = value;
                }
            }
        }
    }
    Ok(map)
}

/// Maximal contiguous runs of frames whose correlation against the sequence
/// mean map falls below the threshold. Frames with undefined correlation
/// (constant maps) count as below threshold: they carry no central pattern.
pub fn label_drift_subsequences(
    maps: &[FixationMap],
    mean_map: &FixationMap,
    threshold: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut runs = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, map) in maps.iter().enumerate() {
        let below = match metrics::pearson_cc(map, mean_map) {
            Ok(cc) => cc < threshold,
            Err(AttentionError::UndefinedMetric { .. }) => true,
            Err(e) => return Err(e),
        };
        match (below, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(start)) => {
                runs.push((start, i - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(start) = run_start {
        runs.push((start, maps.len() - 1));
    }
    Ok(runs)
}

/// Reads a gaze log (`frame_id,x,y,valid` CSV).
pub fn read_gaze_csv<R: Read>(source: R) -> Result<Vec<GazeRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut records = Vec::new();
    for row in reader.deserialize::<GazeRecord>() {
        records.push(row.map_err(|e| AttentionError::Parse {
            path: "<gaze csv>".into(),
            detail: e.to_string(),
        })?);
    }
    Ok(records)
}

pub fn write_gaze_csv<W: Write>(sink: W, records: &[GazeRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    for r in records {
        writer.serialize(r).map_err(|e| AttentionError::Parse {
            path: "<gaze csv>".into(),
            detail: e.to_string(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// One entry of a homography chain file: the transform taking the frame at
/// `offset` (relative to the window center) into the center frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainEntry {
    pub offset: i64,
    pub homography: Homography,
}

pub fn read_homography_chain<R: Read>(source: R) -> Result<Vec<ChainEntry>> {
    serde_json::from_reader(source).map_err(|e| AttentionError::Parse {
        path: "<homography chain>".into(),
        detail: e.to_string(),
    })
}

pub fn write_homography_chain<W: Write>(sink: W, chain: &[ChainEntry]) -> Result<()> {
    serde_json::to_writer_pretty(sink, chain).map_err(|e| AttentionError::Parse {
        path: "<homography chain>".into(),
        detail: e.to_string(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_window(n: usize, x: f64, y: f64) -> (Vec<GazeRecord>, Vec<Homography>) {
        let gaze = (0..n)
            .map(|i| GazeRecord {
                frame_id: i as i64,
                x,
                y,
                valid: true,
            })
            .collect();
        let homs = vec![Homography::identity(); n];
        (gaze, homs)
    }

    #[test]
    fn single_center_fixation_peaks_at_center() {
        let (gaze, homs) = identity_window(1, 16.0, 16.0);
        let cfg = FixmapConfig {
            sigma_sq: 10.0,
            ..Default::default()
        };
        let built = build_fixation_map(&gaze, &homs, &cfg, (33, 33)).unwrap();
        assert_eq!(built.used_fixations, 1);
        assert_eq!(built.map.argmax(), (16, 16));
        assert_abs_diff_eq!(built.map.sum(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_distant_fixations_both_survive_at_full_height() {
        let gaze = vec![
            GazeRecord {
                frame_id: 0,
                x: 8.0,
                y: 16.0,
                valid: true,
            },
            GazeRecord {
                frame_id: 1,
                x: 40.0,
                y: 16.0,
                valid: true,
            },
        ];
        let homs = vec![Homography::identity(); 2];
        let cfg = FixmapConfig {
            sigma_sq: 4.0,
            ..Default::default()
        };
        let built = build_fixation_map(&gaze, &homs, &cfg, (33, 49)).unwrap();
        // Max aggregation keeps both peaks at equal height; a mean would
        // halve them.
        let left = built.map.at(16, 8);
        let right = built.map.at(16, 40);
        assert_abs_diff_eq!(left, right, epsilon = 1e-15);
        let peak = built
            .map
            .data()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(left, peak, epsilon = 1e-15);
    }

    #[test]
    fn all_invalid_window_falls_back_to_uniform() {
        let gaze = vec![GazeRecord {
            frame_id: 0,
            x: 5.0,
            y: 5.0,
            valid: false,
        }];
        let homs = vec![Homography::identity()];
        let built =
            build_fixation_map(&gaze, &homs, &FixmapConfig::default(), (8, 8)).unwrap();
        assert_eq!(built.used_fixations, 0);
        assert_eq!(built.map, FixationMap::uniform(8, 8));
    }

    #[test]
    fn window_offsets_follow_the_25_offset_reading() {
        let cfg = FixmapConfig::default();
        assert_eq!(cfg.window, 25);
        let offsets: Vec<i64> = cfg.offsets().collect();
        assert_eq!(offsets.len(), 25);
        assert_eq!(*offsets.first().unwrap(), -12);
        assert_eq!(*offsets.last().unwrap(), 12);
    }

    #[test]
    fn normalize_rejects_empty_map() {
        let map = FixationMap::zeros(4, 4);
        assert!(map.normalize().is_err());
    }

    #[test]
    fn normalize_constant_map_is_uniform() {
        let map = FixationMap::new(2, 2, vec![3.0; 4]).unwrap().normalize().unwrap();
        for &v in map.data() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn drift_labeling_recovers_planted_window() {
        // Mean-like maps everywhere except a planted lateral drift. The
        // drift occupies 15% of the sequence, so the drifted maps correlate
        // with the sequence mean mostly through that minority share.
        let center = gaussian_map(32, 32, 16.0, 16.0, 8.0);
        let corner = gaussian_map(32, 32, 3.0, 3.0, 8.0);
        let mut maps = vec![center.clone(); 100];
        for m in maps.iter_mut().take(35).skip(20) {
            *m = corner.clone();
        }
        let mean = mean_of(&maps);
        let runs = label_drift_subsequences(&maps, &mean, 0.3).unwrap();
        assert_eq!(runs, vec![(20, 34)]);
    }

    #[test]
    fn identical_frames_yield_no_drift() {
        let map = gaussian_map(16, 16, 8.0, 8.0, 10.0);
        let maps = vec![map.clone(); 10];
        let runs = label_drift_subsequences(&maps, &map, 0.3).unwrap();
        assert!(runs.is_empty());
    }

    #[test]
    fn sidecar_round_trip_is_lossless() {
        let map = gaussian_map(9, 7, 3.0, 4.0, 5.0);
        let mut buf = Vec::new();
        map.write_sidecar(&mut buf).unwrap();
        let back = FixationMap::read_sidecar(buf.as_slice()).unwrap();
        assert_eq!(back.data(), map.data());
    }

    #[test]
    fn gaze_csv_round_trip() {
        let records = vec![
            GazeRecord {
                frame_id: 0,
                x: 1.5,
                y: 2.5,
                valid: true,
            },
            GazeRecord {
                frame_id: 1,
                x: -3.0,
                y: 7.25,
                valid: false,
            },
        ];
        let mut buf = Vec::new();
        write_gaze_csv(&mut buf, &records).unwrap();
        let back = read_gaze_csv(buf.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    pub(crate) fn gaussian_map(h: usize, w: usize, cx: f64, cy: f64, sigma_sq: f64) -> FixationMap {
        let mut data = vec![0.0; h * w];
        for row in 0..h {
            for col in 0..w {
                let d = (col as f64 - cx).powi(2) + (row as f64 - cy).powi(2);
                data[row * w + col] = (-d / (2.0 * sigma_sq)).exp();
            }
        }
        FixationMap::new(h, w, data).unwrap().normalize().unwrap()
    }

    fn mean_of(maps: &[FixationMap]) -> FixationMap {
        let mut acc = vec![0.0; maps[0].data().len()];
        for m in maps {
            for (a, v) in acc.iter_mut().zip(m.data()) {
                *a += v;
            }
        }
        let n = maps.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        FixationMap::new(maps[0].height(), maps[0].width(), acc)
            .unwrap()
            .normalize()
            .unwrap()
    }
}
