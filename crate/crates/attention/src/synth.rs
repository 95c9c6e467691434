//! Seeded synthetic driving-like scenes: a textured background with road,
//! sky and buildings, a bright moving target, scripted gaze, per-frame speed
//! and analytic optical flow. Stands in for a recorded dataset at desk
//! scale; every artifact is deterministic in the seed.

use crate::fixmap::{build_fixation_map, FixmapConfig, GazeRecord};
use crate::metrics::LabelMap;
use crate::model::{BranchDomain, MultiDomainSample};
use crate::{AttentionError, FixationMap, Result};
use foa_geometry::Homography;
use foa_tensor::ClipTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Semantic classes of the synthetic label maps.
pub const CLASS_ROAD: u16 = 0;
pub const CLASS_SKY: u16 = 1;
pub const CLASS_BUILDING: u16 = 2;
pub const CLASS_TARGET: u16 = 3;
pub const CLASS_SIGN: u16 = 4;
pub const CLASS_OTHER: u16 = 5;
pub const NUM_CLASSES: usize = 6;

/// Largest flow magnitude representable by the color encoding, px/frame.
pub const FLOW_ENCODING_MAX: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetSplit {
    Train,
    Test,
}

/// What the driver attends in a sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Scenario {
    /// Gaze tracks the bright moving target with small jitter.
    TargetFollow { jitter_px: f64 },
    /// Gaze rests on the vanishing point except for a planted window of
    /// frames spent on a corner sign.
    Drift { window: (usize, usize) },
    /// Frames are split into blocks of scripted speed; gaze jitter around
    /// the vanishing point shrinks as speed grows.
    SpeedBins { bins: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceScript {
    pub name: String,
    pub scenario: Scenario,
    pub split: DatasetSplit,
    pub daytime: String,
    pub weather: String,
    pub landscape: String,
    pub driver: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub frame_size: usize,
    pub frames_per_sequence: usize,
    /// Gaussian variance of the ground-truth maps at this resolution (the
    /// native-scale default of 200 px^2 belongs to 1080p).
    pub sigma_sq: f64,
    pub sequences: Vec<SequenceScript>,
}

impl SynthConfig {
    /// The desk-scale lab dataset: three training sequences plus one test
    /// sequence of target-following, 64x64.
    pub fn desk_default(seed: u64) -> Self {
        let seq = |name: &str, split, daytime: &str, weather: &str, landscape: &str| {
            SequenceScript {
                name: name.into(),
                scenario: Scenario::TargetFollow { jitter_px: 0.7 },
                split,
                daytime: daytime.into(),
                weather: weather.into(),
                landscape: landscape.into(),
                driver: "D1".into(),
            }
        };
        Self {
            seed,
            frame_size: 64,
            frames_per_sequence: 120,
            sigma_sq: 10.0,
            sequences: vec![
                seq("train01", DatasetSplit::Train, "morning", "sunny", "highway"),
                seq("train02", DatasetSplit::Train, "evening", "cloudy", "downtown"),
                seq("train03", DatasetSplit::Train, "night", "rainy", "countryside"),
                seq("test01", DatasetSplit::Test, "morning", "cloudy", "highway"),
            ],
        }
    }
}

/// One generated sequence with every modality.
#[derive(Clone, Debug)]
pub struct SynthSequence {
    pub script: SequenceScript,
    /// (T, S, S, 3) in [0, 1].
    pub rgb: ClipTensor<f32>,
    /// (T, S, S, 3) color-encoded flow.
    pub flow: ClipTensor<f32>,
    /// Raw per-frame flow fields (T, S, S, 2), px/frame.
    pub flow_raw: ClipTensor<f32>,
    pub labels: Vec<LabelMap>,
    pub gaze: Vec<GazeRecord>,
    pub speeds: Vec<f64>,
}

fn vanishing_point(size: usize) -> (f64, f64) {
    (size as f64 * 0.5, size as f64 * 0.42)
}

/// Color-wheel encoding of a flow vector: hue from direction, saturation
/// from magnitude (clamped at [`FLOW_ENCODING_MAX`]), full value. Injective
/// for magnitudes within range.
pub fn encode_flow(dx: f64, dy: f64) -> [f32; 3] {
    let mag = (dx * dx + dy * dy).sqrt();
    let sat = (mag / FLOW_ENCODING_MAX).clamp(0.0, 1.0);
    let hue = (dy.atan2(dx) + std::f64::consts::PI) / std::f64::consts::TAU;
    let h6 = (hue * 6.0).rem_euclid(6.0);
    let sector = h6.floor() as usize % 6;
    let f = h6 - h6.floor();
    let v = 1.0f64;
    let p = v * (1.0 - sat);
    let q = v * (1.0 - sat * f);
    let t = v * (1.0 - sat * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as f32, g as f32, b as f32]
}

struct TargetTrack {
    amplitude: (f64, f64),
    frequency: (f64, f64),
    phase: (f64, f64),
    center: (f64, f64),
}

impl TargetTrack {
    fn seeded(rng: &mut ChaCha8Rng, size: usize) -> Self {
        let s = size as f64;
        // Wide wandering keeps the sequence-mean map broad, so tracking the
        // target genuinely separates a model from the mean baseline.
        Self {
            amplitude: (rng.gen_range(0.30..0.42) * s, rng.gen_range(0.16..0.26) * s),
            frequency: (rng.gen_range(0.025..0.06), rng.gen_range(0.03..0.07)),
            phase: (
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ),
            center: (s * 0.5, s * 0.55),
        }
    }

    fn position(&self, frame: usize) -> (f64, f64) {
        let t = frame as f64;
        (
            self.center.0 + self.amplitude.0 * (self.frequency.0 * t * std::f64::consts::TAU + self.phase.0).sin(),
            self.center.1 + self.amplitude.1 * (self.frequency.1 * t * std::f64::consts::TAU + self.phase.1).sin(),
        )
    }

    fn velocity(&self, frame: usize) -> (f64, f64) {
        let (x1, y1) = self.position(frame);
        let (x0, y0) = if frame == 0 {
            self.position(0)
        } else {
            self.position(frame - 1)
        };
        (x1 - x0, y1 - y0)
    }
}

fn background_pixel(size: usize, x: usize, y: usize) -> (f32, u16) {
    let s = size as f64;
    let (vx, vy) = vanishing_point(size);
    let fx = x as f64;
    let fy = y as f64;
    // Sky above the horizon, road in the wedge toward the vanishing point,
    // buildings at the flanks; a mild deterministic texture on top.
    let texture = 0.04 * ((fx * 0.9).sin() * (fy * 1.3).cos());
    if fy < vy {
        (0.72 + texture as f32, CLASS_SKY)
    } else {
        let spread = (fy - vy) / (s - vy);
        let half_width = 0.12 * s + spread * 0.55 * s;
        if (fx - vx).abs() <= half_width {
            (0.28 + texture as f32, CLASS_ROAD)
        } else {
            (0.48 + texture as f32, CLASS_BUILDING)
        }
    }
}

const SIGN_RADIUS: f64 = 3.0;

fn sign_position(size: usize) -> (f64, f64) {
    (size as f64 * 0.14, size as f64 * 0.2)
}

/// Renders one sequence. Deterministic in (config seed, sequence index).
pub fn generate_sequence(cfg: &SynthConfig, index: usize) -> Result<SynthSequence> {
    let script = cfg
        .sequences
        .get(index)
        .ok_or_else(|| AttentionError::InvalidInput {
            context: "generate_sequence",
            detail: format!("sequence index {index} out of range"),
        })?
        .clone();
    let size = cfg.frame_size;
    let frames = cfg.frames_per_sequence;
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ (index as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15),
    );
    let track = TargetTrack::seeded(&mut rng, size);
    let target_radius = (size as f64 / 14.0).max(2.0);

    let mut rgb = ClipTensor::zeros((frames, size, size, 3));
    let mut flow_raw = ClipTensor::zeros((frames, size, size, 2));
    let mut flow = ClipTensor::zeros((frames, size, size, 3));
    let mut labels = Vec::with_capacity(frames);
    let mut gaze = Vec::with_capacity(frames);
    let mut speeds = Vec::with_capacity(frames);

    let speed_for = |frame: usize| -> f64 {
        match &script.scenario {
            Scenario::SpeedBins { bins } => {
                let block = (frame * bins.len() / frames).min(bins.len() - 1);
                bins[block].0
            }
            _ => 30.0,
        }
    };

    for frame in 0..frames {
        let (tx, ty) = track.position(frame);
        let (tvx, tvy) = track.velocity(frame);
        let speed = speed_for(frame);
        speeds.push(speed);
        let drift_active = matches!(
            &script.scenario,
            Scenario::Drift { window } if frame >= window.0 && frame <= window.1
        );

        let mut frame_labels = vec![0u16; size * size];
        for y in 0..size {
            for x in 0..size {
                let (mut value, mut class) = background_pixel(size, x, y);
                let mut fdx = 0.0f64;
                let mut fdy = 0.0f64;
                let d_target =
                    ((x as f64 - tx).powi(2) + (y as f64 - ty).powi(2)).sqrt();
                if d_target <= target_radius {
                    value = 0.98 - 0.1 * (d_target / target_radius) as f32;
                    class = CLASS_TARGET;
                    fdx = tvx;
                    fdy = tvy;
                }
                if matches!(script.scenario, Scenario::Drift { .. }) {
                    let (sx, sy) = sign_position(size);
                    let d_sign = ((x as f64 - sx).powi(2) + (y as f64 - sy).powi(2)).sqrt();
                    if d_sign <= SIGN_RADIUS {
                        value = 0.9;
                        class = CLASS_SIGN;
                    }
                }
                let idx = rgb.index(frame, y, x, 0);
                rgb.data_mut()[idx] = value.clamp(0.0, 1.0);
                rgb.data_mut()[idx + 1] = (value * 0.92).clamp(0.0, 1.0);
                rgb.data_mut()[idx + 2] = (value * 0.85).clamp(0.0, 1.0);

                let fidx = flow_raw.index(frame, y, x, 0);
                flow_raw.data_mut()[fidx] = fdx as f32;
                flow_raw.data_mut()[fidx + 1] = fdy as f32;
                let encoded = encode_flow(fdx, fdy);
                let cidx = flow.index(frame, y, x, 0);
                flow.data_mut()[cidx..cidx + 3].copy_from_slice(&encoded);

                frame_labels[y * size + x] = class;
            }
        }
        labels.push(LabelMap::new(size, size, frame_labels)?);

        let (gx, gy) = match &script.scenario {
            Scenario::TargetFollow { jitter_px } => (
                tx + rng.gen_range(-jitter_px..=*jitter_px),
                ty + rng.gen_range(-jitter_px..=*jitter_px),
            ),
            Scenario::Drift { .. } => {
                if drift_active {
                    let (sx, sy) = sign_position(size);
                    (sx + rng.gen_range(-0.5..=0.5), sy + rng.gen_range(-0.5..=0.5))
                } else {
                    let (vx, vy) = vanishing_point(size);
                    (vx + rng.gen_range(-0.8..=0.8), vy + rng.gen_range(-0.8..=0.8))
                }
            }
            Scenario::SpeedBins { bins } => {
                let block = (frame * bins.len() / frames).min(bins.len() - 1);
                let jitter = bins[block].1;
                let (vx, vy) = vanishing_point(size);
                (
                    vx + rng.gen_range(-jitter..=jitter),
                    vy + rng.gen_range(-jitter..=jitter),
                )
            }
        };
        gaze.push(GazeRecord {
            frame_id: frame as i64,
            x: gx.clamp(0.0, size as f64 - 1.0),
            y: gy.clamp(0.0, size as f64 - 1.0),
            valid: true,
        });
    }

    Ok(SynthSequence {
        script,
        rgb,
        flow,
        flow_raw,
        labels,
        gaze,
        speeds,
    })
}

pub fn generate_all(cfg: &SynthConfig) -> Result<Vec<SynthSequence>> {
    (0..cfg.sequences.len())
        .map(|i| generate_sequence(cfg, i))
        .collect()
}

impl SynthSequence {
    pub fn frames(&self) -> usize {
        self.rgb.frames()
    }

    pub fn frame_size(&self) -> usize {
        self.rgb.height()
    }

    /// Ground-truth map for the frame at `center` using the sliding window
    /// (identity homography chain: the synthetic camera is static).
    pub fn ground_truth_map(&self, center: usize, cfg: &FixmapConfig) -> Result<FixationMap> {
        let size = self.frame_size();
        let mut window_gaze = Vec::new();
        for offset in cfg.offsets() {
            let frame = center as i64 + offset;
            if frame < 0 || frame >= self.frames() as i64 {
                continue;
            }
            window_gaze.push(self.gaze[frame as usize]);
        }
        let homs = vec![Homography::identity(); window_gaze.len()];
        Ok(build_fixation_map(&window_gaze, &homs, cfg, (size, size))?.map)
    }

    /// Per-class score channels from the label map (one-hot).
    fn seg_frame(&self, frame: usize) -> ClipTensor<f32> {
        let size = self.frame_size();
        let mut out = ClipTensor::zeros((1, size, size, NUM_CLASSES));
        for y in 0..size {
            for x in 0..size {
                let class = self.labels[frame].labels[y * size + x] as usize;
                *out.at_mut(0, y, x, class) = 1.0;
            }
        }
        out
    }

    fn domain_clip(&self, domain: BranchDomain, start: usize, len: usize) -> ClipTensor<f32> {
        let size = self.frame_size();
        let channels = match domain {
            BranchDomain::Rgb | BranchDomain::Flow => 3,
            BranchDomain::Seg => NUM_CLASSES,
        };
        let mut clip = ClipTensor::zeros((len, size, size, channels));
        for t in 0..len {
            let frame = start + t;
            match domain {
                BranchDomain::Rgb | BranchDomain::Flow => {
                    let src = match domain {
                        BranchDomain::Rgb => &self.rgb,
                        _ => &self.flow,
                    };
                    for y in 0..size {
                        for x in 0..size {
                            for c in 0..3 {
                                *clip.at_mut(t, y, x, c) = src.at(frame, y, x, c);
                            }
                        }
                    }
                }
                BranchDomain::Seg => {
                    let seg = self.seg_frame(frame);
                    for y in 0..size {
                        for x in 0..size {
                            for c in 0..NUM_CLASSES {
                                *clip.at_mut(t, y, x, c) = seg.at(0, y, x, c);
                            }
                        }
                    }
                }
            }
        }
        clip
    }

    /// Slices the sequence into training samples: clips of `clip_len` frames
    /// at the given stride, each labeled with the last frame's map.
    pub fn to_samples(
        &self,
        domains: &[BranchDomain],
        clip_len: usize,
        stride: usize,
        fix_cfg: &FixmapConfig,
    ) -> Result<Vec<MultiDomainSample<f32>>> {
        if clip_len > self.frames() {
            return Err(AttentionError::InvalidInput {
                context: "to_samples",
                detail: format!(
                    "clip length {clip_len} exceeds sequence of {}",
                    self.frames()
                ),
            });
        }
        let mut samples = Vec::new();
        let mut start = 0;
        while start + clip_len <= self.frames() {
            let last = start + clip_len - 1;
            let map = self.ground_truth_map(last, fix_cfg)?;
            let clips = domains
                .iter()
                .map(|&d| self.domain_clip(d, start, clip_len))
                .collect();
            samples.push(MultiDomainSample { clips, map });
            start += stride;
        }
        Ok(samples)
    }
}

fn save_rgb_png(clip: &ClipTensor<f32>, frame: usize, path: &Path) -> Result<()> {
    let (_, h, w, _) = clip.shape();
    let mut img = image::RgbImage::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let to8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        *px = image::Rgb([
            to8(clip.at(frame, y as usize, x as usize, 0)),
            to8(clip.at(frame, y as usize, x as usize, 1)),
            to8(clip.at(frame, y as usize, x as usize, 2)),
        ]);
    }
    img.save(path).map_err(|e| AttentionError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn save_label_png(label: &LabelMap, path: &Path) -> Result<()> {
    let mut img = image::GrayImage::new(label.width as u32, label.height as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        *px = image::Luma([label.labels[y as usize * label.width + x as usize] as u8]);
    }
    img.save(path).map_err(|e| AttentionError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Writes the dataset to disk: per-sequence frame/flow/label PNGs, gaze and
/// speed CSVs, plus the dataset metadata table.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut meta = std::fs::File::create(out_dir.join("metadata.csv"))?;
    writeln!(meta, "sequence,daytime,weather,landscape,driver,set")?;
    for index in 0..cfg.sequences.len() {
        let seq = generate_sequence(cfg, index)?;
        let split = match seq.script.split {
            DatasetSplit::Train => "train",
            DatasetSplit::Test => "test",
        };
        writeln!(
            meta,
            "{},{},{},{},{},{}",
            seq.script.name,
            seq.script.daytime,
            seq.script.weather,
            seq.script.landscape,
            seq.script.driver,
            split
        )?;
        let seq_dir = out_dir.join(format!("seq_{}", seq.script.name));
        for sub in ["rgb", "flow", "labels"] {
            std::fs::create_dir_all(seq_dir.join(sub))?;
        }
        for frame in 0..seq.frames() {
            save_rgb_png(
                &seq.rgb,
                frame,
                &seq_dir.join(format!("rgb/frame_{frame:04}.png")),
            )?;
            save_rgb_png(
                &seq.flow,
                frame,
                &seq_dir.join(format!("flow/frame_{frame:04}.png")),
            )?;
            save_label_png(
                &seq.labels[frame],
                &seq_dir.join(format!("labels/frame_{frame:04}.png")),
            )?;
        }
        let gaze_file = std::fs::File::create(seq_dir.join("gaze.csv"))?;
        crate::fixmap::write_gaze_csv(gaze_file, &seq.gaze)?;
        let mut speed_file = std::fs::File::create(seq_dir.join("speed.csv"))?;
        writeln!(speed_file, "frame_id,speed")?;
        for (frame, speed) in seq.speeds.iter().enumerate() {
            writeln!(speed_file, "{frame},{speed}")?;
        }
    }
    Ok(())
}

fn load_rgb_series(dir: &Path, prefix: &str) -> Result<ClipTensor<f32>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir.join(prefix))? {
        let path = entry?.path();
        if path.extension().map(|e| e == "png").unwrap_or(false) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(AttentionError::Parse {
            path: dir.join(prefix).display().to_string(),
            detail: "no frames found".into(),
        });
    }
    let mut frames = Vec::new();
    let mut dims = (0usize, 0usize);
    for path in &paths {
        let img = image::open(path)
            .map_err(|e| AttentionError::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?
            .to_rgb8();
        dims = (img.height() as usize, img.width() as usize);
        frames.push(img);
    }
    let (h, w) = dims;
    let mut clip = ClipTensor::zeros((frames.len(), h, w, 3));
    for (t, img) in frames.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let px = img.get_pixel(x as u32, y as u32);
                for c in 0..3 {
                    *clip.at_mut(t, y, x, c) = px.0[c] as f32 / 255.0;
                }
            }
        }
    }
    Ok(clip)
}

/// Reads a dataset directory written by [`generate_synthetic_dataset`].
/// The raw flow sidecar is not part of the on-disk format, so `flow_raw`
/// comes back zeroed; training consumes the encoded flow.
pub fn load_synthetic_dataset(dir: &Path) -> Result<Vec<SynthSequence>> {
    let meta_path = dir.join("metadata.csv");
    let meta = std::fs::read_to_string(&meta_path)?;
    let mut sequences = Vec::new();
    for line in meta.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(AttentionError::Parse {
                path: meta_path.display().to_string(),
                detail: format!("bad metadata row: {line}"),
            });
        }
        let script = SequenceScript {
            name: fields[0].to_string(),
            scenario: Scenario::TargetFollow { jitter_px: 0.0 },
            split: if fields[5] == "test" {
                DatasetSplit::Test
            } else {
                DatasetSplit::Train
            },
            daytime: fields[1].to_string(),
            weather: fields[2].to_string(),
            landscape: fields[3].to_string(),
            driver: fields[4].to_string(),
        };
        let seq_dir = dir.join(format!("seq_{}", script.name));
        let rgb = load_rgb_series(&seq_dir, "rgb")?;
        let flow = load_rgb_series(&seq_dir, "flow")?;
        let (frames, h, w, _) = rgb.shape();
        let mut labels = Vec::with_capacity(frames);
        for frame in 0..frames {
            let path = seq_dir.join(format!("labels/frame_{frame:04}.png"));
            let img = image::open(&path)
                .map_err(|e| AttentionError::Parse {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?
                .to_luma8();
            let data = img.pixels().map(|p| p.0[0] as u16).collect();
            labels.push(LabelMap::new(h, w, data)?);
        }
        let gaze = crate::fixmap::read_gaze_csv(std::fs::File::open(seq_dir.join("gaze.csv"))?)?;
        let speed_text = std::fs::read_to_string(seq_dir.join("speed.csv"))?;
        let speeds = speed_text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1))
            .filter_map(|v| v.parse::<f64>().ok())
            .collect();
        sequences.push(SynthSequence {
            script,
            flow_raw: ClipTensor::zeros((frames, h, w, 2)),
            rgb,
            flow,
            labels,
            gaze,
            speeds,
        });
    }
    Ok(sequences)
}
