//! Minimal PNG artifacts: grayscale heatmaps and axis-scaled line charts.

use crate::{AttentionError, FixationMap, Result};
use std::path::Path;

/// 8-bit grayscale heatmap of a map, max-scaled.
pub fn heatmap_png(map: &FixationMap, path: &Path) -> Result<()> {
    let (h, w) = map.shape();
    let peak = map.data().iter().cloned().fold(0.0f64, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let mut img = image::GrayImage::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        *px = image::Luma([(map.at(y as usize, x as usize) * scale).round() as u8]);
    }
    img.save(path).map_err(|e| AttentionError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// One polyline of a chart.
pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: [u8; 3],
}

/// Renders series into a fixed-size chart with axes; scales are chosen from
/// the data envelope.
pub fn line_chart(series: &[Series<'_>], path: &Path) -> Result<()> {
    const W: u32 = 640;
    const H: u32 = 480;
    const MARGIN: f64 = 48.0;
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().cloned())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if all.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "line_chart",
            detail: "no finite points to plot".into(),
        });
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if (x1 - x0).abs() < 1e-12 {
        x1 = x0 + 1.0;
    }
    if (y1 - y0).abs() < 1e-12 {
        y1 = y0 + 1.0;
    }
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN + (x - x0) / (x1 - x0) * (W as f64 - 2.0 * MARGIN),
            H as f64 - MARGIN - (y - y0) / (y1 - y0) * (H as f64 - 2.0 * MARGIN),
        )
    };

    let mut img = image::RgbImage::from_pixel(W, H, image::Rgb([255, 255, 255]));
    let mut draw_line = |ax: f64, ay: f64, bx: f64, by: f64, color: [u8; 3]| {
        let steps = ((bx - ax).abs().max((by - ay).abs()).ceil() as usize).max(1);
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let x = ax + (bx - ax) * t;
            let y = ay + (by - ay) * t;
            if x >= 0.0 && y >= 0.0 && (x as u32) < W && (y as u32) < H {
                img.put_pixel(x as u32, y as u32, image::Rgb(color));
            }
        }
    };

    // Axes.
    let axis = [40u8, 40, 40];
    draw_line(MARGIN, H as f64 - MARGIN, W as f64 - MARGIN, H as f64 - MARGIN, axis);
    draw_line(MARGIN, MARGIN, MARGIN, H as f64 - MARGIN, axis);
    // Ticks at the data corners.
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let tx = MARGIN + frac * (W as f64 - 2.0 * MARGIN);
        draw_line(tx, H as f64 - MARGIN, tx, H as f64 - MARGIN + 5.0, axis);
        let ty = H as f64 - MARGIN - frac * (H as f64 - 2.0 * MARGIN);
        draw_line(MARGIN - 5.0, ty, MARGIN, ty, axis);
    }

    for s in series {
        for pair in s.points.windows(2) {
            let (ax, ay) = to_px(pair[0].0, pair[0].1);
            let (bx, by) = to_px(pair[1].0, pair[1].1);
            draw_line(ax, ay, bx, by, s.color);
        }
    }
    img.save(path).map_err(|e| AttentionError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_renders_to_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.png");
        let points: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (i as f64 * 0.2).sin())).collect();
        line_chart(
            &[Series {
                points: &points,
                color: [200, 60, 40],
            }],
            &path,
        )
        .unwrap();
        assert!(path.exists());
        let img = image::open(&path).unwrap();
        assert_eq!(img.width(), 640);
    }

    #[test]
    fn empty_chart_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(line_chart(&[], &dir.path().join("x.png")).is_err());
    }
}
