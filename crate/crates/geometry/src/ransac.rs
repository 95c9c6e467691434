use crate::{estimate_homography_dlt, GeometryError, Homography, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RANSAC configuration. Thresholds are in pixels of forward reprojection
/// error; the run is deterministic for a fixed seed.
#[derive(Clone, Copy, Debug)]
pub struct RansacParams {
    pub inlier_threshold: f64,
    pub iterations: usize,
    /// Consensus required to accept a model, as a fraction of all
    /// correspondences (floored at the 4-point minimal sample).
    pub min_inlier_ratio: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            iterations: 1000,
            min_inlier_ratio: 0.25,
            seed: 0,
        }
    }
}

/// Robust fit result: the refit model and per-correspondence inlier mask.
#[derive(Clone, Debug)]
pub struct RansacOutcome {
    pub homography: Homography,
    pub inlier_mask: Vec<bool>,
    pub iterations_run: usize,
}

fn reprojection_error(h: &Homography, pair: &([f64; 2], [f64; 2])) -> f64 {
    match h.project(pair.0) {
        Ok(p) => ((p[0] - pair.1[0]).powi(2) + (p[1] - pair.1[1]).powi(2)).sqrt(),
        Err(_) => f64::INFINITY,
    }
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs()
}

fn sample_is_degenerate(pts: &[[f64; 2]; 4]) -> bool {
    for skip in 0..4 {
        let kept: Vec<[f64; 2]> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        if triangle_area(kept[0], kept[1], kept[2]) < 1e-9 {
            return true;
        }
    }
    false
}

/// Homography estimation robust to outliers: repeated 4-point DLT fits, the
/// model with the largest consensus wins, then a final DLT refit on its
/// inliers.
pub fn ransac_homography(
    correspondences: &[([f64; 2], [f64; 2])],
    params: &RansacParams,
) -> Result<RansacOutcome> {
    let n = correspondences.len();
    if n < 4 {
        return Err(GeometryError::TooFewCorrespondences { needed: 4, got: n });
    }
    let min_inliers = ((params.min_inlier_ratio * n as f64).ceil() as usize).max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut indices: Vec<usize> = (0..n).collect();

    let mut best_count = 0usize;
    let mut best_mask: Option<Vec<bool>> = None;
    for _ in 0..params.iterations {
        indices.shuffle(&mut rng);
        let sample = [indices[0], indices[1], indices[2], indices[3]];
        let pts = [
            correspondences[sample[0]].0,
            correspondences[sample[1]].0,
            correspondences[sample[2]].0,
            correspondences[sample[3]].0,
        ];
        if sample_is_degenerate(&pts) {
            continue;
        }
        let pairs: Vec<_> = sample.iter().map(|&i| correspondences[i]).collect();
        let Ok(model) = estimate_homography_dlt(&pairs) else {
            continue;
        };
        let mask: Vec<bool> = correspondences
            .iter()
            .map(|pair| reprojection_error(&model, pair) <= params.inlier_threshold)
            .collect();
        let count = mask.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best_mask = Some(mask);
        }
    }

    let Some(mask) = best_mask else {
        return Err(GeometryError::RansacFailure {
            best_inliers: 0,
            total: n,
        });
    };
    if best_count < min_inliers {
        return Err(GeometryError::RansacFailure {
            best_inliers: best_count,
            total: n,
        });
    }

    let inlier_pairs: Vec<_> = correspondences
        .iter()
        .zip(mask.iter())
        .filter(|(_, &keep)| keep)
        .map(|(pair, _)| *pair)
        .collect();
    let refit = estimate_homography_dlt(&inlier_pairs)?;
    let final_mask: Vec<bool> = correspondences
        .iter()
        .map(|pair| reprojection_error(&refit, pair) <= params.inlier_threshold)
        .collect();
    Ok(RansacOutcome {
        homography: refit,
        inlier_mask: final_mask,
        iterations_run: params.iterations,
    })
}
