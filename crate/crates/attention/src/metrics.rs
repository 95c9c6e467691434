//! Evaluation suite: Pearson correlation, KL divergence, information gain
//! against a bias map, baselines, moment-matched Gaussian spread, semantic
//! threshold histograms and Kendall rank correlation, plus per-condition
//! report aggregation.

use crate::{AttentionError, FixationMap, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Pearson correlation over pixels. Undefined (error, not zero) when either
/// map has no variance.
pub fn pearson_cc(a: &FixationMap, b: &FixationMap) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(AttentionError::ShapeMismatch {
            context: "pearson_cc",
            expected: format!("{:?}", a.shape()),
            got: format!("{:?}", b.shape()),
        });
    }
    let n = a.data().len() as f64;
    let mean_a = a.sum() / n;
    let mean_b = b.sum() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(AttentionError::UndefinedMetric {
            context: "pearson_cc",
            detail: "zero-variance map".into(),
        });
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// KL divergence of `pred` from `gt` with a stability constant; same formula
/// as the training loss, value only.
pub fn eval_kl(gt: &FixationMap, pred: &FixationMap, eps: f64) -> Result<f64> {
    if gt.shape() != pred.shape() {
        return Err(AttentionError::ShapeMismatch {
            context: "eval_kl",
            expected: format!("{:?}", gt.shape()),
            got: format!("{:?}", pred.shape()),
        });
    }
    let (value, _) = foa_tensor::kl_loss(gt.data(), pred.data(), eps)?;
    Ok(value)
}

/// Which bias map a baseline represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    CenterGaussian,
    TrainingMean,
}

/// A normalized baseline prediction.
#[derive(Clone, Debug)]
pub struct BaselineMap {
    pub kind: BaselineKind,
    pub map: FixationMap,
}

impl BaselineMap {
    /// Isotropic Gaussian centered in the frame; sigma defaults to a sixth
    /// of the map height.
    pub fn center_gaussian(shape: (usize, usize), sigma_px: Option<f64>) -> Result<Self> {
        let (h, w) = shape;
        let sigma = sigma_px.unwrap_or(h as f64 / 6.0);
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let mut data = vec![0.0; h * w];
        for row in 0..h {
            for col in 0..w {
                let d = (row as f64 - cy).powi(2) + (col as f64 - cx).powi(2);
                data[row * w + col] = (-d / (2.0 * sigma * sigma)).exp();
            }
        }
        Ok(Self {
            kind: BaselineKind::CenterGaussian,
            map: FixationMap::new(h, w, data)?.normalize()?,
        })
    }

    /// Pixel-wise mean of the training maps.
    pub fn training_mean(maps: &[FixationMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| AttentionError::InvalidInput {
            context: "BaselineMap::training_mean",
            detail: "need at least one training map".into(),
        })?;
        let (h, w) = first.shape();
        let mut acc = vec![0.0; h * w];
        for m in maps {
            if m.shape() != (h, w) {
                return Err(AttentionError::ShapeMismatch {
                    context: "BaselineMap::training_mean",
                    expected: format!("{:?}", (h, w)),
                    got: format!("{:?}", m.shape()),
                });
            }
            for (a, v) in acc.iter_mut().zip(m.data()) {
                *a += v;
            }
        }
        let n = maps.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        Ok(Self {
            kind: BaselineKind::TrainingMean,
            map: FixationMap::new(h, w, acc)?.normalize()?,
        })
    }
}

/// Information gain of `pred` over the bias `baseline`, in bits:
/// the ground-truth-weighted log2 ratio of prediction to bias. The ground
/// truth enters normalized, so a prediction equal to the baseline scores
/// exactly zero for every ground truth.
pub fn info_gain(
    pred: &FixationMap,
    gt: &FixationMap,
    baseline: &BaselineMap,
    eps: f64,
) -> Result<f64> {
    if pred.shape() != gt.shape() || pred.shape() != baseline.map.shape() {
        return Err(AttentionError::ShapeMismatch {
            context: "info_gain",
            expected: format!("{:?}", pred.shape()),
            got: format!("{:?} / {:?}", gt.shape(), baseline.map.shape()),
        });
    }
    let gt_sum = gt.sum();
    let pred_sum = pred.sum();
    let base_sum = baseline.map.sum();
    if gt_sum <= 0.0 || pred_sum <= 0.0 || base_sum <= 0.0 {
        return Err(AttentionError::UndefinedMetric {
            context: "info_gain",
            detail: "maps must carry mass".into(),
        });
    }
    let mut gain = 0.0;
    for i in 0..pred.data().len() {
        let y = gt.data()[i] / gt_sum;
        if y == 0.0 {
            continue;
        }
        let p = pred.data()[i] / pred_sum;
        let b = baseline.map.data()[i] / base_sum;
        gain += y * ((eps + p).log2() - (eps + b).log2());
    }
    Ok(gain)
}

/// Moment-matched Gaussian of a normalized map.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GaussianSpread {
    /// Mean position (x = column, y = row).
    pub mean: [f64; 2],
    /// Covariance [[xx, xy], [xy, yy]] in squared pixels.
    pub covariance: [[f64; 2]; 2],
    pub determinant: f64,
    /// Set when the map concentrates on a single pixel.
    pub degenerate: bool,
}

/// Weighted mean and covariance of pixel coordinates under the map, with the
/// covariance determinant as the spread statistic.
pub fn fit_gaussian_spread(map: &FixationMap) -> Result<GaussianSpread> {
    let total = map.sum();
    if total <= 0.0 {
        return Err(AttentionError::InvalidInput {
            context: "fit_gaussian_spread",
            detail: "map carries no mass".into(),
        });
    }
    let (h, w) = map.shape();
    let mut mx = 0.0;
    let mut my = 0.0;
    for row in 0..h {
        for col in 0..w {
            let p = map.at(row, col) / total;
            mx += p * col as f64;
            my += p * row as f64;
        }
    }
    let mut cxx = 0.0;
    let mut cxy = 0.0;
    let mut cyy = 0.0;
    for row in 0..h {
        for col in 0..w {
            let p = map.at(row, col) / total;
            let dx = col as f64 - mx;
            let dy = row as f64 - my;
            cxx += p * dx * dx;
            cxy += p * dx * dy;
            cyy += p * dy * dy;
        }
    }
    let det = cxx * cyy - cxy * cxy;
    Ok(GaussianSpread {
        mean: [mx, my],
        covariance: [[cxx, cxy], [cxy, cyy]],
        determinant: det,
        degenerate: det <= 0.0,
    })
}

/// Integer class-label map aligned with a fixation map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(AttentionError::ShapeMismatch {
                context: "LabelMap::new",
                expected: format!("{} labels", height * width),
                got: format!("{}", labels.len()),
            });
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }
}

/// Per-class probability curves across thresholds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassThresholdCurves {
    pub thresholds: Vec<f64>,
    /// `curves[class][threshold]`: proportion of in-mask pixels of that
    /// class; each threshold column sums to 1 over classes.
    pub curves: Vec<Vec<f64>>,
}

/// Class composition of the attended region as it shrinks: maps are
/// max-normalized, thresholded at evenly spaced levels, and pixel classes
/// inside each binary mask are counted over all frames.
pub fn semantic_threshold_histogram(
    maps: &[FixationMap],
    labels: &[LabelMap],
    n_classes: usize,
    n_thresholds: usize,
) -> Result<ClassThresholdCurves> {
    if maps.len() != labels.len() || maps.is_empty() {
        return Err(AttentionError::InvalidInput {
            context: "semantic_threshold_histogram",
            detail: format!(
                "need matching, non-empty map/label sets ({} maps, {} label maps)",
                maps.len(),
                labels.len()
            ),
        });
    }
    let thresholds: Vec<f64> = (1..=n_thresholds)
        .map(|j| j as f64 / (n_thresholds + 1) as f64)
        .collect();
    let mut counts = vec![vec![0u64; thresholds.len()]; n_classes];
    for (map, label) in maps.iter().zip(labels.iter()) {
        if map.shape() != (label.height, label.width) {
            return Err(AttentionError::ShapeMismatch {
                context: "semantic_threshold_histogram",
                expected: format!("{:?}", map.shape()),
                got: format!("{:?}", (label.height, label.width)),
            });
        }
        let peak = map.data().iter().cloned().fold(0.0f64, f64::max);
        if peak <= 0.0 {
            continue;
        }
        for (i, &v) in map.data().iter().enumerate() {
            let value = v / peak;
            let class = label.labels[i] as usize;
            if class >= n_classes {
                return Err(AttentionError::InvalidInput {
                    context: "semantic_threshold_histogram",
                    detail: format!("label id {class} outside class table of {n_classes}"),
                });
            }
            for (ti, &tau) in thresholds.iter().enumerate() {
                if value >= tau {
                    counts[class][ti] += 1;
                }
            }
        }
    }
    let mut curves = vec![vec![0.0; thresholds.len()]; n_classes];
    for ti in 0..thresholds.len() {
        let total: u64 = (0..n_classes).map(|c| counts[c][ti]).sum();
        if total > 0 {
            for (c, curve) in curves.iter_mut().enumerate() {
                curve[ti] = counts[c][ti] as f64 / total as f64;
            }
        }
    }
    Ok(ClassThresholdCurves { thresholds, curves })
}

/// Kendall tau-b rank correlation with tie handling.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(AttentionError::InvalidInput {
            context: "rank_correlation",
            detail: format!("need two equal-length series, got {} and {}", a.len(), b.len()),
        });
    }
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_a = 0i64;
    let mut ties_b = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 && db == 0.0 {
                continue;
            } else if da == 0.0 {
                ties_a += 1;
            } else if db == 0.0 {
                ties_b += 1;
            } else if (da > 0.0) == (db > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = concordant + discordant;
    let denom = (((n0 + ties_a) as f64) * ((n0 + ties_b) as f64)).sqrt();
    if denom == 0.0 {
        return Err(AttentionError::UndefinedMetric {
            context: "rank_correlation",
            detail: "all pairs tied".into(),
        });
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Metadata for one evaluated frame, used for per-condition aggregation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameCondition {
    pub sequence: String,
    pub daytime: String,
    pub weather: String,
    pub landscape: String,
    pub speed_bin: String,
    pub acting: bool,
}

/// Metric triple for one frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub cc: f64,
    pub kl: f64,
    pub ig: f64,
}

/// Per-frame rows plus per-condition aggregates (means over member rows).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<FrameMetrics>,
    pub aggregates: BTreeMap<String, AggregateMetrics>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub frames: usize,
    pub cc: f64,
    pub kl: f64,
    pub ig: f64,
}

impl MetricReport {
    /// Builds the report; conditions may be empty, in which case only the
    /// overall aggregate is emitted.
    pub fn build(rows: Vec<FrameMetrics>, conditions: &[FrameCondition]) -> Result<Self> {
        if !conditions.is_empty() && conditions.len() != rows.len() {
            return Err(AttentionError::InvalidInput {
                context: "MetricReport::build",
                detail: "conditions must be empty or match row count".into(),
            });
        }
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, _) in rows.iter().enumerate() {
            groups.entry("all".into()).or_default().push(i);
            if let Some(cond) = conditions.get(i) {
                for key in [
                    format!("landscape={}", cond.landscape),
                    format!("daytime={}", cond.daytime),
                    format!("weather={}", cond.weather),
                    format!("speed_bin={}", cond.speed_bin),
                    format!("acting={}", cond.acting),
                ] {
                    groups.entry(key).or_default().push(i);
                }
            }
        }
        let mut aggregates = BTreeMap::new();
        for (key, members) in groups {
            let n = members.len() as f64;
            let mut agg = AggregateMetrics {
                frames: members.len(),
                cc: 0.0,
                kl: 0.0,
                ig: 0.0,
            };
            for &i in &members {
                agg.cc += rows[i].cc / n;
                agg.kl += rows[i].kl / n;
                agg.ig += rows[i].ig / n;
            }
            aggregates.insert(key, agg);
        }
        Ok(Self { rows, aggregates })
    }

    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "frame,cc,kl,ig")?;
        for r in &self.rows {
            writeln!(sink, "{},{},{},{}", r.frame, r.cc, r.kl, r.ig)?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, &self).map_err(|e| AttentionError::Parse {
            path: "<metric report>".into(),
            detail: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixmap::tests::gaussian_map;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize) -> FixationMap {
        FixationMap::new(h, w, (0..h * w).map(|_| rng.gen_range(0.01..1.0)).collect())
            .unwrap()
            .normalize()
            .unwrap()
    }

    #[test]
    fn cc_of_map_with_itself_is_one() {
        let m = gaussian_map(16, 16, 8.0, 8.0, 5.0);
        assert_abs_diff_eq!(pearson_cc(&m, &m).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cc_against_complement_is_minus_one() {
        let m = gaussian_map(16, 16, 8.0, 8.0, 5.0);
        let peak = m.data().iter().cloned().fold(0.0f64, f64::max);
        let flipped =
            FixationMap::new(16, 16, m.data().iter().map(|&v| peak - v).collect()).unwrap();
        assert_abs_diff_eq!(pearson_cc(&m, &flipped).unwrap(), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn cc_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_map(&mut rng, 16, 16);
            let b = random_map(&mut rng, 16, 16);
            let got = pearson_cc(&a, &b).unwrap();
            // Direct two-pass formula.
            let n = 256.0;
            let ma = a.sum() / n;
            let mb = b.sum() / n;
            let mut num = 0.0;
            let mut da = 0.0;
            let mut db = 0.0;
            for i in 0..256 {
                num += (a.data()[i] - ma) * (b.data()[i] - mb);
                da += (a.data()[i] - ma).powi(2);
                db += (b.data()[i] - mb).powi(2);
            }
            let expect = num / (da.sqrt() * db.sqrt());
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn cc_rejects_constant_maps() {
        let flat = FixationMap::uniform(8, 8);
        let m = gaussian_map(8, 8, 4.0, 4.0, 3.0);
        assert!(matches!(
            pearson_cc(&flat, &m),
            Err(AttentionError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn cc_invariant_to_positive_affine_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let a = random_map(&mut rng, 8, 8);
            let b = random_map(&mut rng, 8, 8);
            let scale = rng.gen_range(0.1..5.0);
            let offset = rng.gen_range(0.0..2.0);
            let scaled =
                FixationMap::new(8, 8, a.data().iter().map(|&v| scale * v + offset).collect())
                    .unwrap();
            let base = pearson_cc(&a, &b).unwrap();
            let rescaled = pearson_cc(&scaled, &b).unwrap();
            assert_abs_diff_eq!(base, rescaled, epsilon = 1e-9);
        }
    }

    #[test]
    fn kl_identical_maps_near_zero() {
        let m = gaussian_map(12, 12, 6.0, 6.0, 4.0);
        assert!(eval_kl(&m, &m, 1e-8).unwrap() <= 1e-6);
        assert_abs_diff_eq!(eval_kl(&m, &m, 0.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn predictor_near_mean_scores_low_kl_against_mean() {
        // A predictor hugging the training mean diverges less from the mean
        // map than from per-frame ground truth.
        let maps: Vec<FixationMap> = (0..8)
            .map(|i| gaussian_map(16, 16, 4.0 + i as f64, 8.0, 4.0))
            .collect();
        let mean = BaselineMap::training_mean(&maps).unwrap();
        // "Prediction" = slightly perturbed mean.
        let pred = FixationMap::new(
            16,
            16,
            mean.map.data().iter().map(|&v| v * 1.02 + 1e-6).collect(),
        )
        .unwrap()
        .normalize()
        .unwrap();
        let kl_vs_mean = eval_kl(&mean.map, &pred, 1e-8).unwrap();
        let kl_vs_gt: f64 = maps
            .iter()
            .map(|m| eval_kl(m, &pred, 1e-8).unwrap())
            .sum::<f64>()
            / maps.len() as f64;
        assert!(kl_vs_mean < kl_vs_gt);
    }

    #[test]
    fn ig_of_baseline_against_itself_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let baseline = BaselineMap::center_gaussian((16, 16), None).unwrap();
        for _ in 0..10 {
            let gt = random_map(&mut rng, 16, 16);
            let ig = info_gain(&baseline.map.clone(), &gt, &baseline, 1e-8).unwrap();
            assert_eq!(ig, 0.0);
        }
    }

    #[test]
    fn ig_positive_when_prediction_dominates_baseline_on_gt() {
        let gt = gaussian_map(16, 16, 4.0, 4.0, 2.0);
        let pred = gaussian_map(16, 16, 4.0, 4.0, 3.0);
        let baseline = BaselineMap::center_gaussian((16, 16), None).unwrap();
        let ig = info_gain(&pred, &gt, &baseline, 1e-8).unwrap();
        assert!(ig > 0.0, "ig = {ig}");
    }

    #[test]
    fn ig_matches_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let pred = random_map(&mut rng, 8, 8);
            let gt = random_map(&mut rng, 8, 8);
            let base = BaselineMap {
                kind: BaselineKind::TrainingMean,
                map: random_map(&mut rng, 8, 8),
            };
            let eps = 1e-8;
            let got = info_gain(&pred, &gt, &base, eps).unwrap();
            let mut expect = 0.0;
            for i in 0..64 {
                expect += gt.data()[i]
                    * ((eps + pred.data()[i]).log2() - (eps + base.map.data()[i]).log2());
            }
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_spread_recovers_synthesized_covariance() {
        // Large map so truncation bias stays below the 2% recovery band.
        let map = gaussian_map(129, 129, 64.0, 64.0, 200.0);
        let spread = fit_gaussian_spread(&map).unwrap();
        assert_abs_diff_eq!(spread.mean[0], 64.0, epsilon = 1e-6);
        assert_abs_diff_eq!(spread.mean[1], 64.0, epsilon = 1e-6);
        assert!((spread.covariance[0][0] - 200.0).abs() / 200.0 < 0.02);
        assert!((spread.covariance[1][1] - 200.0).abs() / 200.0 < 0.02);
        assert!((spread.determinant - 4.0e4).abs() / 4.0e4 < 0.04);
    }

    #[test]
    fn single_pixel_spread_is_degenerate() {
        let mut map = FixationMap::zeros(8, 8);
        map.data_mut()[3 * 8 + 5] = 1.0;
        let spread = fit_gaussian_spread(&map).unwrap();
        assert_eq!(spread.determinant, 0.0);
        assert!(spread.degenerate);
    }

    #[test]
    fn wider_map_has_strictly_larger_determinant() {
        let narrow = gaussian_map(65, 65, 32.0, 32.0, 20.0);
        let wide = gaussian_map(65, 65, 32.0, 32.0, 60.0);
        let dn = fit_gaussian_spread(&narrow).unwrap().determinant;
        let dw = fit_gaussian_spread(&wide).unwrap().determinant;
        assert!(dw > dn);
    }

    #[test]
    fn spread_translation_invariant_and_scales_quartically() {
        let base = gaussian_map(65, 65, 24.0, 30.0, 16.0);
        let moved = gaussian_map(65, 65, 36.0, 28.0, 16.0);
        let d0 = fit_gaussian_spread(&base).unwrap().determinant;
        let d1 = fit_gaussian_spread(&moved).unwrap().determinant;
        assert!((d0 - d1).abs() / d0 < 1e-6);

        // Doubling sigma scales each covariance eigenvalue by 4, the
        // determinant by 16 = s^4 with s = 2.
        let scaled = gaussian_map(129, 129, 64.0, 64.0, 64.0);
        let reference = gaussian_map(129, 129, 64.0, 64.0, 16.0);
        let ratio = fit_gaussian_spread(&scaled).unwrap().determinant
            / fit_gaussian_spread(&reference).unwrap().determinant;
        assert!((ratio - 16.0).abs() / 16.0 < 0.02, "ratio {ratio}");
    }

    #[test]
    fn single_class_label_map_yields_constant_curve() {
        let map = gaussian_map(8, 8, 4.0, 4.0, 3.0);
        let labels = LabelMap::new(8, 8, vec![2; 64]).unwrap();
        let curves = semantic_threshold_histogram(&[map], &[labels], 4, 9).unwrap();
        for t in 0..9 {
            assert_abs_diff_eq!(curves.curves[2][t], 1.0);
        }
    }

    #[test]
    fn histogram_matches_mask_and_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let map = random_map(&mut rng, 8, 8);
        let labels =
            LabelMap::new(8, 8, (0..64).map(|_| rng.gen_range(0..3u16)).collect()).unwrap();
        let curves =
            semantic_threshold_histogram(&[map.clone()], &[labels.clone()], 3, 9).unwrap();
        let peak = map.data().iter().cloned().fold(0.0f64, f64::max);
        for (ti, &tau) in curves.thresholds.iter().enumerate() {
            let mut counts = [0u64; 3];
            for i in 0..64 {
                if map.data()[i] / peak >= tau {
                    counts[labels.labels[i] as usize] += 1;
                }
            }
            let total: u64 = counts.iter().sum();
            for c in 0..3 {
                let expect = if total > 0 {
                    counts[c] as f64 / total as f64
                } else {
                    0.0
                };
                assert_abs_diff_eq!(curves.curves[c][ti], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn histogram_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let maps: Vec<FixationMap> = (0..4).map(|_| random_map(&mut rng, 8, 8)).collect();
        let labels: Vec<LabelMap> = (0..4)
            .map(|_| {
                LabelMap::new(8, 8, (0..64).map(|_| rng.gen_range(0..5u16)).collect()).unwrap()
            })
            .collect();
        let curves = semantic_threshold_histogram(&maps, &labels, 5, 9).unwrap();
        for ti in 0..9 {
            let col: f64 = (0..5).map(|c| curves.curves[c][ti]).sum();
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn histogram_rejects_out_of_table_label() {
        let map = gaussian_map(4, 4, 2.0, 2.0, 2.0);
        let labels = LabelMap::new(4, 4, vec![7; 16]).unwrap();
        assert!(semantic_threshold_histogram(&[map], &[labels], 4, 9).is_err());
    }

    #[test]
    fn kendall_tau_identical_and_reversed() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let rev: Vec<f64> = a.iter().rev().cloned().collect();
        assert_abs_diff_eq!(rank_correlation(&a, &a).unwrap(), 1.0);
        assert_abs_diff_eq!(rank_correlation(&a, &rev).unwrap(), -1.0);
    }

    #[test]
    fn kendall_tau_matches_pair_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let n = 12;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = rank_correlation(&a, &b).unwrap();
            let mut c = 0i64;
            let mut d = 0i64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = (a[i] - a[j]) * (b[i] - b[j]);
                    if s > 0.0 {
                        c += 1;
                    } else if s < 0.0 {
                        d += 1;
                    }
                }
            }
            // Continuous draws are tie-free, so tau-b reduces to tau-a.
            let expect = (c - d) as f64 / (c + d) as f64;
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn report_aggregates_are_means_of_member_rows() {
        let rows = vec![
            FrameMetrics {
                frame: 0,
                cc: 0.5,
                kl: 1.0,
                ig: 0.1,
            },
            FrameMetrics {
                frame: 1,
                cc: 0.7,
                kl: 2.0,
                ig: 0.3,
            },
        ];
        let conditions = vec![
            FrameCondition {
                sequence: "01".into(),
                daytime: "morning".into(),
                weather: "sunny".into(),
                landscape: "highway".into(),
                speed_bin: "30-50".into(),
                acting: false,
            },
            FrameCondition {
                sequence: "01".into(),
                daytime: "morning".into(),
                weather: "rainy".into(),
                landscape: "highway".into(),
                speed_bin: "30-50".into(),
                acting: true,
            },
        ];
        let report = MetricReport::build(rows, &conditions).unwrap();
        let all = &report.aggregates["all"];
        assert_abs_diff_eq!(all.cc, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(all.kl, 1.5, epsilon = 1e-12);
        let rainy = &report.aggregates["weather=rainy"];
        assert_eq!(rainy.frames, 1);
        assert_abs_diff_eq!(rainy.cc, 0.7, epsilon = 1e-12);
    }
}
