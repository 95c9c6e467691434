use crate::{GeometryError, Homography, Result};
use nalgebra::{DMatrix, Matrix3};

/// Hartley-style conditioning: translate the centroid to the origin and scale
/// so the mean distance from it is sqrt(2).
fn normalize_points(points: &[[f64; 2]]) -> Result<(Vec<[f64; 2]>, Matrix3<f64>)> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= 1e-12 {
        return Err(GeometryError::Degenerate(
            "all points coincide; cannot condition".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let transform = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let normalized = points
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    Ok((normalized, transform))
}

/// Least-squares homography from point correspondences via the normalized
/// direct linear transform. Exact for four non-degenerate pairs; for more
/// pairs it minimizes the algebraic error.
pub fn estimate_homography_dlt(correspondences: &[([f64; 2], [f64; 2])]) -> Result<Homography> {
    let n = correspondences.len();
    if n < 4 {
        return Err(GeometryError::TooFewCorrespondences { needed: 4, got: n });
    }
    let src: Vec<[f64; 2]> = correspondences.iter().map(|c| c.0).collect();
    let dst: Vec<[f64; 2]> = correspondences.iter().map(|c| c.1).collect();
    let (src_n, t_src) = normalize_points(&src)?;
    let (dst_n, t_dst) = normalize_points(&dst)?;

    // Two rows per correspondence; padded with zero rows so the SVD exposes
    // the full right-singular basis including the nullspace.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(dst_n.iter()).enumerate() {
        let (x, y) = (s[0], s[1]);
        let (u, v) = (d[0], d[1]);
        let r0 = 2 * i;
        let r1 = 2 * i + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| GeometryError::Singular("svd failed".into()))?;
    let singular = &svd.singular_values;
    // A rank deficiency beyond the expected 1-D nullspace means the points
    // do not determine a homography (e.g. three collinear source points).
    let largest = singular[0];
    if n == 4 && singular[7] <= 1e-9 * largest.max(1e-300) {
        return Err(GeometryError::Degenerate(
            "correspondences do not determine a unique homography".into(),
        ));
    }
    let h_vec = v_t.row(8);
    let h_n = Matrix3::new(
        h_vec[0], h_vec[1], h_vec[2], h_vec[3], h_vec[4], h_vec[5], h_vec[6], h_vec[7], h_vec[8],
    );
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| GeometryError::Singular("conditioning transform".into()))?;
    Homography::new(t_dst_inv * h_n * t_src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]
    }

    #[test]
    fn identity_from_four_fixed_points() {
        let pairs: Vec<_> = square().into_iter().map(|p| (p, p)).collect();
        let h = estimate_homography_dlt(&pairs).unwrap();
        for (a, e) in h
            .to_row_major()
            .iter()
            .zip(Homography::identity().to_row_major().iter())
        {
            assert_abs_diff_eq!(a, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn translation_from_four_points() {
        let pairs: Vec<_> = square()
            .into_iter()
            .map(|p| (p, [p[0] + 5.0, p[1] + 7.0]))
            .collect();
        let h = estimate_homography_dlt(&pairs).unwrap();
        let expected = Homography::translation(5.0, 7.0);
        for (a, e) in h
            .to_row_major()
            .iter()
            .zip(expected.to_row_major().iter())
        {
            assert_abs_diff_eq!(a, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_three_collinear_source_points() {
        let pairs = vec![
            ([0.0, 0.0], [0.0, 0.0]),
            ([1.0, 0.0], [1.0, 0.0]),
            ([2.0, 0.0], [2.0, 0.0]),
            ([3.0, 1.0], [3.0, 1.0]),
        ];
        assert!(estimate_homography_dlt(&pairs).is_err());
    }

    #[test]
    fn rejects_too_few_pairs() {
        let pairs = vec![([0.0, 0.0], [0.0, 0.0]); 3];
        assert!(matches!(
            estimate_homography_dlt(&pairs),
            Err(GeometryError::TooFewCorrespondences { .. })
        ));
    }
}
