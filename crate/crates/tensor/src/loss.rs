use crate::{Real, Result, TensorError};

/// Kullback-Leibler divergence between two attention maps with a stability
/// constant:
///
/// `sum_i y(i) * ln(eps + y(i) / (eps + yhat(i)))`
///
/// Both inputs are normalized to probability distributions internally. The
/// returned gradient is taken with respect to the *pre-normalization*
/// prediction, i.e. the chain rule through the normalization is included.
pub fn kl_loss<T: Real>(target: &[T], pred: &[T], eps: f64) -> Result<(f64, Vec<T>)> {
    if target.len() != pred.len() {
        return Err(TensorError::ShapeMismatch {
            context: "kl_loss",
            expected: format!("{} elements", target.len()),
            got: format!("{}", pred.len()),
        });
    }
    if target.iter().chain(pred.iter()).any(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite { context: "kl_loss" });
    }
    let ty: f64 = target.iter().map(|v| v.as_f64()).sum();
    let tp: f64 = pred.iter().map(|v| v.as_f64()).sum();
    if ty <= 0.0 || tp <= 0.0 {
        return Err(TensorError::InvalidDimension {
            context: "kl_loss",
            detail: format!("maps must have positive mass, got sums {ty} and {tp}"),
        });
    }

    let mut loss = 0.0;
    // d(loss)/d(yhat_i), before the normalization chain rule.
    let mut dyhat = vec![0.0f64; pred.len()];
    for i in 0..target.len() {
        let y = target[i].as_f64() / ty;
        if y == 0.0 {
            continue;
        }
        let yhat = pred[i].as_f64() / tp;
        let ratio = eps + y / (eps + yhat);
        loss += y * ratio.ln();
        dyhat[i] = -y * y / (ratio * (eps + yhat) * (eps + yhat));
    }

    // yhat_i = p_i / S  =>  d yhat_i / d p_j = (delta_ij - yhat_j) / S.
    let weighted: f64 = dyhat
        .iter()
        .zip(pred.iter())
        .map(|(g, p)| g * p.as_f64() / tp)
        .sum();
    let grad = dyhat
        .iter()
        .map(|g| T::from_f64((g - weighted) / tp))
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_uniform_maps_score_near_zero() {
        let uniform = vec![0.01f64; 100];
        let (loss, _) = kl_loss(&uniform, &uniform, 1e-8).unwrap();
        assert!(loss.abs() <= 1e-6, "loss = {loss}");
    }

    #[test]
    fn point_mass_against_uniform_is_log_n() {
        let mut target = vec![0.0f64; 100];
        target[37] = 1.0;
        let pred = vec![0.01f64; 100];
        let (loss, _) = kl_loss(&target, &pred, 0.0).unwrap();
        assert_abs_diff_eq!(loss, (100.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn self_divergence_is_exactly_zero_without_eps() {
        let map: Vec<f64> = (1..=16).map(|v| v as f64 / 136.0).collect();
        let (loss, _) = kl_loss(&map, &map, 0.0).unwrap();
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_nan() {
        let a = vec![0.5f32, 0.5];
        let b = vec![f32::NAN, 1.0];
        assert!(kl_loss(&a, &b, 1e-8).is_err());
    }

    #[test]
    fn rejects_zero_mass() {
        let a = vec![0.5f32, 0.5];
        let b = vec![0.0f32, 0.0];
        assert!(kl_loss(&a, &b, 1e-8).is_err());
    }
}
