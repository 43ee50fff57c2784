use super::Real;
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[target]`, evaluated via log-sum-exp in f64.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::domain(format!(
            "target token {target} outside alphabet of {}",
            logits.len()
        )));
    }
    let max = logits
        .iter()
        .map(|l| l.f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l.f64() - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[target].f64())
}

/// Gradient of [`softmax_cross_entropy`] w.r.t. the logits, written into `out`.
pub fn softmax_cross_entropy_grad<T: Real>(logits: &[T], target: usize, out: &mut [T]) {
    let p = softmax(logits);
    for (i, (o, pi)) in out.iter_mut().zip(p).enumerate() {
        *o = if i == target { pi - T::one() } else { pi };
    }
}

/// Mean squared difference.
pub fn mse<T: Real>(y: &[T], target: &[T]) -> Result<f64> {
    if y.len() != target.len() {
        return Err(Error::shape(format!(
            "prediction has {} values, target {}",
            y.len(),
            target.len()
        )));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = y
        .iter()
        .zip(target)
        .map(|(a, b)| (a.f64() - b.f64()).powi(2))
        .sum();
    Ok(sum / y.len() as f64)
}

/// Gradient of [`mse`] w.r.t. `y`, scaled by `scale` (e.g. `1 / batch`).
pub fn mse_grad<T: Real>(y: &[T], target: &[T], scale: T, out: &mut [T]) {
    let k = T::of(2.0 / y.len().max(1) as f64) * scale;
    for ((o, &a), &b) in out.iter_mut().zip(y).zip(target) {
        *o = k * (a - b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_alphabet() {
        let ce = softmax_cross_entropy(&[0.25f32; 50], 17).unwrap();
        assert!((ce - 50f64.ln()).abs() < 1e-6);
        assert!((ce - 3.912).abs() < 1e-3);
    }

    #[test]
    fn two_logit_case() {
        // p = 3 / (1 + 3)
        let ce = softmax_cross_entropy(&[0.0f64, 3f64.ln()], 1).unwrap();
        assert!((ce - (-(0.75f64).ln())).abs() < 1e-12);
        assert!((ce - 0.2877).abs() < 1e-4);
    }

    #[test]
    fn out_of_alphabet_target() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0f32; 4], 4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mse_of_identical_is_zero() {
        assert_eq!(mse(&[1.0f32, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((mse(&[0.0f64, 0.0], &[1.0, 3.0]).unwrap() - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-80.0f64..80.0, 1..64)) {
            let total: f64 = softmax(&logits).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-6);
        }

        #[test]
        fn cross_entropy_nonnegative(logits in prop::collection::vec(-30.0f32..30.0, 2..50), t in 0usize..50) {
            let t = t % logits.len();
            prop_assert!(softmax_cross_entropy(&logits, t).unwrap() >= 0.0);
        }
    }
}
