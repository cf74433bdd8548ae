use crate::error::{Error, Result};

/// Class posterior from logits, shifted by the max logit so large inputs
/// cannot overflow.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&u| (u - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Negative log-likelihood of the 1-based `label` under `softmax(logits)`,
/// with its gradient `softmax(logits) - onehot(label)`.
pub fn softmax_xent_loss(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if label == 0 || label > k {
        return Err(Error::InvalidInput(format!(
            "class label {label} outside 1..={k}"
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&u| (u - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label - 1];
    let mut grad: Vec<f64> = logits.iter().map(|&u| (u - log_sum).exp()).collect();
    grad[label - 1] -= 1.0;
    Ok((loss.max(0.0), grad))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, with its
/// derivative `sigmoid(logit) - target`.
pub fn logistic_loss(logit: f64, target: bool) -> (f64, f64) {
    let t = if target { 1.0 } else { 0.0 };
    let loss = softplus(logit) - t * logit;
    (loss, sigmoid(logit) - t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_logits_give_uniform_posterior() {
        let p = softmax(&[0.0; 10]);
        for v in p {
            assert_abs_diff_eq!(v, 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_saturates_without_overflow() {
        let p = softmax(&[0.0, 1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-12);
        assert!(p[0] < 1e-300);
    }

    #[test]
    fn softmax_reference_values() {
        // e^u / sum e^u for u = [1,2,3], evaluated at 30 digits.
        let p = softmax(&[1.0, 2.0, 3.0]);
        let want = [
            0.090_030_573_170_380_46,
            0.244_728_471_054_797_64,
            0.665_240_955_774_821_9,
        ];
        for (a, b) in p.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn xent_uniform_is_ln_k() {
        for label in 1..=10 {
            let (loss, _) = softmax_xent_loss(&[0.0; 10], label).unwrap();
            assert_abs_diff_eq!(loss, 10f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn xent_confident_correct_prediction() {
        let mut logits = vec![0.0; 5];
        logits[2] = 800.0;
        let (loss, grad) = softmax_xent_loss(&logits, 3).unwrap();
        assert!(loss < 1e-12);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn xent_reference_values() {
        let (loss, grad) = softmax_xent_loss(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_abs_diff_eq!(loss, 0.407_605_964_444_380_1, epsilon = 1e-6);
        let want = [0.090_030_57, 0.244_728_47, -0.334_759_04];
        for (a, b) in grad.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn xent_rejects_out_of_range_labels() {
        assert!(softmax_xent_loss(&[0.0; 3], 0).is_err());
        assert!(softmax_xent_loss(&[0.0; 3], 4).is_err());
    }

    #[test]
    fn logistic_reference_values() {
        let (loss, g) = logistic_loss(0.0, true);
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g, -0.5, epsilon = 1e-15);

        let (loss, g) = logistic_loss(40.0, true);
        assert!(loss.is_finite() && loss < 1e-15);
        assert!(g.abs() < 1e-15);

        let (loss, g) = logistic_loss(1.5, false);
        assert_abs_diff_eq!(loss, 1.5 + (-1.5f64).exp().ln_1p(), epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 1.701_413, epsilon = 1e-6);
        assert_abs_diff_eq!(g, 0.817_574, epsilon = 1e-6);
    }

    #[test]
    fn logistic_extreme_logits_stay_finite() {
        for z in [-1e4, -745.0, 745.0, 1e4] {
            for t in [false, true] {
                let (l, g) = logistic_loss(z, t);
                assert!(l.is_finite() && g.is_finite());
            }
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.1, 0.1]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
    }
}
