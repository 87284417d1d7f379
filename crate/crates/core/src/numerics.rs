//! Numerically stable scalar nonlinearities shared across models.

/// Logistic sigmoid, stable for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow; exact limit x for large x, 0 for very
/// negative x.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln sigmoid(x) = -softplus(-x). Finite for |x| up to the f64 range.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// ln (1 - sigmoid(x)) = -softplus(x).
pub fn log_one_minus_sigmoid(x: f64) -> f64 {
    -softplus(x)
}

/// Binary cross-entropy expressed on the logit: softplus(z) - y z.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

/// In-place softmax over one row of logits, max-shifted for stability.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// log(sum(exp(logits))), max-shifted.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = logits.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        let x = 1.7;
        assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        assert!(log_sigmoid(700.0).is_finite());
        assert!(log_sigmoid(-700.0).is_finite());
        assert!(log_one_minus_sigmoid(700.0).is_finite());
        assert!((log_sigmoid(-700.0) - -700.0).abs() < 1e-9);
        assert!((log_one_minus_sigmoid(700.0) - -700.0).abs() < 1e-9);
    }

    #[test]
    fn bce_matches_naive_formula_in_safe_range() {
        for &(z, y) in &[(0.3, 1.0), (-1.2, 0.0), (2.5, 1.0), (-0.7, 1.0)] {
            let p = sigmoid(z);
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut row = vec![1.0, 2.0, 3.0, 4.0];
        softmax_in_place(&mut row);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(row.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2.0f64.ln())).abs() < 1e-9);
    }
}
