//! Soft-label KL divergence on two-class logits.

use crate::error::{Error, Result};
use crate::image::SIMPLEX_TOL;

pub fn log_softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    [logits[0] - lse, logits[1] - lse]
}

pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let ls = log_softmax(logits);
    [ls[0].exp(), ls[1].exp()]
}

/// Mean over rows of `KL(target ‖ softmax(logits))` and its gradient
/// `(softmax(logits) - target) / N` with respect to the logits.
///
/// Terms with a zero target contribute nothing (`0 · log 0 = 0`).
pub fn kl_soft_loss(logits: &[[f64; 2]], targets: &[[f64; 2]]) -> Result<(f64, Vec<[f64; 2]>)> {
    if logits.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} logit rows but {} targets",
            logits.len(),
            targets.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::EmptyDataset("loss over zero rows".into()));
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (l, t) in logits.iter().zip(targets) {
        if t.iter().any(|v| !(0.0..=1.0).contains(v)) || (t[0] + t[1] - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Argument(format!("target {t:?} is not a probability vector")));
        }
        if !(l[0].is_finite() && l[1].is_finite()) {
            return Err(Error::Numeric(format!("non-finite logits {l:?}")));
        }
        let lp = log_softmax(*l);
        let row: f64 = (0..2)
            .filter(|&c| t[c] > 0.0)
            .map(|c| t[c] * (t[c].ln() - lp[c]))
            .sum();
        // Rounding can leave a matched row a hair below zero.
        total += row.max(0.0);
        grad.push([(lp[0].exp() - t[0]) / n, (lp[1].exp() - t[1]) / n]);
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matched_distribution_is_zero() {
        let logits = [[0.3, -1.2], [2.0, 2.0], [-5.0, 4.0]];
        let targets: Vec<[f64; 2]> = logits.iter().map(|l| softmax(*l)).collect();
        let (loss, grad) = kl_soft_loss(&logits, &targets).unwrap();
        assert!(loss.abs() <= 1e-12);
        assert!(grad.iter().flatten().all(|g| g.abs() <= 1e-12));
    }

    #[test]
    fn non_finite_logits_rejected() {
        let err = kl_soft_loss(&[[f64::NAN, 0.0]], &[[1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn hard_target_is_cross_entropy() {
        let l = [0.7, -0.4];
        let (loss, _) = kl_soft_loss(&[l], &[[1.0, 0.0]]).unwrap();
        let p0 = l[0].exp() / (l[0].exp() + l[1].exp());
        assert!((loss + p0.ln()).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_case() {
        let (loss, grad) = kl_soft_loss(&[[0.0, 0.0]], &[[0.75, 0.25]]).unwrap();
        let want = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((loss - want).abs() <= 1e-12);
        assert!((grad[0][0] + 0.25).abs() < 1e-15 && (grad[0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(matches!(kl_soft_loss(&[[0.0, 0.0]], &[[0.6, 0.6]]), Err(Error::Argument(_))));
        assert!(matches!(kl_soft_loss(&[[0.0, 0.0]], &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let (loss, grad) = kl_soft_loss(&[[800.0, -800.0]], &[[0.0, 1.0]]).unwrap();
        assert!(loss.is_finite() && (loss - 1600.0).abs() < 1e-9);
        assert!(grad.iter().flatten().all(|g| g.is_finite()));
    }

    proptest! {
        #[test]
        fn nonnegative_and_gradient_matches_fd(
            rows in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..=1.0), 1..6)
        ) {
            let logits: Vec<[f64; 2]> = rows.iter().map(|r| [r.0, r.1]).collect();
            let targets: Vec<[f64; 2]> = rows.iter().map(|r| [r.2, 1.0 - r.2]).collect();
            let (loss, grad) = kl_soft_loss(&logits, &targets).unwrap();
            prop_assert!(loss >= 0.0);
            let eps = 1e-6;
            for i in 0..logits.len() {
                for c in 0..2 {
                    let mut up = logits.clone();
                    up[i][c] += eps;
                    let mut dn = logits.clone();
                    dn[i][c] -= eps;
                    let fd = (kl_soft_loss(&up, &targets).unwrap().0 - kl_soft_loss(&dn, &targets).unwrap().0) / (2.0 * eps);
                    prop_assert!((fd - grad[i][c]).abs() <= 1e-8, "{fd} vs {}", grad[i][c]);
                }
            }
        }
    }
}
