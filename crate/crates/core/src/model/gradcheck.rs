//! Finite-difference verification of backpropagation.

use super::cnn::CompactCnn;
use super::loss::kl_soft_loss;
use crate::error::Result;
use crate::image::MultiBandImage;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const GRAD_FLOOR: f64 = 1e-6;

fn loss(net: &CompactCnn, images: &[MultiBandImage], targets: &[[f64; 2]]) -> Result<f64> {
    let out = net.forward(images)?;
    Ok(kl_soft_loss(&out.logits, targets)?.0)
}

/// Largest relative error `|a - n| / max(|a|, |n|, GRAD_FLOOR)` between the
/// analytic gradient `a` and the central difference `n` over every parameter.
pub fn gradient_check(
    net: &CompactCnn,
    images: &[MultiBandImage],
    targets: &[[f64; 2]],
    epsilon: f64,
) -> Result<f64> {
    let out = net.forward(images)?;
    let (_, dlogits) = kl_soft_loss(&out.logits, targets)?;
    let analytic = net.backward(&out.cache, &dlogits)?;

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (pi, grad) in analytic.iter().enumerate() {
        for (ei, &a) in grad.iter().enumerate() {
            let orig = probe.params()[pi].data[ei];
            probe.params_mut()[pi].data[ei] = orig + epsilon;
            let up = loss(&probe, images, targets)?;
            probe.params_mut()[pi].data[ei] = orig - epsilon;
            let down = loss(&probe, images, targets)?;
            probe.params_mut()[pi].data[ei] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
