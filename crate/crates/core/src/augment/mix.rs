//! Pairwise label-mixing augmentations.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::image::{MultiBandImage, SoftLabel};
use crate::rng::RngState;

/// Half-open pixel rectangle: columns `x1..x2`, rows `y1..y2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Result of mixing two labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed {
    pub image: MultiBandImage,
    pub label: SoftLabel,
    /// Weight on the first sample.
    pub lambda: f64,
}

/// Two distinct integers from `0..=len`, ordered.
fn ordered_pair(len: usize, rng: &mut RngState) -> (usize, usize) {
    let a = rng.gen_range(0..=len);
    // Uniform over the remaining `len` values.
    let mut b = rng.gen_range(0..len);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

pub fn sample_rect(height: usize, width: usize, rng: &mut RngState) -> Rect {
    let (x1, x2) = ordered_pair(width, rng);
    let (y1, y2) = ordered_pair(height, rng);
    Rect { x1, y1, x2, y2 }
}

/// Pastes `b`'s pixels inside `rect` over `a` (all bands) and mixes labels by
/// `lambda = 1 - area / (W H)`.
pub fn cutmix_with_rect(
    a: (&MultiBandImage, &SoftLabel),
    b: (&MultiBandImage, &SoftLabel),
    rect: Rect,
) -> Result<Mixed> {
    a.0.check_same_shape(b.0)?;
    let (h, w, c) = a.0.shape();
    if !(rect.x1 < rect.x2 && rect.x2 <= w && rect.y1 < rect.y2 && rect.y2 <= h) {
        return Err(Error::Argument(format!("{rect:?} is not inside a {h}x{w} image")));
    }
    let mut image = a.0.clone();
    let src = b.0.data();
    let dst = image.data_mut();
    for r in rect.y1..rect.y2 {
        let lo = (r * w + rect.x1) * c;
        let hi = (r * w + rect.x2) * c;
        dst[lo..hi].copy_from_slice(&src[lo..hi]);
    }
    let lambda = 1.0 - rect.area() as f64 / (w * h) as f64;
    Ok(Mixed {
        image,
        label: SoftLabel::mix(a.1, b.1, lambda),
        lambda,
    })
}

/// CutMix with a uniformly drawn rectangle; also returns the rectangle.
pub fn cutmix(
    a: (&MultiBandImage, &SoftLabel),
    b: (&MultiBandImage, &SoftLabel),
    rng: &mut RngState,
) -> Result<(Mixed, Rect)> {
    a.0.check_same_shape(b.0)?;
    let rect = sample_rect(a.0.height(), a.0.width(), rng);
    Ok((cutmix_with_rect(a, b, rect)?, rect))
}

/// `lambda * a + (1 - lambda) * b` for both image and label.
pub fn mixup_with_lambda(
    a: (&MultiBandImage, &SoftLabel),
    b: (&MultiBandImage, &SoftLabel),
    lambda: f64,
) -> Result<Mixed> {
    a.0.check_same_shape(b.0)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("mixup weight {lambda} outside [0, 1]")));
    }
    let data = a
        .0
        .data()
        .iter()
        .zip(b.0.data())
        .map(|(&x, &y)| (lambda * x + (1.0 - lambda) * y).clamp(x.min(y), x.max(y)))
        .collect();
    let (h, w, c) = a.0.shape();
    Ok(Mixed {
        image: MultiBandImage::new(h, w, c, data)?,
        label: SoftLabel::mix(a.1, b.1, lambda),
        lambda,
    })
}

/// Mixup with `lambda ~ Beta(alpha, beta)`; `alpha = beta = 1` is uniform.
pub fn mixup(
    a: (&MultiBandImage, &SoftLabel),
    b: (&MultiBandImage, &SoftLabel),
    alpha: f64,
    beta: f64,
    rng: &mut RngState,
) -> Result<Mixed> {
    a.0.check_same_shape(b.0)?;
    let lambda = sample_mix_weight(alpha, beta, rng)?;
    mixup_with_lambda(a, b, lambda)
}

pub(crate) fn sample_mix_weight(alpha: f64, beta: f64, rng: &mut RngState) -> Result<f64> {
    if alpha == 1.0 && beta == 1.0 {
        return Ok(rng.gen::<f64>());
    }
    let dist = Beta::new(alpha, beta).map_err(|e| Error::Argument(format!("mixup beta: {e}")))?;
    Ok(dist.sample(rng))
}
