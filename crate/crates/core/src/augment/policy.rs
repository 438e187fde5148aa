//! Online per-batch augmentation: color and geometric transforms followed by
//! at most one pairwise mix.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mix::{cutmix, mixup};
use crate::error::{Error, Result};
use crate::image::{MultiBandImage, SoftLabel};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    /// Probability of adding Gaussian noise.
    pub noise_prob: f64,
    /// Noise standard deviation as a fraction of each band's standard deviation.
    pub noise_sigma: f64,
    /// Probability of applying color jitter.
    pub jitter_prob: f64,
    /// Max additive brightness shift, in units of the band standard deviation.
    pub brightness: f64,
    /// Max relative contrast change about the band mean.
    pub contrast: f64,
    /// Max relative saturation change; needs `rgb_bands`.
    pub saturation: f64,
    pub rgb_bands: Option<[usize; 3]>,
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    /// Probability of rotating by a random non-zero multiple of 90°.
    pub rotate_prob: f64,
    pub shift_prob: f64,
    pub max_shift: usize,
    pub shear_prob: f64,
    pub max_shear: f64,
    pub cutmix_prob: f64,
    pub mixup_prob: f64,
    pub mixup_alpha: f64,
    pub mixup_beta: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl AugmentPolicy {
    /// Every transform disabled.
    pub fn none() -> Self {
        Self {
            noise_prob: 0.0,
            noise_sigma: 0.0,
            jitter_prob: 0.0,
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
            rgb_bands: None,
            hflip_prob: 0.0,
            vflip_prob: 0.0,
            rotate_prob: 0.0,
            shift_prob: 0.0,
            max_shift: 0,
            shear_prob: 0.0,
            max_shear: 0.0,
            cutmix_prob: 0.0,
            mixup_prob: 0.0,
            mixup_alpha: 1.0,
            mixup_beta: 1.0,
        }
    }

    /// Color, geometric and mixing transforms all switched on.
    pub fn bag_of_freebies() -> Self {
        Self {
            noise_prob: 0.3,
            noise_sigma: 0.05,
            jitter_prob: 0.3,
            brightness: 0.1,
            contrast: 0.1,
            saturation: 0.1,
            rgb_bands: None,
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            rotate_prob: 0.5,
            shift_prob: 0.3,
            max_shift: 4,
            shear_prob: 0.2,
            max_shear: 0.1,
            cutmix_prob: 0.25,
            mixup_prob: 0.25,
            mixup_alpha: 1.0,
            mixup_beta: 1.0,
        }
    }

    pub fn mixes(&self) -> bool {
        self.cutmix_prob > 0.0 || self.mixup_prob > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("noise_prob", self.noise_prob),
            ("jitter_prob", self.jitter_prob),
            ("hflip_prob", self.hflip_prob),
            ("vflip_prob", self.vflip_prob),
            ("rotate_prob", self.rotate_prob),
            ("shift_prob", self.shift_prob),
            ("shear_prob", self.shear_prob),
            ("cutmix_prob", self.cutmix_prob),
            ("mixup_prob", self.mixup_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("{name} = {p} is not a probability")));
            }
        }
        if self.cutmix_prob + self.mixup_prob > 1.0 + 1e-12 {
            return Err(Error::Argument("cutmix_prob + mixup_prob must not exceed 1".into()));
        }
        let mags = [
            ("noise_sigma", self.noise_sigma),
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
            ("max_shear", self.max_shear),
        ];
        for (name, v) in mags {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be a non-negative number")));
            }
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_beta > 0.0) {
            return Err(Error::Argument("mixup beta parameters must be positive".into()));
        }
        Ok(())
    }
}

pub fn flip_horizontal(img: &MultiBandImage) -> MultiBandImage {
    let (h, w, _) = img.shape();
    remap(img, h, w, |r, c| Some((r, w - 1 - c)))
}

pub fn flip_vertical(img: &MultiBandImage) -> MultiBandImage {
    let (h, w, _) = img.shape();
    remap(img, h, w, |r, c| Some((h - 1 - r, c)))
}

/// Rotates counter-clockwise by `quarter_turns * 90°`.
pub fn rotate90(img: &MultiBandImage, quarter_turns: usize) -> MultiBandImage {
    let (h, w, _) = img.shape();
    match quarter_turns % 4 {
        0 => img.clone(),
        1 => remap(img, w, h, |r, c| Some((c, w - 1 - r))),
        2 => remap(img, h, w, |r, c| Some((h - 1 - r, w - 1 - c))),
        _ => remap(img, w, h, |r, c| Some((h - 1 - c, r))),
    }
}

/// Translates content by `(dy, dx)` pixels, filling uncovered pixels with zero.
pub fn shift(img: &MultiBandImage, dy: isize, dx: isize) -> MultiBandImage {
    let (h, w, _) = img.shape();
    remap(img, h, w, |r, c| {
        let sr = r as isize - dy;
        let sc = c as isize - dx;
        ((0..h as isize).contains(&sr) && (0..w as isize).contains(&sc)).then_some((sr as usize, sc as usize))
    })
}

/// Horizontal shear `x' = x + factor * (y - centre)`, bilinear, zero padded.
pub fn shear(img: &MultiBandImage, factor: f64) -> MultiBandImage {
    let (h, w, ch) = img.shape();
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = MultiBandImage::zeros(h, w, ch);
    let dst = out.data_mut();
    for r in 0..h {
        let offset = factor * (r as f64 - cy);
        for c in 0..w {
            let sx = c as f64 - offset;
            let x0 = sx.floor();
            let t = sx - x0;
            let x0 = x0 as isize;
            for b in 0..ch {
                let sample = |x: isize| {
                    if (0..w as isize).contains(&x) {
                        img.get(r, x as usize, b)
                    } else {
                        0.0
                    }
                };
                let (v0, v1) = (sample(x0), sample(x0 + 1));
                dst[(r * w + c) * ch + b] = v0 + (v1 - v0) * t;
            }
        }
    }
    out
}

fn remap(
    img: &MultiBandImage,
    out_h: usize,
    out_w: usize,
    src: impl Fn(usize, usize) -> Option<(usize, usize)>,
) -> MultiBandImage {
    let ch = img.channels();
    let mut out = MultiBandImage::zeros(out_h, out_w, ch);
    let data = img.data();
    let dst = out.data_mut();
    for r in 0..out_h {
        for c in 0..out_w {
            if let Some((sr, sc)) = src(r, c) {
                let from = img.index(sr, sc, 0);
                let to = (r * out_w + c) * ch;
                dst[to..to + ch].copy_from_slice(&data[from..from + ch]);
            }
        }
    }
    out
}

fn band_moments(img: &MultiBandImage) -> (Vec<f64>, Vec<f64>) {
    let n = (img.height() * img.width()) as f64;
    (0..img.channels())
        .map(|b| {
            let mean = img.band(b).sum::<f64>() / n;
            let var = img.band(b).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

fn add_noise(img: &mut MultiBandImage, sigma: f64, rng: &mut RngState) {
    let (_, std) = band_moments(img);
    let ch = img.channels();
    for px in img.data_mut().chunks_exact_mut(ch) {
        for (v, s) in px.iter_mut().zip(&std) {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * s * z;
        }
    }
}

fn color_jitter(img: &mut MultiBandImage, policy: &AugmentPolicy, rng: &mut RngState) {
    let (mean, std) = band_moments(img);
    let ch = img.channels();
    let shifts: Vec<f64> = std
        .iter()
        .map(|s| rng.gen_range(-1.0..=1.0) * policy.brightness * s)
        .collect();
    let gains: Vec<f64> = (0..ch).map(|_| 1.0 + rng.gen_range(-1.0..=1.0) * policy.contrast).collect();
    for px in img.data_mut().chunks_exact_mut(ch) {
        for b in 0..ch {
            px[b] = mean[b] + (px[b] - mean[b]) * gains[b] + shifts[b];
        }
    }
    // Saturation is only meaningful on an optical triple.
    if let Some(rgb) = policy.rgb_bands.filter(|rgb| rgb.iter().all(|&b| b < ch)) {
        let factor = 1.0 + rng.gen_range(-1.0..=1.0) * policy.saturation;
        for px in img.data_mut().chunks_exact_mut(ch) {
            let gray = (px[rgb[0]] + px[rgb[1]] + px[rgb[2]]) / 3.0;
            for &b in &rgb {
                px[b] = gray + (px[b] - gray) * factor;
            }
        }
    }
}

fn augment_one(img: &MultiBandImage, policy: &AugmentPolicy, rng: &mut RngState) -> MultiBandImage {
    let mut out = img.clone();
    if rng.gen::<f64>() < policy.noise_prob {
        add_noise(&mut out, policy.noise_sigma, rng);
    }
    if rng.gen::<f64>() < policy.jitter_prob {
        color_jitter(&mut out, policy, rng);
    }
    if rng.gen::<f64>() < policy.hflip_prob {
        out = flip_horizontal(&out);
    }
    if rng.gen::<f64>() < policy.vflip_prob {
        out = flip_vertical(&out);
    }
    if rng.gen::<f64>() < policy.rotate_prob {
        // Quarter turns would change the shape of a non-square image.
        let turns = if out.height() == out.width() { rng.gen_range(1..4) } else { 2 };
        out = rotate90(&out, turns);
    }
    if rng.gen::<f64>() < policy.shift_prob && policy.max_shift > 0 {
        let m = policy.max_shift as isize;
        out = shift(&out, rng.gen_range(-m..=m), rng.gen_range(-m..=m));
    }
    if rng.gen::<f64>() < policy.shear_prob && policy.max_shear > 0.0 {
        out = shear(&out, rng.gen_range(-policy.max_shear..=policy.max_shear));
    }
    out
}

/// Applies `policy` to a batch, keeping its length and shapes.
///
/// Per-sample color then geometric transforms run first. Then a single draw
/// picks CutMix (probability `cutmix_prob`), Mixup (`mixup_prob`) or neither
/// for the whole batch, pairing each sample with a random batch partner.
pub fn apply_policy(
    batch: &[(MultiBandImage, SoftLabel)],
    policy: &AugmentPolicy,
    rng: &mut RngState,
) -> Result<Vec<(MultiBandImage, SoftLabel)>> {
    policy.validate()?;
    let first = batch
        .first()
        .ok_or_else(|| Error::Argument("cannot augment an empty batch".into()))?;
    for (img, _) in batch {
        first.0.check_same_shape(img)?;
    }

    let mut out: Vec<(MultiBandImage, SoftLabel)> = batch
        .iter()
        .map(|(img, label)| (augment_one(img, policy, rng), *label))
        .collect();

    let u: f64 = rng.gen();
    let use_cutmix = u < policy.cutmix_prob;
    let use_mixup = !use_cutmix && u < policy.cutmix_prob + policy.mixup_prob;
    if (use_cutmix || use_mixup) && out.len() >= 2 {
        let mut partners: Vec<usize> = (0..out.len()).collect();
        partners.shuffle(rng);
        let sources = out.clone();
        for (i, &j) in partners.iter().enumerate() {
            let a = (&sources[i].0, &sources[i].1);
            let b = (&sources[j].0, &sources[j].1);
            let mixed = if use_cutmix {
                cutmix(a, b, rng)?.0
            } else {
                mixup(a, b, policy.mixup_alpha, policy.mixup_beta, rng)?
            };
            out[i] = (mixed.image, mixed.label);
        }
    }
    Ok(out)
}
