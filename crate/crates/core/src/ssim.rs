//! Windowed structural similarity for multi-band rasters.
//!
//! Each band is tiled by non-overlapping `8 × 8` windows (trailing rows and
//! columns that do not fill a window are ignored; images smaller than a window
//! in either direction use one window spanning that whole direction). The
//! per-window index is
//!
//! ```text
//! SSIM = (2 μa μb + C1)(2 σab + C2) / ((μa² + μb² + C1)(σa² + σb² + C2))
//! ```
//!
//! with population moments, `C1 = (K1 L)²`, `C2 = (K2 L)²`, `K1 = 0.01`,
//! `K2 = 0.03`, and `L` the value range of the band over both images (floored
//! at `1e-6`). Windows are averaged per band, then bands are averaged.

use crate::error::Result;
use crate::image::MultiBandImage;

pub const WINDOW: usize = 8;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const MIN_DYNAMIC_RANGE: f64 = 1e-6;

/// Mean structural similarity over bands, in `[-1, 1]`.
pub fn ssim(a: &MultiBandImage, b: &MultiBandImage) -> Result<f64> {
    a.check_same_shape(b)?;
    let bands = a.channels();
    let total: f64 = (0..bands).map(|band| band_ssim(a, b, band)).sum();
    Ok(total / bands as f64)
}

/// SSIM of a single band pair.
pub fn band_ssim(a: &MultiBandImage, b: &MultiBandImage, band: usize) -> f64 {
    let (h, w, _) = a.shape();
    let (lo, hi) = a
        .band(band)
        .chain(b.band(band))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = (hi - lo).max(MIN_DYNAMIC_RANGE);
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);

    let win_h = WINDOW.min(h);
    let win_w = WINDOW.min(w);
    let rows = h / win_h;
    let cols = w / win_w;

    let mut sum = 0.0;
    for wr in 0..rows {
        for wc in 0..cols {
            sum += window_ssim(a, b, band, wr * win_h, wc * win_w, win_h, win_w, c1, c2);
        }
    }
    sum / (rows * cols) as f64
}

#[allow(clippy::too_many_arguments)]
fn window_ssim(
    a: &MultiBandImage,
    b: &MultiBandImage,
    band: usize,
    r0: usize,
    c0: usize,
    win_h: usize,
    win_w: usize,
    c1: f64,
    c2: f64,
) -> f64 {
    let n = (win_h * win_w) as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    for r in r0..r0 + win_h {
        for c in c0..c0 + win_w {
            sa += a.get(r, c, band);
            sb += b.get(r, c, band);
        }
    }
    let (mu_a, mu_b) = (sa / n, sb / n);

    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for r in r0..r0 + win_h {
        for c in c0..c0 + win_w {
            let da = a.get(r, c, band) - mu_a;
            let db = b.get(r, c, band) - mu_b;
            vaa += da * da;
            vbb += db * db;
            vab += da * db;
        }
    }
    let (var_a, var_b, cov) = (vaa / n, vbb / n, vab / n);

    let num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2);
    let den = ((mu_a * mu_a + mu_b * mu_b) + c1) * ((var_a + var_b) + c2);
    num / den
}
