//! Bilinear resampling with half-pixel centers.

use crate::error::{Error, Result};
use crate::image::MultiBandImage;

/// Source coordinate and blend weight for output index `dst`.
fn source_coord(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Resizes every band to `out_h × out_w`.
///
/// Blends are written as `a + (b - a) t`, so constant regions stay exactly
/// constant and resizing to the current size returns the input unchanged.
pub fn resize_bilinear(img: &MultiBandImage, out_h: usize, out_w: usize) -> Result<MultiBandImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Argument(format!("resize target must be positive, got {out_h}x{out_w}")));
    }
    let (h, w, c) = img.shape();
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let cols: Vec<_> = (0..out_w).map(|x| source_coord(x, w, out_w)).collect();
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for y in 0..out_h {
        let (r0, r1, ty) = source_coord(y, h, out_h);
        for &(c0, c1, tx) in &cols {
            for b in 0..c {
                let top = lerp(img.get(r0, c0, b), img.get(r0, c1, b), tx);
                let bottom = lerp(img.get(r1, c0, b), img.get(r1, c1, b), tx);
                data.push(lerp(top, bottom, ty));
            }
        }
    }
    MultiBandImage::new(out_h, out_w, c, data)
}
