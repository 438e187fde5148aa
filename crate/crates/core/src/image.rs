//! The two value types every other module passes around: a channel-last
//! multi-band raster and a two-class probability label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `height × width × channels` raster stored channel-last, row-major.
///
/// Element `(row, col, band)` lives at `(row * width + col) * channels + band`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl MultiBandImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite pixel value at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image shape");
        assert!(value.is_finite());
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds an image by evaluating `f(row, col, band)` for every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for b in 0..channels {
                    data.push(f(r, c, b));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Mutable access for in-crate transforms; callers must keep values finite.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, band: usize) -> usize {
        (row * self.width + col) * self.channels + band
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[self.index(row, col, band)]
    }

    /// Iterates the values of one band in row-major order.
    pub fn band(&self, band: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(band).step_by(self.channels).copied()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "shape {:?} does not match {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Keeps only the listed bands, in the listed order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Argument("band selection is empty".into()));
        }
        if let Some(&b) = bands.iter().find(|&&b| b >= self.channels) {
            return Err(Error::Dimension(format!(
                "band {b} out of range for {} channels",
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.height * self.width * bands.len());
        for px in self.data.chunks_exact(self.channels) {
            data.extend(bands.iter().map(|&b| px[b]));
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            channels: bands.len(),
            data,
        })
    }

    /// Sets every pixel of `band` to zero.
    pub fn zero_band(&mut self, band: usize) {
        let c = self.channels;
        for px in self.data.chunks_exact_mut(c) {
            px[band] = 0.0;
        }
    }
}

/// Probability vector over `[non-landslide, landslide]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel([f64; 2]);

/// Tolerance on `p0 + p1 = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

impl SoftLabel {
    pub fn new(p: [f64; 2]) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) || ((p[0] + p[1]) - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Argument(format!("{p:?} is not a probability vector")));
        }
        Ok(Self(p))
    }

    /// One-hot label for a hard class (0 = non-landslide, 1 = landslide).
    pub fn hard(class: u8) -> Self {
        match class {
            0 => Self([1.0, 0.0]),
            _ => Self([0.0, 1.0]),
        }
    }

    /// Convex combination `lambda * a + (1 - lambda) * b`.
    pub fn mix(a: &Self, b: &Self, lambda: f64) -> Self {
        let mix = |x: f64, y: f64| (lambda * x + (1.0 - lambda) * y).clamp(0.0, 1.0);
        Self([mix(a.0[0], b.0[0]), mix(a.0[1], b.0[1])])
    }

    pub fn probs(&self) -> [f64; 2] {
        self.0
    }

    pub fn landslide(&self) -> f64 {
        self.0[1]
    }

    /// Hard class by argmax, ties resolved towards landslide.
    pub fn argmax(&self) -> u8 {
        u8::from(self.0[1] >= self.0[0])
    }
}
