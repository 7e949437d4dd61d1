//! Image container, serialization, and the statistics that condition the
//! policy and feed the scorers.
//!
//! Intensities are stored as 32-bit floats in [0, 1]; all arithmetic runs in
//! f64 and is rounded back to f32 on write, so file round-trips are
//! bit-exact and math is stable across platforms.

mod features;
mod io;

pub use features::{extract_features, stats, FeatureVector, FEATURE_LEN, FEATURE_NORMALIZERS};
pub use io::{read_image, write_image};

use crate::{Error, Result};

/// Dense H x W x C grid of unit-interval intensities, row-major and
/// channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Clamp to [0, 1], mapping NaN to 0.
#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::validation("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::validation(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(&f64::from(**v))) {
            return Err(Error::validation(format!(
                "intensity {v} outside [0,1]"
            )));
        }
        Ok(ImageGrid {
            height,
            width,
            channels,
            data,
        })
    }

    /// Constant-valued image.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        let v = clamp01(value) as f32;
        ImageGrid::new(height, width, channels, vec![v; height * width * channels])
    }

    /// Build from a per-element f64 generator `(y, x, c) -> value`, clamping
    /// each value on write.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp01(f(y, x, c)) as f32);
                }
            }
        }
        ImageGrid::new(height, width, channels, data)
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
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        f64::from(self.data[self.idx(y, x, c)])
    }

    /// Rec.601 luma for 3-channel grids; the value itself for grayscale.
    #[inline]
    pub fn luminance(&self, y: usize, x: usize) -> f64 {
        if self.channels == 1 {
            self.get(y, x, 0)
        } else {
            0.299 * self.get(y, x, 0) + 0.587 * self.get(y, x, 1) + 0.114 * self.get(y, x, 2)
        }
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    /// Element-wise map in f64, clamped back on write.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        let data = self
            .data
            .iter()
            .map(|&v| clamp01(f(f64::from(v))) as f32)
            .collect();
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    /// Positional map `(y, x, c, value) -> value` in f64, clamped on write.
    pub fn map_indexed(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> ImageGrid {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    data.push(clamp01(f(y, x, c, self.get(y, x, c))) as f32);
                }
            }
        }
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    /// Box blur with the given radius; the window is intersected with the
    /// image bounds, so constant images are preserved exactly.
    pub fn box_blur(&self, radius: usize) -> ImageGrid {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        self.map_indexed(|y, x, c, _| {
            let mut sum = 0.0;
            let mut n = 0u32;
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = y as isize + dy;
                    let xx = x as isize + dx;
                    if yy >= 0 && xx >= 0 && (yy as usize) < self.height && (xx as usize) < self.width
                    {
                        sum += self.get(yy as usize, xx as usize, c);
                        n += 1;
                    }
                }
            }
            sum / f64::from(n)
        })
    }

    /// `self + t * (other - self)` element-wise.
    pub fn lerp(&self, other: &ImageGrid, t: f64) -> Result<ImageGrid> {
        if !self.same_shape(other) {
            return Err(Error::validation("lerp: shape mismatch"));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| {
                let a = f64::from(a);
                let b = f64::from(b);
                clamp01(a + t * (b - a)) as f32
            })
            .collect();
        Ok(ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        })
    }
}

/// Root-mean-square of element-wise differences.
pub fn residual_rmse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::validation(format!(
            "residual_rmse: shape mismatch {}x{}x{} vs {}x{}x{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok((sum / a.data.len() as f64).sqrt())
}
