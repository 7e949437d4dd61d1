//! Deterministic image statistics.
//!
//! [`extract_features`] produces the 8-entry vector that conditions the plan
//! policy; [`stats`] exposes the underlying raw statistics used by the
//! quality scorers.
//!
//! Feature normalizers are fixed constants (not learned), so identical
//! images always yield identical vectors:
//!
//! | index | statistic                  | normalizer |
//! |-------|----------------------------|------------|
//! | 0     | mean luminance             | 1.0        |
//! | 1     | luminance std              | 0.5        |
//! | 2     | Laplacian-energy sharpness | 16.0       |
//! | 3     | dark-channel mean (7x7)    | 1.0        |
//! | 4     | saturation mean            | 1.0        |
//! | 5     | high-frequency noise proxy | 4.0        |
//! | 6     | directional-streak energy  | 0.5        |
//! | 7     | blockiness proxy           | 0.5        |
//!
//! The sharpness normalizer 16.0 is the interior Laplacian energy of a 0/1
//! checkerboard, the most-oscillatory grid, so that pattern saturates the
//! feature to exactly 1.0.

use serde::{Deserialize, Serialize};

use super::ImageGrid;

pub const FEATURE_LEN: usize = 8;

pub const FEATURE_NORMALIZERS: [f64; FEATURE_LEN] = [1.0, 0.5, 16.0, 1.0, 1.0, 4.0, 0.5, 0.5];

/// Fixed-length feature vector with every entry in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }
    pub fn mean_luminance(&self) -> f64 {
        self.0[0]
    }
    pub fn luminance_std(&self) -> f64 {
        self.0[1]
    }
    pub fn sharpness(&self) -> f64 {
        self.0[2]
    }
    pub fn dark_channel_mean(&self) -> f64 {
        self.0[3]
    }
    pub fn saturation_mean(&self) -> f64 {
        self.0[4]
    }
    pub fn noise_proxy(&self) -> f64 {
        self.0[5]
    }
    pub fn streak_energy(&self) -> f64 {
        self.0[6]
    }
    pub fn blockiness(&self) -> f64 {
        self.0[7]
    }
}

pub fn extract_features(img: &ImageGrid) -> FeatureVector {
    let raw = [
        stats::mean_luminance(img),
        stats::luminance_std(img),
        stats::laplacian_energy(img),
        stats::dark_channel_mean(img),
        stats::saturation_mean(img),
        stats::noise_energy(img),
        stats::streak_energy(img),
        stats::blockiness(img),
    ];
    let mut values = [0.0; FEATURE_LEN];
    for (i, (r, n)) in raw.iter().zip(FEATURE_NORMALIZERS.iter()).enumerate() {
        values[i] = (r / n).clamp(0.0, 1.0);
    }
    FeatureVector(values)
}

/// Raw (un-normalized) statistics. All are pure functions of the pixel data.
pub mod stats {
    use super::ImageGrid;

    /// Window half-size of the dark-channel minimum filter (7x7).
    const DARK_RADIUS: isize = 3;
    /// Gradient magnitude below which a pixel counts as low-texture.
    const LOW_GRADIENT: f64 = 0.08;

    pub fn mean_luminance(img: &ImageGrid) -> f64 {
        let mut sum = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                sum += img.luminance(y, x);
            }
        }
        sum / (img.height() * img.width()) as f64
    }

    /// Population standard deviation of luminance.
    pub fn luminance_std(img: &ImageGrid) -> f64 {
        let n = (img.height() * img.width()) as f64;
        let mean = mean_luminance(img);
        let mut ss = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let d = img.luminance(y, x) - mean;
                ss += d * d;
            }
        }
        (ss / n).sqrt()
    }

    /// 4-neighbor Laplacian of luminance at an interior pixel.
    #[inline]
    fn laplacian(img: &ImageGrid, y: usize, x: usize) -> f64 {
        img.luminance(y - 1, x) + img.luminance(y + 1, x) + img.luminance(y, x - 1)
            + img.luminance(y, x + 1)
            - 4.0 * img.luminance(y, x)
    }

    /// Mean squared Laplacian response over interior pixels; 0 for images
    /// smaller than 3x3.
    pub fn laplacian_energy(img: &ImageGrid) -> f64 {
        if img.height() < 3 || img.width() < 3 {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut n = 0u64;
        for y in 1..img.height() - 1 {
            for x in 1..img.width() - 1 {
                let l = laplacian(img, y, x);
                sum += l * l;
                n += 1;
            }
        }
        sum / n as f64
    }

    /// Mean of the dark channel: per-pixel channel minimum eroded by a 7x7
    /// minimum filter (window intersected with the image).
    pub fn dark_channel_mean(img: &ImageGrid) -> f64 {
        let h = img.height();
        let w = img.width();
        let mut chan_min = vec![0.0f64; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut m = f64::INFINITY;
                for c in 0..img.channels() {
                    m = m.min(img.get(y, x, c));
                }
                chan_min[y * w + x] = m;
            }
        }
        let mut sum = 0.0;
        for y in 0..h {
            for x in 0..w {
                let mut m = f64::INFINITY;
                for dy in -DARK_RADIUS..=DARK_RADIUS {
                    for dx in -DARK_RADIUS..=DARK_RADIUS {
                        let yy = y as isize + dy;
                        let xx = x as isize + dx;
                        if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                            m = m.min(chan_min[yy as usize * w + xx as usize]);
                        }
                    }
                }
                sum += m;
            }
        }
        sum / (h * w) as f64
    }

    /// Mean per-pixel channel range; 0 for grayscale.
    pub fn saturation_mean(img: &ImageGrid) -> f64 {
        if img.channels() == 1 {
            return 0.0;
        }
        let mut sum = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for c in 0..img.channels() {
                    let v = img.get(y, x, c);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                sum += hi - lo;
            }
        }
        sum / (img.height() * img.width()) as f64
    }

    /// Central-difference luminance gradient magnitude at an interior pixel.
    #[inline]
    fn gradient(img: &ImageGrid, y: usize, x: usize) -> (f64, f64) {
        let dx = (img.luminance(y, x + 1) - img.luminance(y, x - 1)) / 2.0;
        let dy = (img.luminance(y + 1, x) - img.luminance(y - 1, x)) / 2.0;
        (dx, dy)
    }

    /// Mean |Laplacian| over low-gradient interior pixels: high-frequency
    /// content where there is no structure to explain it.
    pub fn noise_energy(img: &ImageGrid) -> f64 {
        if img.height() < 3 || img.width() < 3 {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut n = 0u64;
        for y in 1..img.height() - 1 {
            for x in 1..img.width() - 1 {
                let (dx, dy) = gradient(img, y, x);
                if (dx * dx + dy * dy).sqrt() < LOW_GRADIENT {
                    sum += laplacian(img, y, x).abs();
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Mean |horizontal gradient|: bright near-vertical streaks produce
    /// strong horizontal transitions.
    pub fn streak_energy(img: &ImageGrid) -> f64 {
        if img.width() < 3 {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut n = 0u64;
        for y in 0..img.height() {
            for x in 1..img.width() - 1 {
                let dx = (img.luminance(y, x + 1) - img.luminance(y, x - 1)) / 2.0;
                sum += dx.abs();
                n += 1;
            }
        }
        sum / n as f64
    }

    /// Excess discontinuity along 8-aligned block boundaries over the
    /// off-boundary baseline, for rows and columns combined.
    pub fn blockiness(img: &ImageGrid) -> f64 {
        const BLOCK: usize = 8;
        let mut on = 0.0;
        let mut on_n = 0u64;
        let mut off = 0.0;
        let mut off_n = 0u64;
        for y in 0..img.height() {
            for x in 1..img.width() {
                let d = (img.luminance(y, x) - img.luminance(y, x - 1)).abs();
                if x % BLOCK == 0 {
                    on += d;
                    on_n += 1;
                } else {
                    off += d;
                    off_n += 1;
                }
            }
        }
        for x in 0..img.width() {
            for y in 1..img.height() {
                let d = (img.luminance(y, x) - img.luminance(y - 1, x)).abs();
                if y % BLOCK == 0 {
                    on += d;
                    on_n += 1;
                } else {
                    off += d;
                    off_n += 1;
                }
            }
        }
        if on_n == 0 || off_n == 0 {
            return 0.0;
        }
        (on / on_n as f64 - off / off_n as f64).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_features() {
        let img = ImageGrid::filled(16, 16, 3, 0.5).unwrap();
        let f = extract_features(&img);
        assert_eq!(f.sharpness(), 0.0);
        assert_eq!(f.luminance_std(), 0.0);
        assert!((f.dark_channel_mean() - 0.5).abs() < 1e-9);
        assert!((f.mean_luminance() - 0.5).abs() < 1e-6);
        assert_eq!(f.streak_energy(), 0.0);
        assert_eq!(f.blockiness(), 0.0);
    }

    #[test]
    fn white_image_dark_channel_is_one() {
        let img = ImageGrid::filled(12, 12, 3, 1.0).unwrap();
        let f = extract_features(&img);
        assert!((f.dark_channel_mean() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn checkerboard_saturates_sharpness() {
        // Interior Laplacian of a 0/1 checkerboard is +-4 everywhere, so the
        // energy is exactly 16 and the normalized feature is exactly 1.
        let img = ImageGrid::from_fn(16, 16, 1, |y, x, _| ((y + x) % 2) as f64).unwrap();
        let raw = stats::laplacian_energy(&img);
        assert!((raw - 16.0).abs() < 1e-9, "raw energy {raw}");
        assert_eq!(extract_features(&img).sharpness(), 1.0);
    }

    #[test]
    fn features_in_unit_range() {
        let img = ImageGrid::from_fn(20, 20, 3, |y, x, c| {
            ((y * 7 + x * 3 + c * 11) % 13) as f64 / 12.0
        })
        .unwrap();
        for v in extract_features(&img).values() {
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn deterministic() {
        let img = ImageGrid::from_fn(10, 14, 3, |y, x, c| {
            ((y as f64).sin().abs() + x as f64 * 0.01 + c as f64 * 0.1).fract()
        })
        .unwrap();
        assert_eq!(extract_features(&img), extract_features(&img.clone()));
    }
}
