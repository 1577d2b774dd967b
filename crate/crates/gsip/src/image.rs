//! Multichannel raster images with samples in `[0, 1]`.
//!
//! Pixels are stored row-major and channel-interleaved. Pixel `(x, y)`
//! maps to graph node `y * width + x`; this indexing convention is shared
//! by every module that builds graphs over pixels.

use crate::error::{Error, Result};

/// A raster of scalar intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl ImagePlane {
    /// Build an image from row-major, channel-interleaved samples.
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput("image has zero width or height"));
        }
        if channels == 0 {
            return Err(Error::InvalidImage("channel count must be >= 1".into()));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(Error::InvalidImage(format!(
                "sample count {} does not match {}x{}x{} = {}",
                samples.len(),
                width,
                height,
                channels,
                expected
            )));
        }
        if let Some((i, &s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || **s < 0.0 || **s > 1.0)
        {
            return Err(Error::InvalidImage(format!(
                "sample {i} = {s} is outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    /// Single-channel image.
    pub fn gray(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, samples)
    }

    /// Constant image.
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Graph node index of pixel `(x, y)`.
    #[inline]
    pub fn node(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// Sample with edge-replicated out-of-range coordinates.
    #[inline]
    pub fn sample_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.sample(x, y, c)
    }

    /// Squared photometric distance between two pixels, summed over channels.
    #[inline]
    pub fn photometric_dist_sq(&self, a: usize, b: usize) -> f64 {
        let pa = a * self.channels;
        let pb = b * self.channels;
        let mut acc = 0.0;
        for c in 0..self.channels {
            let d = self.samples[pa + c] - self.samples[pb + c];
            acc += d * d;
        }
        acc
    }

    /// Extract one channel as a plain signal vector, node-ordered.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.pixel_count())
            .map(|p| self.samples[p * self.channels + c])
            .collect()
    }

    /// Rebuild an image from per-channel signal vectors, clamping to [0, 1].
    pub fn from_channels(width: usize, height: usize, channels: &[Vec<f64>]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidImage("no channels given".into()));
        }
        let n = width * height;
        for ch in channels {
            if ch.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: ch.len(),
                });
            }
        }
        let nc = channels.len();
        let mut samples = vec![0.0; n * nc];
        for p in 0..n {
            for (c, ch) in channels.iter().enumerate() {
                samples[p * nc + c] = ch[p].clamp(0.0, 1.0);
            }
        }
        Self::new(width, height, nc, samples)
    }

    /// 3x3 box mean with edge replication, applied per channel.
    pub fn mean_filter_3x3(&self) -> ImagePlane {
        let mut out = vec![0.0; self.samples.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let mut acc = 0.0;
                    for dy in -1..=1_isize {
                        for dx in -1..=1_isize {
                            acc += self.sample_clamped(x as isize + dx, y as isize + dy, c);
                        }
                    }
                    out[(y * self.width + x) * self.channels + c] = acc / 9.0;
                }
            }
        }
        ImagePlane {
            width: self.width,
            height: self.height,
            channels: self.channels,
            samples: out,
        }
    }

    /// Transposed copy (rows become columns). Useful for running row
    /// operations down columns.
    pub fn transposed(&self) -> ImagePlane {
        let mut out = vec![0.0; self.samples.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out[(x * self.height + y) * self.channels + c] = self.sample(x, y, c);
                }
            }
        }
        ImagePlane {
            width: self.height,
            height: self.width,
            channels: self.channels,
            samples: out,
        }
    }

    /// Interleaved samples of row `y`.
    pub fn row(&self, y: usize) -> &[f64] {
        let stride = self.width * self.channels;
        &self.samples[y * stride..(y + 1) * stride]
    }
}

/// Peak signal-to-noise ratio on `[0, 1]` samples: `10 log10(1 / MSE)`.
pub fn psnr(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::DimensionMismatch {
            expected: a.samples.len(),
            actual: b.samples.len(),
        });
    }
    let mse = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.samples.len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / mse).log10())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_sized() {
        assert!(matches!(
            ImagePlane::gray(0, 4, vec![]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(ImagePlane::gray(2, 1, vec![0.5, 1.5]).is_err());
        assert!(ImagePlane::gray(2, 1, vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(ImagePlane::gray(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn channel_roundtrip() {
        let img = ImagePlane::new(2, 1, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(img.channel(0), vec![0.1, 0.3]);
        assert_eq!(img.channel(1), vec![0.2, 0.4]);
        let back =
            ImagePlane::from_channels(2, 1, &[img.channel(0), img.channel(1)]).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn transpose_involution() {
        let img = ImagePlane::gray(3, 2, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(img.transposed().transposed(), img);
        assert_eq!(img.transposed().sample(1, 2, 0), img.sample(2, 1, 0));
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = ImagePlane::gray(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(psnr(&img, &img).unwrap().is_infinite());
    }
}
