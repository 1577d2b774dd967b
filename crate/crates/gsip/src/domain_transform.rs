//! 1-D domain transform: warp pixel positions by accumulated geometric and
//! photometric distance, then smooth or resample uniformly in the warped
//! axis. Smoothing in the warped domain is edge-preserving in the original
//! one; uniform resampling there is content-aware retargeting.
//!
//! The warp solves the first-difference system `Psi t = tau` with
//! `tau_i = alpha_g + alpha_p * sum_channels |x_i - x_{i-1}|`; its inverse
//! is the lower-triangular all-ones matrix, i.e. a cumulative sum. The
//! interior rows of `Psi^T Psi` are the path-graph Laplacian, giving the
//! second identity `(L_path t)_i = tau_i - tau_{i+1}`.

use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Warp and smoothing parameters.
#[derive(Debug, Clone, Copy)]
pub struct WarpParams {
    /// Geometric weight per step (> 0, conventionally 1).
    pub alpha_g: f64,
    /// Photometric weight (>= 0).
    pub alpha_p: f64,
    /// Gaussian bandwidth in warped units (> 0).
    pub sigma_s: f64,
}

impl Default for WarpParams {
    fn default() -> Self {
        Self {
            alpha_g: 1.0,
            alpha_p: 10.0,
            sigma_s: 3.0,
        }
    }
}

impl WarpParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha_g > 0.0) {
            return Err(Error::param("alpha_g", "must be > 0"));
        }
        if !(self.alpha_p >= 0.0) {
            return Err(Error::param("alpha_p", "must be >= 0"));
        }
        if !(self.sigma_s > 0.0) {
            return Err(Error::param("sigma_s", "must be > 0"));
        }
        Ok(())
    }
}

/// Strictly increasing warped pixel positions, `t_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedAxis {
    positions: Vec<f64>,
}

impl WarpedAxis {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn span(&self) -> f64 {
        *self.positions.last().unwrap_or(&0.0)
    }
}

/// Per-step increments `tau_i = alpha_g + alpha_p sum_c |x_i - x_{i-1}|`
/// for `i >= 1`; `tau_0 = 0` pins `t_0 = 0`.
fn increments(samples: &[f64], channels: usize, params: &WarpParams) -> Vec<f64> {
    let n = samples.len() / channels;
    let mut tau = Vec::with_capacity(n);
    tau.push(0.0);
    for i in 1..n {
        let mut photo = 0.0;
        for c in 0..channels {
            photo += (samples[i * channels + c] - samples[(i - 1) * channels + c]).abs();
        }
        tau.push(params.alpha_g + params.alpha_p * photo);
    }
    tau
}

/// Warp a (possibly multichannel, interleaved) row of samples:
/// `t_i = t_{i-1} + alpha_g + alpha_p sum_c |x_i^c - x_{i-1}^c|`.
pub fn warp_positions(samples: &[f64], channels: usize, params: &WarpParams) -> Result<WarpedAxis> {
    params.validate()?;
    if channels == 0 || samples.len() % channels != 0 || samples.is_empty() {
        return Err(Error::EmptyInput("row samples"));
    }
    let tau = increments(samples, channels, params);
    let mut positions = Vec::with_capacity(tau.len());
    let mut t = 0.0;
    for inc in &tau {
        t += inc;
        positions.push(t);
    }
    Ok(WarpedAxis { positions })
}

/// Residual report of the warp's linear-system identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpIdentityReport {
    /// `max_i |(Psi t)_i - tau_i|` over all rows of the first-difference
    /// system.
    pub max_first_difference_residual: f64,
    /// `max_i |(L_path t)_i - (tau_i - tau_{i+1})|` over interior rows.
    pub max_path_laplacian_residual: f64,
}

/// Verify that the computed axis solves `Psi t = tau` and the interior
/// path-Laplacian identity; both residuals stay at rounding level.
pub fn verify_warp_identities(
    samples: &[f64],
    channels: usize,
    params: &WarpParams,
) -> Result<WarpIdentityReport> {
    let axis = warp_positions(samples, channels, params)?;
    let t = axis.positions();
    let n = t.len();
    if n < 3 {
        return Err(Error::param("samples", "identities need at least 3 samples"));
    }
    let tau = increments(samples, channels, params);
    // (Psi t)_0 = t_0, (Psi t)_i = t_i - t_{i-1}.
    let mut first = (t[0] - tau[0]).abs();
    for i in 1..n {
        first = first.max((t[i] - t[i - 1] - tau[i]).abs());
    }
    // Interior rows of L_path = Psi^T Psi: -t_{i-1} + 2 t_i - t_{i+1}.
    let mut interior = 0.0_f64;
    for i in 1..n - 1 {
        let lt = -t[i - 1] + 2.0 * t[i] - t[i + 1];
        interior = interior.max((lt - (tau[i] - tau[i + 1])).abs());
    }
    Ok(WarpIdentityReport {
        max_first_difference_residual: first,
        max_path_laplacian_residual: interior,
    })
}

/// Normalized Gaussian smoothing over the nonuniform warped positions,
/// evaluated back at the original indices. The kernel window is truncated
/// at `|t_i - t_j| > 4 sigma_s`.
pub fn dt_smooth_row(
    samples: &[f64],
    channels: usize,
    axis: &WarpedAxis,
    sigma_s: f64,
) -> Result<Vec<f64>> {
    if !(sigma_s > 0.0) {
        return Err(Error::param("sigma_s", "must be > 0"));
    }
    let n = axis.len();
    if samples.len() != n * channels {
        return Err(Error::DimensionMismatch {
            expected: n * channels,
            actual: samples.len(),
        });
    }
    let t = axis.positions();
    let reach = 4.0 * sigma_s;
    let mut out = vec![0.0; samples.len()];
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut num = vec![0.0; channels];
    for i in 0..n {
        while lo < n && t[i] - t[lo] > reach {
            lo += 1;
        }
        if hi < i {
            hi = i;
        }
        while hi + 1 < n && t[hi + 1] - t[i] <= reach {
            hi += 1;
        }
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for j in lo..=hi {
            let d = (t[i] - t[j]) / sigma_s;
            let w = (-0.5 * d * d).exp();
            den += w;
            for (c, acc) in num.iter_mut().enumerate() {
                *acc += w * samples[j * channels + c];
            }
        }
        for c in 0..channels {
            out[i * channels + c] = num[c] / den;
        }
    }
    Ok(out)
}

/// Edge-preserving smoothing of a full image: per pass, every row is
/// warped and smoothed, then every column (horizontal first).
pub fn dt_smooth_image(img: &ImagePlane, params: &WarpParams, passes: usize) -> Result<ImagePlane> {
    params.validate()?;
    if passes == 0 {
        return Err(Error::param("passes", "must be >= 1"));
    }
    let mut current = img.clone();
    for _ in 0..passes {
        current = smooth_rows(&current, params)?;
        current = smooth_rows(&current.transposed(), params)?.transposed();
    }
    Ok(current)
}

fn smooth_rows(img: &ImagePlane, params: &WarpParams) -> Result<ImagePlane> {
    let (w, h, nc) = (img.width(), img.height(), img.channels());
    let mut samples = Vec::with_capacity(w * h * nc);
    for y in 0..h {
        let row = img.row(y);
        let axis = warp_positions(row, nc, params)?;
        let smoothed = dt_smooth_row(row, nc, &axis, params.sigma_s)?;
        samples.extend(smoothed.into_iter().map(|v| v.clamp(0.0, 1.0)));
    }
    ImagePlane::new(w, h, nc, samples)
}

/// Content-aware resampling of a row to `target_width` samples: uniform
/// targets in the warped axis, linear interpolation of `(t_i, x_i)`.
/// Endpoints map exactly to the first and last sample.
pub fn retarget_row(
    samples: &[f64],
    channels: usize,
    axis: &WarpedAxis,
    target_width: usize,
) -> Result<Vec<f64>> {
    let n = axis.len();
    if n < 2 {
        return Err(Error::EmptyInput("retargeting needs at least 2 samples"));
    }
    if target_width < 2 {
        return Err(Error::param("target_width", "must be >= 2"));
    }
    if samples.len() != n * channels {
        return Err(Error::DimensionMismatch {
            expected: n * channels,
            actual: samples.len(),
        });
    }
    let t = axis.positions();
    let span = axis.span();
    let mut out = vec![0.0; target_width * channels];
    let mut seg = 0usize;
    for m in 0..target_width {
        let target = m as f64 * span / (target_width - 1) as f64;
        while seg + 2 < n && t[seg + 1] < target {
            seg += 1;
        }
        let (t0, t1) = (t[seg], t[seg + 1]);
        let frac = ((target - t0) / (t1 - t0)).clamp(0.0, 1.0);
        for c in 0..channels {
            let a = samples[seg * channels + c];
            let b = samples[(seg + 1) * channels + c];
            out[m * channels + c] = a + (b - a) * frac;
        }
    }
    // Pin the endpoints exactly.
    for c in 0..channels {
        out[c] = samples[c];
        out[(target_width - 1) * channels + c] = samples[(n - 1) * channels + c];
    }
    Ok(out)
}

/// Retarget every row of an image to a new width.
pub fn retarget_image(
    img: &ImagePlane,
    params: &WarpParams,
    target_width: usize,
) -> Result<ImagePlane> {
    params.validate()?;
    let (h, nc) = (img.height(), img.channels());
    let mut samples = Vec::with_capacity(target_width * h * nc);
    for y in 0..h {
        let row = img.row(y);
        let axis = warp_positions(row, nc, params)?;
        let resampled = retarget_row(row, nc, &axis, target_width)?;
        samples.extend(resampled.into_iter().map(|v| v.clamp(0.0, 1.0)));
    }
    ImagePlane::new(target_width, h, nc, samples)
}
