//! Denoising and deblurring on pixel graphs.
//!
//! Tikhonov denoising solves `(I + mu L) x = y`, either exactly in the
//! spectral domain or matrix-free by conjugate gradient. Transform-domain
//! denoising groups similar patches, thresholds their shared-graph GFT
//! coefficients and averages overlaps. Deblurring iterates Sinkhorn-scaled
//! graph regularization around a conjugate-gradient solve.

use crate::error::{Error, Result};
use crate::graph::{
    build_grid_graph, degree_vector, sinkhorn_scale, GridWeightParams, PixelGraph,
};
use crate::image::ImagePlane;
use crate::linalg::conjugate_gradient;
use crate::operators::{variation_operator, OperatorKind};
use crate::spectral::{eigendecompose, gft, igft, GraphSpectrum};

/// Solution path for Tikhonov denoising.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TikhonovPath {
    /// Spectral gains `1 / (1 + mu lambda_k)`; needs a dense eigensolve.
    Spectral,
    /// Conjugate gradient on `(I + mu L) x = y`.
    Linear,
}

/// MAP denoising with the graph Laplacian regularizer.
pub fn denoise_tikhonov(
    g: &PixelGraph,
    y: &[f64],
    mu: f64,
    path: TikhonovPath,
) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::param("mu", "must be >= 0"));
    }
    if y.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: y.len(),
        });
    }
    let op = variation_operator(g, OperatorKind::Combinatorial)?;
    match path {
        TikhonovPath::Spectral => {
            let s = eigendecompose(&op)?;
            let mut alpha = gft(&s, y)?;
            for (a, &l) in alpha.iter_mut().zip(s.eigenvalues()) {
                *a /= 1.0 + mu * l;
            }
            igft(&s, &alpha)
        }
        TikhonovPath::Linear => {
            let n = y.len();
            conjugate_gradient(
                |v| {
                    let mut out = op.apply(v).expect("dimension checked");
                    for i in 0..n {
                        out[i] = v[i] + mu * out[i];
                    }
                    out
                },
                y,
                None,
                1e-10,
                10 * n,
            )
        }
    }
}

/// Tikhonov denoising of a full image: the graph comes from a 3x3-mean
/// pre-filtered copy of the observation, each channel is denoised on it.
pub fn denoise_tikhonov_image(
    img: &ImagePlane,
    weights: &GridWeightParams,
    mu: f64,
    path: TikhonovPath,
) -> Result<ImagePlane> {
    let g = build_grid_graph(&img.mean_filter_3x3(), weights)?;
    let channels: Result<Vec<Vec<f64>>> = (0..img.channels())
        .map(|c| denoise_tikhonov(&g, &img.channel(c), mu, path))
        .collect();
    ImagePlane::from_channels(img.width(), img.height(), &channels?)
}

/// Coefficient shrinkage rule for transform-domain denoising.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Zero every coefficient with `|alpha| < sqrt(2 tau)`; the exact
    /// proximal step of the l0 penalty.
    Hard,
    /// Shrink toward zero by `tau / 2`.
    Soft,
}

/// Threshold GFT coefficients in place. Coefficients at `lambda = 0` carry
/// the per-component means and are never touched.
pub fn threshold_coefficients(
    eigenvalues: &[f64],
    alpha: &mut [f64],
    tau: f64,
    mode: ThresholdMode,
) {
    let cut = (2.0 * tau).sqrt();
    for (a, &l) in alpha.iter_mut().zip(eigenvalues) {
        if l == 0.0 {
            continue;
        }
        match mode {
            ThresholdMode::Hard => {
                if a.abs() < cut {
                    *a = 0.0;
                }
            }
            ThresholdMode::Soft => {
                *a = a.signum() * (a.abs() - tau / 2.0).max(0.0);
            }
        }
    }
}

/// Parameters for patch-group GFT-threshold denoising.
#[derive(Debug, Clone)]
pub struct GftDenoiseParams {
    /// Patch side length, at most 16 (the patch graph is eigendecomposed).
    pub patch_size: usize,
    /// Number of patches denoised jointly per target (target included).
    pub cluster_size: usize,
    pub tau: f64,
    pub mode: ThresholdMode,
    /// Outer iterations; edge weights are rebuilt from the current estimate.
    pub iterations: usize,
    /// Kernel for the 4-connected patch graph built from the patch average.
    pub weights: GridWeightParams,
}

impl GftDenoiseParams {
    fn validate(&self, img: &ImagePlane) -> Result<()> {
        if self.patch_size == 0 || self.patch_size > 16 {
            return Err(Error::param("patch_size", "must be in 1..=16"));
        }
        if self.patch_size > img.width() || self.patch_size > img.height() {
            return Err(Error::param("patch_size", "exceeds image dimensions"));
        }
        if self.cluster_size == 0 {
            return Err(Error::param("cluster_size", "must be >= 1"));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::param("tau", "must be >= 0"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be >= 1"));
        }
        Ok(())
    }
}

/// Patch-group transform-threshold denoising.
///
/// Per target patch: the `cluster_size` most similar patches are gathered,
/// their average defines a 4-connected kernel-weighted graph, every patch in
/// the group is GFT-thresholded on that graph's spectrum, and the
/// reconstructions are aggregated by averaging overlaps.
pub fn denoise_gft_threshold(img: &ImagePlane, params: &GftDenoiseParams) -> Result<ImagePlane> {
    params.validate(img)?;
    let mut channels: Vec<Vec<f64>> = (0..img.channels()).map(|c| img.channel(c)).collect();
    let (w, h) = (img.width(), img.height());
    for _ in 0..params.iterations {
        for ch in channels.iter_mut() {
            *ch = denoise_channel_once(ch, w, h, params)?;
        }
    }
    ImagePlane::from_channels(w, h, &channels)
}

fn patch_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut xs: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if *xs.last().unwrap() != last {
        xs.push(last);
    }
    xs
}

fn extract_patch(x: &[f64], w: usize, p: usize, x0: usize, y0: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p * p);
    for dy in 0..p {
        let base = (y0 + dy) * w + x0;
        out.extend_from_slice(&x[base..base + p]);
    }
    out
}

fn denoise_channel_once(
    x: &[f64],
    w: usize,
    h: usize,
    params: &GftDenoiseParams,
) -> Result<Vec<f64>> {
    let p = params.patch_size;
    let stride = (p / 2).max(1);
    let targets_x = patch_positions(w, p, stride);
    let targets_y = patch_positions(h, p, stride);
    let candidates: Vec<(usize, usize)> = (0..=h - p)
        .flat_map(|y0| (0..=w - p).map(move |x0| (x0, y0)))
        .collect();
    let patch_weights = GridWeightParams {
        connectivity: crate::graph::Connectivity::Four,
        self_loops: false,
        ..params.weights
    };

    let mut sum = vec![0.0; w * h];
    let mut count = vec![0.0; w * h];
    for &ty in &targets_y {
        for &tx in &targets_x {
            let target = extract_patch(x, w, p, tx, ty);
            // Rank every other patch by squared distance to the target.
            let mut ranked: Vec<(f64, (usize, usize))> = candidates
                .iter()
                .filter(|&&pos| pos != (tx, ty))
                .map(|&(cx, cy)| {
                    let cand = extract_patch(x, w, p, cx, cy);
                    let d: f64 = target
                        .iter()
                        .zip(&cand)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d, (cx, cy))
                })
                .collect();
            ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut group = vec![(tx, ty)];
            group.extend(
                ranked
                    .iter()
                    .take(params.cluster_size.saturating_sub(1))
                    .map(|&(_, pos)| pos),
            );

            // The group average defines the graph; averaging doubles as the
            // pre-filtering that keeps the edge weights noise-robust.
            let mut avg = vec![0.0; p * p];
            for &(cx, cy) in &group {
                for (a, v) in avg.iter_mut().zip(extract_patch(x, w, p, cx, cy)) {
                    *a += v;
                }
            }
            for a in avg.iter_mut() {
                *a /= group.len() as f64;
            }
            let avg_img =
                ImagePlane::gray(p, p, avg.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
            let g = build_grid_graph(&avg_img, &patch_weights)?;
            let op = variation_operator(&g, OperatorKind::Combinatorial)?;
            let spectrum = eigendecompose(&op)?;

            for &(cx, cy) in &group {
                let patch = extract_patch(x, w, p, cx, cy);
                let mut alpha = gft(&spectrum, &patch)?;
                threshold_coefficients(
                    spectrum.eigenvalues(),
                    &mut alpha,
                    params.tau,
                    params.mode,
                );
                let rec = igft(&spectrum, &alpha)?;
                for dy in 0..p {
                    for dx in 0..p {
                        let idx = (cy + dy) * w + cx + dx;
                        sum[idx] += rec[dy * p + dx];
                        count[idx] += 1.0;
                    }
                }
            }
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .zip(x)
        .map(|((s, c), orig)| if *c > 0.0 { s / c } else { *orig })
        .collect())
}

/// Normalized random-walk smoothness prior
/// `d_min^{-1} x^T L D^{-1} L x`; zero exactly when `L x = 0`.
pub fn lerag_prior(g: &PixelGraph, x: &[f64]) -> Result<f64> {
    let degrees = degree_vector(g);
    if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::DegenerateDegree { node });
    }
    let op = variation_operator(g, OperatorKind::Combinatorial)?;
    let lx = op.apply(x)?;
    let dinv_lx: Vec<f64> = lx.iter().zip(&degrees).map(|(v, d)| v / d).collect();
    let l_dinv_lx = op.apply(&dinv_lx)?;
    let d_min = degrees.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(crate::linalg::dot(x, &l_dinv_lx) / d_min)
}

/// Separable blur with edge-replicated boundaries; the taps run first along
/// rows, then down columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurOperator {
    taps: Vec<f64>,
}

impl BlurOperator {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::param("taps", "need at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("taps", "non-finite tap"));
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self { taps: vec![1.0] }
    }

    /// Uniform box blur of the given width (taps sum to 1).
    pub fn uniform(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::param("width", "must be >= 1"));
        }
        Self::new(vec![1.0 / width as f64; width])
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn is_identity(&self) -> bool {
        self.taps == [1.0]
    }

    fn center(&self) -> isize {
        (self.taps.len() / 2) as isize
    }

    fn convolve_line(&self, get: impl Fn(isize) -> f64, len: usize, out: &mut [f64]) {
        let c = self.center();
        for (i, o) in out.iter_mut().enumerate().take(len) {
            let mut acc = 0.0;
            for (k, &t) in self.taps.iter().enumerate() {
                acc += t * get(i as isize + k as isize - c);
            }
            *o = acc;
        }
    }

    fn adjoint_line(&self, x: &[f64], out: &mut [f64]) {
        let c = self.center();
        let len = x.len() as isize;
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for (i, &v) in x.iter().enumerate() {
            for (k, &t) in self.taps.iter().enumerate() {
                let j = (i as isize + k as isize - c).clamp(0, len - 1) as usize;
                out[j] += t * v;
            }
        }
    }

    /// Apply the blur to a node-ordered signal of a `w x h` plane.
    pub fn apply_signal(&self, x: &[f64], w: usize, h: usize) -> Vec<f64> {
        assert_eq!(x.len(), w * h);
        let mut tmp = vec![0.0; w * h];
        let mut row_out = vec![0.0; w];
        for y in 0..h {
            let row = &x[y * w..(y + 1) * w];
            self.convolve_line(|i| row[i.clamp(0, w as isize - 1) as usize], w, &mut row_out);
            tmp[y * w..(y + 1) * w].copy_from_slice(&row_out);
        }
        let mut out = vec![0.0; w * h];
        let mut col_out = vec![0.0; h];
        for cx in 0..w {
            self.convolve_line(
                |i| tmp[(i.clamp(0, h as isize - 1) as usize) * w + cx],
                h,
                &mut col_out,
            );
            for (y, &v) in col_out.iter().enumerate() {
                out[y * w + cx] = v;
            }
        }
        out
    }

    /// Adjoint of [`Self::apply_signal`].
    pub fn adjoint_signal(&self, x: &[f64], w: usize, h: usize) -> Vec<f64> {
        assert_eq!(x.len(), w * h);
        // H applies rows then columns, so H^T applies the column adjoint
        // first, then the row adjoint.
        let mut tmp = vec![0.0; w * h];
        let mut col_in = vec![0.0; h];
        let mut col_out = vec![0.0; h];
        for cx in 0..w {
            for y in 0..h {
                col_in[y] = x[y * w + cx];
            }
            self.adjoint_line(&col_in, &mut col_out);
            for (y, &v) in col_out.iter().enumerate() {
                tmp[y * w + cx] = v;
            }
        }
        let mut out = vec![0.0; w * h];
        let mut row_out = vec![0.0; w];
        for y in 0..h {
            self.adjoint_line(&tmp[y * w..(y + 1) * w], &mut row_out);
            out[y * w..(y + 1) * w].copy_from_slice(&row_out);
        }
        out
    }

    /// Blur an image per channel, clamping back into `[0, 1]`.
    pub fn apply_image(&self, img: &ImagePlane) -> Result<ImagePlane> {
        let channels: Vec<Vec<f64>> = (0..img.channels())
            .map(|c| self.apply_signal(&img.channel(c), img.width(), img.height()))
            .collect();
        ImagePlane::from_channels(img.width(), img.height(), &channels)
    }
}

/// Deblurring parameters for the doubly-stochastic graph regularizer.
#[derive(Debug, Clone, Copy)]
pub struct DeblurParams {
    /// Data-term sharpening weight, `beta >= -1`.
    pub beta: f64,
    /// Regularizer weight, `eta > 0`.
    pub eta: f64,
    /// Graph rebuild rounds.
    pub outer_iterations: usize,
    /// Conjugate-gradient relative tolerance.
    pub solve_tolerance: f64,
}

impl Default for DeblurParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            eta: 0.05,
            outer_iterations: 2,
            solve_tolerance: 1e-10,
        }
    }
}

impl DeblurParams {
    fn validate(&self) -> Result<()> {
        if !(self.beta >= -1.0) {
            return Err(Error::param("beta", "must be >= -1"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::param("eta", "must be > 0"));
        }
        if self.outer_iterations == 0 {
            return Err(Error::param("outer_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

/// The quadratic objective
/// `(y - Hx)^T (I + beta (I - K)) (y - Hx) + eta x^T (I - K) x`
/// for a fixed doubly-stochastic graph `K`.
#[allow(clippy::too_many_arguments)]
pub fn deblur_objective(
    y: &[f64],
    x: &[f64],
    blur: &BlurOperator,
    k_graph: &PixelGraph,
    w: usize,
    h: usize,
    beta: f64,
    eta: f64,
) -> Result<f64> {
    let hx = blur.apply_signal(x, w, h);
    let r: Vec<f64> = y.iter().zip(&hx).map(|(a, b)| a - b).collect();
    let ikr = minus_k(k_graph, &r)?;
    let data: f64 = crate::linalg::dot(&r, &r) + beta * crate::linalg::dot(&r, &ikr);
    let ikx = minus_k(k_graph, x)?;
    Ok(data + eta * crate::linalg::dot(x, &ikx))
}

/// `(I - K) v`.
fn minus_k(k_graph: &PixelGraph, v: &[f64]) -> Result<Vec<f64>> {
    let kv = k_graph.weight_mul(v)?;
    Ok(v.iter().zip(&kv).map(|(a, b)| a - b).collect())
}

/// Graph-regularized deblurring. Each outer round rebuilds the kernel graph
/// from the current estimate, Sinkhorn-scales it to doubly stochastic `K`,
/// and solves
/// `(H^T (I + beta (I - K)) H + eta (I - K)) x = H^T (I + beta (I - K)) y`
/// by conjugate gradient.
pub fn deblur(
    y: &ImagePlane,
    blur: &BlurOperator,
    graph_weights: &GridWeightParams,
    params: &DeblurParams,
) -> Result<ImagePlane> {
    params.validate()?;
    let (w, h) = (y.width(), y.height());
    let n = w * h;
    let mut channels: Vec<Vec<f64>> = (0..y.channels()).map(|c| y.channel(c)).collect();
    let observed: Vec<Vec<f64>> = channels.clone();
    for _ in 0..params.outer_iterations {
        let estimate = ImagePlane::from_channels(w, h, &channels)?;
        let g = build_grid_graph(&estimate, graph_weights)?.with_unit_self_loops();
        let scaled = sinkhorn_scale(&g, 500, 1e-10)?.scaled;
        let apply = |v: &[f64]| -> Vec<f64> {
            let hv = blur.apply_signal(v, w, h);
            let ik_hv = minus_k(&scaled, &hv).expect("dimension checked");
            let m_hv: Vec<f64> = hv
                .iter()
                .zip(&ik_hv)
                .map(|(a, b)| a + params.beta * b)
                .collect();
            let ht = blur.adjoint_signal(&m_hv, w, h);
            let ik_v = minus_k(&scaled, v).expect("dimension checked");
            ht.iter()
                .zip(&ik_v)
                .map(|(a, b)| a + params.eta * b)
                .collect()
        };
        for (c, ch) in channels.iter_mut().enumerate() {
            let yv = &observed[c];
            let ik_y = minus_k(&scaled, yv)?;
            let m_y: Vec<f64> = yv
                .iter()
                .zip(&ik_y)
                .map(|(a, b)| a + params.beta * b)
                .collect();
            let b = blur.adjoint_signal(&m_y, w, h);
            *ch = conjugate_gradient(apply, &b, Some(ch), params.solve_tolerance, 10 * n)?;
        }
    }
    ImagePlane::from_channels(w, h, &channels)
}

/// Spectrum of a graph's combinatorial Laplacian; shared by the CLI
/// `spectrum` verb and tests.
pub fn graph_spectrum(g: &PixelGraph) -> Result<GraphSpectrum> {
    let op = variation_operator(g, OperatorKind::Combinatorial)?;
    eigendecompose(&op)
}
