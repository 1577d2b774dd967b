//! Spectral filter responses, exact spectral filtering, and the
//! polynomial / Chebyshev vertex-domain fast paths.
//!
//! Exact filtering needs a full [`GraphSpectrum`]; the polynomial paths only
//! need operator-vector products and are the route for graphs past the
//! dense eigensolver limit.

use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, GridWeightParams, PixelGraph};
use crate::image::ImagePlane;
use crate::linalg::power_iteration_radius;
use crate::operators::SparseSymOperator;
use crate::spectral::{gft, igft, GraphSpectrum};

/// A spectral gain function.
#[derive(Debug, Clone)]
pub enum FilterSpec {
    /// Unit gain on the `pass_count` smallest eigenvalue indices, zero
    /// elsewhere. Selection is by index; a tie at the passband boundary
    /// extends it to the whole degenerate group.
    IdealLowPass { pass_count: usize },
    /// Heat kernel `e^{-t lambda}`, `t > 0`.
    Heat { t: f64 },
    /// `1 / (1 + rho * h_r(lambda))` for a high-pass response `h_r`
    /// (default `h_r(lambda) = lambda`).
    TikhonovInverse { rho: f64, highpass: fn(f64) -> f64 },
    /// Bilateral response `1 - lambda` on a normalized spectrum.
    BilateralResponse,
    /// MAP denoising response `1 / (1 + mu (1 - lambda)^2)`.
    ChenMap { mu: f64 },
    /// Piecewise-linear gain table over lambda, clamped at the ends.
    Sampled { table: Vec<(f64, f64)> },
}

fn identity_response(lambda: f64) -> f64 {
    lambda
}

impl FilterSpec {
    pub fn heat(t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::param("t", "heat kernel requires t > 0"));
        }
        Ok(FilterSpec::Heat { t })
    }

    pub fn tikhonov(rho: f64) -> Result<Self> {
        Self::tikhonov_with(rho, identity_response)
    }

    pub fn tikhonov_with(rho: f64, highpass: fn(f64) -> f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be > 0"));
        }
        Ok(FilterSpec::TikhonovInverse { rho, highpass })
    }

    pub fn chen_map(mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::param("mu", "must be > 0"));
        }
        Ok(FilterSpec::ChenMap { mu })
    }

    pub fn sampled(mut table: Vec<(f64, f64)>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::param("table", "needs at least one sample"));
        }
        if table.iter().any(|(l, g)| !l.is_finite() || !g.is_finite()) {
            return Err(Error::param("table", "non-finite entry"));
        }
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(FilterSpec::Sampled { table })
    }

    /// Pointwise gain at `lambda`. `None` for the index-selective ideal
    /// low-pass, which has no lambda-valued response; use [`Self::gains`].
    pub fn gain_at(&self, lambda: f64) -> Option<f64> {
        match self {
            FilterSpec::IdealLowPass { .. } => None,
            FilterSpec::Heat { t } => Some((-t * lambda).exp()),
            FilterSpec::TikhonovInverse { rho, highpass } => {
                Some(1.0 / (1.0 + rho * highpass(lambda)))
            }
            FilterSpec::BilateralResponse => Some(1.0 - lambda),
            FilterSpec::ChenMap { mu } => {
                let d = 1.0 - lambda;
                Some(1.0 / (1.0 + mu * d * d))
            }
            FilterSpec::Sampled { table } => Some(interp_table(table, lambda)),
        }
    }

    /// Per-eigenvalue gains on a spectrum.
    pub fn gains(&self, spectrum: &GraphSpectrum) -> Vec<f64> {
        match self {
            FilterSpec::IdealLowPass { pass_count } => {
                let n = spectrum.len();
                let mut cut = (*pass_count).min(n);
                if cut > 0 && cut < n {
                    // Extend the passband over a degenerate boundary group.
                    let tol = spectrum.degeneracy_tolerance();
                    let evals = spectrum.eigenvalues();
                    while cut < n && (evals[cut] - evals[cut - 1]).abs() <= tol {
                        cut += 1;
                    }
                }
                (0..n).map(|k| if k < cut { 1.0 } else { 0.0 }).collect()
            }
            _ => spectrum
                .eigenvalues()
                .iter()
                .map(|&l| self.gain_at(l).expect("lambda-valued response"))
                .collect(),
        }
    }
}

fn interp_table(table: &[(f64, f64)], lambda: f64) -> f64 {
    if lambda <= table[0].0 {
        return table[0].1;
    }
    if lambda >= table[table.len() - 1].0 {
        return table[table.len() - 1].1;
    }
    let hi = table.partition_point(|(l, _)| *l < lambda);
    let (l0, g0) = table[hi - 1];
    let (l1, g1) = table[hi];
    if l1 == l0 {
        return g0;
    }
    g0 + (g1 - g0) * (lambda - l0) / (l1 - l0)
}

/// Exact spectral filtering: resynthesize `sum_k h(lambda_k) alpha_k u_k`.
pub fn apply_exact(spectrum: &GraphSpectrum, filter: &FilterSpec, x: &[f64]) -> Result<Vec<f64>> {
    let mut alpha = gft(spectrum, x)?;
    for (a, g) in alpha.iter_mut().zip(filter.gains(spectrum)) {
        *a *= g;
    }
    igft(spectrum, &alpha)
}

/// Power-basis polynomial response `sum_k a_k lambda^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFilter {
    coefficients: Vec<f64>,
}

impl PolynomialFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coefficients", "non-finite coefficient"));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Horner evaluation of the response.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * lambda + c)
    }
}

/// Truncated Taylor expansion of the heat kernel: `a_k = (-t)^k / k!`.
pub fn taylor_heat(t: f64, order: usize) -> Result<PolynomialFilter> {
    if !(t > 0.0) {
        return Err(Error::param("t", "heat kernel requires t > 0"));
    }
    let mut coefficients = Vec::with_capacity(order + 1);
    let mut a = 1.0;
    coefficients.push(a);
    for k in 1..=order {
        a *= -t / k as f64;
        coefficients.push(a);
    }
    PolynomialFilter::new(coefficients)
}

/// Apply a polynomial response with iterated operator-vector products:
/// `y = sum_k a_k (op^k x)`.
pub fn apply_polynomial(
    op: &SparseSymOperator,
    poly: &PolynomialFilter,
    x: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != op.dimension() {
        return Err(Error::DimensionMismatch {
            expected: op.dimension(),
            actual: x.len(),
        });
    }
    let n = x.len();
    let mut y = vec![0.0; n];
    let mut power = x.to_vec();
    for (k, &a) in poly.coefficients.iter().enumerate() {
        if k > 0 {
            power = op.apply(&power)?;
        }
        if a != 0.0 {
            for i in 0..n {
                y[i] += a * power[i];
            }
        }
    }
    Ok(y)
}

/// Chebyshev expansion of a spectral response on `[0, lambda_max]` with the
/// halved-`c_0` convention: `h(x) = c_0/2 + sum_{k>=1} c_k T_k(x)` on the
/// shifted variable `x = 2 lambda / lambda_max - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevFilter {
    coefficients: Vec<f64>,
    lambda_max: f64,
}

impl ChebyshevFilter {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Scalar response via the three-term recurrence.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = 2.0 * lambda / self.lambda_max - 1.0;
        let mut acc = self.coefficients[0] / 2.0;
        let mut t_prev = 1.0;
        let mut t_cur = x;
        for &c in &self.coefficients[1..] {
            acc += c * t_cur;
            let t_next = 2.0 * x * t_cur - t_prev;
            t_prev = t_cur;
            t_cur = t_next;
        }
        acc
    }
}

/// Fit a Chebyshev expansion of order `order` to `target` on
/// `[0, lambda_max]` by Gauss-Chebyshev quadrature with `order + 1` nodes.
/// Polynomial targets of degree <= `order` are reproduced exactly.
pub fn chebyshev_fit<F>(target: F, order: usize, lambda_max: f64) -> Result<ChebyshevFilter>
where
    F: Fn(f64) -> f64,
{
    if !(lambda_max > 0.0) {
        return Err(Error::param("lambda_max", "must be > 0"));
    }
    let m = order + 1;
    let half = lambda_max / 2.0;
    let samples: Vec<f64> = (0..m)
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
            target(half * (theta.cos() + 1.0))
        })
        .collect();
    let coefficients = (0..m)
        .map(|k| {
            let mut acc = 0.0;
            for (j, s) in samples.iter().enumerate() {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                acc += s * (k as f64 * theta).cos();
            }
            2.0 * acc / m as f64
        })
        .collect();
    Ok(ChebyshevFilter {
        coefficients,
        lambda_max,
    })
}

/// Default `lambda_max` for Chebyshev filtering: 2 for normalized
/// operators, a padded power-iteration estimate otherwise.
pub fn default_lambda_max(op: &SparseSymOperator) -> f64 {
    use crate::operators::OperatorKind;
    match op.kind() {
        OperatorKind::SymmetricNormalized => 2.0,
        _ => {
            let r = power_iteration_radius(
                |v| op.apply(v).expect("dimension checked"),
                op.dimension(),
                1e-10,
                10_000,
            );
            r * 1.01
        }
    }
}

/// Apply a Chebyshev expansion with the three-term recurrence on the
/// shifted operator `(2 / lambda_max) op - I`.
pub fn apply_chebyshev(
    op: &SparseSymOperator,
    cheb: &ChebyshevFilter,
    x: &[f64],
) -> Result<Vec<f64>> {
    if !(cheb.lambda_max > 0.0) {
        return Err(Error::param("lambda_max", "must be > 0"));
    }
    if x.len() != op.dimension() {
        return Err(Error::DimensionMismatch {
            expected: op.dimension(),
            actual: x.len(),
        });
    }
    let n = x.len();
    let scale = 2.0 / cheb.lambda_max;
    let shifted = |v: &[f64]| -> Result<Vec<f64>> {
        let mut out = op.apply(v)?;
        for i in 0..n {
            out[i] = scale * out[i] - v[i];
        }
        Ok(out)
    };
    let mut t_prev = x.to_vec();
    let mut y: Vec<f64> = t_prev
        .iter()
        .map(|v| v * cheb.coefficients[0] / 2.0)
        .collect();
    if cheb.coefficients.len() == 1 {
        return Ok(y);
    }
    let mut t_cur = shifted(&t_prev)?;
    for (k, &c) in cheb.coefficients.iter().enumerate().skip(1) {
        for i in 0..n {
            y[i] += c * t_cur[i];
        }
        if k + 1 < cheb.coefficients.len() {
            let mut t_next = shifted(&t_cur)?;
            for i in 0..n {
                t_next[i] = 2.0 * t_next[i] - t_prev[i];
            }
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    Ok(y)
}

/// One row of the approximation-error table: the grid point and the squared
/// error of each approximant against the target response.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTableRow {
    pub lambda: f64,
    pub squared_errors: Vec<f64>,
}

/// Squared approximation error `E(lambda) = (h(lambda) - h_approx(lambda))^2`
/// of each approximant over a lambda grid, emitted in grid order.
pub fn approximation_error_table<F>(
    target: F,
    approximants: &[&dyn Fn(f64) -> f64],
    grid: &[f64],
) -> Result<Vec<ErrorTableRow>>
where
    F: Fn(f64) -> f64,
{
    if grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid"));
    }
    Ok(grid
        .iter()
        .map(|&lambda| {
            let want = target(lambda);
            let squared_errors = approximants
                .iter()
                .map(|a| {
                    let d = a(lambda) - want;
                    d * d
                })
                .collect();
            ErrorTableRow {
                lambda,
                squared_errors,
            }
        })
        .collect())
}

/// Windowed bilateral filter `x_hat = D^{-1} W x` with the kernel weights of
/// the grid parameters, a unit self tap at every pixel, and all neighbors
/// within Chebyshev distance `window_radius`.
pub fn bilateral_apply(
    img: &ImagePlane,
    params: &GridWeightParams,
    window_radius: usize,
) -> Result<ImagePlane> {
    if window_radius < 1 {
        return Err(Error::param("window_radius", "must be >= 1"));
    }
    if !(params.sigma_l > 0.0) || !(params.sigma_x > 0.0) {
        return Err(Error::param("sigma", "bandwidths must be > 0"));
    }
    let (w, h, nc) = (img.width(), img.height(), img.channels());
    let r = window_radius as isize;
    let mut out = vec![0.0; w * h * nc];
    let mut num = vec![0.0; nc];
    for y in 0..h {
        for x in 0..w {
            let i = img.node(x, y);
            num.iter_mut().for_each(|v| *v = 0.0);
            let mut den = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = img.node(nx as usize, ny as usize);
                    let geo_sq = (dx * dx + dy * dy) as f64;
                    let photo_sq = img.photometric_dist_sq(i, j);
                    let weight = params.weight(geo_sq, photo_sq);
                    den += weight;
                    for (c, acc) in num.iter_mut().enumerate() {
                        *acc += weight * img.sample(nx as usize, ny as usize, c);
                    }
                }
            }
            for c in 0..nc {
                out[i * nc + c] = num[c] / den;
            }
        }
    }
    ImagePlane::new(w, h, nc, out)
}

/// The window graph that [`bilateral_apply`] filters with: kernel weights
/// for every pixel pair within Chebyshev distance `window_radius`, unit
/// self-loops.
pub fn bilateral_window_graph(
    img: &ImagePlane,
    params: &GridWeightParams,
    window_radius: usize,
) -> Result<PixelGraph> {
    let (w, h) = (img.width(), img.height());
    let r = window_radius as isize;
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = img.node(x, y);
            for dy in 0..=r {
                for dx in -r..=r {
                    if dy == 0 && dx <= 0 {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = img.node(nx as usize, ny as usize);
                    let geo_sq = (dx * dx + dy * dy) as f64;
                    let photo_sq = img.photometric_dist_sq(i, j);
                    let weight = params.weight(geo_sq, photo_sq);
                    if weight <= 0.0 {
                        continue;
                    }
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    edges.push(crate::graph::GraphEdge {
                        i: a,
                        j: b,
                        w: weight,
                    });
                }
            }
        }
    }
    PixelGraph::new(w * h, edges, Some(vec![1.0; w * h]))
}

/// Filter an image on its grid graph, per channel: exact spectral path when
/// no Chebyshev order is given (dense eigensolve), recurrence path otherwise.
pub fn filter_image(
    img: &ImagePlane,
    params: &GridWeightParams,
    filter: &FilterSpec,
    chebyshev_order: Option<usize>,
) -> Result<ImagePlane> {
    use crate::operators::{variation_operator, OperatorKind};
    let g = build_grid_graph(img, params)?;
    let op = variation_operator(&g, OperatorKind::Combinatorial)?;
    let mut channels = Vec::with_capacity(img.channels());
    match chebyshev_order {
        None => {
            let spectrum = crate::spectral::eigendecompose(&op)?;
            for c in 0..img.channels() {
                channels.push(apply_exact(&spectrum, filter, &img.channel(c))?);
            }
        }
        Some(order) => {
            let lmax = default_lambda_max(&op);
            let cheb = chebyshev_fit(
                |l| {
                    filter
                        .gain_at(l)
                        .expect("index-selective filters need a spectrum")
                },
                order,
                lmax,
            )?;
            for c in 0..img.channels() {
                channels.push(apply_chebyshev(&op, &cheb, &img.channel(c))?);
            }
        }
    }
    ImagePlane::from_channels(img.width(), img.height(), &channels)
}
