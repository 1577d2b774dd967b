//! Graph spectrum: eigendecomposition of variation operators, the graph
//! Fourier transform pair, the DCT basis, and smoothness measures.
//!
//! Degenerate eigenspaces are pinned to a deterministic basis so that every
//! downstream consumer (filters, codec, tests) sees identical spectra for
//! identical inputs:
//! - the null space of a combinatorial Laplacian is re-based to normalized
//!   connected-component indicator vectors, in component discovery order;
//! - any other degenerate group keeps the computed basis but is sorted by
//!   the index of the first entry attaining the column's maximum magnitude;
//! - each eigenvector's first entry larger than 1e-12 in magnitude is made
//!   positive.

use crate::error::{Error, Result};
use crate::graph::{components_of, PixelGraph};
use crate::linalg::{dot, sym_eigen, Matrix};
use crate::operators::{OperatorKind, SparseSymOperator};

/// Largest dimension accepted by the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 4096;

/// Ascending eigenvalues with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpectrum {
    eigenvalues: Vec<f64>,
    /// Eigenvectors as matrix columns, column k pairs with eigenvalue k.
    eigenvectors: Matrix,
    kind: OperatorKind,
}

impl GraphSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Tolerance under which two eigenvalues count as degenerate.
    pub fn degeneracy_tolerance(&self) -> f64 {
        let lmax = self.eigenvalues.last().copied().unwrap_or(0.0).abs();
        1e-9 * lmax.max(1.0)
    }

    /// Index ranges of degenerate eigenvalue groups (singletons included).
    pub fn eigenvalue_groups(&self) -> Vec<std::ops::Range<usize>> {
        let tol = self.degeneracy_tolerance();
        let mut groups = Vec::new();
        let n = self.eigenvalues.len();
        let mut start = 0;
        for k in 1..=n {
            if k == n || self.eigenvalues[k] - self.eigenvalues[k - 1] > tol {
                groups.push(start..k);
                start = k;
            }
        }
        groups
    }
}

/// Eigendecompose a symmetric variation operator (dense path).
pub fn eigendecompose(op: &SparseSymOperator) -> Result<GraphSpectrum> {
    if !op.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = op.dimension();
    if n > DENSE_EIGEN_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: DENSE_EIGEN_LIMIT,
        });
    }
    let dense = op.to_dense();
    let (mut evals, mut evecs) = sym_eigen(&dense)?;

    if op.kind() == OperatorKind::Combinatorial {
        rebase_null_space(op, &mut evals, &mut evecs);
    }
    sort_degenerate_groups(&evals, &mut evecs);
    fix_signs(&mut evecs);

    Ok(GraphSpectrum {
        eigenvalues: evals,
        eigenvectors: evecs,
        kind: op.kind(),
    })
}

/// Replace the (numerical) null space of a combinatorial Laplacian with
/// exact normalized component indicators and pin those eigenvalues to 0.
///
/// The computed basis is rebuilt by modified Gram-Schmidt seeded with the
/// indicators, so columns stay orthonormal even when near-zero edge weights
/// leave the solver's null cluster rotated against the true null space.
fn rebase_null_space(op: &SparseSymOperator, evals: &mut [f64], evecs: &mut Matrix) {
    let n = op.dimension();
    let adj = op.neighbor_lists();
    let (ncomp, comp) = components_of(n, |i| adj[i].clone());
    let mut sizes = vec![0usize; ncomp];
    for &c in &comp {
        sizes[c] += 1;
    }
    let indicators: Vec<Vec<f64>> = (0..ncomp)
        .map(|k| {
            let inv = 1.0 / (sizes[k] as f64).sqrt();
            comp.iter()
                .map(|&c| if c == k { inv } else { 0.0 })
                .collect()
        })
        .collect();

    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(n);
    kept.extend(indicators);
    for k in 0..n {
        if kept.len() == n {
            break;
        }
        let mut v = evecs.column(k);
        // Two MGS passes for orthogonality near machine precision.
        for _ in 0..2 {
            for q in &kept {
                let overlap = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= overlap * qi;
                }
            }
        }
        let norm = crate::linalg::norm2(&v);
        if norm < 0.5 {
            // This column lives (numerically) inside the indicator span;
            // its slot is covered by an exact indicator.
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        kept.push(v);
    }
    debug_assert_eq!(kept.len(), n, "indicator re-basing lost rank");
    for k in 0..ncomp {
        evals[k] = 0.0;
    }
    for (k, col) in kept.iter().enumerate() {
        evecs.set_column(k, col);
    }
}

/// Within each degenerate group, sort columns by the index of the first
/// entry attaining the column's maximum magnitude.
fn sort_degenerate_groups(evals: &[f64], evecs: &mut Matrix) {
    let n = evals.len();
    if n == 0 {
        return;
    }
    let tol = 1e-9 * evals.last().unwrap().abs().max(1.0);
    let dominant_index = |col: &[f64]| -> usize {
        let max = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        col.iter()
            .position(|v| v.abs() >= max - 1e-12)
            .unwrap_or(0)
    };
    let mut start = 0;
    for k in 1..=n {
        if k == n || evals[k] - evals[k - 1] > tol {
            if k - start > 1 {
                let mut keyed: Vec<(usize, Vec<f64>)> = (start..k)
                    .map(|c| {
                        let col = evecs.column(c);
                        (dominant_index(&col), col)
                    })
                    .collect();
                keyed.sort_by_key(|(key, _)| *key);
                for (offset, (_, col)) in keyed.into_iter().enumerate() {
                    evecs.set_column(start + offset, &col);
                }
            }
            start = k;
        }
    }
}

/// Make the first entry of magnitude > 1e-12 positive in every column.
fn fix_signs(evecs: &mut Matrix) {
    for c in 0..evecs.cols() {
        let col = evecs.column(c);
        if let Some(v) = col.iter().find(|v| v.abs() > 1e-12) {
            if *v < 0.0 {
                evecs.scale_column(c, -1.0);
            }
        }
    }
}

/// Spectral coefficients, one per eigenvalue.
pub type SpectralCoefficients = Vec<f64>;

/// Forward graph Fourier transform: `alpha_k = <u_k, x>`.
pub fn gft(spec: &GraphSpectrum, x: &[f64]) -> Result<SpectralCoefficients> {
    if x.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            actual: x.len(),
        });
    }
    Ok(spec.eigenvectors.tr_mul_vec(x))
}

/// Inverse graph Fourier transform: `x = sum_k alpha_k u_k`.
pub fn igft(spec: &GraphSpectrum, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            actual: alpha.len(),
        });
    }
    Ok(spec.eigenvectors.mul_vec(alpha))
}

/// Orthonormal DCT-II basis as matrix columns; the GFT of the unit-weight
/// path graph up to per-column sign.
pub fn dct_basis(n: usize) -> Matrix {
    assert!(n >= 1);
    let mut m = Matrix::zeros(n, n);
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let s = if k == 0 { norm0 } else { norm };
        for i in 0..n {
            let v = s * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
            m.set(i, k, v);
        }
    }
    m
}

/// Graph Laplacian regularizer `sum_{(i,j) in E} w_ij (x_i - x_j)^2`,
/// evaluated in the vertex domain from the edge list.
pub fn laplacian_quadratic(g: &PixelGraph, x: &[f64]) -> Result<f64> {
    if x.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: x.len(),
        });
    }
    Ok(g.edges()
        .iter()
        .map(|e| {
            let d = x[e.i] - x[e.j];
            e.w * d * d
        })
        .sum())
}

/// Quadratic form `x^T (op x)`; the spectral-side evaluation of the same
/// smoothness measure.
pub fn quadratic_form(op: &SparseSymOperator, x: &[f64]) -> Result<f64> {
    Ok(dot(x, &op.apply(x)?))
}

/// Shift-based graph total variation `|| x - W x / |lambda_max| ||_p^p`.
/// The spectral radius of `W` comes from power iteration.
pub fn shift_tv(g: &PixelGraph, x: &[f64], p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::param("p", "must be >= 1"));
    }
    if x.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: x.len(),
        });
    }
    let radius = crate::linalg::power_iteration_radius(
        |v| g.weight_mul(v).expect("dimension checked"),
        g.node_count(),
        1e-10,
        10_000,
    );
    if radius == 0.0 {
        // Empty graph: W x = 0, the measure reduces to ||x||_p^p.
        return Ok(x.iter().map(|v| v.abs().powf(p)).sum());
    }
    let wx = g.weight_mul(x)?;
    Ok(x.iter()
        .zip(&wx)
        .map(|(xi, wxi)| (xi - wxi / radius).abs().powf(p))
        .sum())
}

/// Quadratic shift smoothness `0.5 || x - W x ||_2^2`.
pub fn quadratic_shift(g: &PixelGraph, x: &[f64]) -> Result<f64> {
    if x.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: x.len(),
        });
    }
    let wx = g.weight_mul(x)?;
    Ok(0.5
        * x.iter()
            .zip(&wx)
            .map(|(xi, wxi)| (xi - wxi) * (xi - wxi))
            .sum::<f64>())
}

/// Isotropic local graph total variation
/// `sum_i sqrt( sum_j (x_j - x_i)^2 W_ij^2 )`.
pub fn local_graph_tv(g: &PixelGraph, x: &[f64]) -> Result<f64> {
    if x.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: x.len(),
        });
    }
    let adj = g.adjacency_lists();
    Ok((0..g.node_count())
        .map(|i| {
            adj[i]
                .iter()
                .map(|&(j, w)| {
                    let d = x[j] - x[i];
                    d * d * w * w
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum())
}
