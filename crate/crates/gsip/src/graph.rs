//! Pixel graphs: construction from images, degrees, and Sinkhorn scaling.
//!
//! Edge weights follow the Gaussian kernel
//! `w = exp(-d_geo^2 / sigma_l^2) * exp(-d_photo^2 / sigma_x^2)` with unit
//! pixel spacing on the grid and photometric distance summed over channels.

use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Grid connectivity: 4 (rook) or 8 (rook + diagonals).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn count(self) -> usize {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Parameters of the Gaussian edge-weight kernel.
#[derive(Debug, Clone, Copy)]
pub struct GridWeightParams {
    /// Geometric bandwidth (> 0).
    pub sigma_l: f64,
    /// Photometric bandwidth (> 0).
    pub sigma_x: f64,
    pub connectivity: Connectivity,
    /// Add a unit self-loop at every node.
    pub self_loops: bool,
}

impl Default for GridWeightParams {
    fn default() -> Self {
        Self {
            sigma_l: 1.0,
            sigma_x: 0.1,
            connectivity: Connectivity::Four,
            self_loops: false,
        }
    }
}

impl GridWeightParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma_l > 0.0) || !self.sigma_l.is_finite() {
            return Err(Error::param("sigma_l", "must be strictly positive"));
        }
        if !(self.sigma_x > 0.0) || !self.sigma_x.is_finite() {
            return Err(Error::param("sigma_x", "must be strictly positive"));
        }
        Ok(())
    }

    /// Kernel weight for squared geometric and photometric distances.
    #[inline]
    pub fn weight(&self, geo_sq: f64, photo_sq: f64) -> f64 {
        (-geo_sq / (self.sigma_l * self.sigma_l)).exp()
            * (-photo_sq / (self.sigma_x * self.sigma_x)).exp()
    }
}

/// Weighted undirected edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Weighted undirected graph over pixels (or any indexed node set).
///
/// Edges are stored once with `i < j` and kept sorted by `(i, j)`; the
/// adjacency is symmetric by construction. Self-loop weights, when present,
/// live on the matrix diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGraph {
    node_count: usize,
    edges: Vec<GraphEdge>,
    self_loop_weights: Option<Vec<f64>>,
}

impl PixelGraph {
    pub fn new(
        node_count: usize,
        mut edges: Vec<GraphEdge>,
        self_loop_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        for e in &edges {
            if e.i >= e.j || e.j >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) violates 0 <= i < j < {}",
                    e.i, e.j, node_count
                )));
            }
            if !(e.w > 0.0) || !e.w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.i, e.j, e.w
                )));
            }
        }
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        if edges.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidGraph("duplicate edge".into()));
        }
        if let Some(s) = &self_loop_weights {
            if s.len() != node_count {
                return Err(Error::DimensionMismatch {
                    expected: node_count,
                    actual: s.len(),
                });
            }
            if s.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                return Err(Error::InvalidGraph("negative self-loop weight".into()));
            }
        }
        Ok(Self {
            node_count,
            edges,
            self_loop_weights,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn self_loop_weights(&self) -> Option<&[f64]> {
        self.self_loop_weights.as_deref()
    }

    pub fn self_loop(&self, node: usize) -> f64 {
        self.self_loop_weights
            .as_ref()
            .map_or(0.0, |s| s[node])
    }

    /// Neighbor lists (node, weight), symmetric view of the edge list.
    pub fn adjacency_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.i].push((e.j, e.w));
            adj[e.j].push((e.i, e.w));
        }
        adj
    }

    /// `W x` where `W` is the full weight matrix including self-loops.
    pub fn weight_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.node_count {
            return Err(Error::DimensionMismatch {
                expected: self.node_count,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.node_count];
        if let Some(s) = &self.self_loop_weights {
            for i in 0..self.node_count {
                y[i] = s[i] * x[i];
            }
        }
        for e in &self.edges {
            y[e.i] += e.w * x[e.j];
            y[e.j] += e.w * x[e.i];
        }
        Ok(y)
    }

    /// Connected components ignoring self-loops, in discovery order
    /// scanning nodes `0..N`; returns per-node component ids.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let adj = self.adjacency_lists();
        components_of(self.node_count, |i| adj[i].iter().map(|&(j, _)| j).collect())
    }

    /// Same graph with every self-loop set to 1.
    pub fn with_unit_self_loops(&self) -> PixelGraph {
        PixelGraph {
            node_count: self.node_count,
            edges: self.edges.clone(),
            self_loop_weights: Some(vec![1.0; self.node_count]),
        }
    }
}

pub(crate) fn components_of<F>(n: usize, neighbors: F) -> (usize, Vec<usize>)
where
    F: Fn(usize) -> Vec<usize>,
{
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = count;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for v in neighbors(u) {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (count, comp)
}

/// Per-node degree `d_i = sum_j w_ij` plus the self-loop weight if present.
pub fn degree_vector(g: &PixelGraph) -> Vec<f64> {
    let mut d = vec![0.0; g.node_count()];
    if let Some(s) = g.self_loop_weights() {
        d.copy_from_slice(s);
    }
    for e in g.edges() {
        d[e.i] += e.w;
        d[e.j] += e.w;
    }
    d
}

/// Build the grid graph of an image: one edge per neighboring pixel pair
/// under the chosen connectivity, Gaussian-kernel weighted.
pub fn build_grid_graph(img: &ImagePlane, params: &GridWeightParams) -> Result<PixelGraph> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let offsets: &[(isize, isize)] = match params.connectivity {
        Connectivity::Four => &[(1, 0), (0, 1)],
        Connectivity::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
    };
    let mut edges = Vec::with_capacity(w * h * offsets.len());
    for y in 0..h {
        for x in 0..w {
            let i = img.node(x, y);
            for &(dx, dy) in offsets {
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
                    // Kernel underflow: treat as no edge.
                    continue;
                }
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                edges.push(GraphEdge { i: a, j: b, w: weight });
            }
        }
    }
    let self_loops = params.self_loops.then(|| vec![1.0; w * h]);
    PixelGraph::new(w * h, edges, self_loops)
}

/// Non-local graph: connect each pixel to its `k` most-similar patches in a
/// search window, Gaussian-weighted by patch distance. When both directions
/// propose the same edge, the larger weight wins.
pub fn build_nonlocal_graph(
    img: &ImagePlane,
    patch_radius: usize,
    search_radius: usize,
    k: usize,
    sigma_x: f64,
) -> Result<PixelGraph> {
    if !(sigma_x > 0.0) {
        return Err(Error::param("sigma_x", "must be strictly positive"));
    }
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let mut best: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    let pr = patch_radius as isize;
    let patch_dist_sq = |ax: usize, ay: usize, bx: usize, by: usize| -> f64 {
        let mut acc = 0.0;
        for dy in -pr..=pr {
            for dx in -pr..=pr {
                for c in 0..img.channels() {
                    let a = img.sample_clamped(ax as isize + dx, ay as isize + dy, c);
                    let b = img.sample_clamped(bx as isize + dx, by as isize + dy, c);
                    acc += (a - b) * (a - b);
                }
            }
        }
        acc
    };
    let sr = search_radius as isize;
    for y in 0..h {
        for x in 0..w {
            let i = img.node(x, y);
            // (distance, node) candidates in the window, excluding self.
            let mut cands: Vec<(f64, usize)> = Vec::new();
            for dy in -sr..=sr {
                for dx in -sr..=sr {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = img.node(nx as usize, ny as usize);
                    if j == i {
                        continue;
                    }
                    cands.push((patch_dist_sq(x, y, nx as usize, ny as usize), j));
                }
            }
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(dist_sq, j) in cands.iter().take(k) {
                let weight = (-dist_sq / (sigma_x * sigma_x)).exp();
                if weight <= 0.0 {
                    continue;
                }
                let key = if i < j { (i, j) } else { (j, i) };
                let slot = best.entry(key).or_insert(0.0);
                if weight > *slot {
                    *slot = weight;
                }
            }
        }
    }
    let edges = best
        .into_iter()
        .map(|((i, j), w)| GraphEdge { i, j, w })
        .collect();
    PixelGraph::new(n, edges, None)
}

/// Result of Sinkhorn scaling: `K = C^{-1/2} W C^{-1/2}` is doubly
/// stochastic up to the reported residual.
#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// Diagonal of the scaling matrix `C`.
    pub scaling: Vec<f64>,
    /// Scaled graph whose weight matrix is `K`.
    pub scaled: PixelGraph,
    /// Final `max_i |row_sum_i(K) - 1|`.
    pub residual: f64,
    /// Residual after every iteration, starting with the unscaled matrix.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
}

/// Symmetric Sinkhorn-Knopp scaling of the graph's weight matrix
/// (self-loops included). Iterates `d <- sqrt(d / (W d))` until every row
/// sum of `K = diag(d) W diag(d)` is within `tol` of 1.
pub fn sinkhorn_scale(g: &PixelGraph, max_iters: usize, tol: f64) -> Result<SinkhornResult> {
    let n = g.node_count();
    let row_sums_unit = degree_vector(g);
    if let Some(row) = row_sums_unit.iter().position(|&s| s <= 0.0) {
        return Err(Error::NotScalable { row });
    }
    let mut d = vec![1.0_f64; n];
    let scaled_row_sums = |d: &[f64]| -> Vec<f64> {
        let dx = g.weight_mul(d).expect("dimension checked");
        (0..n).map(|i| d[i] * dx[i]).collect()
    };
    let residual_of = |sums: &[f64]| {
        sums.iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0_f64, f64::max)
    };
    let mut sums = scaled_row_sums(&d);
    let mut residual = residual_of(&sums);
    let mut history = vec![residual];
    let mut iterations = 0;
    while residual > tol && iterations < max_iters {
        let wd = g.weight_mul(&d).expect("dimension checked");
        for i in 0..n {
            if wd[i] <= 0.0 {
                return Err(Error::NotScalable { row: i });
            }
            d[i] = (d[i] / wd[i]).sqrt();
        }
        sums = scaled_row_sums(&d);
        residual = residual_of(&sums);
        history.push(residual);
        iterations += 1;
    }
    // K entries: k_ij = d_i w_ij d_j.
    let edges = g
        .edges()
        .iter()
        .map(|e| GraphEdge {
            i: e.i,
            j: e.j,
            w: d[e.i] * e.w * d[e.j],
        })
        .collect();
    let self_loops = g
        .self_loop_weights()
        .map(|s| (0..n).map(|i| d[i] * s[i] * d[i]).collect());
    let scaled = PixelGraph::new(n, edges, self_loops)?;
    // C = diag(1 / d^2) so that C^{-1/2} = diag(d).
    let scaling = d.iter().map(|di| 1.0 / (di * di)).collect();
    Ok(SinkhornResult {
        scaling,
        scaled,
        residual,
        residual_history: history,
        iterations,
    })
}
