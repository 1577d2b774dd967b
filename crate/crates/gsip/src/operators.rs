//! Variation operators derived from a pixel graph: combinatorial,
//! normalized, random-walk, generalized (loopy) Laplacians and the
//! biLaplacian `L*L`.

use crate::error::{Error, Result};
use crate::graph::{degree_vector, PixelGraph};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `L = D - W`.
    Combinatorial,
    /// `L_n = D^{-1/2} L D^{-1/2}`.
    SymmetricNormalized,
    /// `L_r = D^{-1} L` (not symmetric).
    RandomWalk,
    /// `L_g = L + diag(self-loops)`.
    Generalized,
    /// `L * L`.
    BiLaplacian,
}

/// Sparse symmetric (or flagged-asymmetric) operator in triplet form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymOperator {
    dimension: usize,
    /// `(row, col, value)` triplets; both orientations of every off-diagonal
    /// entry are stored explicitly.
    triplets: Vec<(usize, usize, f64)>,
    kind: OperatorKind,
    symmetric: bool,
}

impl SparseSymOperator {
    pub fn new(
        dimension: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        kind: OperatorKind,
        symmetric: bool,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Self {
            dimension,
            triplets,
            kind,
            symmetric,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// Operator-vector product.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.dimension];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        Ok(y)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dimension, self.dimension);
        for &(r, c, v) in &self.triplets {
            m.set(r, c, m.get(r, c) + v);
        }
        m
    }

    /// Off-diagonal adjacency structure (neighbors per row).
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.dimension];
        for &(r, c, v) in &self.triplets {
            if r != c && v != 0.0 {
                adj[r].push(c);
            }
        }
        adj
    }
}

/// Build the requested variation operator from a graph.
pub fn variation_operator(g: &PixelGraph, kind: OperatorKind) -> Result<SparseSymOperator> {
    let n = g.node_count();
    let degrees = degree_vector(g);
    let check_degrees = |what: &'static str| -> Result<()> {
        let _ = what;
        match degrees.iter().position(|&d| d <= 0.0) {
            Some(node) => Err(Error::DegenerateDegree { node }),
            None => Ok(()),
        }
    };

    // Combinatorial L = D - W. Self-loop weights cancel: they appear in both
    // the degree and the matrix diagonal of W.
    let combinatorial = || -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(n + 2 * g.edges().len());
        let mut diag = vec![0.0; n];
        for e in g.edges() {
            diag[e.i] += e.w;
            diag[e.j] += e.w;
            t.push((e.i, e.j, -e.w));
            t.push((e.j, e.i, -e.w));
        }
        for (i, d) in diag.iter().enumerate() {
            t.push((i, i, *d));
        }
        t
    };

    match kind {
        OperatorKind::Combinatorial => Ok(SparseSymOperator::new(
            n,
            combinatorial(),
            OperatorKind::Combinatorial,
            true,
        )),
        OperatorKind::SymmetricNormalized => {
            check_degrees("symmetric normalized Laplacian")?;
            let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
            let t = combinatorial()
                .into_iter()
                .map(|(r, c, v)| (r, c, inv_sqrt[r] * v * inv_sqrt[c]))
                .collect();
            Ok(SparseSymOperator::new(
                n,
                t,
                OperatorKind::SymmetricNormalized,
                true,
            ))
        }
        OperatorKind::RandomWalk => {
            check_degrees("random-walk Laplacian")?;
            let t = combinatorial()
                .into_iter()
                .map(|(r, c, v)| (r, c, v / degrees[r]))
                .collect();
            Ok(SparseSymOperator::new(n, t, OperatorKind::RandomWalk, false))
        }
        OperatorKind::Generalized => {
            let mut t = combinatorial();
            if let Some(s) = g.self_loop_weights() {
                for (i, w) in s.iter().enumerate() {
                    if *w != 0.0 {
                        t.push((i, i, *w));
                    }
                }
            }
            // Merge duplicate diagonal entries.
            let mut diag = vec![0.0; n];
            let mut off = Vec::new();
            for (r, c, v) in t {
                if r == c {
                    diag[r] += v;
                } else {
                    off.push((r, c, v));
                }
            }
            for (i, d) in diag.into_iter().enumerate() {
                off.push((i, i, d));
            }
            Ok(SparseSymOperator::new(n, off, OperatorKind::Generalized, true))
        }
        OperatorKind::BiLaplacian => {
            let l = SparseSymOperator::new(n, combinatorial(), OperatorKind::Combinatorial, true);
            // Entry-wise product L*L via sparse row combination.
            let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for &(r, c, v) in l.triplets() {
                rows[r].push((c, v));
            }
            let mut t = Vec::new();
            let mut acc = vec![0.0; n];
            let mut touched = Vec::new();
            for r in 0..n {
                for &(k, v_rk) in &rows[r] {
                    for &(c, v_kc) in &rows[k] {
                        if acc[c] == 0.0 && !touched.contains(&c) {
                            touched.push(c);
                        }
                        acc[c] += v_rk * v_kc;
                    }
                }
                touched.sort_unstable();
                for &c in &touched {
                    if acc[c] != 0.0 {
                        t.push((r, c, acc[c]));
                    }
                    acc[c] = 0.0;
                }
                touched.clear();
            }
            Ok(SparseSymOperator::new(n, t, OperatorKind::BiLaplacian, true))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphEdge;

    fn unit_path(n: usize) -> PixelGraph {
        let edges = (0..n - 1)
            .map(|i| GraphEdge { i, j: i + 1, w: 1.0 })
            .collect();
        PixelGraph::new(n, edges, None).unwrap()
    }

    #[test]
    fn combinatorial_two_path() {
        let op = variation_operator(&unit_path(2), OperatorKind::Combinatorial).unwrap();
        let m = op.to_dense();
        assert_eq!(
            (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)),
            (1.0, -1.0, -1.0, 1.0)
        );
    }

    #[test]
    fn bilaplacian_two_path_is_matrix_square() {
        let op = variation_operator(&unit_path(2), OperatorKind::BiLaplacian).unwrap();
        let m = op.to_dense();
        assert_eq!(
            (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)),
            (2.0, -2.0, -2.0, 2.0)
        );
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let g = PixelGraph::new(
            4,
            vec![
                GraphEdge { i: 0, j: 1, w: 0.3 },
                GraphEdge { i: 1, j: 2, w: 1.7 },
                GraphEdge { i: 0, j: 3, w: 0.9 },
                GraphEdge { i: 2, j: 3, w: 0.2 },
            ],
            None,
        )
        .unwrap();
        let op = variation_operator(&g, OperatorKind::Combinatorial).unwrap();
        let ones = vec![1.0; 4];
        for v in op.apply(&ones).unwrap() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_rejects_isolated_node() {
        let g = PixelGraph::new(3, vec![GraphEdge { i: 0, j: 1, w: 1.0 }], None).unwrap();
        match variation_operator(&g, OperatorKind::SymmetricNormalized) {
            Err(Error::DegenerateDegree { node }) => assert_eq!(node, 2),
            other => panic!("expected degenerate degree error, got {other:?}"),
        }
    }

    #[test]
    fn random_walk_not_symmetric_flagged() {
        let g = PixelGraph::new(
            3,
            vec![
                GraphEdge { i: 0, j: 1, w: 0.5 },
                GraphEdge { i: 1, j: 2, w: 2.0 },
            ],
            None,
        )
        .unwrap();
        let op = variation_operator(&g, OperatorKind::RandomWalk).unwrap();
        assert!(!op.is_symmetric());
        // Row sums of D^{-1} L are still zero.
        for v in op.apply(&[1.0, 1.0, 1.0]).unwrap() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_adds_self_loops() {
        let g = PixelGraph::new(
            2,
            vec![GraphEdge { i: 0, j: 1, w: 1.0 }],
            Some(vec![0.25, 0.0]),
        )
        .unwrap();
        let op = variation_operator(&g, OperatorKind::Generalized).unwrap();
        let m = op.to_dense();
        // Degree includes the self-loop, but L's diagonal cancels it;
        // L_g adds it back once.
        assert!((m.get(0, 0) - 1.25).abs() < 1e-15);
        assert!((m.get(1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bilaplacian_matches_dense_square_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..=20);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.3) {
                        edges.push(GraphEdge {
                            i,
                            j,
                            w: rng.gen_range(0.05..1.0),
                        });
                    }
                }
            }
            let g = PixelGraph::new(n, edges, None).unwrap();
            let l = variation_operator(&g, OperatorKind::Combinatorial)
                .unwrap()
                .to_dense();
            let bi = variation_operator(&g, OperatorKind::BiLaplacian)
                .unwrap()
                .to_dense();
            for r in 0..n {
                for c in 0..n {
                    let mut want = 0.0;
                    for k in 0..n {
                        want += l.get(r, k) * l.get(k, c);
                    }
                    assert!(
                        (bi.get(r, c) - want).abs() < 1e-12,
                        "L*L mismatch at ({r},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn bilaplacian_entry_formulas_on_triangle_free_graphs() {
        // On triangle-free graphs the biLaplacian entries reduce to the
        // three-case neighborhood formulas; grids are triangle-free.
        use crate::graph::{build_grid_graph, GridWeightParams};
        use crate::image::ImagePlane;
        let img = ImagePlane::gray(
            4,
            3,
            (0..12).map(|i| ((i * 7) % 12) as f64 / 11.0).collect(),
        )
        .unwrap();
        let g = build_grid_graph(&img, &GridWeightParams::default()).unwrap();
        let n = g.node_count();
        let adj = g.adjacency_lists();
        let w = |i: usize, j: usize| -> f64 {
            adj[i]
                .iter()
                .find(|&&(k, _)| k == j)
                .map_or(0.0, |&(_, w)| w)
        };
        let bi = variation_operator(&g, OperatorKind::BiLaplacian)
            .unwrap()
            .to_dense();
        for i in 0..n {
            // Diagonal: sum w_ij^2 + sum_j sum_l w_ij w_il.
            let mut diag = 0.0;
            for &(_, wij) in &adj[i] {
                diag += wij * wij;
                for &(_, wil) in &adj[i] {
                    diag += wij * wil;
                }
            }
            assert!((bi.get(i, i) - diag).abs() < 1e-12);
            // One-hop: -sum_{k in N(j)} w_ij w_jk - sum_{k in N(i)} w_ij w_ik.
            for &(j, wij) in &adj[i] {
                let mut v = 0.0;
                for &(k, wjk) in &adj[j] {
                    let _ = k;
                    v -= wij * wjk;
                }
                for &(k, wik) in &adj[i] {
                    let _ = k;
                    v -= wij * wik;
                }
                assert!((bi.get(i, j) - v).abs() < 1e-12, "one-hop entry ({i},{j})");
            }
            // Two-hop: sum over j in N(i), k in N(j), k != i of w_ij w_jk.
            let mut twohop = std::collections::BTreeMap::new();
            for &(mid, wij) in &adj[i] {
                for &(k, wjk) in &adj[mid] {
                    if k != i && w(i, k) == 0.0 {
                        *twohop.entry(k).or_insert(0.0) += wij * wjk;
                    }
                }
            }
            for (k, v) in twohop {
                assert!((bi.get(i, k) - v).abs() < 1e-12, "two-hop entry ({i},{k})");
            }
        }
    }
}
