//! Dyadic cubical cell complexes on [-1,1]^d.
//!
//! Level i subdivides each axis into N = 2^i segments (level 0 is the single
//! cube). A k-cell is identified by its anchor vertex in grid coordinates
//! 0..=N together with the set of axes it extrudes along; the anchor
//! coordinate along an extruded axis runs over 0..N. Cells are ordered
//! lexicographically by (axes set, anchor), and indices are computed in
//! closed form, so nothing but the interior-vertex table is materialized.
//!
//! Boundary detection compares integer grid coordinates exactly; no floating
//! point is involved anywhere in the combinatorics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramlin::{GramForm, LinearOperator};
use crate::intmat::IntMatrix;

/// Default cap on the refinement level accepted by [`CubicalComplex::build`].
pub const DEFAULT_LEVEL_CAP: u32 = 6;

/// A k-cell: anchor vertex plus the sorted set of extruded axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub anchor: Vec<i64>,
    pub axes: Vec<usize>,
}

impl Cell {
    pub fn degree(&self) -> usize {
        self.axes.len()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for t in 0..k {
        acc = acc * (n - t) / (t + 1);
    }
    acc
}

/// All k-subsets of 0..d in lexicographic order.
fn axis_sets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(d, k));
    let mut cur = Vec::with_capacity(k);
    fn rec(d: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..d {
            cur.push(a);
            rec(d, k, a + 1, cur, out);
            cur.pop();
        }
    }
    rec(d, k, 0, &mut cur, &mut out);
    out
}

/// The dyadic cubical complex K_i on [-1,1]^d.
#[derive(Clone, Debug)]
pub struct CubicalComplex {
    dim: usize,
    level: u32,
    /// Subdivisions per axis, N = 2^level.
    n: i64,
    /// Axis sets per degree, lexicographic.
    axes_by_degree: Vec<Vec<Vec<usize>>>,
    /// Interior vertex indices, ascending.
    interior: Vec<usize>,
    /// Full vertex index -> position in `interior`.
    interior_pos: Vec<Option<usize>>,
}

/// JSON-friendly summary of a complex.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexSummary {
    pub dimension: usize,
    pub level: u32,
    pub mesh_width: f64,
    pub cell_counts: Vec<usize>,
    pub interior_vertices: usize,
}

impl CubicalComplex {
    /// Builds K_i under the default level cap.
    pub fn build(d: usize, i: u32) -> Result<Self> {
        Self::build_with_cap(d, i, DEFAULT_LEVEL_CAP)
    }

    /// Builds K_i under an explicit level cap.
    pub fn build_with_cap(d: usize, i: u32, cap: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput(
                "ambient dimension must be at least 1".into(),
            ));
        }
        if i > cap {
            return Err(Error::LevelCap { requested: i, cap });
        }
        let n = 1i64 << i;
        let axes_by_degree = (0..=d).map(|k| axis_sets(d, k)).collect();
        let n_vertices = ((n + 1) as usize).pow(d as u32);
        let mut interior = Vec::new();
        let mut interior_pos = vec![None; n_vertices];
        let mut anchor = vec![0i64; d];
        for (idx, slot) in interior_pos.iter_mut().enumerate() {
            if anchor.iter().all(|&c| c > 0 && c < n) {
                *slot = Some(interior.len());
                interior.push(idx);
            }
            // next anchor in lexicographic order, last axis fastest
            for a in (0..d).rev() {
                if anchor[a] < n {
                    anchor[a] += 1;
                    break;
                }
                anchor[a] = 0;
            }
        }
        Ok(Self {
            dim: d,
            level: i,
            n,
            axes_by_degree,
            interior,
            interior_pos,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Subdivisions per axis, N = 2^level.
    pub fn per_axis(&self) -> i64 {
        self.n
    }

    /// Mesh width 1/2^(i-1) = 2/N.
    pub fn mesh_width(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Number of k-cells: C(d,k) N^k (N+1)^(d-k).
    pub fn n_cells(&self, k: usize) -> usize {
        if k > self.dim {
            return 0;
        }
        let n = self.n as usize;
        binomial(self.dim, k) * n.pow(k as u32) * (n + 1).pow((self.dim - k) as u32)
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.interior.len()
    }

    /// Interior vertex indices in enumeration order.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    /// Position of a vertex in the interior enumeration, if interior.
    pub fn interior_position(&self, vertex_index: usize) -> Option<usize> {
        self.interior_pos[vertex_index]
    }

    pub fn is_boundary_anchor(&self, anchor: &[i64]) -> bool {
        anchor.iter().any(|&c| c == 0 || c == self.n)
    }

    /// Index of a cell within the degree-k enumeration.
    pub fn cell_index(&self, cell: &Cell) -> usize {
        let k = cell.degree();
        let sets = &self.axes_by_degree[k];
        let set_pos = sets
            .binary_search(&cell.axes)
            .expect("axes set must be a sorted subset of 0..d");
        let n = self.n as usize;
        let block: usize = n.pow(k as u32) * (n + 1).pow((self.dim - k) as u32);
        let mut rank = 0usize;
        for a in 0..self.dim {
            let radix = if cell.axes.contains(&a) { n } else { n + 1 };
            debug_assert!((cell.anchor[a] as usize) < radix, "anchor out of range");
            rank = rank * radix + cell.anchor[a] as usize;
        }
        set_pos * block + rank
    }

    /// Cell at a given index within the degree-k enumeration.
    pub fn cell_at(&self, k: usize, index: usize) -> Cell {
        let n = self.n as usize;
        let block: usize = n.pow(k as u32) * (n + 1).pow((self.dim - k) as u32);
        let set_pos = index / block;
        let mut rank = index % block;
        let axes = self.axes_by_degree[k][set_pos].clone();
        let mut anchor = vec![0i64; self.dim];
        for a in (0..self.dim).rev() {
            let radix = if axes.contains(&a) { n } else { n + 1 };
            anchor[a] = (rank % radix) as i64;
            rank /= radix;
        }
        Cell { anchor, axes }
    }

    /// Iterates the degree-k cells in enumeration order.
    pub fn cells(&self, k: usize) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_cells(k)).map(move |idx| self.cell_at(k, idx))
    }

    /// Checks that every (k-1)-face of every k-cell is present.
    pub fn validate_faces(&self) -> Result<()> {
        for k in 1..=self.dim {
            for cell in self.cells(k) {
                for (pos, &a) in cell.axes.iter().enumerate() {
                    let mut axes = cell.axes.clone();
                    axes.remove(pos);
                    for offset in [0, 1] {
                        let mut anchor = cell.anchor.clone();
                        anchor[a] += offset;
                        let face = Cell {
                            anchor,
                            axes: axes.clone(),
                        };
                        let idx = self.cell_index(&face);
                        if idx >= self.n_cells(k - 1) {
                            return Err(Error::InvalidInput(format!(
                                "face {face:?} of {cell:?} missing from enumeration"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn c0_label(&self, dirichlet: bool) -> String {
        if dirichlet {
            format!("C00(d{},i{})", self.dim, self.level)
        } else {
            format!("C0(d{},i{})", self.dim, self.level)
        }
    }

    fn c1_label(&self) -> String {
        format!("C1(d{},i{})", self.dim, self.level)
    }

    pub fn dirichlet_space_label(&self) -> String {
        self.c0_label(true)
    }

    pub fn edge_space_label(&self) -> String {
        self.c1_label()
    }

    /// Exact integer coboundary matrix C^0 -> C^1; edges are oriented toward
    /// increasing coordinate, so (dc)(edge) = c(head) - c(tail).
    pub fn coboundary_int(&self, dirichlet: bool) -> IntMatrix {
        let n_edges = self.n_cells(1);
        let cols = if dirichlet {
            self.interior.len()
        } else {
            self.n_cells(0)
        };
        let mut m = IntMatrix::zeros(n_edges, cols);
        for (row, edge) in self.cells(1).enumerate() {
            let axis = edge.axes[0];
            let tail = Cell {
                anchor: edge.anchor.clone(),
                axes: vec![],
            };
            let mut head_anchor = edge.anchor.clone();
            head_anchor[axis] += 1;
            let head = Cell {
                anchor: head_anchor,
                axes: vec![],
            };
            for (cell, sign) in [(head, 1i64), (tail, -1i64)] {
                let vidx = self.cell_index(&cell);
                if dirichlet {
                    if let Some(p) = self.interior_pos[vidx] {
                        m.add(row, p, sign);
                    }
                } else {
                    m.add(row, vidx, sign);
                }
            }
        }
        m
    }

    /// The coboundary as a dense labelled operator.
    pub fn coboundary(&self, dirichlet: bool) -> LinearOperator {
        self.coboundary_int(dirichlet)
            .to_operator(self.c0_label(dirichlet), self.c1_label())
    }

    /// Scaling factor 2^((i-1)(2k-d)) of the level-i degree-k inner product.
    pub fn scaling_factor(&self, k: usize) -> f64 {
        let e = (self.level as i32 - 1) * (2 * k as i32 - self.dim as i32);
        2.0_f64.powi(e)
    }

    /// Inner product on C^k: the canonical cell-basis form, optionally scaled,
    /// optionally restricted to interior-vertex coordinates (k = 0 only).
    pub fn gram(&self, k: usize, scaled: bool, dirichlet: bool) -> Result<GramForm> {
        if k > self.dim {
            return Err(Error::InvalidInput(format!(
                "degree {k} exceeds ambient dimension {}",
                self.dim
            )));
        }
        if dirichlet && k != 0 {
            return Err(Error::InvalidInput(
                "Dirichlet restriction only applies to 0-cochains".into(),
            ));
        }
        let dim = if dirichlet {
            if self.interior.is_empty() {
                return Err(Error::DegenerateComplex);
            }
            self.interior.len()
        } else {
            self.n_cells(k)
        };
        let factor = if scaled { self.scaling_factor(k) } else { 1.0 };
        GramForm::scaled_identity(dim, factor)
    }

    /// Dirichlet Laplacian on interior-vertex coordinates.
    ///
    /// The quadratic form is the scaled 1-norm of the coboundary, which in
    /// matrix terms is 4^(i-1) D^T D. Assembled edge by edge; an endpoint on
    /// the boundary contributes only to the diagonal of its interior partner.
    pub fn dirichlet_laplacian(&self) -> Result<LinearOperator> {
        if self.level == 0 || self.interior.is_empty() {
            return Err(Error::DegenerateComplex);
        }
        let s = 4.0_f64.powi(self.level as i32 - 1);
        let m = self.interior.len();
        let mut lap = DMatrix::zeros(m, m);
        for edge in self.cells(1) {
            let axis = edge.axes[0];
            let tail_idx = self.cell_index(&Cell {
                anchor: edge.anchor.clone(),
                axes: vec![],
            });
            let mut head_anchor = edge.anchor.clone();
            head_anchor[axis] += 1;
            let head_idx = self.cell_index(&Cell {
                anchor: head_anchor,
                axes: vec![],
            });
            let t = self.interior_pos[tail_idx];
            let h = self.interior_pos[head_idx];
            if let Some(t) = t {
                lap[(t, t)] += s;
            }
            if let Some(h) = h {
                lap[(h, h)] += s;
            }
            if let (Some(t), Some(h)) = (t, h) {
                lap[(t, h)] -= s;
                lap[(h, t)] -= s;
            }
        }
        let label = self.c0_label(true);
        Ok(LinearOperator::new(lap, label.clone(), label))
    }

    pub fn summary(&self) -> ComplexSummary {
        ComplexSummary {
            dimension: self.dim,
            level: self.level,
            mesh_width: self.mesh_width(),
            cell_counts: (0..=self.dim).map(|k| self.n_cells(k)).collect(),
            interior_vertices: self.interior.len(),
        }
    }
}

/// Real-valued cochain on a complex, indexed by the cell enumeration.
#[derive(Clone, Debug)]
pub struct Cochain {
    pub degree: usize,
    pub dirichlet: bool,
    pub coefficients: DVector<f64>,
}

impl Cochain {
    pub fn zero(complex: &CubicalComplex, degree: usize, dirichlet: bool) -> Self {
        Self {
            degree,
            dirichlet,
            coefficients: DVector::zeros(complex.n_cells(degree)),
        }
    }

    /// Builds a Dirichlet 0-cochain from interior coefficients; boundary
    /// entries are exactly zero.
    pub fn dirichlet_from_interior(
        complex: &CubicalComplex,
        interior: &DVector<f64>,
    ) -> Result<Self> {
        if interior.len() != complex.n_interior_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} interior coefficients, got {}",
                complex.n_interior_vertices(),
                interior.len()
            )));
        }
        let mut full = DVector::zeros(complex.n_cells(0));
        for (pos, &vidx) in complex.interior_vertices().iter().enumerate() {
            full[vidx] = interior[pos];
        }
        Ok(Self {
            degree: 0,
            dirichlet: true,
            coefficients: full,
        })
    }

    /// Interior coordinates of a Dirichlet 0-cochain.
    pub fn interior_coefficients(&self, complex: &CubicalComplex) -> DVector<f64> {
        DVector::from_iterator(
            complex.n_interior_vertices(),
            complex
                .interior_vertices()
                .iter()
                .map(|&v| self.coefficients[v]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Finite-difference Dirichlet Laplacian with spacing h = 1/2^(i-1):
    /// diagonal 2d/h^2, nearest-neighbour coupling -1/h^2. Independent of the
    /// coboundary construction.
    fn fd_dirichlet_laplacian(d: usize, i: u32) -> DMatrix<f64> {
        let n = 1i64 << i;
        let h = 2.0 / n as f64;
        let inv_h2 = 1.0 / (h * h);
        let mut pts: Vec<Vec<i64>> = Vec::new();
        let mut cur = vec![1i64; d];
        'outer: loop {
            pts.push(cur.clone());
            for a in (0..d).rev() {
                if cur[a] < n - 1 {
                    cur[a] += 1;
                    continue 'outer;
                }
                cur[a] = 1;
                if a == 0 {
                    break 'outer;
                }
            }
        }
        let idx = |p: &Vec<i64>| pts.iter().position(|q| q == p);
        let m = pts.len();
        let mut lap = DMatrix::zeros(m, m);
        for (r, p) in pts.iter().enumerate() {
            lap[(r, r)] = 2.0 * d as f64 * inv_h2;
            for a in 0..d {
                for s in [-1i64, 1] {
                    let mut q = p.clone();
                    q[a] += s;
                    if let Some(c) = idx(&q) {
                        lap[(r, c)] = -inv_h2;
                    }
                }
            }
        }
        lap
    }

    #[test]
    fn cell_counts_match_formula() {
        let k1 = CubicalComplex::build(1, 1).unwrap();
        assert_eq!(k1.n_cells(0), 3);
        assert_eq!(k1.n_cells(1), 2);

        let k2 = CubicalComplex::build(2, 2).unwrap();
        assert_eq!(k2.n_cells(0), 25);
        assert_eq!(k2.n_cells(1), 40);
        assert_eq!(k2.n_cells(2), 16);

        let k0 = CubicalComplex::build(1, 0).unwrap();
        assert_eq!(k0.n_cells(0), 2);
        assert_eq!(k0.n_cells(1), 1);

        let k3 = CubicalComplex::build(3, 2).unwrap();
        for k in 0..=3 {
            let n = 4usize;
            let want = binomial(3, k) * n.pow(k as u32) * (n + 1).pow(3 - k as u32);
            assert_eq!(k3.n_cells(k), want);
        }
    }

    #[test]
    fn interior_vertex_counts() {
        let k1 = CubicalComplex::build(1, 1).unwrap();
        assert_eq!(k1.interior_vertices().len(), 1);
        // the single interior vertex of [-1,1] at level 1 is the midpoint
        let v = k1.cell_at(0, k1.interior_vertices()[0]);
        assert_eq!(v.anchor, vec![1]);

        let k2 = CubicalComplex::build(2, 2).unwrap();
        assert_eq!(k2.interior_vertices().len(), 9);

        let k0 = CubicalComplex::build(1, 0).unwrap();
        assert!(k0.interior_vertices().is_empty());
    }

    #[test]
    fn level_cap_is_enforced() {
        assert!(matches!(
            CubicalComplex::build(1, 7),
            Err(Error::LevelCap {
                requested: 7,
                cap: 6
            })
        ));
        assert!(CubicalComplex::build_with_cap(1, 7, 8).is_ok());
        assert!(matches!(
            CubicalComplex::build(0, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn cell_index_roundtrip() {
        let k = CubicalComplex::build(3, 2).unwrap();
        for deg in 0..=3 {
            for idx in 0..k.n_cells(deg) {
                let cell = k.cell_at(deg, idx);
                assert_eq!(k.cell_index(&cell), idx);
            }
        }
    }

    #[test]
    fn faces_are_closed() {
        for (d, i) in [(1, 2), (2, 2), (3, 1)] {
            CubicalComplex::build(d, i)
                .unwrap()
                .validate_faces()
                .unwrap();
        }
    }

    #[test]
    fn refinement_subdivides_top_cells() {
        let coarse = CubicalComplex::build(2, 1).unwrap();
        let fine = CubicalComplex::build(2, 2).unwrap();
        for cell in coarse.cells(2) {
            for ex in [0i64, 1] {
                for ey in [0i64, 1] {
                    let sub = Cell {
                        anchor: vec![2 * cell.anchor[0] + ex, 2 * cell.anchor[1] + ey],
                        axes: cell.axes.clone(),
                    };
                    assert!(fine.cell_index(&sub) < fine.n_cells(2));
                }
            }
        }
    }

    #[test]
    fn coboundary_difference_stencil_d1() {
        let k = CubicalComplex::build(1, 1).unwrap();
        let d0 = k.coboundary(true);
        // unit cochain at the single interior vertex (the midpoint)
        let c = DVector::from_vec(vec![1.0]);
        let dc = d0.apply(&c);
        assert_eq!(dc, DVector::from_vec(vec![1.0, -1.0]));
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let k = CubicalComplex::build(1, 1).unwrap();
        let d = k.coboundary(false);
        let ones = DVector::from_element(3, 1.0);
        assert_eq!(d.apply(&ones), DVector::zeros(2));
    }

    #[test]
    fn d2_level1_center_stencil() {
        let k = CubicalComplex::build(2, 1).unwrap();
        assert_eq!(k.n_interior_vertices(), 1);
        let d0 = k.coboundary(true);
        let dc = d0.apply(&DVector::from_vec(vec![1.0]));
        let abs_sum: f64 = dc.iter().map(|x| x.abs()).sum();
        assert_relative_eq!(abs_sum, 4.0, max_relative = 1e-14);
        // injectivity: one interior vertex, rank 1
        let cols: Vec<DVector<f64>> = vec![dc];
        let g = GramForm::identity(k.n_cells(1));
        let b = crate::gramlin::orthonormalize(&cols, &g, 1e-10).unwrap();
        assert_eq!(b.rank(), 1);
    }

    #[test]
    fn restricted_coboundary_is_injective() {
        for (d, i) in [(1u32, 3u32), (2, 2), (2, 3)] {
            let k = CubicalComplex::build(d as usize, i).unwrap();
            let dmat = k.coboundary(true);
            let cols: Vec<DVector<f64>> = (0..dmat.cols())
                .map(|c| dmat.matrix().column(c).into_owned())
                .collect();
            let g = GramForm::identity(dmat.rows());
            let tol = crate::gramlin::default_rank_tol(&cols, &g);
            let b = crate::gramlin::orthonormalize(&cols, &g, tol).unwrap();
            assert_eq!(b.rank(), k.n_interior_vertices());
        }
    }

    #[test]
    fn gram_scaling_factors() {
        let k = CubicalComplex::build(2, 3).unwrap();
        assert_relative_eq!(k.scaling_factor(1), 1.0);
        let k = CubicalComplex::build(1, 2).unwrap();
        assert_relative_eq!(k.scaling_factor(0), 0.5);
        let k = CubicalComplex::build(3, 3).unwrap();
        assert_relative_eq!(k.scaling_factor(0), 1.0 / 64.0);
        assert!(matches!(k.gram(1, true, true), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn laplacian_matches_finite_differences_small() {
        let k = CubicalComplex::build(1, 1).unwrap();
        let lap = k.dirichlet_laplacian().unwrap();
        assert_eq!(lap.matrix(), &DMatrix::from_element(1, 1, 2.0));

        let k = CubicalComplex::build(1, 2).unwrap();
        let lap = k.dirichlet_laplacian().unwrap();
        let want =
            DMatrix::from_row_slice(3, 3, &[8.0, -4.0, 0.0, -4.0, 8.0, -4.0, 0.0, -4.0, 8.0]);
        assert_eq!(lap.matrix(), &want);

        for (d, i) in [(1, 3), (2, 2), (3, 1)] {
            let k = CubicalComplex::build(d, i).unwrap();
            let lap = k.dirichlet_laplacian().unwrap();
            let fd = fd_dirichlet_laplacian(d, i);
            assert!((lap.matrix() - fd).amax() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_is_orientation_independent() {
        // Flipping the sign of any set of edge rows of D leaves D^T D intact.
        use rand::{Rng, SeedableRng};
        let k = CubicalComplex::build(2, 2).unwrap();
        let d = k.coboundary_int(true).to_dense();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut flipped = d.clone();
        for r in 0..flipped.nrows() {
            if rng.gen_bool(0.5) {
                for c in 0..flipped.ncols() {
                    flipped[(r, c)] = -flipped[(r, c)];
                }
            }
        }
        let s = 4.0;
        let lap_a = d.transpose() * &d * s;
        let lap_b = flipped.transpose() * &flipped * s;
        assert_eq!(lap_a, lap_b);
        assert_eq!(&lap_a, k.dirichlet_laplacian().unwrap().matrix());
    }

    #[test]
    fn laplacian_is_positive_definite() {
        let k = CubicalComplex::build(2, 2).unwrap();
        let lap = k.dirichlet_laplacian().unwrap();
        let eigs = lap.matrix().clone().symmetric_eigenvalues();
        assert!(eigs.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn degenerate_complex_is_rejected() {
        let k = CubicalComplex::build(1, 0).unwrap();
        assert!(matches!(
            k.dirichlet_laplacian(),
            Err(Error::DegenerateComplex)
        ));
        assert!(matches!(
            k.gram(0, true, true),
            Err(Error::DegenerateComplex)
        ));
    }

    #[test]
    fn summary_serializes() {
        let k = CubicalComplex::build(2, 2).unwrap();
        let s = serde_json::to_value(k.summary()).unwrap();
        assert_eq!(s["cell_counts"], serde_json::json!([25, 40, 16]));
        assert_eq!(s["interior_vertices"], 9);
        assert_relative_eq!(s["mesh_width"].as_f64().unwrap(), 0.5);
    }

    #[test]
    fn dirichlet_cochain_boundary_is_exactly_zero() {
        let k = CubicalComplex::build(2, 1).unwrap();
        let c = Cochain::dirichlet_from_interior(&k, &DVector::from_vec(vec![7.0])).unwrap();
        for (vidx, &coef) in c.coefficients.iter().enumerate() {
            let v = k.cell_at(0, vidx);
            if k.is_boundary_anchor(&v.anchor) {
                assert_eq!(coef, 0.0);
            } else {
                assert_eq!(coef, 7.0);
            }
        }
        assert_eq!(c.interior_coefficients(&k), DVector::from_vec(vec![7.0]));
    }
}
