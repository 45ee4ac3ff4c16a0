//! Linear algebra over finite-dimensional inner-product spaces whose inner
//! product is an arbitrary SPD Gram form.
//!
//! Everything downstream (discrete Laplacians, renormalized measures, Whitney
//! covariances) reduces to three primitives: Gram-adjoints, Gram-orthonormal
//! bases of subspaces, and SPD solves. All storage is dense `f64`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on Gram matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Orthonormality tolerance for subspace bases.
pub const BASIS_ORTHO_TOL: f64 = 1e-10;

/// Symmetric positive-definite bilinear form on R^n, stored densely.
///
/// The Cholesky factorization is computed once at construction and doubles as
/// the positive-definiteness check: if it fails, the form is rejected.
#[derive(Clone, Debug)]
pub struct GramForm {
    matrix: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GramForm {
    /// Builds a Gram form, rejecting non-symmetric or non-SPD input.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Gram form must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let max_asym = (&matrix - matrix.transpose()).amax() / scale;
        if max_asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { max_asym });
        }
        let chol =
            nalgebra::Cholesky::new(matrix.clone()).ok_or_else(|| Error::NotPositiveDefinite {
                name: "Gram form".into(),
            })?;
        Ok(Self { matrix, chol })
    }

    /// The canonical inner product: identity matrix.
    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    /// A positive multiple of the identity.
    pub fn scaled_identity(dim: usize, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        Self::new(DMatrix::identity(dim, dim) * factor)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// ⟨x, y⟩ with respect to this form.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.matrix.clone() * y).dot(x)
    }

    /// Norm induced by the form.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// G^{-1} b for a vector right-hand side.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// G^{-1} B for a matrix right-hand side.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Lower Cholesky factor L with G = L L^T.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Dense linear map between labelled spaces.
///
/// The labels are opaque strings; composition refuses to chain operators whose
/// space labels do not match, which catches most wiring mistakes in the
/// multilevel constructions at zero cost.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    matrix: DMatrix<f64>,
    source: String,
    target: String,
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<f64>, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            matrix,
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn identity(dim: usize, space: impl Into<String>) -> Self {
        let space = space.into();
        Self::new(DMatrix::identity(dim, dim), space.clone(), space)
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// Applies the operator to a vector.
    ///
    /// Hand-rolled accumulation in ascending column order so that the result
    /// is reproducible bit for bit across platforms and backends.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.cols(), "operand length mismatch");
        let mut out = DVector::zeros(self.rows());
        for r in 0..self.rows() {
            let mut acc = 0.0;
            for c in 0..self.cols() {
                acc += self.matrix[(r, c)] * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// self ∘ other, requiring the space labels to chain.
    pub fn compose(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.source != other.target {
            return Err(Error::SpaceMismatch {
                left: self.source.clone(),
                right: other.target.clone(),
            });
        }
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(LinearOperator::new(
            &self.matrix * &other.matrix,
            other.source.clone(),
            self.target.clone(),
        ))
    }

    /// Max-norm of the matrix entries.
    pub fn max_norm(&self) -> f64 {
        self.matrix.amax()
    }

    /// Frobenius norm of the matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }
}

/// Gram-adjoint A* = G_src^{-1} A^T G_tgt, satisfying
/// ⟨A x, y⟩_tgt = ⟨x, A* y⟩_src for all x, y.
pub fn gram_adjoint(
    a: &LinearOperator,
    g_src: &GramForm,
    g_tgt: &GramForm,
) -> Result<LinearOperator> {
    if a.cols() != g_src.dim() || a.rows() != g_tgt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "adjoint of {}x{} needs source Gram of dim {} and target Gram of dim {}, got {} and {}",
            a.rows(),
            a.cols(),
            a.cols(),
            a.rows(),
            g_src.dim(),
            g_tgt.dim()
        )));
    }
    let at_gt = a.matrix().transpose() * g_tgt.matrix();
    let adj = g_src.solve_mat(&at_gt);
    Ok(LinearOperator::new(
        adj,
        a.target().to_string(),
        a.source().to_string(),
    ))
}

/// Orthonormal basis of a subspace with respect to an ambient Gram form.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    /// Basis vectors as columns, ambient_dim x rank.
    vectors: DMatrix<f64>,
    gram: GramForm,
}

impl SubspaceBasis {
    /// Wraps a set of columns, verifying Gram-orthonormality.
    pub fn new(vectors: DMatrix<f64>, gram: GramForm) -> Result<Self> {
        if vectors.nrows() != gram.dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis vectors have length {}, ambient Gram has dim {}",
                vectors.nrows(),
                gram.dim()
            )));
        }
        let prod = vectors.transpose() * gram.matrix() * &vectors;
        let k = vectors.ncols();
        let err = (&prod - DMatrix::identity(k, k)).amax();
        if err > BASIS_ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "basis is not Gram-orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(Self { vectors, gram })
    }

    pub fn ambient_dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn gram(&self) -> &GramForm {
        &self.gram
    }

    /// Coordinates of an ambient vector in this basis: B^T G v.
    pub fn coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.vectors.transpose() * (self.gram.matrix() * v)
    }

    /// Coordinates of several ambient vectors (columns).
    pub fn coords_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * (self.gram.matrix() * m)
    }

    /// Ambient vector from coordinates.
    pub fn reconstruct(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.vectors * coords
    }
}

/// Default rank tolerance: 1e-9 times the largest input vector norm.
pub fn default_rank_tol(vectors: &[DVector<f64>], gram: &GramForm) -> f64 {
    let max_norm = vectors.iter().map(|v| gram.norm(v)).fold(0.0_f64, f64::max);
    1e-9 * max_norm
}

/// Gram–Schmidt with respect to an arbitrary SPD form.
///
/// Runs modified Gram–Schmidt with one re-orthogonalization pass; without the
/// second pass the residual of a nearly dependent vector is dominated by
/// cancellation noise and the rank decision becomes unreliable. Vectors whose
/// residual norm falls below `rank_tol` are dropped.
pub fn orthonormalize(
    vectors: &[DVector<f64>],
    gram: &GramForm,
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    if !rank_tol.is_finite() || rank_tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rank tolerance must be positive, got {rank_tol}"
        )));
    }
    let dim = gram.dim();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "vector {idx} has length {}, ambient dim is {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "vector {idx} contains non-finite entries"
            )));
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = gram.inner(b, &w);
                w.axpy(-c, b, 1.0);
            }
        }
        let n = gram.norm(&w);
        if n > rank_tol {
            basis.push(w / n);
        }
    }
    let mut m = DMatrix::zeros(dim, basis.len());
    for (c, b) in basis.iter().enumerate() {
        m.set_column(c, b);
    }
    SubspaceBasis::new(m, gram.clone())
}

/// Extends an orthonormal basis to a full orthonormal basis of the ambient
/// space and returns the complement columns.
pub fn orthonormal_complement(basis: &SubspaceBasis) -> Result<SubspaceBasis> {
    let dim = basis.ambient_dim();
    let gram = basis.gram().clone();
    let mut cols: Vec<DVector<f64>> = (0..basis.rank())
        .map(|c| basis.vectors().column(c).into_owned())
        .collect();
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        cols.push(e);
    }
    let tol = 1e-9 * cols.iter().map(|v| gram.norm(v)).fold(0.0_f64, f64::max);
    let full = orthonormalize(&cols, &gram, tol)?;
    if full.rank() != dim {
        return Err(Error::RankDeficient(format!(
            "orthonormal completion produced rank {} in ambient dim {dim}",
            full.rank()
        )));
    }
    let comp = full
        .vectors()
        .columns(basis.rank(), dim - basis.rank())
        .into_owned();
    SubspaceBasis::new(comp, gram)
}

fn require_symmetric(q: &LinearOperator) -> Result<()> {
    if q.rows() != q.cols() {
        return Err(Error::DimensionMismatch(format!(
            "SPD solve needs a square operator, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let scale = q.matrix().amax().max(f64::MIN_POSITIVE);
    let max_asym = (q.matrix() - q.matrix().transpose()).amax() / scale;
    if max_asym > SYMMETRY_TOL.max(1e-10) {
        return Err(Error::NotSymmetric { max_asym });
    }
    Ok(())
}

/// Solves Q x = b for symmetric positive definite Q via Cholesky.
pub fn spd_solve(q: &LinearOperator, b: &DVector<f64>) -> Result<DVector<f64>> {
    require_symmetric(q)?;
    if b.len() != q.cols() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, operator is {}x{}",
            b.len(),
            q.rows(),
            q.cols()
        )));
    }
    let chol =
        nalgebra::Cholesky::new(q.matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite {
            name: format!("{}->{}", q.source(), q.target()),
        })?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive definite operator.
pub fn spd_inverse(q: &LinearOperator) -> Result<LinearOperator> {
    require_symmetric(q)?;
    let chol =
        nalgebra::Cholesky::new(q.matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite {
            name: format!("{}->{}", q.source(), q.target()),
        })?;
    Ok(LinearOperator::new(
        chol.inverse(),
        q.target().to_string(),
        q.source().to_string(),
    ))
}

/// Operator norm of a G-self-adjoint operator with respect to the G-norm.
///
/// L^T A L^{-T} (with G = L L^T) is symmetric and similar to A, so its
/// spectrum is the spectrum of A; the norm is the largest absolute eigenvalue.
pub fn gram_spectral_norm(a: &LinearOperator, gram: &GramForm) -> Result<f64> {
    if a.rows() != a.cols() || a.rows() != gram.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator {}x{} vs Gram dim {}",
            a.rows(),
            a.cols(),
            gram.dim()
        )));
    }
    let l = gram.cholesky_l();
    let lt_a = l.transpose() * a.matrix();
    // Solve X L^T = Lt_a  <=>  L X^T = Lt_a^T.
    let xt =
        l.solve_lower_triangular(&lt_a.transpose())
            .ok_or_else(|| Error::NotPositiveDefinite {
                name: "Gram Cholesky factor".into(),
            })?;
    let mut s = xt.transpose();
    let st = s.transpose();
    s = (s + st) * 0.5;
    let eig = s.symmetric_eigenvalues();
    Ok(eig.iter().fold(0.0_f64, |m, &e| m.max(e.abs())))
}
