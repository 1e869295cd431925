//! Subspace arithmetic on finite-dimensional complex Hilbert spaces.
//!
//! Subspaces are carried as orthonormal column bases. Rank decisions use a
//! drop threshold relative to the input scale with an absolute floor:
//! a candidate vector is discarded when its residual after projection is at
//! most `tol * max(scale, 1)`.
//!
//! For a bounded Hermitian `A` on a finite-dimensional space, the closure of
//! `{f(A) v}` over smooth `f` equals the span of `{A^k v : k >= 0}`, because
//! every `f(A)` coincides with the interpolating polynomial of `f` on the
//! spectrum of `A`. The orbit of a seed is therefore both its Krylov closure
//! and the sum of its projections onto the eigenspaces of `A`; the second
//! form is the one used in production, the first is kept as a cross-check.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, eigh, op_norm, singular_values, CMatrix, CVector};

/// Orthonormal basis of a subspace of `C^n`, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: CMatrix,
    tol: f64,
}

impl SubspaceBasis {
    pub fn empty(ambient_dim: usize, tol: f64) -> Self {
        Self {
            basis: CMatrix::zeros(ambient_dim, 0),
            tol,
        }
    }

    /// Span of the standard basis vectors `e_start .. e_{start+len}`.
    pub fn coordinate(ambient_dim: usize, start: usize, len: usize, tol: f64) -> Self {
        assert!(start + len <= ambient_dim, "coordinate block out of range");
        let mut basis = CMatrix::zeros(ambient_dim, len);
        for j in 0..len {
            basis[(start + j, j)] = 1.0.into();
        }
        Self { basis, tol }
    }

    pub fn full(ambient_dim: usize, tol: f64) -> Self {
        Self::coordinate(ambient_dim, 0, ambient_dim, tol)
    }

    /// Wraps columns that are already orthonormal, checking them against `tol`.
    pub fn from_orthonormal_columns(basis: CMatrix, tol: f64) -> Result<Self> {
        let gram = basis.ad_mul(&basis);
        let k = gram.nrows();
        let defect = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| {
                let delta = if i == j { 1.0 } else { 0.0 };
                (gram[(i, j)] - delta).norm()
            })
            .fold(0.0, f64::max);
        if defect > tol.max(f64::EPSILON * 64.0) {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal: max |<vi,vj> - dij| = {defect:e}"
            )));
        }
        if basis.ncols() > basis.nrows() {
            return Err(Error::InvalidArgument(
                "more basis vectors than ambient dimension".into(),
            ));
        }
        Ok(Self { basis, tol })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Basis vectors as the columns of an `ambient_dim x dim` matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.basis
    }

    pub fn vectors(&self) -> Vec<CVector> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &CVector) -> CVector {
        &self.basis * self.basis.ad_mul(v)
    }

    /// Places this subspace of `C^m` into `C^total` starting at coordinate `offset`.
    pub fn embed(&self, offset: usize, total: usize) -> Self {
        assert!(offset + self.ambient_dim() <= total, "embedding out of range");
        let mut basis = CMatrix::zeros(total, self.dim());
        basis
            .view_mut((offset, 0), (self.ambient_dim(), self.dim()))
            .copy_from(&self.basis);
        Self {
            basis,
            tol: self.tol,
        }
    }

    /// Restricts to coordinates `offset .. offset+len` and re-orthonormalizes.
    /// Returns the basis and the largest norm found outside the kept block.
    pub fn restrict(&self, offset: usize, len: usize) -> Result<(Self, f64)> {
        let n = self.ambient_dim();
        let mut leak = 0.0f64;
        for col in self.basis.column_iter() {
            let outside: f64 = col
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < offset || *i >= offset + len)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            leak = leak.max(outside.sqrt());
        }
        debug_assert!(offset + len <= n);
        let kept: Vec<CVector> = self
            .basis
            .column_iter()
            .map(|c| c.rows(offset, len).into_owned())
            .collect();
        let restricted = orthonormalize(len, &kept, self.tol)?;
        Ok((restricted, leak))
    }

    /// Applies `m` to each basis vector and returns `m * Q`.
    pub fn image_under(&self, m: &CMatrix) -> CMatrix {
        m * &self.basis
    }
}

/// Incremental classical Gram-Schmidt with one full reorthogonalization pass.
struct Orthonormalizer {
    basis: CMatrix,
    len: usize,
}

impl Orthonormalizer {
    fn new(ambient_dim: usize) -> Self {
        Self {
            basis: CMatrix::zeros(ambient_dim, ambient_dim),
            len: 0,
        }
    }

    fn with_basis(b: &SubspaceBasis) -> Self {
        let mut s = Self::new(b.ambient_dim());
        s.basis.columns_mut(0, b.dim()).copy_from(b.matrix());
        s.len = b.dim();
        s
    }

    /// Appends the normalized residual of `v` when it exceeds `threshold`.
    fn push(&mut self, v: &CVector, threshold: f64) -> bool {
        if self.len == self.basis.nrows() {
            return false;
        }
        let mut w = v.clone();
        if self.len > 0 {
            let q = self.basis.columns(0, self.len);
            for _ in 0..2 {
                let coeffs = q.ad_mul(&w);
                w -= &q * coeffs;
            }
        }
        let norm = w.norm();
        if norm <= threshold || norm == 0.0 {
            return false;
        }
        w.unscale_mut(norm);
        self.basis.set_column(self.len, &w);
        self.len += 1;
        true
    }

    fn column(&self, j: usize) -> CVector {
        self.basis.column(j).into_owned()
    }

    fn finish(self, tol: f64) -> SubspaceBasis {
        SubspaceBasis {
            basis: self.basis.columns(0, self.len).into_owned(),
            tol,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// Orthonormal basis of the span of `vectors`, processed in input order.
///
/// A vector is dropped when its residual against the already accepted ones is
/// at most `tol * max(max input norm, 1)`.
pub fn orthonormalize(ambient_dim: usize, vectors: &[CVector], tol: f64) -> Result<SubspaceBasis> {
    check_tol(tol)?;
    for v in vectors {
        if v.len() != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: v.len(),
                context: "orthonormalize input vector",
            });
        }
    }
    let scale = vectors.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mut gs = Orthonormalizer::new(ambient_dim);
    for v in vectors {
        gs.push(v, tol * scale);
    }
    Ok(gs.finish(tol))
}

/// Orthonormal basis of the column space of `m`: left singular vectors whose
/// singular value exceeds `tol` times the largest one.
pub fn range_basis(m: &CMatrix, tol: f64) -> Result<SubspaceBasis> {
    check_tol(tol)?;
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return Ok(SubspaceBasis::empty(n, tol));
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    if smax == 0.0 {
        return Ok(SubspaceBasis::empty(n, tol));
    }
    let cols: Vec<CVector> = order
        .iter()
        .take_while(|&&i| svd.singular_values[i] > tol * smax)
        .map(|&i| u.column(i).into_owned())
        .collect();
    // Re-run through the orthonormalizer so the basis is orthonormal to roundoff.
    orthonormalize(n, &cols, tol)
}

/// Eigen-decomposition of a Hermitian operator, grouped into eigenvalue
/// clusters, for computing many orbits under the same operator.
///
/// The orbit of `S` is `sum_lambda P_lambda S` over the spectral projectors
/// `P_lambda`: every polynomial in `A` acts on an eigenspace as a scalar, and
/// for each eigenvalue there is a polynomial equal to 1 there and 0 at the
/// others. Eigenvalues whose consecutive gap is at most `tol * max(||A||, 1)`
/// form one cluster; within a cluster the orbit keeps the range of the seed's
/// eigen-coordinates, cut at singular value `tol`.
#[derive(Debug, Clone)]
pub struct OrbitSolver {
    vectors: CMatrix,
    /// Half-open index ranges of the eigenvalue clusters.
    clusters: Vec<(usize, usize)>,
    tol: f64,
}

impl OrbitSolver {
    pub fn new(a: &CMatrix, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        check_hermitian(a, tol, "orbit operator")?;
        let eig = eigh(a);
        let scale = eig.values.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let gap = tol * scale;
        let mut clusters = Vec::new();
        let mut start = 0;
        for i in 1..=eig.values.len() {
            if i == eig.values.len() || eig.values[i] - eig.values[i - 1] > gap {
                clusters.push((start, i));
                start = i;
            }
        }
        Ok(Self {
            vectors: eig.vectors,
            clusters,
            tol,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn orbit(&self, seed: &SubspaceBasis) -> Result<SubspaceBasis> {
        let n = self.ambient_dim();
        if seed.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: seed.ambient_dim(),
                context: "orbit seed ambient dimension",
            });
        }
        if seed.is_zero() {
            return Ok(SubspaceBasis::empty(n, self.tol));
        }
        let coords = self.vectors.ad_mul(seed.matrix());
        let mut cols: Vec<CVector> = Vec::new();
        for &(lo, hi) in &self.clusters {
            let block = coords.rows(lo, hi - lo).into_owned();
            let svd = SVD::new(block, true, false);
            let u = svd.u.expect("left singular vectors requested");
            let eigvecs = self.vectors.columns(lo, hi - lo);
            for (j, &s) in svd.singular_values.iter().enumerate() {
                if s > self.tol {
                    cols.push(&eigvecs * u.column(j));
                }
            }
        }
        // Columns from different clusters are orthogonal eigen-combinations;
        // the pass below only cleans up roundoff.
        let mut gs = Orthonormalizer::new(n);
        for v in &cols {
            gs.push(v, self.tol);
        }
        Ok(gs.finish(self.tol))
    }
}

/// Smallest `a`-invariant subspace containing `span(seed)`, via spectral
/// projection (see [`OrbitSolver`]).
///
/// The returned projector `P` satisfies `||(I - P) a P|| <= c tol max(||a||, 1)`
/// with `c = `[`crate::linalg::CERT_FACTOR`]: each retained direction lies in
/// a cluster whose eigenvalue spread is a few multiples of `tol * ||a||`.
pub fn orbit(a: &CMatrix, seed: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    if seed.ambient_dim() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: seed.ambient_dim(),
            context: "orbit seed ambient dimension",
        });
    }
    OrbitSolver::new(a, tol)?.orbit(seed)
}

/// Orbit by iterated block closure: the basis is extended by `a` applied to
/// the vectors added in the previous pass until a pass adds nothing.
///
/// This is the polynomial (Krylov) definition of the orbit and serves as an
/// independent cross-check of [`orbit`] on small, well-separated problems.
/// On large operators with clustered spectra it is unreliable: accepting a
/// tiny legitimate residual and normalizing it amplifies roundoff in the
/// directions outside the orbit, and the closure can then grow to the whole
/// space.
pub fn krylov_closure(a: &CMatrix, seed: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    check_tol(tol)?;
    let n = a.nrows();
    if seed.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: seed.ambient_dim(),
            context: "orbit seed ambient dimension",
        });
    }
    check_hermitian(a, tol, "orbit operator")?;

    let mut gs = Orthonormalizer::new(n);
    for v in seed.vectors() {
        gs.push(&v, tol);
    }
    // Applying `a` to the newest vectors only spans the same space as applying
    // it to the whole basis, since older images were already absorbed.
    let mut scale = 1.0f64;
    let mut frontier = 0..gs.len;
    while !frontier.is_empty() {
        let images: Vec<CVector> = frontier.clone().map(|j| a * gs.column(j)).collect();
        scale = images.iter().map(|v| v.norm()).fold(scale, f64::max);
        let start = gs.len;
        for img in &images {
            gs.push(img, tol * scale);
        }
        frontier = start..gs.len;
    }
    Ok(gs.finish(tol))
}

/// Orthogonal complement of `part` inside `whole`.
///
/// `part` must lie in `whole` up to `CERT_FACTOR * tol` (operator norm of the
/// out-of-subspace residual). The result has dimension exactly
/// `dim(whole) - dim(part)` and lies in `span(whole)` by construction.
pub fn complement(whole: &SubspaceBasis, part: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    check_tol(tol)?;
    if whole.ambient_dim() != part.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: whole.ambient_dim(),
            found: part.ambient_dim(),
            context: "complement ambient dimensions",
        });
    }
    let residual = containment_residual(whole, part)?;
    let allowed = crate::linalg::CERT_FACTOR * tol;
    if residual > allowed || part.dim() > whole.dim() {
        return Err(Error::NotContained { residual, allowed });
    }
    let k = whole.dim() - part.dim();
    if k == 0 {
        return Ok(SubspaceBasis::empty(whole.ambient_dim(), tol));
    }
    if part.is_zero() {
        return Ok(SubspaceBasis {
            basis: whole.basis.clone(),
            tol,
        });
    }
    // Coordinates of `part` inside `whole`; the complement is spanned by the
    // eigenvectors of C C^H with the k smallest eigenvalues.
    let c = whole.basis.ad_mul(&part.basis);
    let gram = &c * c.adjoint();
    let eig = eigh(&gram);
    let coords = eig.vectors.columns(0, k).into_owned();
    let basis = &whole.basis * coords;
    Ok(SubspaceBasis { basis, tol })
}

/// `||(I - P_outer) Q_inner||_2`: how far `inner` sticks out of `outer`.
pub fn containment_residual(outer: &SubspaceBasis, inner: &SubspaceBasis) -> Result<f64> {
    if outer.ambient_dim() != inner.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: outer.ambient_dim(),
            found: inner.ambient_dim(),
            context: "containment ambient dimensions",
        });
    }
    if inner.is_zero() {
        return Ok(0.0);
    }
    let resid = &inner.basis - &outer.basis * outer.basis.ad_mul(&inner.basis);
    Ok(op_norm(&resid))
}

/// Operator-norm distance `||P_a - P_b||_2` between orthogonal projectors.
///
/// Uses `||P_a - P_b|| = max(||(I - P_b) P_a||, ||(I - P_a) P_b||)`, so it
/// equals the sine of the largest principal angle for equal dimensions and 1
/// when the dimensions differ.
pub fn projector_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    let ab = containment_residual(b, a)?;
    let ba = containment_residual(a, b)?;
    Ok(ab.max(ba).min(1.0))
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> Result<usize> {
    check_tol(tol)?;
    let s = singular_values(m);
    let Some(&smax) = s.first() else {
        return Ok(0);
    };
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// `||(I - P) a P||_2` for the projector `P` onto `basis`.
pub fn invariance_residual(a: &CMatrix, basis: &SubspaceBasis) -> f64 {
    if basis.is_zero() {
        return 0.0;
    }
    let img = a * &basis.basis;
    let resid = &img - &basis.basis * basis.basis.ad_mul(&img);
    op_norm(&resid)
}

/// Orthonormal basis of `span(a) + span(b)`.
pub fn sum(a: &SubspaceBasis, b: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            found: b.ambient_dim(),
            context: "subspace sum ambient dimensions",
        });
    }
    let mut gs = Orthonormalizer::with_basis(a);
    for v in b.vectors() {
        gs.push(&v, tol);
    }
    Ok(gs.finish(tol))
}
