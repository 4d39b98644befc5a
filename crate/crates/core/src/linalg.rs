//! Small dense linear-algebra helpers shared by the Lie-theoretic modules.
//!
//! All rank decisions go through [`rank_tolerance`]: a singular value counts
//! as zero when it is below `n · max(σ_max, reference) · 1e-10`, where `n` is
//! the larger matrix extent. `reference` lets callers supply a natural scale
//! (e.g. the size of the structure constants) so that a matrix consisting of
//! pure rounding noise is not mistaken for a full-rank one.

use nalgebra::{Complex, DMatrix, DVector};

/// Relative factor in the rank tolerance.
pub const RANK_RTOL: f64 = 1e-10;

pub fn rank_tolerance(m: &DMatrix<f64>, sigma_max: f64, reference: f64) -> f64 {
    let n = m.nrows().max(m.ncols()).max(1) as f64;
    n * sigma_max.max(reference) * RANK_RTOL
}

pub(crate) fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full singular value decomposition `m = U diag(s) Vᵀ` with `s` sorted
/// largest first; `U` is `rows × rows` and `V` is `cols × cols`.
///
/// Computed with faer: nalgebra's SVD can return singular vectors that do
/// not reconstruct rank-deficient inputs.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Svd { u: DMatrix::identity(r, r), s: Vec::new(), v: DMatrix::identity(c, c) };
    }
    let d = to_faer(m).svd();
    let (fu, fs, fv) = (d.u(), d.s_diagonal(), d.v());
    let k = r.min(c);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs.read(b).total_cmp(&fs.read(a)));
    let perm = |n: usize, i: usize| if i < k { order[i] } else { i.min(n - 1) };
    let u = DMatrix::from_fn(r, r, |i, j| fu.read(i, perm(r, j)));
    let v = DMatrix::from_fn(c, c, |i, j| fv.read(i, perm(c, j)));
    Svd { u, s: order.iter().map(|&i| fs.read(i)).collect(), v }
}

/// Singular values, largest first. Empty matrices give an empty vector.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = to_faer(m).singular_values();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn numerical_rank(m: &DMatrix<f64>, reference: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(m, smax, reference);
    s.iter().filter(|&&x| x > tol).count()
}

fn rank_of(m: &DMatrix<f64>, s: &[f64], reference: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(m, smax, reference);
    s.iter().filter(|&&x| x > tol).count()
}

/// Orthonormal basis of the column space (as columns).
pub fn column_basis(m: &DMatrix<f64>, reference: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let d = svd(m);
    let r = rank_of(m, &d.s, reference);
    d.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the null space (as columns).
pub fn null_space(m: &DMatrix<f64>, reference: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let d = svd(m);
    let r = rank_of(m, &d.s, reference);
    d.v.columns(r, cols - r).into_owned()
}

/// Minimum-norm least-squares solution of `m x = b`, discarding singular
/// values below the rank tolerance.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>, reference: f64) -> DVector<f64> {
    let d = svd(m);
    let r = rank_of(m, &d.s, reference);
    let mut x = DVector::zeros(m.ncols());
    for i in 0..r {
        let coeff = d.u.column(i).dot(b) / d.s[i];
        x += d.v.column(i) * coeff;
    }
    x
}

/// Distance from `v` to the span of the orthonormal columns of `q`.
pub fn projection_residual(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if q.ncols() == 0 {
        return v.norm();
    }
    let coeffs = q.transpose() * v;
    (v - q * coeffs).norm()
}

/// A linear subspace of ℝⁿ stored through an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace { basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace { basis: DMatrix::identity(ambient, ambient) }
    }

    /// Span of the columns of `m`, with the shared rank rule.
    pub fn span(m: &DMatrix<f64>, reference: f64) -> Self {
        Subspace { basis: column_basis(m, reference) }
    }

    pub fn from_vectors(ambient: usize, vs: &[DVector<f64>], reference: f64) -> Self {
        if vs.is_empty() {
            return Subspace::zero(ambient);
        }
        let m = DMatrix::from_columns(vs);
        Subspace::span(&m, reference)
    }

    /// Orthonormal basis, one vector per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.basis.column(i).into_owned()
    }

    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        projection_residual(&self.basis, v)
    }

    /// Largest projection residual of `other`'s basis vectors onto `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        (0..other.dim())
            .map(|i| self.residual(&other.vector(i)))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.containment_residual(other) <= tol
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Subspace {
        let n = self.ambient();
        if self.dim() == 0 {
            return Subspace::full(n);
        }
        let ns = null_space(&self.basis.transpose(), 1.0);
        Subspace { basis: ns }
    }

    /// Annihilator in the dual, expressed in dual coordinates. With the
    /// standard pairing this is the orthogonal complement.
    pub fn annihilator(&self) -> Subspace {
        self.complement()
    }
}

/// Complex eigenvalues of a square matrix (unordered).
///
/// Goes through faer: its Schur iteration terminates on the scalar and
/// highly defective matrices met in classification.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let fm = faer::Mat::<f64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    fm.eigenvalues::<faer::complex_native::c64>().into_iter().map(|z| Complex::new(z.re, z.im)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_rank_deficient() {
        let m = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0]);
        let d = svd(&m);
        let mut s = DMatrix::zeros(3, 4);
        for (i, &x) in d.s.iter().enumerate() {
            s[(i, i)] = x;
        }
        assert!((&d.u * s * d.v.transpose() - &m).amax() < 1e-12);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(numerical_rank(&m, 1.0), 2);
        let ns = null_space(&m, 1.0);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * ns).amax() < 1e-12);
        assert_eq!(column_basis(&m, 1.0).ncols(), 2);
    }

    #[test]
    fn rank_reference_suppresses_noise() {
        let noise = DMatrix::from_element(2, 2, 1e-17);
        assert_eq!(numerical_rank(&noise, 0.0), 1);
        assert_eq!(numerical_rank(&noise, 1.0), 0);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1.0), 0);
        assert!(singular_values(&DMatrix::zeros(0, 3)).is_empty());
    }

    #[test]
    fn min_norm_solution() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let x = min_norm_solve(&m, &DVector::from_row_slice(&[2.0, -1.0]), 1.0);
        assert_eq!(x, DVector::from_row_slice(&[2.0, -1.0, 0.0]));
    }

    #[test]
    fn subspaces() {
        let s = Subspace::from_vectors(3, &[DVector::from_row_slice(&[1.0, 1.0, 0.0]), DVector::from_row_slice(&[2.0, 2.0, 0.0])], 1.0);
        assert_eq!(s.dim(), 1);
        let c = s.complement();
        assert_eq!(c.dim(), 2);
        assert!(s.containment_residual(&c) > 0.5);
        assert!(Subspace::full(3).contains(&c, 1e-12));
        assert_eq!(Subspace::zero(3).complement().dim(), 3);
        assert_eq!(s.annihilator().dim(), 2);
        assert!((projection_residual(s.basis(), &DVector::from_row_slice(&[1.0, -1.0, 0.0])) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_rotation_and_jordan_block() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&r);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - Complex::new(0.0, -1.0)).norm() < 1e-12 && (ev[1] - Complex::new(0.0, 1.0)).norm() < 1e-12);
        let j = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0]);
        assert!(eigenvalues(&j).iter().all(|z| (z - Complex::new(2.0, 0.0)).norm() < 1e-4));
    }
}
