//! Real Lie algebras given by structure constants.
//!
//! Convention: `c(i, j, k)` is the `X_k`-coordinate of `[X_i, X_j]`, and the
//! adjoint matrix of `u` has as its `j`-th column the coordinates of
//! `[u, X_j]`, i.e. `ad_u(v) = [u, v]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Subspace;

pub type Vector = DVector<f64>;

/// Tolerance on antisymmetry and the Jacobi identity, relative to the size
/// of the constants (linear resp. quadratic in them).
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    labels: Vec<String>,
    c: Vec<f64>,
}

/// Validate a cubic array of structure constants, with default labels.
pub fn validate_algebra(c: &[Vec<Vec<f64>>]) -> Result<LieAlgebra> {
    let labels = default_labels(c.len());
    LieAlgebra::new(labels, c)
}

fn default_labels(n: usize) -> Vec<String> {
    const NAMES: [&str; 4] = ["X", "Y", "Z", "T"];
    if n <= 4 {
        NAMES[..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("X{i}")).collect()
    }
}

impl LieAlgebra {
    pub fn new(labels: Vec<String>, c: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(Error::NotCubic);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        let mut flat = vec![0.0; n * n * n];
        for (i, plane) in c.iter().enumerate() {
            if plane.len() != n {
                return Err(Error::NotCubic);
            }
            for (j, row) in plane.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::NotCubic);
                }
                for (k, &v) in row.iter().enumerate() {
                    flat[(i * n + j) * n + k] = v;
                }
            }
        }
        Self::from_flat(labels, n, flat)
    }

    fn from_flat(labels: Vec<String>, n: usize, c: Vec<f64>) -> Result<Self> {
        let g = LieAlgebra { dim: n, labels, c };
        g.check()?;
        Ok(g)
    }

    /// Build from the non-trivial brackets `[X_i, X_j] = Σ coeff·X_k` with
    /// `i < j` or `i > j`; the opposite ordering is filled by antisymmetry.
    pub fn from_brackets(labels: &[&str], brackets: &[(usize, usize, &[(usize, f64)])]) -> Result<Self> {
        let n = labels.len();
        let mut c = vec![0.0; n * n * n];
        for &(i, j, coeffs) in brackets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch { expected: n, got: i.max(j) + 1 });
            }
            for &(k, v) in coeffs {
                if k >= n {
                    return Err(Error::DimensionMismatch { expected: n, got: k + 1 });
                }
                c[(i * n + j) * n + k] += v;
                c[(j * n + i) * n + k] -= v;
            }
        }
        Self::from_flat(labels.iter().map(|s| s.to_string()).collect(), n, c)
    }

    pub fn abelian(n: usize) -> Self {
        LieAlgebra { dim: n, labels: default_labels(n), c: vec![0.0; n * n * n] }
    }

    fn check(&self) -> Result<()> {
        let n = self.dim;
        let scale = self.max_constant().max(1.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = (self.c(i, j, k) + self.c(j, i, k)).abs();
                    if r > STRUCTURE_TOL * scale {
                        return Err(Error::AntisymmetryViolation { i, j, k, residual: r });
                    }
                }
            }
        }
        let (res, (i, j, k)) = self.jacobi_defect();
        if res > STRUCTURE_TOL * scale * scale {
            return Err(Error::JacobiViolation { i, j, k, residual: res });
        }
        Ok(())
    }

    /// Largest Jacobi residual over basis triples, and the triple attaining it.
    pub fn jacobi_defect(&self) -> (f64, (usize, usize, usize)) {
        let n = self.dim;
        let mut worst = (0.0, (0, 0, 0));
        for i in 0..n {
            for j in (i + 1)..n {
                for l in (j + 1)..n {
                    let (a, b, c) = (self.basis_vector(i), self.basis_vector(j), self.basis_vector(l));
                    let t = self.bracket_unchecked(&a, &self.bracket_unchecked(&b, &c))
                        + self.bracket_unchecked(&b, &self.bracket_unchecked(&c, &a))
                        + self.bracket_unchecked(&c, &self.bracket_unchecked(&a, &b));
                    let r = t.amax();
                    if r > worst.0 {
                        worst = (r, (i, j, l));
                    }
                }
            }
        }
        worst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Self {
        assert_eq!(labels.len(), self.dim, "label count must equal dimension");
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn max_constant(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of the bracket viewed as a bilinear map; bounds
    /// `|[u, v]| ≤ norm · |u| · |v|`.
    pub fn structure_norm(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn basis_vector(&self, i: usize) -> Vector {
        let mut v = Vector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    fn bracket_unchecked(&self, u: &Vector, v: &Vector) -> Vector {
        let n = self.dim;
        let mut out = Vector::zeros(n);
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = u[i] * v[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.c(i, j, k);
                }
            }
        }
        out
    }

    pub fn bracket(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        self.check_dim(u)?;
        self.check_dim(v)?;
        Ok(self.bracket_unchecked(u, v))
    }

    pub fn ad_matrix(&self, u: &Vector) -> Result<DMatrix<f64>> {
        self.check_dim(u)?;
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += u[i] * self.c(i, j, k);
                }
            }
        }
        Ok(m)
    }

    /// `ad` of the `i`-th basis vector.
    pub fn ad_basis(&self, i: usize) -> DMatrix<f64> {
        self.ad_matrix(&self.basis_vector(i)).expect("basis vector has the right length")
    }

    /// Span of `[a, b]` over basis vectors of the two subspaces.
    pub fn bracket_span(&self, a: &Subspace, b: &Subspace) -> Subspace {
        let mut cols = Vec::new();
        for i in 0..a.dim() {
            for j in 0..b.dim() {
                cols.push(self.bracket_unchecked(&a.vector(i), &b.vector(j)));
            }
        }
        Subspace::from_vectors(self.dim, &cols, self.structure_norm())
    }

    /// The `k`-th term of the derived series (`k = 0` is the whole algebra).
    pub fn derived_subalgebra(&self, k: usize) -> Subspace {
        let mut s = Subspace::full(self.dim);
        for _ in 0..k {
            if s.dim() == 0 {
                break;
            }
            s = self.bracket_span(&s, &s);
        }
        s
    }

    /// Dimensions of the derived series until it stabilises.
    pub fn derived_series_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.dim];
        let mut s = Subspace::full(self.dim);
        for _ in 0..self.dim {
            s = self.bracket_span(&s, &s);
            let d = s.dim();
            let stalled = d == *dims.last().unwrap();
            dims.push(d);
            if d == 0 || stalled {
                break;
            }
        }
        dims
    }

    pub fn is_solvable(&self) -> bool {
        self.derived_series_dims().last() == Some(&0)
    }

    /// The centre `{z : [z, X_j] = 0 ∀ j}`.
    pub fn center(&self) -> Subspace {
        let n = self.dim;
        // z ↦ ([z, X_0], …, [z, X_{n-1}]) stacked.
        let mut m = DMatrix::zeros(n * n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    m[(j * n + k, i)] = self.c(i, j, k);
                }
            }
        }
        let ns = crate::linalg::null_space(&m, self.structure_norm());
        Subspace::span(&ns, 1.0)
    }

    /// `exp(ad_u)`. Nilpotent adjoints are summed exactly; otherwise a
    /// scaling-and-squaring Padé approximant is used.
    pub fn exp_ad(&self, u: &Vector) -> Result<DMatrix<f64>> {
        let a = self.ad_matrix(u)?;
        Ok(expm(&a))
    }

    /// Algebra in the new basis `X'_a = Σ_i p[(i, a)] X_i`.
    pub fn change_basis(&self, p: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim;
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.nrows() });
        }
        let pinv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::BadParams("change-of-basis matrix is singular".into()))?;
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let w = self.bracket_unchecked(&p.column(a).into_owned(), &p.column(b).into_owned());
                let coords = &pinv * w;
                for k in 0..n {
                    c[(a * n + b) * n + k] = coords[k];
                    c[(b * n + a) * n + k] = -coords[k];
                }
            }
        }
        // Valid by construction; rounding from an ill-conditioned `p` could
        // trip the Jacobi tolerance, so the result is not re-validated.
        Ok(LieAlgebra { dim: n, labels: self.labels.iter().map(|l| format!("{l}'")).collect(), c })
    }

    pub fn to_file(&self) -> AlgebraFile {
        let n = self.dim;
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let coeffs: BTreeMap<String, f64> = (0..n)
                    .filter(|&k| self.c(i, j, k) != 0.0)
                    .map(|k| (k.to_string(), self.c(i, j, k)))
                    .collect();
                if !coeffs.is_empty() {
                    brackets.push(BracketEntry { i, j, coeffs });
                }
            }
        }
        AlgebraFile { dim: n, labels: Some(self.labels.clone()), brackets }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: AlgebraFile = serde_json::from_str(s)?;
        f.into_algebra()
    }
}

/// Matrix exponential. Exact finite series when the matrix is nilpotent in
/// exact arithmetic (some power is identically zero), Padé otherwise.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=n {
        term = &term * a / k as f64;
        if term.iter().all(|&v| v == 0.0) {
            return sum;
        }
        sum += &term;
    }
    a.clone().exp()
}

/// On-disk algebra description; omitted brackets are zero and the opposite
/// ordering of each listed bracket is implied by antisymmetry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub coeffs: BTreeMap<String, f64>,
}

impl AlgebraFile {
    pub fn into_algebra(self) -> Result<LieAlgebra> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        let labels = self.labels.unwrap_or_else(|| default_labels(n));
        if labels.len() != n {
            return Err(Error::Parse(format!("{} labels for dimension {n}", labels.len())));
        }
        let mut c = vec![vec![vec![0.0; n]; n]; n];
        for b in &self.brackets {
            if b.i >= n || b.j >= n {
                return Err(Error::Parse(format!("bracket index ({}, {}) out of range", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(Error::Parse(format!("bracket [{0},{0}] must vanish", b.i)));
            }
            for (key, &v) in &b.coeffs {
                let k: usize = key
                    .parse()
                    .map_err(|_| Error::Parse(format!("coefficient key {key:?} is not an index")))?;
                if k >= n {
                    return Err(Error::Parse(format!("coefficient index {k} out of range")));
                }
                c[b.i][b.j][k] += v;
                c[b.j][b.i][k] -= v;
            }
        }
        LieAlgebra::new(labels, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::family::{Md4Family, Md4Label};
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn zeros(n: usize) -> Vec<Vec<Vec<f64>>> {
        vec![vec![vec![0.0; n]; n]; n]
    }

    #[test]
    fn validation() {
        let mut c = zeros(2);
        c[0][1][1] = 1.0;
        c[1][0][1] = -1.0;
        assert!(validate_algebra(&c).is_ok());
        assert!(validate_algebra(&zeros(4)).is_ok());
        c[1][0][1] = 0.0;
        assert!(matches!(validate_algebra(&c), Err(Error::AntisymmetryViolation { .. })));
        let ragged = vec![vec![vec![0.0; 2]; 2], vec![vec![0.0; 2]; 1]];
        assert!(matches!(validate_algebra(&ragged), Err(Error::NotCubic)));
        assert!(matches!(validate_algebra(&[]), Err(Error::NotCubic)));
        // [X,Y] = Z, [X,Z] = X: the Jacobi sum over (X,Y,Z) is Z.
        let bad = LieAlgebra::from_brackets(&["X", "Y", "Z"], &[(0, 1, &[(2, 1.0)]), (0, 2, &[(0, 1.0)])]);
        assert!(matches!(bad, Err(Error::JacobiViolation { .. })));
    }

    #[test]
    fn brackets() {
        let aff = fixtures::aff_r();
        assert_eq!(aff.bracket(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), v(&[0.0, 1.0]));
        let u = v(&[0.3, -1.2]);
        assert_eq!(aff.bracket(&u, &u).unwrap(), v(&[0.0, 0.0]));
        let rd = fixtures::real_diamond();
        assert_eq!(rd.bracket(&rd.basis_vector(0), &rd.basis_vector(1)).unwrap(), rd.basis_vector(2));
        assert!(matches!(rd.bracket(&v(&[1.0]), &v(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn adjoint_matrices() {
        let (a, b, c, d) = (0.7, -1.3, 2.1, 0.4);
        let u = v(&[a, b, c, d]);
        let g442 = fixtures::real_diamond();
        let want = DMatrix::from_row_slice(4, 4, &[-d, 0.0, 0.0, a, 0.0, d, 0.0, -b, -b, a, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g442.ad_matrix(&u).unwrap(), want);
        let g411 = fixtures::md4_table(&Md4Label::plain(Md4Family::G411)).unwrap();
        let want = DMatrix::from_row_slice(4, 4, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, d, 0.0, 0.0, -a, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g411.ad_matrix(&u).unwrap(), want);
        assert_eq!(LieAlgebra::abelian(4).ad_matrix(&u).unwrap(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn derived_series() {
        let affc = fixtures::aff_c();
        let g1 = affc.derived_subalgebra(1);
        assert_eq!(g1.dim(), 2);
        assert!(g1.residual(&affc.basis_vector(2)) < 1e-12 && g1.residual(&affc.basis_vector(3)) < 1e-12);
        assert_eq!(affc.derived_subalgebra(0).dim(), 4);
        let rd = fixtures::real_diamond();
        let g2 = rd.derived_subalgebra(2);
        assert_eq!(g2.dim(), 1);
        assert!(g2.residual(&rd.basis_vector(2)) < 1e-12);
        assert_eq!(rd.derived_series_dims(), vec![4, 3, 1, 0]);
        assert!(rd.is_solvable());
        assert_eq!(rd.center().dim(), 1);
        assert_eq!(fixtures::heisenberg().center().dim(), 1);
    }

    #[test]
    fn exponentials() {
        let (c, d) = (1.7, 0.9);
        let g412 = fixtures::md4_table(&Md4Label::plain(Md4Family::G412)).unwrap();
        let e = g412.exp_ad(&v(&[0.2, -0.5, c, d])).unwrap();
        let series: f64 = (1..40).map(|n| d.powi(n - 1) / (1..=n).map(f64::from).product::<f64>()).sum();
        assert!((e[(2, 2)] - d.exp()).abs() < 1e-12);
        assert!((e[(2, 3)] + c * series).abs() < 1e-12);
        assert_eq!(g412.exp_ad(&Vector::zeros(4)).unwrap(), DMatrix::identity(4, 4));
        let h3 = fixtures::heisenberg();
        let x = h3.basis_vector(0);
        assert_eq!(h3.exp_ad(&x).unwrap(), DMatrix::identity(3, 3) + h3.ad_matrix(&x).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let g = fixtures::md4_table(&fixtures::default_label(Md4Family::G434)).unwrap();
        let text = serde_json::to_string(&g.to_file()).unwrap();
        assert_eq!(LieAlgebra::from_json_str(&text).unwrap(), g);
        assert!(matches!(LieAlgebra::from_json_str("{\"dim\": 2, \"brackets\": [{\"i\": 0, \"j\": 0, \"coeffs\": {}}]}"), Err(Error::Parse(_))));
        assert!(matches!(LieAlgebra::from_json_str("{\"dim\": 2, \"brackets\": [{\"i\": 0, \"j\": 1, \"coeffs\": {\"5\": 1}}]}"), Err(Error::Parse(_))));
        assert!(matches!(LieAlgebra::from_json_str("[1,2"), Err(Error::Parse(_))));
    }

    fn family_index() -> impl Strategy<Value = usize> {
        0usize..13
    }

    fn vec4() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, 4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn jacobi_survives_basis_change(k in family_index(), p in prop::collection::vec(-1.0f64..1.0, 16)) {
            let (_, g) = fixtures::md4_fixtures().swap_remove(k);
            let m = DMatrix::from_row_slice(4, 4, &p) + DMatrix::identity(4, 4) * 2.5;
            let h = g.change_basis(&m).unwrap();
            let scale = h.max_constant().max(1.0);
            prop_assert!(h.jacobi_defect().0 < 1e-10 * scale * scale);
        }

        #[test]
        fn exp_ad_inverse(k in family_index(), u in vec4()) {
            let (_, g) = fixtures::md4_fixtures().swap_remove(k);
            let u = Vector::from_vec(u);
            let prod = g.exp_ad(&u).unwrap() * g.exp_ad(&(-&u)).unwrap();
            prop_assert!((prod - DMatrix::identity(4, 4)).amax() < 1e-10);
        }

        #[test]
        fn bracket_bilinear(k in family_index(), a in vec4(), b in vec4(), c in vec4(), s in -3.0f64..3.0) {
            let (_, g) = fixtures::md4_fixtures().swap_remove(k);
            let (a, b, c) = (Vector::from_vec(a), Vector::from_vec(b), Vector::from_vec(c));
            let lhs = g.bracket(&(&a * s + &b), &c).unwrap();
            let rhs = g.bracket(&a, &c).unwrap() * s + g.bracket(&b, &c).unwrap();
            prop_assert!((lhs - rhs).amax() < 1e-12);
            let anti = g.bracket(&a, &b).unwrap() + g.bracket(&b, &a).unwrap();
            prop_assert!(anti.amax() < 1e-12);
            prop_assert!((g.ad_matrix(&a).unwrap() * &b - g.bracket(&a, &b).unwrap()).amax() < 1e-12);
        }
    }
}
