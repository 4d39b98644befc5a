//! MD̄ membership, MD̄ and MD₄ classification, exponentiality.
//!
//! Classification is basis-free: everything is read off from the derived
//! series, from the restriction of `ad` to the derived ideal, and from the
//! real Jordan type of that restriction.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coadjoint::{orbit_dimension, Functional};
use crate::error::{Error, Result};
use crate::family::{canonical_triple, Md4Family, Md4Label};
use crate::fixtures;
use crate::lie::{LieAlgebra, Vector};
use crate::linalg::{self, Subspace};

/// Seed of the internal random sampling (deterministic results).
const SAMPLE_SEED: u64 = 0x6d64_6261_72;

/// Containment tolerance for subspace checks, relative to the bracket scale.
const SUBSPACE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MdBarTag {
    Abelian,
    AffR,
    AffC,
    NotMdBar,
}

#[derive(Clone, Debug, Serialize)]
pub struct MdBarLabel {
    pub tag: MdBarTag,
    /// For aff ℂ: basis `(X₁, X₂, Y₁, Y₂)` (as columns, in the input basis)
    /// realising the normal form.
    #[serde(skip)]
    pub normal_basis: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionCheck {
    pub holds: bool,
    /// A direction violating the criterion, when one was found.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
}

fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// The criterion `[X, g] = g¹` for all non-zero `X`, on basis directions
/// and 200 random directions.
pub fn is_md_bar(g: &LieAlgebra) -> CriterionCheck {
    let n = g.dim();
    let g1 = g.derived_subalgebra(1);
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let candidates: Vec<Vector> =
        (0..n).map(|i| g.basis_vector(i)).chain((0..200).map(|_| random_vector(&mut rng, n))).collect();
    let samples = candidates.len();
    for x in candidates {
        let ad = g.ad_matrix(&x).expect("dimension matches");
        let image = Subspace::span(&ad, g.structure_norm() * x.norm());
        let inside = g1.containment_residual(&image) <= SUBSPACE_TOL * (1.0 + g.structure_norm());
        if image.dim() != g1.dim() || !inside {
            return CriterionCheck { holds: false, witness: Some(x.iter().copied().collect()), samples };
        }
    }
    CriterionCheck { holds: true, witness: None, samples }
}

pub fn classify_md_bar(g: &LieAlgebra) -> MdBarLabel {
    let not = MdBarLabel { tag: MdBarTag::NotMdBar, normal_basis: None };
    let g1 = g.derived_subalgebra(1);
    if g1.dim() == 0 {
        return MdBarLabel { tag: MdBarTag::Abelian, normal_basis: None };
    }
    if !is_md_bar(g).holds {
        return not;
    }
    match (g.dim(), g1.dim()) {
        (2, 1) => MdBarLabel { tag: MdBarTag::AffR, normal_basis: None },
        (4, 2) => match aff_c_reduction(g, &g1) {
            Some(b) => MdBarLabel { tag: MdBarTag::AffC, normal_basis: Some(b) },
            None => not,
        },
        _ => not,
    }
}

/// `Qᵀ ad_U Q`: the restriction of `ad_U` to an invariant subspace with
/// orthonormal basis `Q`.
fn restrict(g: &LieAlgebra, u: &Vector, q: &DMatrix<f64>) -> DMatrix<f64> {
    q.transpose() * g.ad_matrix(u).expect("dimension matches") * q
}

/// Recover `X₁, X₂, Y₁, Y₂` with `ad¹_{X₁} = Id`, `ad¹_{X₂} = J`, `J² = −Id`,
/// and verify that they reproduce the aff ℂ table.
fn aff_c_reduction(g: &LieAlgebra, g1: &Subspace) -> Option<DMatrix<f64>> {
    let q = g1.basis();
    let scale = g.structure_norm();
    if g.bracket(&g1.vector(0), &g1.vector(1)).ok()?.norm() > SUBSPACE_TOL * (1.0 + scale) {
        return None;
    }
    let ms: Vec<DMatrix<f64>> = (0..4).map(|i| restrict(g, &g.basis_vector(i), q)).collect();
    // Linear map U ↦ vec(ad¹_U), as a 4×4 matrix.
    let phi = DMatrix::from_fn(4, 4, |r, c| ms[c][(r % 2, r / 2)]);
    let target = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
    let sol = linalg::min_norm_solve(&phi, &target, scale);
    if (&phi * &sol - &target).norm() > 1e-8 {
        return None;
    }
    let x1 = sol;
    // Rotation part: the basis direction whose restriction is furthest from scalar.
    let (i, traceless) = (0..4)
        .map(|i| {
            let half_tr = ms[i].trace() / 2.0;
            (i, &ms[i] - DMatrix::identity(2, 2) * half_tr)
        })
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    let det = traceless.determinant();
    if det <= 1e-10 * traceless.norm_squared() || det <= 0.0 {
        return None;
    }
    let half_tr = ms[i].trace() / 2.0;
    let x2p = (g.basis_vector(i) - &x1 * half_tr) / det.sqrt();
    let x2 = &x2p - g.bracket(&x1, &x2p).ok()?;
    let y1 = g1.vector(0);
    let y2 = g.bracket(&x2, &y1).ok()?;
    let basis = DMatrix::from_columns(&[x1, x2, y1, y2]);
    let h = g.change_basis(&basis).ok()?;
    let reference = fixtures::aff_c();
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for k in 0..4 {
                worst = worst.max((h.c(a, b, k) - reference.c(a, b, k)).abs());
            }
        }
    }
    (worst < 1e-7).then_some(basis)
}

/// Real Jordan data of a small real matrix.
#[derive(Clone, Debug, Serialize)]
pub struct JordanBlock {
    /// Real part / eigenvalue for real blocks.
    pub re: f64,
    /// Imaginary part (> 0) for complex-conjugate pairs, 0 for real blocks.
    pub im: f64,
    /// Algebraic multiplicity (of each member of a conjugate pair).
    pub multiplicity: usize,
    /// Sizes of the Jordan blocks in this cluster.
    pub jordan_sizes: Vec<usize>,
}

/// Relative radius within which computed eigenvalues are treated as one
/// cluster before the cluster is confirmed by a rank test. Defective
/// eigenvalues scatter like `ε^{1/m}`, so this has to be loose.
const CLUSTER_RADIUS: f64 = 1e-2;

pub fn real_jordan(a: &DMatrix<f64>) -> Result<Vec<JordanBlock>> {
    let n = a.nrows();
    let eig: Vec<Complex<f64>> = linalg::eigenvalues(a);
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let anorm = a.norm();
    if rho == 0.0 && anorm == 0.0 {
        return Ok(vec![JordanBlock { re: 0.0, im: 0.0, multiplicity: n, jordan_sizes: vec![1; n] }]);
    }
    let radius = CLUSTER_RADIUS * rho.max(1e-300);
    // Single-linkage clustering.
    let mut cluster: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (eig[i] - eig[j]).norm() <= radius {
                let (ci, cj) = (cluster[i], cluster[j]);
                for c in cluster.iter_mut() {
                    if *c == ci {
                        *c = cj;
                    }
                }
            }
        }
    }
    let mut ids: Vec<usize> = cluster.clone();
    ids.sort();
    ids.dedup();
    let mut blocks = Vec::new();
    let ident = DMatrix::<f64>::identity(n, n);
    for id in ids {
        let members: Vec<Complex<f64>> = (0..n).filter(|&i| cluster[i] == id).map(|i| eig[i]).collect();
        let m = members.len();
        let mean = members.iter().sum::<Complex<f64>>() / m as f64;
        if mean.im.abs() <= radius {
            let mu = mean.re;
            let shifted = a - &ident * mu;
            // Ranks of powers of (A − μ) determine the block sizes.
            let mut ranks = vec![n];
            let mut pw = ident.clone();
            for _ in 0..m {
                pw = &pw * &shifted;
                ranks.push(linalg::numerical_rank(&pw, anorm.powi(ranks.len() as i32)));
            }
            if ranks[m] != n - m {
                return Err(Error::DegenerateJordan {
                    reason: format!(
                        "eigenvalue cluster at {mu:.6e} (size {m}) not confirmed: rank (A-μ)^{m} = {} ≠ {}",
                        ranks[m],
                        n - m
                    ),
                });
            }
            // Number of blocks of size ≥ k is r_{k-1} − r_k.
            let ge: Vec<usize> = (1..=m).map(|k| ranks[k - 1] - ranks[k]).collect();
            let mut sizes = Vec::new();
            for k in 1..=m {
                let next = if k < m { ge[k] } else { 0 };
                for _ in 0..(ge[k - 1] - next) {
                    sizes.push(k);
                }
            }
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            blocks.push(JordanBlock { re: mu, im: 0.0, multiplicity: m, jordan_sizes: sizes });
        } else if mean.im > 0.0 {
            let (re, im) = (mean.re, mean.im);
            let quad = a * a - a * (2.0 * re) + &ident * (re * re + im * im);
            let r = linalg::numerical_rank(&quad, anorm * anorm);
            if r != n - 2 * m {
                return Err(Error::DegenerateJordan {
                    reason: format!("complex pair {re:.6e} ± {im:.6e}i not confirmed (rank {r})"),
                });
            }
            if m != 1 {
                return Err(Error::DegenerateJordan { reason: "repeated complex eigenvalues".into() });
            }
            blocks.push(JordanBlock { re, im, multiplicity: 1, jordan_sizes: vec![1] });
        }
    }
    Ok(blocks)
}

#[derive(Clone, Debug, Serialize)]
pub struct Md4Classification {
    pub label: Md4Label,
    /// Dimensions of the derived series.
    pub derived_dims: Vec<usize>,
    /// Jordan data of the restricted `ad` that determined the family.
    pub eigen_data: Vec<JordanBlock>,
    /// Orbit dimensions seen by the MD spot check.
    pub orbit_dims_seen: Vec<usize>,
    pub notes: Vec<String>,
}

fn unclassified(derived_dims: Vec<usize>, seen: Vec<usize>, note: String) -> Md4Classification {
    Md4Classification {
        label: Md4Label::plain(Md4Family::Unclassified),
        derived_dims,
        eigen_data: Vec::new(),
        orbit_dims_seen: seen,
        notes: vec![note],
    }
}

/// Functionals for the MD spot check: generic ones plus functionals
/// vanishing on eigen-directions of `ad|g¹` and on `g²`, where lower
/// strata of non-MD algebras live.
fn md_probe_functionals(g: &LieAlgebra, count: usize) -> Vec<Functional> {
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 0xf00d);
    let g1 = g.derived_subalgebra(1);
    let g2 = g.derived_subalgebra(2);
    let mut out = Vec::with_capacity(count);
    let mut hyperplanes: Vec<Vector> = Vec::new();
    if g1.dim() > 0 {
        for _ in 0..8 {
            let u = random_vector(&mut rng, n);
            let m = restrict(g, &u, g1.basis());
            for z in linalg::eigenvalues(&m) {
                if z.im.abs() > 1e-9 * (1.0 + z.norm()) {
                    continue;
                }
                let shifted = &m - DMatrix::identity(m.nrows(), m.nrows()) * z.re;
                let ns = linalg::null_space(&shifted, m.norm());
                for c in 0..ns.ncols() {
                    hyperplanes.push(g1.basis() * ns.column(c));
                }
            }
        }
    }
    for i in 0..g2.dim() {
        hyperplanes.push(g2.vector(i));
    }
    for k in 0..count {
        let mut f = random_vector(&mut rng, n);
        if k % 2 == 1 && !hyperplanes.is_empty() {
            let w = &hyperplanes[(k / 2) % hyperplanes.len()];
            let ww = w.norm_squared();
            if ww > 0.0 {
                f -= w * (f.dot(w) / ww);
            }
        }
        out.push(f);
    }
    out
}

/// Orbit dimensions met on the probe set; an error if they are not
/// `{0, max}`.
pub fn md_property_check(g: &LieAlgebra, count: usize) -> Result<Vec<usize>> {
    let mut seen = vec![0usize];
    for f in md_probe_functionals(g, count) {
        let d = orbit_dimension(g, &f)?;
        if !seen.contains(&d) {
            seen.push(d);
        }
    }
    seen.sort_unstable();
    if seen.len() > 2 {
        return Err(Error::NotMd4 { reason: format!("orbit dimensions {seen:?} are not of the form {{0, max}}") });
    }
    Ok(seen)
}

pub fn classify_md4(g: &LieAlgebra) -> Result<Md4Classification> {
    if g.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: g.dim() });
    }
    let dims = g.derived_series_dims();
    if dims.last() != Some(&0) {
        return Err(Error::NotSolvable { stalled_at: *dims.last().unwrap() });
    }
    let d1 = dims.get(1).copied().unwrap_or(0);
    if d1 == 0 {
        return Ok(Md4Classification {
            label: Md4Label::decomposable(4, "0"),
            derived_dims: dims,
            eigen_data: Vec::new(),
            orbit_dims_seen: vec![0],
            notes: vec!["abelian".into()],
        });
    }
    let seen = md_property_check(g, 200)?;
    let g1 = g.derived_subalgebra(1);
    let scale = g.structure_norm();
    let tol = SUBSPACE_TOL * (1.0 + scale);
    let mut notes = Vec::new();
    let (label, eigen_data) = match d1 {
        1 => {
            let z = g1.vector(0);
            let central = (0..4).all(|i| g.bracket(&g.basis_vector(i), &z).unwrap().norm() <= tol);
            notes.push(if central { "g1 central".into() } else { "g1 not central".into() });
            let f = if central { Md4Family::G411 } else { Md4Family::G412 };
            (Md4Label::plain(f), Vec::new())
        }
        2 => {
            if g.bracket(&g1.vector(0), &g1.vector(1))?.norm() > tol {
                return Err(Error::NotMd4 { reason: "two-dimensional derived ideal is not abelian".into() });
            }
            let ms: Vec<DMatrix<f64>> = (0..4).map(|i| restrict(g, &g.basis_vector(i), g1.basis())).collect();
            let stacked = DMatrix::from_fn(4, 4, |r, c| ms[c][(r % 2, r / 2)]);
            match linalg::numerical_rank(&stacked, scale) {
                2 => {
                    if aff_c_reduction(g, &g1).is_some() {
                        (Md4Label::plain(Md4Family::G424), Vec::new())
                    } else {
                        return Ok(unclassified(dims, seen, "ad|g1 spans a plane that is not ℂ".into()));
                    }
                }
                1 => {
                    let a = ms.into_iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
                    let blocks = real_jordan(&a)?;
                    let label = match label_rank_two(&blocks) {
                        Some(l) => l,
                        None => {
                            return Ok(unclassified(dims, seen, "ad_T|g1 is singular".into()));
                        }
                    };
                    (label, blocks)
                }
                r => return Ok(unclassified(dims, seen, format!("ad|g1 has rank {r}"))),
            }
        }
        3 => {
            let d2 = dims.get(2).copied().unwrap_or(0);
            let t = g1.complement().vector(0);
            if d2 == 0 {
                let a = restrict(g, &t, g1.basis());
                let blocks = real_jordan(&a)?;
                match label_rank_three(&blocks) {
                    Some(l) => (l, blocks),
                    None => return Ok(unclassified(dims, seen, "ad_T|g1 is singular".into())),
                }
            } else if d2 == 1 {
                let g2 = g.derived_subalgebra(2);
                let zc = g2.vector(0);
                if g.bracket(&t, &zc)?.norm() > tol {
                    return Err(Error::NotMd4 { reason: "centre of the Heisenberg ideal is not central".into() });
                }
                // Induced action of T on g¹/g².
                let q2 = {
                    let comp = g2.complement();
                    let inter: Vec<Vector> = (0..comp.dim()).map(|i| comp.vector(i)).collect();
                    let m = g1.basis() * g1.basis().transpose() * DMatrix::from_columns(&inter);
                    linalg::column_basis(&m, 1.0)
                };
                let a2 = q2.transpose() * g.ad_matrix(&t)? * &q2;
                let det = a2.determinant();
                let invariant = -det;
                notes.push(format!("a11^2 + a12 a21 = {invariant:.6e}, trace = {:.3e}", a2.trace()));
                if det.abs() <= 1e-9 * a2.norm_squared().max(f64::MIN_POSITIVE) {
                    return Err(Error::DegenerateJordan {
                        reason: format!("induced action on g1/g2 has determinant {det:.3e}"),
                    });
                }
                let f = if invariant < 0.0 { Md4Family::G441 } else { Md4Family::G442 };
                (Md4Label::plain(f), real_jordan(&a2)?)
            } else {
                return Err(Error::NotMd4 { reason: "three-dimensional derived ideal is neither ℝ³ nor h₃".into() });
            }
        }
        _ => return Err(Error::NotMd4 { reason: format!("derived ideal of dimension {d1}") }),
    };
    Ok(Md4Classification { label: label.canonical(), derived_dims: dims, eigen_data, orbit_dims_seen: seen, notes })
}

fn is_zero(x: f64, scale: f64) -> bool {
    x.abs() <= 1e-9 * scale
}

/// Family for `ad_T` restricted to a two-dimensional derived ideal.
fn label_rank_two(blocks: &[JordanBlock]) -> Option<Md4Label> {
    let rho = blocks.iter().map(|b| b.re.hypot(b.im)).fold(0.0, f64::max);
    if blocks.iter().any(|b| b.im == 0.0 && is_zero(b.re, rho)) {
        return None;
    }
    let l = match blocks {
        [c] if c.im > 0.0 => Md4Label::new(Md4Family::G423, &[(c.re / c.re.hypot(c.im)).acos()]).ok()?,
        [a, b] => Md4Label::new(Md4Family::G421, &[a.re / b.re]).ok()?,
        [a] if a.jordan_sizes == [1, 1] => Md4Label::new(Md4Family::G421, &[1.0]).ok()?,
        [a] if a.jordan_sizes == [2] => Md4Label::plain(Md4Family::G422),
        _ => return None,
    };
    Some(l)
}

/// Family for `ad_T` restricted to a three-dimensional abelian derived ideal.
fn label_rank_three(blocks: &[JordanBlock]) -> Option<Md4Label> {
    let rho = blocks.iter().map(|b| b.re.hypot(b.im)).fold(0.0, f64::max);
    if blocks.iter().any(|b| b.im == 0.0 && is_zero(b.re, rho)) {
        return None;
    }
    if let Some(c) = blocks.iter().find(|b| b.im > 0.0) {
        let real = blocks.iter().find(|b| b.im == 0.0)?;
        let r = c.re.hypot(c.im);
        return Md4Label::new(Md4Family::G434, &[real.re / r, (c.re / r).acos()]).ok();
    }
    // All real: collect eigenvalues with their Jordan structure.
    let mut diag = Vec::new();
    let mut defective: Option<(f64, usize)> = None;
    for b in blocks {
        for &s in &b.jordan_sizes {
            if s == 1 {
                diag.push(b.re);
            } else {
                defective = Some((b.re, s));
            }
        }
    }
    let l = match defective {
        None => {
            let [a, b] = canonical_triple([diag[0], diag[1], diag[2]]);
            Md4Label::new(Md4Family::G431, &[a, b]).ok()?
        }
        Some((mu, 2)) => Md4Label::new(Md4Family::G432, &[mu / diag[0]]).ok()?,
        Some((_, 3)) => Md4Label::plain(Md4Family::G433),
        _ => return None,
    };
    Some(l)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentialCheck {
    pub exponential: bool,
    pub witness: Option<Vec<f64>>,
    /// Eigenvalues `(re, im)` of `ad` at the witness.
    pub witness_eigenvalues: Vec<(f64, f64)>,
    pub samples: usize,
}

/// Relative thresholds (eigenvalues of `ad_U / |ad_U|`): real part below
/// `1e-10` and imaginary part above `1e-6` count as purely imaginary.
const IMAG_RE_TOL: f64 = 1e-10;
const IMAG_IM_MIN: f64 = 1e-6;

/// Search for `ad_U` with a purely imaginary eigenvalue: basis directions,
/// 500 random directions, and random directions in the hyperplane where
/// `tr ad_U = 0` (where purely imaginary spectra are forced to live when
/// the real parts are proportional to the trace).
pub fn is_exponential(g: &LieAlgebra) -> ExponentialCheck {
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 0xe4);
    let mut candidates: Vec<Vector> = (0..n).map(|i| g.basis_vector(i)).collect();
    candidates.extend((0..500).map(|_| random_vector(&mut rng, n)));
    let trace = Vector::from_fn(n, |i, _| g.ad_basis(i).trace());
    let tt = trace.norm_squared();
    for _ in 0..100 {
        let mut u = random_vector(&mut rng, n);
        if tt > 0.0 {
            u -= &trace * (u.dot(&trace) / tt);
        }
        candidates.push(u);
    }
    let samples = candidates.len();
    for u in candidates {
        let a = g.ad_matrix(&u).expect("dimension matches");
        let s = a.norm();
        if s == 0.0 {
            continue;
        }
        let eig: Vec<Complex<f64>> = linalg::eigenvalues(&(a / s));
        if eig.iter().any(|z| z.re.abs() < IMAG_RE_TOL && z.im.abs() > IMAG_IM_MIN) {
            return ExponentialCheck {
                exponential: false,
                witness: Some(u.iter().copied().collect()),
                witness_eigenvalues: eig.iter().map(|z| (z.re * s, z.im * s)).collect(),
                samples,
            };
        }
    }
    ExponentialCheck { exponential: true, witness: None, witness_eigenvalues: Vec::new(), samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_basis(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        loop {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let s = linalg::singular_values(&m);
            if s[n - 1] > 0.0 && s[0] / s[n - 1] < 1e2 {
                return m;
            }
        }
    }

    fn aff_r_squared() -> LieAlgebra {
        LieAlgebra::from_brackets(&["X1", "Y1", "X2", "Y2"], &[(0, 1, &[(1, 1.0)]), (2, 3, &[(3, 1.0)])]).unwrap()
    }

    #[test]
    fn md_bar_criterion() {
        assert!(is_md_bar(&fixtures::aff_r()).holds);
        assert!(is_md_bar(&LieAlgebra::abelian(3)).holds);
        let h3 = fixtures::heisenberg();
        let c = is_md_bar(&h3);
        assert!(!c.holds);
        // The first failing direction is a basis vector; X = Z commutes with everything.
        assert_eq!(c.witness, Some(vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn md_bar_classification() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(classify_md_bar(&LieAlgebra::abelian(3)).tag, MdBarTag::Abelian);
        assert_eq!(classify_md_bar(&fixtures::heisenberg()).tag, MdBarTag::NotMdBar);
        assert_eq!(classify_md_bar(&aff_r_squared()).tag, MdBarTag::NotMdBar);
        for _ in 0..10 {
            let g = fixtures::aff_c().change_basis(&random_basis(&mut rng, 4)).unwrap();
            let l = classify_md_bar(&g);
            assert_eq!(l.tag, MdBarTag::AffC);
            assert_eq!(l.normal_basis.map(|b| b.shape()), Some((4, 4)));
            let g = fixtures::aff_r().change_basis(&random_basis(&mut rng, 2)).unwrap();
            assert_eq!(classify_md_bar(&g).tag, MdBarTag::AffR);
        }
    }

    #[test]
    fn md4_examples() {
        assert_eq!(classify_md4(&fixtures::real_diamond()).unwrap().label, Md4Label::plain(Md4Family::G442));
        assert_eq!(classify_md4(&fixtures::builtin("r-semidirect-h3").unwrap()).unwrap().label.family, Md4Family::G441);
        let ab = classify_md4(&LieAlgebra::abelian(4)).unwrap().label;
        assert_eq!(ab.family, Md4Family::DecomposableRnPlus);
        assert_eq!(ab.decomposition.unwrap().n, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l3 = Md4Label::new(Md4Family::G421, &[3.0]).unwrap();
        for _ in 0..5 {
            let g = fixtures::md4_table(&l3).unwrap().change_basis(&random_basis(&mut rng, 4)).unwrap();
            let got = classify_md4(&g).unwrap().label;
            assert!(l3.param_distance(&got).unwrap() < 1e-8, "{got}");
            assert!((got.params[0] - 1.0 / 3.0).abs() < 1e-8);
        }
        for (label, g) in fixtures::md4_fixtures() {
            let got = classify_md4(&g).unwrap().label;
            assert_eq!(got.family, label.family);
            if !label.params.is_empty() {
                assert!(label.param_distance(&got).unwrap() < 1e-9, "{label} vs {got}");
            }
        }
    }

    #[test]
    fn md4_errors() {
        assert!(matches!(classify_md4(&fixtures::aff_r()), Err(Error::DimensionMismatch { .. })));
        // sl₂ ⊕ ℝ is not solvable.
        let sl2r = LieAlgebra::from_brackets(
            &["H", "E", "F", "C"],
            &[(0, 1, &[(1, 2.0)]), (0, 2, &[(2, -2.0)]), (1, 2, &[(0, 1.0)])],
        )
        .unwrap();
        assert!(matches!(classify_md4(&sl2r), Err(Error::NotSolvable { .. })));
        // aff ℝ ⊕ aff ℝ has orbits of dimension 0, 2 and 4.
        assert!(matches!(classify_md4(&aff_r_squared()), Err(Error::NotMd4 { .. })));
    }

    #[test]
    fn jordan_data() {
        let j = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let mut b = real_jordan(&j).unwrap();
        b.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert_eq!(b.len(), 2);
        assert!((b[0].re - 2.0).abs() < 1e-8 && b[0].multiplicity == 2 && b[0].jordan_sizes == vec![2]);
        assert!((b[1].re - 5.0).abs() < 1e-8 && b[1].jordan_sizes == vec![1]);
        let (c, s) = ((PI / 3.0).cos(), (PI / 3.0).sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let b = real_jordan(&r).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].re - c).abs() < 1e-10 && (b[0].im - s).abs() < 1e-10 && b[0].multiplicity == 1);
        let z = real_jordan(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(z[0].jordan_sizes, vec![1, 1]);
    }

    #[test]
    fn exponentiality() {
        let g441 = is_exponential(&fixtures::md4_table(&Md4Label::plain(Md4Family::G441)).unwrap());
        assert!(!g441.exponential);
        assert!(g441.witness_eigenvalues.iter().any(|&(re, im)| re.abs() < 1e-10 && im.abs() > 1e-6));
        assert!(is_exponential(&fixtures::md4_table(&Md4Label::plain(Md4Family::G411)).unwrap()).exponential);
        assert!(is_exponential(&LieAlgebra::abelian(4)).exponential);
        let right = Md4Label::new(Md4Family::G423, &[FRAC_PI_2]).unwrap();
        assert!(!is_exponential(&fixtures::md4_table(&right).unwrap()).exponential);
        for (label, g, expected) in fixtures::exponentiality_fixtures() {
            assert_eq!(is_exponential(&g).exponential, expected, "{label}");
        }
    }
}
