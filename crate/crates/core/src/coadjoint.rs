//! Coadjoint action, Kirillov form and orbit sampling.
//!
//! A functional `F` is stored by its coordinates in the dual basis. The
//! action of `exp(U)` is computed as `⟨F, exp(ad_U) X_j⟩`, i.e. the row
//! vector `F` times `exp(ad_U)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{LieAlgebra, Vector};
use crate::linalg::{self, Subspace};

pub type Functional = Vector;

#[derive(Clone, Debug)]
pub struct KirillovForm {
    pub matrix: DMatrix<f64>,
}

fn check(g: &LieAlgebra, f: &Functional) -> Result<()> {
    if f.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: f.len() });
    }
    Ok(())
}

/// Natural size of `B_F`, used as the rank reference so that rounding noise
/// on a degenerate functional is not read as a non-trivial orbit.
fn form_reference(g: &LieAlgebra, f: &Functional) -> f64 {
    g.structure_norm() * f.norm()
}

pub fn kirillov_form(g: &LieAlgebra, f: &Functional) -> Result<KirillovForm> {
    check(g, f)?;
    let n = g.dim();
    let m = DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| f[k] * g.c(i, j, k)).sum());
    Ok(KirillovForm { matrix: m })
}

impl KirillovForm {
    pub fn rank(&self, reference: f64) -> usize {
        linalg::numerical_rank(&self.matrix, reference)
    }
}

pub fn orbit_dimension(g: &LieAlgebra, f: &Functional) -> Result<usize> {
    let b = kirillov_form(g, f)?;
    let r = b.rank(form_reference(g, f));
    debug_assert!(r % 2 == 0, "skew form of odd numerical rank {r}");
    Ok(r)
}

pub fn stabilizer_algebra(g: &LieAlgebra, f: &Functional) -> Result<Subspace> {
    let b = kirillov_form(g, f)?;
    let ns = linalg::null_space(&b.matrix, form_reference(g, f));
    Ok(Subspace::span(&ns, 1.0))
}

/// `exp(t₁ X_{i₁}) ⋯ exp(t_m X_{i_m})`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupWord {
    pub steps: Vec<(usize, f64)>,
}

impl GroupWord {
    pub fn new(steps: Vec<(usize, f64)>) -> Self {
        GroupWord { steps }
    }

    /// Reversed word with negated times.
    pub fn inverse(&self) -> Self {
        GroupWord { steps: self.steps.iter().rev().map(|&(i, t)| (i, -t)).collect() }
    }

    pub fn random<R: Rng>(rng: &mut R, dim: usize, len: usize, step_scale: f64) -> Self {
        let steps = (0..len)
            .map(|_| {
                let i = rng.gen_range(0..dim);
                let t = if step_scale > 0.0 { rng.gen_range(-step_scale..step_scale) } else { 0.0 };
                (i, t)
            })
            .collect();
        GroupWord { steps }
    }
}

pub fn coadjoint_flow(g: &LieAlgebra, f: &Functional, w: &GroupWord) -> Result<Functional> {
    check(g, f)?;
    let mut row = f.transpose();
    for &(i, t) in &w.steps {
        if i >= g.dim() {
            return Err(Error::DimensionMismatch { expected: g.dim(), got: i + 1 });
        }
        if t == 0.0 {
            continue;
        }
        let u = g.basis_vector(i) * t;
        row = row * g.exp_ad(&u)?;
    }
    Ok(row.transpose())
}

/// Infinitesimal action `F ↦ F ∘ ad_{X_i}`, one tangent vector per basis
/// element (the `i`-th row of `B_F`).
pub fn tangent_vectors(g: &LieAlgebra, f: &Functional) -> Result<DMatrix<f64>> {
    Ok(kirillov_form(g, f)?.matrix.transpose())
}

/// Central-difference tangent vectors `(K(exp hX_i)F − K(exp −hX_i)F) / 2h`
/// as columns. `h = 0` yields zero vectors.
pub fn tangent_vectors_fd(g: &LieAlgebra, f: &Functional, h: f64) -> Result<DMatrix<f64>> {
    check(g, f)?;
    let n = g.dim();
    let mut m = DMatrix::zeros(n, n);
    if h == 0.0 {
        return Ok(m);
    }
    for i in 0..n {
        let plus = coadjoint_flow(g, f, &GroupWord::new(vec![(i, h)]))?;
        let minus = coadjoint_flow(g, f, &GroupWord::new(vec![(i, -h)]))?;
        m.set_column(i, &((plus - minus) / (2.0 * h)));
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitSample {
    pub base: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub est_dim: usize,
    pub seed: u64,
    pub step_scale: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    pub n: usize,
    pub step_scale: f64,
    /// Word length; `None` means `2·dim`.
    pub word_len: Option<usize>,
    pub seed: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { n: 200, step_scale: 1.0, word_len: None, seed: 0 }
    }
}

pub fn sample_orbit(g: &LieAlgebra, f: &Functional, n: usize, step_scale: f64, seed: u64) -> Result<OrbitSample> {
    sample_orbit_with(g, f, &SampleOptions { n, step_scale, word_len: None, seed })
}

pub fn sample_orbit_with(g: &LieAlgebra, f: &Functional, opts: &SampleOptions) -> Result<OrbitSample> {
    check(g, f)?;
    if opts.n == 0 {
        return Err(Error::BadParams("sample count must be at least 1".into()));
    }
    let len = opts.word_len.unwrap_or(2 * g.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = Vec::with_capacity(opts.n);
    for _ in 0..opts.n {
        let w = GroupWord::random(&mut rng, g.dim(), len, opts.step_scale);
        points.push(coadjoint_flow(g, f, &w)?.iter().copied().collect());
    }
    let tangent = tangent_vectors(g, f)?;
    let est_dim = linalg::numerical_rank(&tangent, form_reference(g, f));
    debug_assert_eq!(est_dim, orbit_dimension(g, f)?);
    Ok(OrbitSample {
        base: f.iter().copied().collect(),
        points,
        est_dim,
        seed: opts.seed,
        step_scale: opts.step_scale,
    })
}

impl OrbitSample {
    pub fn point(&self, i: usize) -> Functional {
        Functional::from_vec(self.points[i].clone())
    }

    pub fn base_functional(&self) -> Functional {
        Functional::from_vec(self.base.clone())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W, labels: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = labels.iter().map(|l| format!("{l}*")).collect();
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for p in &self.points {
            w.write_record(p.iter().map(|v| format!("{v:.17e}"))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partition functionals by orbit dimension.
pub fn stratify(g: &LieAlgebra, fs: &[Functional]) -> Result<BTreeMap<usize, Vec<Functional>>> {
    let mut out: BTreeMap<usize, Vec<Functional>> = BTreeMap::new();
    for f in fs {
        out.entry(orbit_dimension(g, f)?).or_default().push(f.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Md4Family;
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::Rng;

    fn f(xs: &[f64]) -> Functional {
        Functional::from_row_slice(xs)
    }

    fn table(fam: Md4Family) -> LieAlgebra {
        fixtures::md4_table(&fixtures::default_label(fam)).unwrap()
    }

    #[test]
    fn kirillov_forms() {
        let aff = fixtures::aff_r();
        let b = kirillov_form(&aff, &f(&[0.0, 1.0])).unwrap().matrix;
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let rd = fixtures::real_diamond();
        assert_eq!(kirillov_form(&rd, &Functional::zeros(4)).unwrap().matrix, DMatrix::zeros(4, 4));
        assert_eq!(kirillov_form(&rd, &f(&[0.0, 0.0, 0.0, 2.5])).unwrap().matrix, DMatrix::zeros(4, 4));
        assert!(matches!(kirillov_form(&rd, &f(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn orbit_dimensions_and_stabilizers() {
        let rd = fixtures::real_diamond();
        assert_eq!(orbit_dimension(&rd, &f(&[0.3, -0.2, 1.5, 0.7])).unwrap(), 2);
        assert_eq!(orbit_dimension(&rd, &Functional::zeros(4)).unwrap(), 0);
        let g424 = table(Md4Family::G424);
        assert_eq!(orbit_dimension(&g424, &f(&[0.1, 1.0, -0.5, 0.2])).unwrap(), 4);
        let aff = fixtures::aff_r();
        assert_eq!(stabilizer_algebra(&aff, &f(&[0.0, 1.0])).unwrap().dim(), 0);
        assert_eq!(stabilizer_algebra(&aff, &f(&[0.0, 0.0])).unwrap().dim(), 2);
        let g411 = table(Md4Family::G411);
        assert_eq!(stabilizer_algebra(&g411, &f(&[1.0, -2.0, 0.0, 3.0])).unwrap().dim(), 4);
    }

    #[test]
    fn flows_match_closed_forms() {
        let g441 = table(Md4Family::G441);
        let (al, be, ga, de) = (0.8, -0.6, 1.3, 0.4);
        let base = f(&[al, be, ga, de]);
        assert_eq!(coadjoint_flow(&g441, &base, &GroupWord::default()).unwrap(), base);
        let d = 0.9;
        let out = coadjoint_flow(&g441, &base, &GroupWord::new(vec![(3, d)])).unwrap();
        assert!((out[0] - (al * d.cos() - be * d.sin())).abs() < 1e-12);
        assert!((out[1] - (al * d.sin() + be * d.cos())).abs() < 1e-12);
        assert!((out[2] - ga).abs() < 1e-12 && (out[3] - de).abs() < 1e-12);
        // General U = aX + bY + dT: first coordinate of F·exp(ad_U).
        let (a, b) = (0.5, -1.1);
        let row = base.transpose() * g441.exp_ad(&f(&[a, b, 0.0, d])).unwrap();
        let x = al * d.cos() - be * d.sin() + ga * (a * (d.cos() - 1.0) / d - b * d.sin() / d);
        assert!((row[0] - x).abs() < 1e-12);

        let g412 = table(Md4Family::G412);
        let out = coadjoint_flow(&g412, &base, &GroupWord::new(vec![(3, d)])).unwrap();
        assert!((out[2] - ga * d.exp()).abs() < 1e-12);
        let w = GroupWord::new(vec![(0, 0.3), (3, -1.2), (2, 0.7)]);
        let back = coadjoint_flow(&g412, &coadjoint_flow(&g412, &base, &w).unwrap(), &w.inverse()).unwrap();
        assert!((back - base).amax() < 1e-12);
    }

    #[test]
    fn sampling() {
        let rd = fixtures::real_diamond();
        let s = sample_orbit_with(&rd, &f(&[1.0, 1.0, 1.0, 0.0]), &SampleOptions { n: 1, word_len: Some(0), ..Default::default() }).unwrap();
        assert_eq!(s.points, vec![vec![1.0, 1.0, 1.0, 0.0]]);
        assert_eq!(s.est_dim, 2);
        let s = sample_orbit(&rd, &f(&[1.0, 1.0, 1.0, 0.0]), 200, 1.0, 3).unwrap();
        for p in &s.points {
            assert!((p[0] * p[1] - 1.0 - (p[3] - 0.0)).abs() < 1e-8 * (1.0 + p[0].abs() * p[1].abs()));
        }
        let g421 = table(Md4Family::G421);
        let s = sample_orbit(&g421, &f(&[0.4, 1.0, -1.0, 2.0]), 50, 1.0, 1).unwrap();
        assert!(s.points.iter().all(|p| p[0] == 0.4));
        assert!(matches!(sample_orbit(&rd, &f(&[1.0, 0.0, 0.0, 0.0]), 0, 1.0, 0), Err(Error::BadParams(_))));
        let mut buf = Vec::new();
        s.write_csv(&mut buf, g421.labels()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("X*,Y*,Z*,T*\n"));
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn strata() {
        let rd = fixtures::real_diamond();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut fs: Vec<Functional> = (0..1000).map(|_| Functional::from_fn(4, |_, _| rng.gen_range(-1.0..1.0))).collect();
        fs.push(f(&[0.0, 0.0, 0.0, 1.0]));
        fs.push(f(&[1.0, 0.0, 0.0, 1.0]));
        let st = stratify(&rd, &fs).unwrap();
        assert_eq!(st.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
        let z = stratify(&rd, &[Functional::zeros(4)]).unwrap();
        assert_eq!(z[&0].len(), 1);
        let g424 = table(Md4Family::G424);
        let mut fs: Vec<Functional> = (0..200).map(|_| Functional::from_fn(4, |_, _| rng.gen_range(-1.0..1.0))).collect();
        fs.push(f(&[0.3, 0.0, 0.0, -1.0]));
        let st = stratify(&g424, &fs).unwrap();
        assert_eq!(st.keys().copied().collect::<Vec<_>>(), vec![0, 4]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn finite_difference_tangents(k in 0usize..13, v in prop::collection::vec(-2.0f64..2.0, 4)) {
            let (_, g) = fixtures::md4_fixtures().swap_remove(k);
            let f = Functional::from_vec(v);
            let exact = tangent_vectors(&g, &f).unwrap();
            let fd = tangent_vectors_fd(&g, &f, 1e-4).unwrap();
            prop_assert!((exact - fd).amax() < 1e-6);
        }

        #[test]
        fn orbit_rank_is_even(k in 0usize..13, v in prop::collection::vec(-2.0f64..2.0, 4)) {
            let (label, g) = fixtures::md4_fixtures().swap_remove(k);
            let d = orbit_dimension(&g, &Functional::from_vec(v)).unwrap();
            let top = if label.family == Md4Family::G424 { 4 } else { 2 };
            prop_assert!(d == 0 || d == top);
        }
    }
}
