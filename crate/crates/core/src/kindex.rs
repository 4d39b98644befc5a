//! Integer K-theory bookkeeping: finitely generated abelian groups, Smith
//! normal form, exactness of (six-term) sequences, winding numbers of
//! matrix loops, and the connecting maps `δ₀` computed from lifted
//! generators.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type IntMatrix = DMatrix<i64>;

/// `ℤ^rank ⊕ ℤ/t₁ ⊕ … ⊕ ℤ/t_k` with `t₁ | t₂ | … | t_k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianGroup {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub torsion: Vec<u64>,
}

impl AbelianGroup {
    pub fn free(rank: usize) -> Self {
        AbelianGroup { rank, torsion: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::free(0)
    }

    pub fn new(rank: usize, torsion: Vec<u64>) -> Result<Self> {
        if torsion.iter().any(|&t| t < 2) {
            return Err(Error::BadParams("invariant factors must be at least 2".into()));
        }
        if torsion.windows(2).any(|w| w[1] % w[0] != 0) {
            return Err(Error::BadParams(format!("invariant factors {torsion:?} do not form a divisibility chain")));
        }
        Ok(AbelianGroup { rank, torsion })
    }

    pub fn is_free(&self) -> bool {
        self.torsion.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// A homomorphism between free parts, as an integer matrix acting on
/// column vectors of source coordinates (`dst.rank × src.rank`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupHom {
    pub src: AbelianGroup,
    pub dst: AbelianGroup,
    /// Rows of the matrix.
    pub matrix: Vec<Vec<i64>>,
}

impl GroupHom {
    pub fn new(src: AbelianGroup, dst: AbelianGroup, matrix: Vec<Vec<i64>>) -> Result<Self> {
        let h = GroupHom { src, dst, matrix };
        h.check_shape()?;
        Ok(h)
    }

    pub fn zero(src: AbelianGroup, dst: AbelianGroup) -> Self {
        let matrix = vec![vec![0; src.rank]; dst.rank];
        GroupHom { src, dst, matrix }
    }

    pub fn identity(g: AbelianGroup) -> Self {
        let n = g.rank;
        let matrix = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        GroupHom { src: g.clone(), dst: g, matrix }
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.matrix.len() != self.dst.rank || self.matrix.iter().any(|r| r.len() != self.src.rank) {
            return Err(Error::ShapeMismatch(format!(
                "matrix of shape {}×{} does not map {} → {}",
                self.matrix.len(),
                self.matrix.first().map_or(0, |r| r.len()),
                self.src,
                self.dst
            )));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> IntMatrix {
        IntMatrix::from_fn(self.dst.rank, self.src.rank, |i, j| self.matrix[i][j])
    }

    pub fn from_matrix(src: AbelianGroup, dst: AbelianGroup, m: &IntMatrix) -> Result<Self> {
        let rows = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        GroupHom::new(src, dst, rows)
    }
}

/// `U · m · V = D` with `U`, `V` unimodular and `D` diagonal,
/// `d₁ | d₂ | …`, `dᵢ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snf {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl Snf {
    pub fn diagonal(&self) -> Vec<i64> {
        (0..self.d.nrows().min(self.d.ncols())).map(|i| self.d[(i, i)]).collect()
    }

    pub fn rank(&self) -> usize {
        self.diagonal().iter().filter(|&&x| x != 0).count()
    }
}

fn overflow() -> Error {
    Error::BadParams("integer overflow in Smith normal form".into())
}

/// `row_a ← row_a − q·row_b` on a matrix.
fn row_sub(m: &mut IntMatrix, a: usize, b: usize, q: i64) -> Result<()> {
    for j in 0..m.ncols() {
        let v = q.checked_mul(m[(b, j)]).and_then(|x| m[(a, j)].checked_sub(x)).ok_or_else(overflow)?;
        m[(a, j)] = v;
    }
    Ok(())
}

fn col_sub(m: &mut IntMatrix, a: usize, b: usize, q: i64) -> Result<()> {
    for i in 0..m.nrows() {
        let v = q.checked_mul(m[(i, b)]).and_then(|x| m[(i, a)].checked_sub(x)).ok_or_else(overflow)?;
        m[(i, a)] = v;
    }
    Ok(())
}

pub fn smith_normal_form(m: &IntMatrix) -> Result<Snf> {
    let (r, c) = m.shape();
    let mut a = m.clone();
    let mut u = IntMatrix::identity(r, r);
    let mut v = IntMatrix::identity(c, c);
    for t in 0..r.min(c) {
        // Smallest non-zero entry of the remaining block becomes the pivot.
        let mut best: Option<(usize, usize)> = None;
        for i in t..r {
            for j in t..c {
                if a[(i, j)] != 0 && best.map_or(true, |(bi, bj)| a[(i, j)].abs() < a[(bi, bj)].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap_rows(t, pi);
        u.swap_rows(t, pi);
        a.swap_columns(t, pj);
        v.swap_columns(t, pj);
        loop {
            let p = a[(t, t)];
            for i in t + 1..r {
                let q = a[(i, t)] / p;
                if q != 0 {
                    row_sub(&mut a, i, t, q)?;
                    row_sub(&mut u, i, t, q)?;
                }
            }
            for j in t + 1..c {
                let q = a[(t, j)] / p;
                if q != 0 {
                    col_sub(&mut a, j, t, q)?;
                    col_sub(&mut v, j, t, q)?;
                }
            }
            // Remainders smaller than the pivot move into the pivot position.
            let row_rem = (t + 1..r).filter(|&i| a[(i, t)] != 0).min_by_key(|&i| a[(i, t)].abs());
            let col_rem = (t + 1..c).filter(|&j| a[(t, j)] != 0).min_by_key(|&j| a[(t, j)].abs());
            match (row_rem, col_rem) {
                (Some(i), _) => {
                    a.swap_rows(t, i);
                    u.swap_rows(t, i);
                    continue;
                }
                (None, Some(j)) => {
                    a.swap_columns(t, j);
                    v.swap_columns(t, j);
                    continue;
                }
                (None, None) => {}
            }
            // Divisibility: fold an offending row into the pivot row.
            let p = a[(t, t)];
            let offender = (t + 1..r).find(|&i| (t + 1..c).any(|j| a[(i, j)] % p != 0));
            match offender {
                Some(i) => {
                    row_sub(&mut a, t, i, -1)?;
                    row_sub(&mut u, t, i, -1)?;
                }
                None => break,
            }
        }
        if a[(t, t)] < 0 {
            for j in 0..c {
                a[(t, j)] = -a[(t, j)];
            }
            for j in 0..r {
                u[(t, j)] = -u[(t, j)];
            }
        }
    }
    Ok(Snf { u, d: a, v })
}

/// Basis of `ker m ⊂ ℤ^cols` as columns.
pub fn kernel_lattice(m: &IntMatrix) -> Result<IntMatrix> {
    let s = smith_normal_form(m)?;
    let r = s.rank();
    Ok(s.v.columns(r, m.ncols() - r).into_owned())
}

/// Whether `x ∈ m · ℤ^cols`.
pub fn in_image(m: &IntMatrix, x: &[i64]) -> Result<bool> {
    in_image_snf(&smith_normal_form(m)?, x)
}

fn in_image_snf(s: &Snf, x: &[i64]) -> Result<bool> {
    let d = s.diagonal();
    for i in 0..s.u.nrows() {
        let mut w: i64 = 0;
        for (k, xk) in x.iter().enumerate() {
            w = s.u[(i, k)].checked_mul(*xk).and_then(|y| w.checked_add(y)).ok_or_else(overflow)?;
        }
        let di = d.get(i).copied().unwrap_or(0);
        let ok = if di == 0 { w == 0 } else { w % di == 0 };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeCheck {
    /// Index of the node (the target of map `node − 1`).
    pub node: usize,
    pub group: String,
    /// `g ∘ f = 0`, i.e. `im f ⊆ ker g`.
    pub composition_zero: bool,
    pub kernel_in_image: bool,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactnessReport {
    pub nodes: Vec<NodeCheck>,
}

impl ExactnessReport {
    pub fn exact(&self) -> bool {
        self.nodes.iter().all(|n| n.exact)
    }
}

fn check_node(node: usize, f: &GroupHom, g: &GroupHom) -> Result<NodeCheck> {
    let (fm, gm) = (f.to_matrix(), g.to_matrix());
    let comp = &gm * &fm;
    let composition_zero = comp.iter().all(|&x| x == 0);
    let ker = kernel_lattice(&gm)?;
    let fs = smith_normal_form(&fm)?;
    let mut kernel_in_image = true;
    for c in 0..ker.ncols() {
        let col: Vec<i64> = ker.column(c).iter().copied().collect();
        if !in_image_snf(&fs, &col)? {
            kernel_in_image = false;
            break;
        }
    }
    Ok(NodeCheck {
        node,
        group: f.dst.to_string(),
        composition_zero,
        kernel_in_image,
        exact: composition_zero && kernel_in_image,
    })
}

fn check_chain(maps: &[GroupHom], cyclic: bool) -> Result<ExactnessReport> {
    for m in maps {
        m.check_shape()?;
        if !m.src.is_free() || !m.dst.is_free() {
            return Err(Error::TorsionUnsupported);
        }
    }
    let n = maps.len();
    let pairs = if cyclic { n } else { n.saturating_sub(1) };
    for k in 0..pairs {
        let (f, g) = (&maps[k], &maps[(k + 1) % n]);
        if f.dst != g.src {
            return Err(Error::ShapeMismatch(format!("map {k} lands in {} but map {} starts at {}", f.dst, (k + 1) % n, g.src)));
        }
    }
    let nodes = (0..pairs).map(|k| check_node((k + 1) % n, &maps[k], &maps[(k + 1) % n])).collect::<Result<_>>()?;
    Ok(ExactnessReport { nodes })
}

/// Exactness at every interior node of `A₀ → A₁ → … → A_k`: image equals
/// kernel as sublattices of `ℤ^rank`.
pub fn check_exact(seq: &[GroupHom]) -> Result<ExactnessReport> {
    check_chain(seq, false)
}

/// Six groups in cyclic order; `maps[i]: nodes[i] → nodes[i + 1 mod 6]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SixTermDiagram {
    pub name: String,
    pub labels: [String; 6],
    pub nodes: [AbelianGroup; 6],
    pub maps: [GroupHom; 6],
}

impl SixTermDiagram {
    /// Build from groups and map matrices (rows); zero maps may be given as
    /// empty row lists.
    pub fn new(name: &str, labels: [&str; 6], nodes: [AbelianGroup; 6], matrices: [Vec<Vec<i64>>; 6]) -> Result<Self> {
        let maps: Vec<GroupHom> = matrices
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                let (src, dst) = (nodes[i].clone(), nodes[(i + 1) % 6].clone());
                if m.is_empty() {
                    Ok(GroupHom::zero(src, dst))
                } else {
                    GroupHom::new(src, dst, m)
                }
            })
            .collect::<Result<_>>()?;
        Ok(SixTermDiagram {
            name: name.into(),
            labels: labels.map(String::from),
            nodes,
            maps: maps.try_into().expect("six maps"),
        })
    }
}

pub fn six_term_check(d: &SixTermDiagram) -> Result<ExactnessReport> {
    for (i, m) in d.maps.iter().enumerate() {
        if m.src != d.nodes[i] || m.dst != d.nodes[(i + 1) % 6] {
            return Err(Error::ShapeMismatch(format!("map {i} does not connect nodes {i} and {}", (i + 1) % 6)));
        }
    }
    check_chain(&d.maps, true)
}

/// `(K₀, K₁)` of a C*-algebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KPair {
    pub k0: AbelianGroup,
    pub k1: AbelianGroup,
}

impl KPair {
    pub fn free(k0: usize, k1: usize) -> Self {
        KPair { k0: AbelianGroup::free(k0), k1: AbelianGroup::free(k1) }
    }
}

impl fmt::Display for KPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.k0, self.k1)
    }
}

/// Crossed product by `ℝⁿ` shifts the K-degree by `n` (mod 2).
pub fn connes_thom_shift(k: &KPair, n: u32) -> KPair {
    if n % 2 == 1 {
        KPair { k0: k.k1.clone(), k1: k.k0.clone() }
    } else {
        k.clone()
    }
}

/// Spaces known to [`k_table`], with a description of each.
pub const K_TABLE_SPACES: [(&str, &str); 10] = [
    ("point", "C"),
    ("R", "C0(R)"),
    ("R2", "C0(R^2)"),
    ("R3", "C0(R^3)"),
    ("S1", "C(S^1)"),
    ("R3*", "C0(R^3 minus 0)"),
    ("R2xR*", "C0(R^2 x R*), the ideal I"),
    ("R2*", "C0(R^2 minus 0), the quotient A"),
    ("C4", "C({0, pi/2, pi, 3pi/2})"),
    ("I1", "C0 of the four open arcs of the circle"),
];

/// Tabulated K-groups of the commutative C*-algebras in the index
/// computations.
pub fn k_table(space: &str) -> Result<KPair> {
    Ok(match space {
        "point" | "C" => KPair::free(1, 0),
        "R" => KPair::free(0, 1),
        "R2" => KPair::free(1, 0),
        "R3" => KPair::free(0, 1),
        "S1" => KPair::free(1, 1),
        "R3*" => KPair::free(0, 2),
        "R2xR*" | "I" => KPair::free(0, 2),
        "R2*" | "A" => KPair::free(1, 1),
        "C4" => KPair::free(4, 0),
        "I1" => KPair::free(0, 4),
        other => return Err(Error::UnknownSpace(other.into())),
    })
}

/// Parameter domain of a loop, always traversed in increasing `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LoopDomain {
    Interval { a: f64, b: f64 },
    /// `[0, ∞)` via `t = u/(1 − u)`.
    PositiveHalfLine,
    /// `(−∞, 0]` via `t = −(1 − u)/u`.
    NegativeHalfLine,
}

impl LoopDomain {
    /// Map `u ∈ [0, 1]` to the parameter `t`.
    pub fn param(&self, u: f64) -> f64 {
        match *self {
            LoopDomain::Interval { a, b } => a + (b - a) * u,
            LoopDomain::PositiveHalfLine => u / (1.0 - u),
            LoopDomain::NegativeHalfLine => -(1.0 - u) / u,
        }
    }

    fn is_compact(&self) -> bool {
        matches!(self, LoopDomain::Interval { .. })
    }
}

pub type Sampler = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// A continuous map from a parameter domain into invertible complex
/// matrices whose end values agree (or whose limits at infinity agree).
#[derive(Clone)]
pub struct MatrixLoop {
    pub name: String,
    pub domain: LoopDomain,
    pub sampler: Sampler,
}

impl fmt::Debug for MatrixLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixLoop").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

/// `|det|` below this on the sample grid counts as singular.
pub const MIN_DET: f64 = 1e-8;
/// Largest accepted distance of the raw winding value from an integer.
pub const INTEGER_TOL: f64 = 1e-6;
/// Largest accepted mismatch between the end values of a loop.
pub const ENDPOINT_TOL: f64 = 1e-6;
/// Default number of quadrature cells.
pub const DEFAULT_GRID: usize = 1 << 16;

impl MatrixLoop {
    pub fn new(name: &str, domain: LoopDomain, f: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        MatrixLoop { name: name.into(), domain, sampler: Arc::new(f) }
    }

    pub fn at(&self, t: f64) -> CMatrix {
        (self.sampler)(t)
    }

    /// Value in the compactified variable `u ∈ [0, 1]`.
    fn at_u(&self, u: f64) -> CMatrix {
        self.at(self.domain.param(u))
    }

    /// Pointwise product `self(t) · other(t)` on the same domain.
    pub fn product(&self, other: &MatrixLoop) -> MatrixLoop {
        let (a, b) = (self.sampler.clone(), other.sampler.clone());
        MatrixLoop {
            name: format!("{}*{}", self.name, other.name),
            domain: self.domain,
            sampler: Arc::new(move |t| a(t) * b(t)),
        }
    }

    /// Pointwise inverse.
    pub fn inverse(&self) -> MatrixLoop {
        let a = self.sampler.clone();
        MatrixLoop {
            name: format!("{}^-1", self.name),
            domain: self.domain,
            sampler: Arc::new(move |t| a(t).try_inverse().unwrap_or_else(|| CMatrix::zeros(0, 0))),
        }
    }

    /// `‖f(start) − f(end)‖`, with limits at infinity approximated at
    /// `|t| = 10⁹`.
    pub fn endpoint_gap(&self) -> f64 {
        let (lo, hi) = if self.domain.is_compact() { (0.0, 1.0) } else { (1e-9, 1.0 - 1e-9) };
        (self.at_u(lo) - self.at_u(hi)).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Winding {
    pub raw: f64,
    pub value: i64,
}

/// `(1/2πi) ∫ Tr(f′ f⁻¹)` by the composite midpoint rule in the
/// compactified variable, with `f′` by central differences of a quarter
/// cell.
pub fn winding_raw(l: &MatrixLoop, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(Error::BadParams("winding grid must be positive".into()));
    }
    let gap = l.endpoint_gap();
    if gap > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch { gap });
    }
    let n = grid as f64;
    let h = 0.25 / n;
    let mut sum = Complex::new(0.0, 0.0);
    for k in 0..grid {
        let u = (k as f64 + 0.5) / n;
        let f = l.at_u(u);
        let det = f.determinant();
        if det.norm() < MIN_DET {
            return Err(Error::SingularLoop { at: l.domain.param(u), det: det.norm() });
        }
        let inv = f.try_inverse().ok_or(Error::SingularLoop { at: l.domain.param(u), det: det.norm() })?;
        let df = (l.at_u(u + h) - l.at_u(u - h)) / Complex::new(2.0 * h, 0.0);
        sum += (df * inv).trace();
    }
    let w = sum / n / Complex::new(0.0, 2.0 * PI);
    Ok(w.re)
}

pub fn winding_number(l: &MatrixLoop, grid: usize) -> Result<Winding> {
    let raw = winding_raw(l, grid)?;
    let value = raw.round();
    if (raw - value).abs() > INTEGER_TOL {
        return Err(Error::NonIntegerResult { raw });
    }
    Ok(Winding { raw, value: value as i64 })
}

/// Largest Frobenius residual `‖p² − p‖` over the grid.
pub fn idempotent_residual<P>(p: impl Fn(&P) -> CMatrix, grid: &[P]) -> f64 {
    grid.iter()
        .map(|x| {
            let m = p(x);
            (&m * &m - &m).norm()
        })
        .fold(0.0, f64::max)
}

/// A K₀ class `Σ cᵢ [fᵢ]` given through lifts: for each term, one loop
/// `exp(2πi·f̃ᵢ)` per component of the complement.
#[derive(Clone, Debug)]
pub struct LiftedGenerator {
    pub name: String,
    pub terms: Vec<(i64, Vec<MatrixLoop>)>,
}

/// Matrix of `δ₀`: entry `(i, j)` is the winding number of generator `j`
/// on component `i`.
pub fn delta0_via_winding(gens: &[LiftedGenerator], grid: usize) -> Result<GroupHom> {
    let comps = gens.first().and_then(|g| g.terms.first()).map_or(0, |t| t.1.len());
    let mut m = vec![vec![0i64; gens.len()]; comps];
    for (j, g) in gens.iter().enumerate() {
        for (coeff, pieces) in &g.terms {
            if pieces.len() != comps {
                return Err(Error::ShapeMismatch(format!(
                    "generator {} has {} pieces, expected {comps}",
                    g.name,
                    pieces.len()
                )));
            }
            for (i, piece) in pieces.iter().enumerate() {
                m[i][j] += coeff * winding_number(piece, grid)?.value;
            }
        }
    }
    GroupHom::new(AbelianGroup::free(gens.len()), AbelianGroup::free(comps), m)
}

fn scalar(z: Complex<f64>) -> CMatrix {
    CMatrix::from_element(1, 1, z)
}

fn cis(theta: f64) -> Complex<f64> {
    Complex::from_polar(1.0, theta)
}

/// `t ↦ t/√(1 + t²)`, the profile of the half-line generators.
pub fn half_line_profile(t: f64) -> f64 {
    if t.is_infinite() {
        t.signum()
    } else {
        t / (1.0 + t * t).sqrt()
    }
}

/// `u(t) = exp(2πi·t/√(1 + t²))` restricted to `ℝ₊` (`positive`) or `ℝ₋`.
pub fn u_half_line(positive: bool) -> MatrixLoop {
    let (name, domain) =
        if positive { ("u+", LoopDomain::PositiveHalfLine) } else { ("u-", LoopDomain::NegativeHalfLine) };
    MatrixLoop::new(name, domain, |t| scalar(cis(2.0 * PI * half_line_profile(t))))
}

pub fn constant_loop(m: CMatrix, domain: LoopDomain) -> MatrixLoop {
    MatrixLoop::new("constant", domain, move |_| m.clone())
}

/// `exp(2πi·x·q)` for an idempotent `q`: `I + (e^{2πix} − 1) q`.
fn exp_idempotent(x: f64, q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    CMatrix::identity(n, n) + q * (cis(2.0 * PI * x) - Complex::new(1.0, 0.0))
}

/// The rank-one idempotent `p(e^{iφ}, r)` on `(ℝ²)* ≅ S¹ × ℝ₊`.
pub fn p_idempotent(phi: f64, r: f64) -> CMatrix {
    let (c, s) = ((r * PI).cos(), (r * PI).sin());
    let half = Complex::new(0.5, 0.0);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            half * (1.0 - c),
            half * cis(phi) * s,
            half * cis(-phi) * s,
            half * (1.0 + c),
        ],
    )
}

pub fn diag10() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)])
}

/// Grid over `(φ, r) ∈ [0, 2π) × [0, 2]` for idempotent checks.
pub fn p_grid(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((2.0 * PI * i as f64 / n as f64, 2.0 * j as f64 / (n.max(2) - 1) as f64));
        }
    }
    out
}

/// Lift of `[p] − [diag(1, 0)]` to `(ℝ³)*`, restricted to the half-spaces
/// `z > 0` and `z < 0` over the point `(φ, r)` at distance `ρ` from the
/// axis.
///
/// The lift of `p` is `exp(2πi·σ(z/ρ)·p)` with `σ(t) = t/√(1 + t²)`: it
/// agrees with `p` on the boundary value `σ = ±1` (where `exp(2πi·p) = I`)
/// and, unlike the linear profile `z/ρ`, has limits at both ends of each
/// half-line. The lift of `diag(1, 0)` is constant.
pub fn p_lift(phi: f64, r: f64, rho: f64) -> LiftedGenerator {
    let p = p_idempotent(phi, r);
    let piece = |positive: bool| {
        let q = p.clone();
        let domain = if positive { LoopDomain::PositiveHalfLine } else { LoopDomain::NegativeHalfLine };
        MatrixLoop::new(if positive { "exp(2 pi i p+)" } else { "exp(2 pi i p-)" }, domain, move |z| {
            exp_idempotent(half_line_profile(z / rho), &q)
        })
    };
    let d = diag10();
    let flat = |domain| {
        let e = exp_idempotent(1.0, &d);
        constant_loop(e, domain)
    };
    LiftedGenerator {
        name: "[p] - [diag(1,0)]".into(),
        terms: vec![
            (1, vec![piece(true), piece(false)]),
            (-1, vec![flat(LoopDomain::PositiveHalfLine), flat(LoopDomain::NegativeHalfLine)]),
        ],
    }
}

/// The four arcs `(0, π/2)`, `(π/2, π)`, `(π, 3π/2)`, `(3π/2, 2π)`.
pub fn arcs() -> [LoopDomain; 4] {
    [0, 1, 2, 3].map(|k| LoopDomain::Interval { a: k as f64 * FRAC_PI_2, b: (k + 1) as f64 * FRAC_PI_2 })
}

/// Piecewise-linear hat `ℓ_j` on `[0, 2π]`, equal to 1 at the node
/// `(j − 1)·π/2` (and at `2π` for `j = 1`), 0 at the other nodes.
pub fn ell(j: usize, phi: f64) -> f64 {
    let node = (j as f64 - 1.0) * FRAC_PI_2;
    let d = if j == 1 { phi.min(2.0 * PI - phi) } else { (phi - node).abs() };
    (1.0 - d / FRAC_PI_2).max(0.0)
}

/// Lift `exp(2πi·ℓ_j)` of the point-mass generator `v_j`, restricted to
/// the four arcs.
pub fn ell_lift(j: usize) -> LiftedGenerator {
    let pieces = arcs()
        .iter()
        .enumerate()
        .map(|(k, &dom)| MatrixLoop::new(&format!("exp(2 pi i l{j}) on arc {}", k + 1), dom, move |phi| scalar(cis(2.0 * PI * ell(j, phi)))))
        .collect();
    LiftedGenerator { name: format!("v{j}"), terms: vec![(1, pieces)] }
}

/// `δ₀` of the circle extension, rows `(−1,1,0,0)`, `(0,−1,1,0)`,
/// `(0,0,−1,1)`, `(1,0,0,−1)`.
pub fn gamma4_delta0() -> Vec<Vec<i64>> {
    vec![vec![-1, 1, 0, 0], vec![0, -1, 1, 0], vec![0, 0, -1, 1], vec![1, 0, 0, -1]]
}

fn z(n: usize) -> AbelianGroup {
    AbelianGroup::free(n)
}

/// The hexagon shared by the three extensions with ideal `C₀(ℝ² × ℝ*)`
/// and quotient `C₀((ℝ²)*)`, starting at `K₁(I)`.
pub fn hexagon_gamma123() -> SixTermDiagram {
    let (i, a, e) = (k_table("R2xR*").unwrap(), k_table("R2*").unwrap(), k_table("R3*").unwrap());
    SixTermDiagram::new(
        "gamma1-3",
        ["K1(I)", "K1(E)", "K1(A)", "K0(I)", "K0(E)", "K0(A)"],
        [i.k1, e.k1, a.k1, i.k0, e.k0, a.k0],
        [vec![vec![1, -1], vec![0, 0]], vec![vec![0, 1]], vec![], vec![], vec![], vec![vec![1], vec![1]]],
    )
    .expect("fixture shapes")
}

/// The hexagon of the circle extension with ideal `I₁` (four arcs) and
/// quotient `ℂ⁴`, starting at `K₀(I₁)`.
pub fn hexagon_gamma4() -> SixTermDiagram {
    let (i1, s1, c4) = (k_table("I1").unwrap(), k_table("S1").unwrap(), k_table("C4").unwrap());
    SixTermDiagram::new(
        "gamma4",
        ["K0(I1)", "K0(S1)", "K0(C4)", "K1(I1)", "K1(S1)", "K1(C4)"],
        [i1.k0, s1.k0, c4.k0, i1.k1, s1.k1, c4.k1],
        [vec![], vec![vec![1], vec![1], vec![1], vec![1]], gamma4_delta0(), vec![vec![1, 1, 1, 1]], vec![], vec![]],
    )
    .expect("fixture shapes")
}

/// The hexagon of the extension behind the universal cover of Aff ℂ:
/// `δ₁ = 0` and `K₁ = 0` force `δ₀` to be an isomorphism.
pub fn hexagon_aff_c() -> SixTermDiagram {
    SixTermDiagram::new(
        "aff-c",
        ["K0(J)", "K0(C*G)", "K0(A)", "K1(J)", "K1(C*G)", "K1(A)"],
        [z(1), z(1), z(1), z(1), z(0), z(0)],
        [vec![vec![1]], vec![vec![0]], vec![vec![1]], vec![], vec![], vec![]],
    )
    .expect("fixture shapes")
}

pub fn fixture_hexagons() -> Vec<SixTermDiagram> {
    vec![hexagon_gamma123(), hexagon_gamma4(), hexagon_aff_c()]
}

/// A single-entry change of one map in a fixture hexagon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mutation {
    pub diagram: String,
    pub map: usize,
    pub row: usize,
    pub col: usize,
    pub delta: i64,
}

impl Mutation {
    pub fn apply(&self, d: &SixTermDiagram) -> SixTermDiagram {
        let mut out = d.clone();
        out.maps[self.map].matrix[self.row][self.col] += self.delta;
        out
    }
}

/// All `±1` single-entry mutations of the fixture hexagons, in a fixed
/// order.
pub fn all_mutations() -> Vec<Mutation> {
    let mut out = Vec::new();
    for d in fixture_hexagons() {
        for (k, m) in d.maps.iter().enumerate() {
            for (i, row) in m.matrix.iter().enumerate() {
                for j in 0..row.len() {
                    for delta in [1, -1] {
                        out.push(Mutation { diagram: d.name.clone(), map: k, row: i, col: j, delta });
                    }
                }
            }
        }
    }
    out
}

/// Twenty mutations spread evenly over [`all_mutations`].
pub fn mutation_set() -> Vec<Mutation> {
    let all = all_mutations();
    let n = 20.min(all.len());
    (0..n).map(|k| all[k * all.len() / n].clone()).collect()
}
