//! Discretised operators `S(φ₁)`, `S(φ₂)` on `L²(ℝ*, dx/|x|)`,
//!
//! `[S(φᵢ)f](x) = f(x) − 2·exp(−x²/2) ∫_{−1}^{1} f(xa)·|a|·(sgn a)^{i−1} da`,
//!
//! their numerical Fredholm indices, and an ODE oracle for the kernel.
//!
//! With `x = ±e^s` the measure `dx/|x|` becomes `ds`, and with `a = ±e^{−u}`
//! the integral becomes `∫₀^∞ e^{−2u} f(±e^{s−u}) du`: on a uniform `s`-grid
//! the operator is a weighted sum of grid shifts, so no interpolation is
//! needed. Values below the grid (`|x| < e^{−L}`) are extrapolated as
//! constants, whose contribution `e^{−2u}/2` is integrated exactly. Above
//! the grid, the Gaussian factor is below `e^{−e^{2L}/2} < 1e−14` for
//! `L ≥ 2`.
//!
//! Reflection `x ↦ −x` commutes with both operators, so each is stored as an
//! even and an odd `N × N` block on the positive half-line. The blocks are
//! lower triangular in `s` (the integral only looks at `|xa| ≤ |x|`).
//!
//! The operators are of Wiener–Hopf type in `s`: for `s → −∞` they approach
//! a convolution whose symbol has unit modulus, so singular values of the
//! truncated matrix cluster near 1. The only small singular value comes
//! with a right vector that decays into the grid (a genuine `L²` kernel
//! element) and a left vector that piles up at `s = −L` (the truncation of
//! a non-normalisable solution of the adjoint equation). Null modes are
//! therefore split by where their mass sits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest accepted defect of the quadrature on `f ≡ 1`.
pub const GRID_DEFECT_TOL: f64 = 1e-6;

/// Two uniform `s`-grids on `[−L, L]`, mapped to `x = ±e^s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogGrid {
    pub l: f64,
    /// Points per half-line.
    pub n: usize,
    /// Spacing in `s`.
    pub h: f64,
    pub s: Vec<f64>,
    /// `x`-values: the `n` positive nodes followed by their negatives.
    pub nodes: Vec<f64>,
    /// Trapezoid weights for `∫ f dx/|x| = ∫ f ds`, in node order.
    pub weights: Vec<f64>,
}

pub fn build_grid(l: f64, n: usize) -> Result<LogGrid> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::BadParams(format!("truncation L must be positive, got {l}")));
    }
    if n < 2 {
        return Err(Error::BadParams(format!("need at least 2 points per half-line, got {n}")));
    }
    let h = 2.0 * l / (n - 1) as f64;
    let s: Vec<f64> = (0..n).map(|k| if k == n - 1 { l } else { -l + h * k as f64 }).collect();
    let mut nodes: Vec<f64> = s.iter().map(|v| v.exp()).collect();
    nodes.extend(s.iter().map(|v| -v.exp()));
    let mut half = vec![h; n];
    half[0] = h / 2.0;
    half[n - 1] = h / 2.0;
    let weights = [half.clone(), half].concat();
    Ok(LogGrid { l, n, h, s, nodes, weights })
}

impl LogGrid {
    /// Weights of the positive half-line.
    pub fn half_weights(&self) -> &[f64] {
        &self.weights[..self.n]
    }

    /// Whether node `k` of a half-line lies within `width` of either end.
    fn near_edge(&self, k: usize, width: f64) -> bool {
        self.s[k] <= -self.l + width || self.s[k] >= self.l - width
    }
}

/// Weights `w_j` with `Σ_j w_j g(jh) ≈ ∫₀^{kh} e^{−2u} g(u) du`.
///
/// Gregory's end-corrected trapezoid rule when `k ≥ 8`; for shorter ranges,
/// exact integration of `e^{−2u}` against the piecewise-linear interpolant
/// of `g`.
fn row_weights(k: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    if k >= 8 {
        const C: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (j, wj) in w.iter_mut().enumerate() {
            let c = if j < 3 { C[j] } else if k - j < 3 { C[k - j] } else { 1.0 };
            *wj = c * h * (-2.0 * h * j as f64).exp();
        }
        return w;
    }
    for m in 0..k {
        let a = m as f64 * h;
        let ea = (-2.0 * a).exp();
        let eb = (-2.0 * (a + h)).exp();
        let diff = -ea * (-2.0 * h).exp_m1();
        let i0 = diff / 2.0;
        // ∫ₐᵇ (u − a) e^{−2u} du
        let i1 = -h * eb / 2.0 + diff / 4.0;
        w[m] += i0 - i1 / h;
        w[m + 1] += i1 / h;
    }
    w
}

/// `A` with `(A g)_k ≈ ∫₀^∞ e^{−2u} g(s_k − u) du`, including the constant
/// tail below the grid, and the largest defect `4·|A·1 − 1/2|` over rows.
fn shift_matrix(grid: &LogGrid) -> (DMatrix<f64>, f64) {
    let n = grid.n;
    let mut a = DMatrix::zeros(n, n);
    let mut defect: f64 = 0.0;
    for k in 0..n {
        let w = row_weights(k, grid.h);
        for (j, wj) in w.iter().enumerate() {
            a[(k, k - j)] += wj;
        }
        let tail = 0.5 * (-2.0 * grid.h * k as f64).exp();
        a[(k, 0)] += tail;
        let total: f64 = w.iter().sum::<f64>() + tail;
        defect = defect.max(4.0 * (total - 0.5).abs());
    }
    (a, defect)
}

/// Quadrature defect of the discretisation on `f ≡ 1`.
pub fn quadrature_defect(grid: &LogGrid) -> f64 {
    shift_matrix(grid).1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// `S(φᵢ)` on a grid, as its even and odd blocks on the positive
/// half-line; `None` stands for the identity block.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: LogGrid,
    pub which: u8,
    pub blocks: [Option<DMatrix<f64>>; 2],
    pub quadrature_defect: f64,
}

impl DiscreteOperator {
    pub fn identity(grid: LogGrid) -> Self {
        DiscreteOperator { grid, which: 0, blocks: [None, None], quadrature_defect: 0.0 }
    }

    pub fn block(&self, p: Parity) -> DMatrix<f64> {
        let n = self.grid.n;
        match &self.blocks[p as usize] {
            Some(b) => b.clone(),
            None => DMatrix::identity(n, n),
        }
    }

    /// The dense `2N × 2N` matrix in node order.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let (e, o) = (self.block(Parity::Even), self.block(Parity::Odd));
        let sum = (&e + &o) / 2.0;
        let diff = (&e - &o) / 2.0;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&sum);
        m.view_mut((n, n), (n, n)).copy_from(&sum);
        m.view_mut((0, n), (n, n)).copy_from(&diff);
        m.view_mut((n, 0), (n, n)).copy_from(&diff);
        m
    }

    /// Apply to grid values in node order.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n;
        if f.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: f.len() });
        }
        let even = DVector::from_fn(n, |k, _| (f[k] + f[n + k]) / 2.0);
        let odd = DVector::from_fn(n, |k, _| (f[k] - f[n + k]) / 2.0);
        let apply = |p: Parity, v: DVector<f64>| match &self.blocks[p as usize] {
            Some(b) => b * v,
            None => v,
        };
        let (e, o) = (apply(Parity::Even, even), apply(Parity::Odd, odd));
        let mut out: Vec<f64> = (0..n).map(|k| e[k] + o[k]).collect();
        out.extend((0..n).map(|k| e[k] - o[k]));
        Ok(out)
    }

    /// The sector in which the operator differs from the identity.
    pub fn active_parity(&self) -> Parity {
        if self.which == 2 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Assemble `S(φᵢ)`, `i ∈ {1, 2}`.
///
/// On even functions (`i = 1`) or odd functions (`i = 2`) the operator acts
/// as `f ↦ f − 4·exp(−x²/2)·∫₀^∞ e^{−2u} f(x e^{−u}) du`; on the opposite
/// parity the integral vanishes.
pub fn assemble_operator(which: u8, grid: &LogGrid) -> Result<DiscreteOperator> {
    if which != 1 && which != 2 {
        return Err(Error::BadParams(format!("operator index must be 1 or 2, got {which}")));
    }
    let (mut a, defect) = shift_matrix(grid);
    if defect > GRID_DEFECT_TOL {
        return Err(Error::GridTooCoarse { estimate: defect });
    }
    let n = grid.n;
    for k in 0..n {
        let x = grid.nodes[k];
        let c = 4.0 * (-x * x / 2.0).exp();
        a.row_mut(k).scale_mut(-c);
        a[(k, k)] += 1.0;
    }
    let blocks = if which == 1 { [Some(a), None] } else { [None, Some(a)] };
    Ok(DiscreteOperator { grid: grid.clone(), which, blocks, quadrature_defect: defect })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdPolicy {
    /// Only singular values below `relative_cutoff · σ_max` may be discarded.
    pub relative_cutoff: f64,
    /// Smallest accepted ratio across the chosen gap.
    pub min_gap: f64,
    /// Width in `s` of the boundary layers at `±L`.
    pub edge_width: f64,
    /// A null vector with more than this share of its mass in the boundary
    /// layers is a truncation artefact.
    pub max_edge_fraction: f64,
    /// Inverse-iteration sweeps for the near-null vectors.
    pub iterations: usize,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy { relative_cutoff: 1e-3, min_gap: 100.0, edge_width: 1.0, max_edge_fraction: 0.5, iterations: 6 }
    }
}

/// One discarded singular triple.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullMode {
    pub sigma: f64,
    pub parity: Parity,
    pub right_edge_fraction: f64,
    pub left_edge_fraction: f64,
    pub in_kernel: bool,
    pub in_cokernel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexResult {
    pub which: u8,
    pub l: f64,
    pub n: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub sing_vals_near_zero: Vec<f64>,
    pub threshold: f64,
    /// `σ_{k+1}/σ_k` across the chosen gap; `None` when nothing is discarded.
    pub gap_ratio: Option<f64>,
    pub sigma_max: f64,
    /// The ten smallest singular values, ascending.
    pub smallest: Vec<f64>,
    pub modes: Vec<NullMode>,
    /// Kernel vectors in node order, unit norm in `L²(dx/|x|)`.
    #[serde(skip)]
    pub kernel_vectors: Vec<Vec<f64>>,
    /// Left null vectors of the discarded modes that were classified as
    /// genuine, in node order.
    #[serde(skip)]
    pub cokernel_vectors: Vec<Vec<f64>>,
}

/// `D B D⁻¹` with `D = diag(√w)`: the block as an operator on `ℓ²`.
/// Subnormal entries (Gaussian tails) are flushed to zero; the SVD
/// produces NaNs on them.
fn weighted(b: &DMatrix<f64>, w: &[f64]) -> faer::Mat<f64> {
    let d: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    faer::Mat::from_fn(b.nrows(), b.ncols(), |i, j| {
        let v = d[i] * b[(i, j)] / d[j];
        if v.abs() < f64::MIN_POSITIVE {
            0.0
        } else {
            v
        }
    })
}

fn is_lower_triangular(m: &faer::Mat<f64>) -> bool {
    (0..m.ncols()).all(|j| (0..j).all(|i| m.read(i, j) == 0.0))
}

fn orthonormalize(x: &faer::Mat<f64>) -> faer::Mat<f64> {
    x.qr().compute_thin_q()
}

/// Right and left vectors of the `d` smallest singular values by subspace
/// inverse iteration, refined by a Rayleigh–Ritz step.
fn near_null(b: &faer::Mat<f64>, d: usize, iterations: usize) -> (Vec<f64>, faer::Mat<f64>, faer::Mat<f64>) {
    use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
    use faer::prelude::SpSolver;
    use faer::Parallelism;

    let n = b.nrows();
    let tri = is_lower_triangular(b);
    let lu = if tri { None } else { Some(b.partial_piv_lu()) };
    let solve = |x: &mut faer::Mat<f64>, transpose: bool| match (&lu, transpose) {
        (None, false) => solve_lower_triangular_in_place(b.as_ref(), x.as_mut(), Parallelism::None),
        (None, true) => solve_upper_triangular_in_place(b.transpose(), x.as_mut(), Parallelism::None),
        (Some(lu), false) => lu.solve_in_place(x.as_mut()),
        (Some(lu), true) => lu.solve_transpose_in_place(x.as_mut()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start = || orthonormalize(&faer::Mat::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0)));
    let (mut x, mut y) = (start(), start());
    for _ in 0..iterations {
        solve(&mut x, true);
        solve(&mut x, false);
        x = orthonormalize(&x);
        solve(&mut y, false);
        solve(&mut y, true);
        y = orthonormalize(&y);
    }
    let bx = b * &x;
    let rr = bx.thin_svd();
    let right = &x * rr.v();
    let bty = b.transpose() * &y;
    let rl = bty.thin_svd();
    let left = &y * rl.v();
    let s = rr.s_diagonal();
    // thin SVD returns descending values; report ascending.
    let order: Vec<usize> = (0..d).rev().collect();
    let sig = order.iter().map(|&k| s.read(k)).collect();
    let pick = |m: &faer::Mat<f64>| faer::Mat::from_fn(n, d, |i, j| m.read(i, order[j]));
    (sig, pick(&right), pick(&left))
}

/// Extend a positive-half vector (weighted coordinates) to node values with
/// the given parity, normalised in `L²(dx/|x|)`.
fn extend(grid: &LogGrid, v: &[f64], p: Parity) -> Vec<f64> {
    let w = grid.half_weights();
    let f: Vec<f64> = v.iter().zip(w).map(|(a, b)| a / b.sqrt()).collect();
    let norm = (2.0 * v.iter().map(|a| a * a).sum::<f64>()).sqrt();
    let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    let mut out: Vec<f64> = f.iter().map(|a| a * scale).collect();
    out.extend(f.iter().map(|a| p.sign() * a * scale));
    out
}

fn edge_fraction(grid: &LogGrid, v: &[f64], width: f64) -> f64 {
    let total: f64 = v.iter().map(|a| a * a).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge: f64 = v.iter().enumerate().filter(|(k, _)| grid.near_edge(*k, width)).map(|(_, a)| a * a).sum();
    edge / total
}

/// Fredholm index by a weighted SVD of the parity blocks.
///
/// Singular values below `relative_cutoff · σ_max` are candidates; the cut
/// is placed at the largest ratio jump among them and must exceed
/// `min_gap`. Each discarded triple contributes to the kernel when its right
/// vector lives in the interior, and to the cokernel when its left vector
/// does.
pub fn numerical_index(op: &DiscreteOperator, policy: &ThresholdPolicy) -> Result<IndexResult> {
    let grid = &op.grid;
    let n = grid.n;
    let w = grid.half_weights();
    let mut weighted_blocks: [Option<faer::Mat<f64>>; 2] = [None, None];
    let mut all: Vec<(f64, Parity)> = Vec::with_capacity(2 * n);
    for p in [Parity::Even, Parity::Odd] {
        match &op.blocks[p as usize] {
            Some(b) => {
                let bw = weighted(b, w);
                all.extend(bw.singular_values().into_iter().map(|s| (s, p)));
                weighted_blocks[p as usize] = Some(bw);
            }
            None => all.extend(std::iter::repeat((1.0, p)).take(n)),
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sigma_max = all.last().map_or(0.0, |x| x.0);
    let cut = policy.relative_cutoff * sigma_max;
    let candidates = all.iter().take_while(|x| x.0 < cut).count();
    let mut discarded = 0;
    let mut gap_ratio = None;
    let mut threshold = cut;
    if candidates > 0 {
        let mut best = (0usize, 0.0f64);
        for k in 0..candidates.min(all.len() - 1) {
            let ratio = if all[k].0 > 0.0 { all[k + 1].0 / all[k].0 } else { f64::INFINITY };
            if ratio > best.1 {
                best = (k, ratio);
            }
        }
        if best.1 < policy.min_gap {
            return Err(Error::GapTooSmall { ratio: best.1 });
        }
        discarded = best.0 + 1;
        gap_ratio = Some(best.1);
        let (lo, hi) = (all[best.0].0, all[best.0 + 1].0);
        threshold = if lo > 0.0 { (lo * hi).sqrt() } else { hi / policy.min_gap };
    }
    let mut modes = Vec::new();
    let mut kernel_vectors = Vec::new();
    let mut cokernel_vectors = Vec::new();
    for p in [Parity::Even, Parity::Odd] {
        let d = all[..discarded].iter().filter(|x| x.1 == p).count();
        if d == 0 {
            continue;
        }
        let bw = weighted_blocks[p as usize].as_ref().expect("identity blocks have no small singular values");
        let (sig, right, left) = near_null(bw, d, policy.iterations);
        for j in 0..d {
            let r: Vec<f64> = (0..n).map(|i| right.read(i, j)).collect();
            let l: Vec<f64> = (0..n).map(|i| left.read(i, j)).collect();
            let (fr, fl) = (edge_fraction(grid, &r, policy.edge_width), edge_fraction(grid, &l, policy.edge_width));
            let mode = NullMode {
                sigma: sig[j],
                parity: p,
                right_edge_fraction: fr,
                left_edge_fraction: fl,
                in_kernel: fr <= policy.max_edge_fraction,
                in_cokernel: fl <= policy.max_edge_fraction,
            };
            if mode.in_kernel {
                kernel_vectors.push(extend(grid, &r, p));
            }
            if mode.in_cokernel {
                cokernel_vectors.push(extend(grid, &l, p));
            }
            modes.push(mode);
        }
    }
    let (dim_ker, dim_coker) = (kernel_vectors.len(), cokernel_vectors.len());
    Ok(IndexResult {
        which: op.which,
        l: grid.l,
        n,
        dim_ker,
        dim_coker,
        index: dim_ker as i64 - dim_coker as i64,
        sing_vals_near_zero: all[..discarded].iter().map(|x| x.0).collect(),
        threshold,
        gap_ratio,
        sigma_max,
        smallest: all.iter().take(10).map(|x| x.0).collect(),
        modes,
        kernel_vectors,
        cokernel_vectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParityCheck {
    pub residual: f64,
    pub degenerate: bool,
    pub passes: bool,
}

/// Reflection residual `‖f(x) ∓ f(−x)‖ / ‖f‖` of vectors in node order:
/// even expected for `i = 1`, odd for `i = 2`. Zero vectors are flagged
/// degenerate with residual 0.
pub fn parity_check(vectors: &[Vec<f64>], which: u8) -> Vec<ParityCheck> {
    let sign = if which == 2 { -1.0 } else { 1.0 };
    vectors
        .iter()
        .map(|f| {
            let n = f.len() / 2;
            let norm = f.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return ParityCheck { residual: 0.0, degenerate: true, passes: false };
            }
            let res = (0..n).map(|k| (f[k] - sign * f[n + k]).powi(2)).sum::<f64>().sqrt() / norm;
            ParityCheck { residual: res, degenerate: false, passes: res < 1e-6 }
        })
        .collect()
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Samples of the kernel function on the positive half of a grid.
///
/// The kernel equation reduces to `F′ = (4·exp(−x²/2)/x)·F` for
/// `F(x) = ∫₀ˣ ξ f(ξ) dξ`, normalised by `F(1) = 1`, and `f = F′/x`. In
/// `s = ln x`: `ln F = 4∫₀ˢ exp(−e^{2σ}/2) dσ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub log_f: Vec<f64>,
    /// `ln(f·exp(x²/2))`, free of the Gaussian cancellation.
    pub log_f_reduced: Vec<f64>,
    /// Slope of `ln f` against `ln x` over the first decade of the grid.
    pub slope_near_zero: f64,
    /// Slope of `ln(f·exp(x²/2))` against `ln x` over the last decade.
    pub slope_near_infinity: f64,
    /// Relative spread of `f/x²` over the first decade.
    pub small_x_spread: f64,
    /// Relative spread of `f·x²·exp(x²/2)` over the last decade.
    pub large_x_spread: f64,
}

/// Least-squares slope and relative spread of `exp(y − slope·t)` for the
/// given expected slope.
fn decade_fit(t: &[f64], y: &[f64], expected: f64) -> (f64, f64) {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let var: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let r: Vec<f64> = t.iter().zip(y).map(|(a, b)| b - expected * a).collect();
    let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    (cov / var, (hi - lo).exp() - 1.0)
}

pub fn ode_kernel_oracle(grid: &LogGrid) -> Result<OracleReport> {
    let g = |sigma: f64| (-(2.0 * sigma).exp() / 2.0).exp();
    let tol = 1e-14;
    let s = &grid.s;
    let mut cum = Vec::with_capacity(s.len());
    let mut acc = simpson(&g, 0.0, s[0], tol);
    cum.push(acc);
    for k in 1..s.len() {
        acc += simpson(&g, s[k - 1], s[k], tol);
        cum.push(acc);
    }
    let ln4 = 4f64.ln();
    let log_f_reduced: Vec<f64> = s.iter().zip(&cum).map(|(sk, c)| ln4 + 4.0 * c - 2.0 * sk).collect();
    let x: Vec<f64> = grid.nodes[..grid.n].to_vec();
    let log_f: Vec<f64> = log_f_reduced.iter().zip(&x).map(|(r, xk)| r - xk * xk / 2.0).collect();
    let f: Vec<f64> = log_f.iter().map(|v| v.exp()).collect();

    let decade = 10f64.ln();
    let low: Vec<usize> = (0..s.len()).filter(|&k| s[k] <= -grid.l + decade).collect();
    let high: Vec<usize> = (0..s.len()).filter(|&k| s[k] >= grid.l - decade).collect();
    if low.len() < 2 || high.len() < 2 || grid.l < decade {
        return Err(Error::AsymptoticMismatch(format!("grid with L = {} does not resolve a full decade at either end", grid.l)));
    }
    let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let (slope_near_zero, small_x_spread) = decade_fit(&pick(&low, s), &pick(&low, &log_f), 2.0);
    let (slope_near_infinity, large_x_spread) = decade_fit(&pick(&high, s), &pick(&high, &log_f_reduced), -2.0);
    if (slope_near_zero - 2.0).abs() > 0.05 || small_x_spread > 0.05 {
        return Err(Error::AsymptoticMismatch(format!(
            "near 0: slope {slope_near_zero}, spread of f/x^2 {small_x_spread}"
        )));
    }
    if (slope_near_infinity + 2.0).abs() > 0.05 || large_x_spread > 0.05 {
        return Err(Error::AsymptoticMismatch(format!(
            "near infinity: slope {slope_near_infinity}, spread of f x^2 exp(x^2/2) {large_x_spread}"
        )));
    }
    Ok(OracleReport { x, f, log_f, log_f_reduced, slope_near_zero, slope_near_infinity, small_x_spread, large_x_spread })
}

impl OracleReport {
    /// Node values of the kernel function extended with the parity of
    /// `S(φ_which)`.
    pub fn extended(&self, which: u8) -> Vec<f64> {
        let sign = if which == 2 { -1.0 } else { 1.0 };
        let mut out = self.f.clone();
        out.extend(self.f.iter().map(|v| sign * v));
        out
    }
}

fn weighted_dot(grid: &LogGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
}

/// `‖S f‖ / ‖f‖` in `L²(dx/|x|)` for the oracle kernel function.
pub fn oracle_residual(op: &DiscreteOperator, oracle: &OracleReport) -> Result<f64> {
    let f = oracle.extended(op.which);
    let sf = op.apply(&f)?;
    Ok((weighted_dot(&op.grid, &sf, &sf) / weighted_dot(&op.grid, &f, &f)).sqrt())
}

/// `|⟨v, f⟩| / (‖v‖·‖f‖)` in `L²(dx/|x|)` on the positive half-line.
pub fn oracle_similarity(grid: &LogGrid, v: &[f64], oracle: &OracleReport) -> f64 {
    let w = grid.half_weights();
    let dot = |a: &[f64], b: &[f64]| w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum::<f64>();
    let v = &v[..grid.n];
    let denom = (dot(v, v) * dot(&oracle.f, &oracle.f)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dot(v, &oracle.f).abs() / denom
    }
}

/// Singular values (descending) of the non-identity part `I − S` on its
/// parity sector, in `ℓ²` coordinates.
///
/// Rows beyond the Gaussian cut-off are exactly zero; they are dropped
/// before the SVD (faer returns NaNs for such inputs) and contribute zeros.
pub fn compact_part_singular_values(op: &DiscreteOperator) -> Vec<f64> {
    let n = op.grid.n;
    let k = weighted(&(DMatrix::identity(n, n) - op.block(op.active_parity())), op.grid.half_weights());
    let rows: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| k.read(i, j) != 0.0)).collect();
    let mut s = faer::Mat::from_fn(rows.len(), n, |i, j| k.read(rows[i], j)).singular_values();
    s.resize(n, 0.0);
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// One rung of a refinement ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRung {
    pub l: f64,
    pub n: usize,
    pub result: std::result::Result<IndexResult, String>,
}

/// Index computations over a sequence of `(L, N)` grids.
pub fn index_ladder(which: u8, sizes: &[(f64, usize)], policy: &ThresholdPolicy) -> Vec<LadderRung> {
    sizes
        .iter()
        .map(|&(l, n)| {
            let result = build_grid(l, n)
                .and_then(|g| assemble_operator(which, &g))
                .and_then(|op| numerical_index(&op, policy))
                .map_err(|e| e.to_string());
            LadderRung { l, n, result }
        })
        .collect()
}

/// The default refinement ladder.
pub const LADDER: [(f64, usize); 3] = [(6.0, 1024), (8.0, 2048), (10.0, 4096)];

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LogGrid {
        build_grid(4.0, 512).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = build_grid(1.0, 2).unwrap();
        let e = 1f64.exp();
        assert_eq!(g.nodes.len(), 4);
        for (a, b) in g.nodes.iter().zip([1.0 / e, e, -1.0 / e, -e]) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = build_grid(8.0, 2048).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 32.0).abs() < 1e-10);
        assert!(g.weights.iter().all(|&w| w > 0.0));
        assert!((g.nodes[0] - 3.354626279e-4).abs() < 1e-12);
        assert!((g.nodes[g.n - 1] - 2980.957987).abs() < 1e-5);
        assert_eq!(g.nodes[g.n], -g.nodes[0]);
        assert!(build_grid(0.0, 16).is_err());
        assert!(build_grid(1.0, 1).is_err());
    }

    #[test]
    fn row_weights_integrate_exponential() {
        for k in [1, 3, 7, 8, 20, 300] {
            let h = 0.01;
            let w = row_weights(k, h);
            let exact = (1.0 - (-2.0 * h * k as f64).exp()) / 2.0;
            assert!((w.iter().sum::<f64>() - exact).abs() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = build_grid(8.0, 64).unwrap();
        assert!(matches!(assemble_operator(1, &g), Err(Error::GridTooCoarse { .. })));
        assert!(assemble_operator(3, &small()).is_err());
    }

    #[test]
    fn constant_function() {
        let g = small();
        let op = assemble_operator(1, &g).unwrap();
        let out = op.apply(&vec![1.0; 2 * g.n]).unwrap();
        for (y, x) in out.iter().zip(&g.nodes) {
            assert!((y - (1.0 - 2.0 * (-x * x / 2.0).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_parity_is_untouched() {
        let g = small();
        let even: Vec<f64> = g.nodes.iter().map(|x| (-x.abs()).exp() * (1.0 + x * x)).collect();
        let odd: Vec<f64> = g.nodes.iter().map(|x| x / (1.0 + x * x)).collect();
        assert_eq!(assemble_operator(2, &g).unwrap().apply(&even).unwrap(), even);
        assert_eq!(assemble_operator(1, &g).unwrap().apply(&odd).unwrap(), odd);
    }

    #[test]
    fn dense_matrix_commutes_with_reflection() {
        let g = build_grid(3.0, 200).unwrap();
        for i in [1, 2] {
            let op = assemble_operator(i, &g).unwrap();
            let m = op.matrix();
            let n = g.n;
            let r = DMatrix::from_fn(2 * n, 2 * n, |a, b| if (a + n) % (2 * n) == b { 1.0 } else { 0.0 });
            assert!((&r * &m * &r - &m).abs().max() < 1e-15);
            let f: Vec<f64> = g.nodes.iter().map(|x| (x * 0.7).sin() + x.cos()).collect();
            let dense = &m * DVector::from_vec(f.clone());
            let blocks = op.apply(&f).unwrap();
            assert!(dense.iter().zip(&blocks).all(|(a, b)| (a - b).abs() < 1e-12));
            // Rows only look at smaller |x|.
            let b = op.block(op.active_parity());
            assert!((0..n).all(|a| (a + 1..n).all(|c| b[(a, c)] == 0.0)));
        }
    }

    #[test]
    fn dense_svd_agrees_with_blocks() {
        let g = build_grid(3.0, 256).unwrap();
        let op = assemble_operator(1, &g).unwrap();
        let m = op.matrix();
        let d = DMatrix::from_fn(2 * g.n, 2 * g.n, |a, b| g.weights[a].sqrt() * m[(a, b)] / g.weights[b].sqrt());
        let dense = crate::linalg::singular_values(&d);
        let res = numerical_index(&op, &ThresholdPolicy::default()).unwrap();
        assert!((dense[dense.len() - 1] - res.smallest[0]).abs() < 1e-12);
        assert!((dense[0] - res.sigma_max).abs() < 1e-10);
    }

    #[test]
    fn identity_has_index_zero() {
        let r = numerical_index(&DiscreteOperator::identity(small()), &ThresholdPolicy::default()).unwrap();
        assert_eq!((r.dim_ker, r.dim_coker, r.index), (0, 0, 0));
        assert_eq!(r.gap_ratio, None);
    }

    #[test]
    fn gap_too_small_is_reported() {
        let g = build_grid(1.0, 4).unwrap();
        let mut b = DMatrix::identity(4, 4);
        b[(0, 0)] = 1e-5;
        b[(1, 1)] = 2e-5;
        let op = DiscreteOperator { grid: g, which: 1, blocks: [Some(b), None], quadrature_defect: 0.0 };
        let policy = ThresholdPolicy { min_gap: 1e6, ..Default::default() };
        assert!(matches!(numerical_index(&op, &policy), Err(Error::GapTooSmall { .. })));
    }

    #[test]
    fn index_one_on_small_grid() {
        let g = build_grid(6.0, 1024).unwrap();
        let oracle = ode_kernel_oracle(&g).unwrap();
        for i in [1, 2] {
            let op = assemble_operator(i, &g).unwrap();
            let r = numerical_index(&op, &ThresholdPolicy::default()).unwrap();
            assert_eq!((r.dim_ker, r.dim_coker, r.index), (1, 0, 1), "{r:?}");
            assert!(r.gap_ratio.unwrap() > 1e3);
            assert!(r.modes[0].left_edge_fraction > 0.9);
            let pc = parity_check(&r.kernel_vectors, i);
            assert!(pc[0].passes);
            assert!(oracle_similarity(&g, &r.kernel_vectors[0], &oracle) > 0.999);
        }
    }

    #[test]
    fn compact_part_decays_slowly() {
        // Convolution-type, not exponentially decaying.
        let op = assemble_operator(1, &build_grid(6.0, 1024).unwrap()).unwrap();
        let s = compact_part_singular_values(&op);
        assert!(s.iter().all(|v| v.is_finite()));
        let ratio = s[49] / s[0];
        assert!(ratio > 1e-3 && ratio < 0.1, "{ratio}");
    }

    #[test]
    fn parity_of_zero_vector_is_degenerate() {
        let pc = parity_check(&[vec![0.0; 8]], 1);
        assert!(pc[0].degenerate && pc[0].residual == 0.0);
        assert!(!parity_check(&[vec![1.0, 2.0, 1.0, 2.0]], 2)[0].passes);
    }

    #[test]
    fn oracle_asymptotics_and_residual() {
        let g = build_grid(8.0, 2048).unwrap();
        let o = ode_kernel_oracle(&g).unwrap();
        assert!((o.slope_near_zero - 2.0).abs() < 0.05);
        assert!((o.slope_near_infinity + 2.0).abs() < 0.05);
        for i in [1, 2] {
            let op = assemble_operator(i, &g).unwrap();
            assert!(oracle_residual(&op, &o).unwrap() < 1e-5);
        }
        assert!(matches!(ode_kernel_oracle(&build_grid(1.0, 64).unwrap()), Err(Error::AsymptoticMismatch(_))));
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = simpson(&|x: f64| x.exp(), 0.0, 2.0, 1e-13);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-12);
        assert_eq!(simpson(&|x: f64| x, 1.0, 1.0, 1e-12), 0.0);
    }
}
