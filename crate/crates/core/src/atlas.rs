//! Closed-form coadjoint orbit models for the MD₄ families, the polynomial
//! tangent distributions of their generic-orbit foliations, and real
//! polarization checks.
//!
//! Coordinates on `g*` are `(x, y, z, t)` in the dual basis `X*, Y*, Z*, T*`;
//! the base functional is `F = (α, β, γ, δ)`. Membership residuals are
//! scale-free: an equality `Σ terms = 0` contributes
//! `|Σ terms| / (1 + Σ |terms|)`, and a strict inequality `v > 0`
//! contributes the hinge `max(0, −v)`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coadjoint::{self, Functional, OrbitSample, SampleOptions};
use crate::error::{Error, Result};
use crate::family::{Md4Family, Md4Label, GENUINE};
use crate::fixtures;
use crate::lie::LieAlgebra;
use crate::linalg::{self, Subspace};

/// A coordinate of `F` counts as zero below `BOUNDARY_TOL · (1 + |F|)`.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Rotation angles with `|cos φ|` below this are treated as pure rotations.
const ROTATION_TOL: f64 = 1e-12;
/// Residual reported when a point lies on the wrong side of an exponential
/// branch (e.g. `y/β ≤ 0` on a curve `y = β e^s`).
const BRANCH_VIOLATION: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OrbitKind {
    Point,
    HalfPlane,
    Plane2D,
    Cylinder,
    Paraboloid,
    HyperbolicParaboloid,
    HyperbolicCylinder,
    OpenDense4D,
    ParamCurveCylinder,
}

impl OrbitKind {
    pub fn dim(self) -> usize {
        match self {
            OrbitKind::Point => 0,
            OrbitKind::OpenDense4D => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which algebra a model belongs to. aff ℝ is included so that its
/// half-plane orbits can serve polarization checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Md4(Md4Label),
    AffR,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitModel {
    pub kind: OrbitKind,
    pub base: Vec<f64>,
    /// `alpha, beta, gamma, delta` of the base plus the family parameters.
    pub predicate_coeffs: BTreeMap<String, f64>,
    pub family: ModelFamily,
    pub stratum: String,
}

/// A monomial `coeff · x^a y^b z^c t^d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: [u32; 4],
}

/// Real polynomial on `ℝ⁴`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        Poly::zero().plus(c, [0; 4])
    }

    /// `Σ c_i · coord_i`.
    pub fn linear(coeffs: &[(f64, usize)]) -> Self {
        coeffs.iter().fold(Poly::zero(), |p, &(c, i)| {
            let mut e = [0; 4];
            e[i] = 1;
            p.plus(c, e)
        })
    }

    pub fn plus(mut self, coeff: f64, powers: [u32; 4]) -> Self {
        if coeff != 0.0 {
            self.terms.push(Monomial { coeff, powers });
        }
        self
    }

    /// Values of the individual terms at `p`.
    pub fn term_values(&self, p: &[f64]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|m| m.coeff * (0..4).map(|i| p[i].powi(m.powers[i] as i32)).product::<f64>())
            .collect()
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.term_values(p).iter().sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.powers.iter().sum()).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `poly = 0`.
    Zero,
    /// `poly > 0`.
    Positive,
}

/// One defining condition of an orbit. Parametrised families carry only a
/// formula; polynomial conditions also carry their coefficient table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Predicate {
    pub relation: Relation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poly: Option<Poly>,
    pub formula: String,
}

fn norm4(f: &[f64]) -> f64 {
    f.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn is_zero(v: f64, fnorm: f64) -> bool {
    v.abs() < BOUNDARY_TOL * (1.0 + fnorm)
}

/// `|p − Σ terms| / (1 + |p| + Σ |terms|)`.
fn defect(p: f64, terms: &[f64]) -> f64 {
    let s: f64 = terms.iter().sum();
    let scale: f64 = 1.0 + p.abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
    (p - s).abs() / scale
}

/// Relative defect of `Σ terms = 0`.
fn eq_defect(terms: &[f64]) -> f64 {
    defect(0.0, terms)
}

fn hinge(v: f64) -> f64 {
    (-v).max(0.0)
}

/// Flow parameter `s` with `p = b · e^{rate·s}`, or `None` off the branch.
fn log_ratio(p: f64, b: f64, rate: f64) -> Option<f64> {
    let q = p / b;
    (q > 0.0 && q.is_finite()).then(|| q.ln() / rate)
}

/// Fit `p_k = b_k e^{r_k s}` for all `k` simultaneously, solving `s` from the
/// coordinate with the largest `|r_k b_k|`.
fn exp_fit(coords: &[(f64, f64, f64)]) -> f64 {
    let src = coords
        .iter()
        .filter(|c| c.1 != 0.0 && c.2 != 0.0)
        .max_by(|a, b| (a.1 * a.2).abs().total_cmp(&(b.1 * b.2).abs()));
    let Some(&(p, b, r)) = src else {
        return coords.iter().map(|c| defect(c.0, &[c.1])).fold(0.0, f64::max);
    };
    let Some(s) = log_ratio(p, b, r) else {
        return BRANCH_VIOLATION;
    };
    coords.iter().map(|&(p, b, r)| defect(p, &[b * (r * s).exp()])).fold(0.0, f64::max)
}

/// Residual of `w = w₀ · exp(s e^{iφ})` for some real `s` (complex
/// coordinates as pairs). `s_hint` overrides the modulus solve.
fn spiral_defect(w: (f64, f64), w0: (f64, f64), phi: f64, s_hint: Option<f64>) -> f64 {
    let (c, sn) = (phi.cos(), phi.sin());
    let m = (w.0 * w.0 + w.1 * w.1).sqrt();
    let m0 = (w0.0 * w0.0 + w0.1 * w0.1).sqrt();
    let s = match s_hint {
        Some(s) => s,
        None if c.abs() < ROTATION_TOL => {
            return eq_defect(&[w.0 * w.0, w.1 * w.1, -w0.0 * w0.0, -w0.1 * w0.1]);
        }
        None => {
            if m0 == 0.0 {
                return defect(m, &[0.0]);
            }
            match log_ratio(m, m0, c) {
                Some(s) => s,
                None => return BRANCH_VIOLATION,
            }
        }
    };
    let r = (s * c).exp();
    let (ca, sa) = ((s * sn).cos(), (s * sn).sin());
    let pred = (r * (w0.0 * ca - w0.1 * sa), r * (w0.0 * sa + w0.1 * ca));
    let d = ((w.0 - pred.0).powi(2) + (w.1 - pred.1).powi(2)).sqrt();
    d / (1.0 + m + (pred.0 * pred.0 + pred.1 * pred.1).sqrt())
}

fn coeff_map(base: &[f64], label: Option<&Md4Label>) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for (name, v) in ["alpha", "beta", "gamma", "delta"].iter().zip(base) {
        m.insert(name.to_string(), *v);
    }
    if let Some(l) = label {
        for (name, v) in l.family.param_names().iter().zip(&l.params) {
            m.insert(name.to_string(), *v);
        }
    }
    m
}

/// Orbit of `F = (α, β, γ, δ)` under the group of `label`.
pub fn orbit_model(label: &Md4Label, f: &Functional) -> Result<OrbitModel> {
    use Md4Family::*;
    if !label.family.is_genuine() {
        return Err(Error::UnknownFamily(label.family.name().into()));
    }
    if f.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: f.len() });
    }
    let base: Vec<f64> = f.iter().copied().collect();
    let n = norm4(&base);
    let z = |i: usize| is_zero(base[i], n);
    let (a0, b0, c0) = (z(0), z(1), z(2));
    let (kind, stratum) = match label.family {
        G411 if c0 => (OrbitKind::Point, "point"),
        G411 => (OrbitKind::Plane2D, "plane"),
        G412 if c0 => (OrbitKind::Point, "point"),
        G412 => (OrbitKind::HalfPlane, "half-plane"),
        G421 | G422 | G423 | G424 if b0 && c0 => (OrbitKind::Point, "point"),
        G421 | G422 | G423 => (OrbitKind::ParamCurveCylinder, "cylinder"),
        G424 => (OrbitKind::OpenDense4D, "open"),
        G431 | G432 | G433 | G434 if a0 && b0 && c0 => (OrbitKind::Point, "point"),
        G431 | G432 | G433 | G434 => (OrbitKind::ParamCurveCylinder, "cylinder"),
        G441 | G442 if a0 && b0 && c0 => (OrbitKind::Point, "point"),
        G441 if !c0 => (OrbitKind::Paraboloid, "paraboloid"),
        G441 => (OrbitKind::Cylinder, "cylinder"),
        G442 if !c0 => (OrbitKind::HyperbolicParaboloid, "hyperbolic-paraboloid"),
        G442 if b0 => (OrbitKind::HalfPlane, "half-plane-x"),
        G442 if a0 => (OrbitKind::HalfPlane, "half-plane-y"),
        G442 => (OrbitKind::HyperbolicCylinder, "hyperbolic-cylinder"),
        other => return Err(Error::UnknownFamily(other.name().into())),
    };
    Ok(OrbitModel {
        kind,
        predicate_coeffs: coeff_map(&base, Some(label)),
        base,
        family: ModelFamily::Md4(label.clone()),
        stratum: stratum.into(),
    })
}

/// Orbit of `F = (α, β)` for aff ℝ (`[X, Y] = Y`): the point `F` when
/// `β = 0`, otherwise the half-plane `β y > 0`.
pub fn aff_r_orbit_model(f: &Functional) -> Result<OrbitModel> {
    if f.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f.len() });
    }
    let base: Vec<f64> = f.iter().copied().collect();
    let (kind, stratum) =
        if is_zero(base[1], norm4(&base)) { (OrbitKind::Point, "point") } else { (OrbitKind::HalfPlane, "half-plane") };
    Ok(OrbitModel {
        kind,
        predicate_coeffs: coeff_map(&base, None),
        base,
        family: ModelFamily::AffR,
        stratum: stratum.into(),
    })
}

impl OrbitModel {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    fn label(&self) -> Option<&Md4Label> {
        match &self.family {
            ModelFamily::Md4(l) => Some(l),
            ModelFamily::AffR => None,
        }
    }

    /// Defining conditions with the base values substituted.
    pub fn predicates(&self) -> Vec<Predicate> {
        use Md4Family::*;
        let b = &self.base;
        let eq = |poly: Poly, formula: &str| Predicate { relation: Relation::Zero, poly: Some(poly), formula: formula.into() };
        let pos = |poly: Poly, formula: &str| Predicate { relation: Relation::Positive, poly: Some(poly), formula: formula.into() };
        let fixed = |i: usize| eq(Poly::linear(&[(1.0, i)]).plus(-b[i], [0; 4]), ["x = alpha", "y = beta", "z = gamma", "t = delta"][i]);
        let param = |formula: &str| Predicate { relation: Relation::Zero, poly: None, formula: formula.into() };
        if self.kind == OrbitKind::Point {
            return (0..b.len()).map(fixed).collect();
        }
        let Some(label) = self.label() else {
            return vec![pos(Poly::linear(&[(b[1], 1)]), "beta * y > 0")];
        };
        match (label.family, self.kind) {
            (G411, _) => vec![fixed(1), fixed(2)],
            (G412, _) => vec![fixed(0), fixed(1), pos(Poly::linear(&[(b[2], 2)]), "gamma * z > 0")],
            (G421, _) => vec![fixed(0), param("(y, z) = (beta e^{lambda s}, gamma e^s), s real")],
            (G422, _) => vec![fixed(0), param("(y, z) = (beta e^s, (beta s + gamma) e^s), s real")],
            (G423, _) => vec![fixed(0), param("y + i z = (beta + i gamma) exp(s e^{i phi}), s real")],
            (G424, _) => vec![pos(Poly::zero().plus(1.0, [0, 2, 0, 0]).plus(1.0, [0, 0, 2, 0]), "y^2 + z^2 > 0")],
            (G431, _) => vec![param("(x, y, z) = (alpha e^{lambda1 s}, beta e^{lambda2 s}, gamma e^s), s real")],
            (G432, _) => vec![param("(x, y, z) = (alpha e^{lambda s}, (alpha s + beta) e^{lambda s}, gamma e^s), s real")],
            (G433, _) => vec![param("(x, y, z) = (alpha, alpha s + beta, alpha s^2/2 + beta s + gamma) e^s, s real")],
            (G434, _) => vec![param("x + i y = (alpha + i beta) exp(s e^{i phi}), z = gamma e^{lambda s}, s real")],
            (G441, OrbitKind::Paraboloid) => vec![
                fixed(2),
                eq(
                    Poly::zero()
                        .plus(1.0, [2, 0, 0, 0])
                        .plus(1.0, [0, 2, 0, 0])
                        .plus(-2.0 * b[2], [0, 0, 0, 1])
                        .plus(-(b[0] * b[0] + b[1] * b[1] - 2.0 * b[2] * b[3]), [0; 4]),
                    "x^2 + y^2 - 2 gamma t = alpha^2 + beta^2 - 2 gamma delta",
                ),
            ],
            (G441, _) => vec![
                fixed(2),
                eq(
                    Poly::zero().plus(1.0, [2, 0, 0, 0]).plus(1.0, [0, 2, 0, 0]).plus(-(b[0] * b[0] + b[1] * b[1]), [0; 4]),
                    "x^2 + y^2 = alpha^2 + beta^2",
                ),
            ],
            (G442, OrbitKind::HyperbolicParaboloid) => vec![
                fixed(2),
                eq(
                    Poly::zero()
                        .plus(1.0, [1, 1, 0, 0])
                        .plus(-b[2], [0, 0, 0, 1])
                        .plus(-(b[0] * b[1] - b[2] * b[3]), [0; 4]),
                    "x y - alpha beta = gamma (t - delta)",
                ),
            ],
            (G442, OrbitKind::HalfPlane) if self.stratum == "half-plane-x" => vec![
                fixed(2),
                eq(Poly::linear(&[(1.0, 1)]), "y = 0"),
                pos(Poly::linear(&[(b[0], 0)]), "alpha * x > 0"),
            ],
            (G442, OrbitKind::HalfPlane) => vec![
                fixed(2),
                eq(Poly::linear(&[(1.0, 0)]), "x = 0"),
                // The sign condition is implied by connectedness of the orbit.
                pos(Poly::linear(&[(b[1], 1)]), "beta * y > 0"),
            ],
            (G442, _) => vec![
                fixed(2),
                eq(Poly::zero().plus(1.0, [1, 1, 0, 0]).plus(-b[0] * b[1], [0; 4]), "x y = alpha beta"),
                pos(Poly::linear(&[(b[0], 0)]), "alpha * x > 0"),
                pos(Poly::linear(&[(b[1], 1)]), "beta * y > 0"),
            ],
            (f, _) => vec![param(&format!("no model for {f}"))],
        }
    }
}

/// Membership residual of `p` in the orbit described by `model`; 0 means
/// member. Polynomial conditions are evaluated through [`OrbitModel::predicates`],
/// parametrised curves by solving for the flow parameter.
pub fn orbit_membership(model: &OrbitModel, p: &Functional) -> f64 {
    use Md4Family::*;
    if p.len() != model.base.len() {
        return f64::INFINITY;
    }
    let b = &model.base;
    let mut q: Vec<f64> = p.iter().copied().collect();
    q.resize(4, 0.0);
    let (x, y, z) = (q[0], q[1], q[2]);
    let from_predicates = || {
        model
            .predicates()
            .iter()
            .map(|pr| {
                let poly = pr.poly.as_ref().expect("polynomial predicate");
                let terms = poly.term_values(&q);
                match pr.relation {
                    Relation::Zero => eq_defect(&terms),
                    Relation::Positive => hinge(terms.iter().sum()),
                }
            })
            .fold(0.0, f64::max)
    };
    let Some(label) = model.label() else {
        return from_predicates();
    };
    if model.kind == OrbitKind::Point {
        return from_predicates();
    }
    let pr = &label.params;
    let (al, be, ga) = (b[0], b[1], b[2]);
    match label.family {
        G421 => defect(x, &[al]).max(exp_fit(&[(y, be, pr[0]), (z, ga, 1.0)])),
        G422 => {
            let s = if be != 0.0 { log_ratio(y, be, 1.0) } else { log_ratio(z, ga, 1.0) };
            let Some(s) = s else { return BRANCH_VIOLATION };
            let e = s.exp();
            defect(x, &[al]).max(defect(y, &[be * e])).max(defect(z, &[be * s * e, ga * e]))
        }
        G423 => defect(x, &[al]).max(spiral_defect((y, z), (be, ga), pr[0], None)),
        G431 => exp_fit(&[(x, al, pr[0]), (y, be, pr[1]), (z, ga, 1.0)]),
        G432 => {
            let lam = pr[0];
            let s = if (ga * 1.0).abs() >= (al * lam).abs() && ga != 0.0 {
                log_ratio(z, ga, 1.0)
            } else if al != 0.0 {
                log_ratio(x, al, lam)
            } else {
                log_ratio(y, be, lam)
            };
            let Some(s) = s else { return BRANCH_VIOLATION };
            let (e, el) = (s.exp(), (lam * s).exp());
            defect(x, &[al * el]).max(defect(y, &[al * s * el, be * el])).max(defect(z, &[ga * e]))
        }
        G433 => {
            let s = if al != 0.0 {
                log_ratio(x, al, 1.0)
            } else if be != 0.0 {
                log_ratio(y, be, 1.0)
            } else {
                log_ratio(z, ga, 1.0)
            };
            let Some(s) = s else { return BRANCH_VIOLATION };
            let e = s.exp();
            defect(x, &[al * e])
                .max(defect(y, &[al * s * e, be * e]))
                .max(defect(z, &[0.5 * al * s * s * e, be * s * e, ga * e]))
        }
        G434 => {
            let (lam, phi) = (pr[0], pr[1]);
            let m0 = (al * al + be * be).sqrt();
            let rot_score = phi.cos().abs() * m0;
            let z_score = (lam * ga).abs();
            if z_score > rot_score {
                let Some(s) = log_ratio(z, ga, lam) else { return BRANCH_VIOLATION };
                spiral_defect((x, y), (al, be), phi, Some(s)).max(defect(z, &[ga * (lam * s).exp()]))
            } else if phi.cos().abs() >= ROTATION_TOL {
                let m = (x * x + y * y).sqrt();
                let Some(s) = log_ratio(m, m0, phi.cos()) else { return BRANCH_VIOLATION };
                spiral_defect((x, y), (al, be), phi, Some(s)).max(defect(z, &[ga * (lam * s).exp()]))
            } else {
                // Pure rotation with γ = 0: a circle in the (x, y)-plane.
                spiral_defect((x, y), (al, be), phi, None).max(defect(z, &[ga]))
            }
        }
        G424 => {
            if y == 0.0 && z == 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => from_predicates(),
    }
}

/// A polynomial vector field on `ℝ⁴`, one polynomial per component.
pub type VectorField = [Poly; 4];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionSpec {
    pub family: Md4Label,
    pub fields: Vec<VectorField>,
}

/// Tangent distribution of the generic-orbit foliation of `label`.
///
/// Each field is the infinitesimal coadjoint action of one basis element
/// on the leaf through `(x, y, z, t)`. For the `2.x` and `3.x` systems the
/// `t`-component fields are the ones whose sign and placement the printed
/// source garbles; they are fixed here by that derivation.
pub fn distribution_spec(label: &Md4Label) -> Result<DistributionSpec> {
    use Md4Family::*;
    const XC: usize = 0;
    const YC: usize = 1;
    const ZC: usize = 2;
    const TC: usize = 3;
    let o = Poly::zero;
    let l = Poly::linear;
    let p = &label.params;
    let t_only = |poly: Poly| -> VectorField { [o(), o(), o(), poly] };
    let fields: Vec<VectorField> = match label.family {
        G411 => vec![[l(&[(1.0, XC)]), o(), o(), o()], t_only(l(&[(-1.0, ZC)]))],
        G412 => vec![[o(), o(), l(&[(1.0, ZC)]), o()], t_only(l(&[(-1.0, ZC)]))],
        G421 => vec![
            [o(), l(&[(p[0], YC)]), l(&[(1.0, ZC)]), o()],
            t_only(l(&[(-p[0], YC)])),
            t_only(l(&[(-1.0, ZC)])),
        ],
        G422 => vec![
            [o(), l(&[(1.0, YC)]), l(&[(1.0, YC), (1.0, ZC)]), o()],
            t_only(l(&[(-1.0, YC)])),
            t_only(l(&[(-1.0, YC), (-1.0, ZC)])),
        ],
        G423 => {
            let (c, s) = (p[0].cos(), p[0].sin());
            vec![
                [o(), l(&[(c, YC), (-s, ZC)]), l(&[(s, YC), (c, ZC)]), o()],
                t_only(l(&[(-c, YC), (s, ZC)])),
                t_only(l(&[(-s, YC), (-c, ZC)])),
            ]
        }
        G424 => vec![
            t_only(Poly::constant(1.0)),
            [Poly::constant(1.0), o(), o(), o()],
            [o(), l(&[(1.0, YC)]), l(&[(1.0, ZC)]), o()],
            [o(), l(&[(-1.0, ZC)]), l(&[(1.0, YC)]), o()],
        ],
        G431 => vec![
            [l(&[(p[0], XC)]), l(&[(p[1], YC)]), l(&[(1.0, ZC)]), o()],
            t_only(l(&[(-p[0], XC)])),
            t_only(l(&[(-p[1], YC)])),
            t_only(l(&[(-1.0, ZC)])),
        ],
        G432 => vec![
            [l(&[(p[0], XC)]), l(&[(1.0, XC), (p[0], YC)]), l(&[(1.0, ZC)]), o()],
            t_only(l(&[(-p[0], XC)])),
            t_only(l(&[(-1.0, XC), (-p[0], YC)])),
            t_only(l(&[(-1.0, ZC)])),
        ],
        G433 => vec![
            [l(&[(1.0, XC)]), l(&[(1.0, XC), (1.0, YC)]), l(&[(1.0, YC), (1.0, ZC)]), o()],
            t_only(l(&[(-1.0, XC)])),
            t_only(l(&[(-1.0, XC), (-1.0, YC)])),
            t_only(l(&[(-1.0, YC), (-1.0, ZC)])),
        ],
        G434 => {
            let (lam, c, s) = (p[0], p[1].cos(), p[1].sin());
            vec![
                [l(&[(c, XC), (-s, YC)]), l(&[(s, XC), (c, YC)]), l(&[(lam, ZC)]), o()],
                t_only(l(&[(-c, XC), (s, YC)])),
                t_only(l(&[(-s, XC), (-c, YC)])),
                t_only(l(&[(-lam, ZC)])),
            ]
        }
        G441 => vec![
            [l(&[(-1.0, YC)]), l(&[(1.0, XC)]), o(), o()],
            [o(), l(&[(1.0, ZC)]), o(), l(&[(1.0, YC)])],
            [l(&[(-1.0, ZC)]), o(), o(), l(&[(-1.0, XC)])],
        ],
        G442 => vec![
            [l(&[(-1.0, XC)]), l(&[(1.0, YC)]), o(), o()],
            [o(), l(&[(1.0, ZC)]), o(), l(&[(1.0, XC)])],
            [l(&[(-1.0, ZC)]), o(), o(), l(&[(-1.0, YC)])],
        ],
        other => return Err(Error::UnknownFamily(other.name().into())),
    };
    let _ = TC;
    Ok(DistributionSpec { family: label.clone(), fields })
}

impl DistributionSpec {
    /// Field values at `p`, one column per field.
    pub fn values_at(&self, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(4, self.fields.len(), |r, c| self.fields[c][r].eval(p))
    }

    /// Rank the distribution is expected to have on the foliated manifold.
    pub fn expected_rank(&self) -> usize {
        if self.family.family == Md4Family::G424 {
            4
        } else {
            2
        }
    }
}

pub fn distribution_rank_at(spec: &DistributionSpec, p: &[f64]) -> usize {
    linalg::numerical_rank(&spec.values_at(p), 0.0)
}

/// Largest relative distance `‖v − Pv‖ / max(‖v‖, 1)` between the
/// central-difference orbit tangents at the sample points and the span of
/// the distribution's fields there.
pub fn check_tangency(g: &LieAlgebra, spec: &DistributionSpec, sample: &OrbitSample, step: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..sample.points.len() {
        let p = sample.point(i);
        if coadjoint::orbit_dimension(g, &p)? == 0 {
            return Err(Error::StratumMismatch { index: i });
        }
        let tangents = coadjoint::tangent_vectors_fd(g, &p, step)?;
        let span = Subspace::span(&spec.values_at(p.as_slice()), 0.0);
        for v in tangents.column_iter() {
            let v = v.into_owned();
            worst = worst.max(span.residual(&v) / v.norm().max(1.0));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PolarizationResiduals {
    pub closure: f64,
    pub stabilizer: f64,
    pub isotropy: f64,
    pub pukanszky: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarizationReport {
    pub is_subalgebra: bool,
    pub contains_stabilizer: bool,
    pub isotropic: bool,
    pub codim_ok: bool,
    /// `None` when no orbit model was supplied.
    pub pukanszky_sampled: Option<bool>,
    pub pukanszky_samples: usize,
    pub codim: usize,
    pub orbit_dim: usize,
    pub residuals: PolarizationResiduals,
}

impl PolarizationReport {
    pub fn passes(&self) -> bool {
        self.is_subalgebra
            && self.contains_stabilizer
            && self.isotropic
            && self.codim_ok
            && self.pukanszky_sampled != Some(false)
    }
}

/// Number of points of `F + h^⊥` tested against the orbit model.
pub const PUKANSZKY_SAMPLES: usize = 100;
const POLARIZATION_TOL: f64 = 1e-8;
const PUKANSZKY_SEED: u64 = 0x5eed_9017;

/// Real polarization tests for `h` at `F`: subalgebra, contains the
/// stabilizer, isotropic, half-dimensional codimension, and (given an orbit
/// model) the Pukanszky condition `F + h^⊥ ⊆ Ω_F` on sampled points.
pub fn check_polarization(
    g: &LieAlgebra,
    f: &Functional,
    h: &Subspace,
    orbit: Option<&OrbitModel>,
) -> Result<PolarizationReport> {
    let n = g.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if h.ambient() != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.ambient() });
    }
    let scale = g.structure_norm().max(1.0);
    let mut res = PolarizationResiduals::default();
    for i in 0..h.dim() {
        for j in i + 1..h.dim() {
            let br = g.bracket(&h.vector(i), &h.vector(j))?;
            res.closure = res.closure.max(h.residual(&br) / scale);
            res.isotropy = res.isotropy.max(f.dot(&br).abs() / (scale * (1.0 + f.norm())));
        }
    }
    let stab = coadjoint::stabilizer_algebra(g, f)?;
    res.stabilizer = h.containment_residual(&stab);
    let orbit_dim = coadjoint::orbit_dimension(g, f)?;
    let codim = n - h.dim();

    let (pukanszky_sampled, pukanszky_samples) = match orbit {
        None => (None, 0),
        Some(model) => {
            let perp = h.annihilator();
            let mut rng = ChaCha8Rng::seed_from_u64(PUKANSZKY_SEED);
            for k in 0..PUKANSZKY_SAMPLES {
                let mut p = f.clone();
                // The first sample is F itself.
                if k > 0 {
                    for c in 0..perp.dim() {
                        p += perp.vector(c) * rng.gen_range(-2.0..2.0);
                    }
                }
                res.pukanszky = res.pukanszky.max(orbit_membership(model, &p));
            }
            (Some(res.pukanszky < POLARIZATION_TOL), PUKANSZKY_SAMPLES)
        }
    };
    Ok(PolarizationReport {
        is_subalgebra: res.closure < POLARIZATION_TOL,
        contains_stabilizer: res.stabilizer < POLARIZATION_TOL,
        isotropic: res.isotropy < POLARIZATION_TOL,
        codim_ok: 2 * codim == orbit_dim,
        pukanszky_sampled,
        pukanszky_samples,
        codim,
        orbit_dim,
        residuals: res,
    })
}

/// One stratum of a family's orbit picture: which of `α, β, γ` vanish.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumSpec {
    pub name: String,
    pub kind: OrbitKind,
    /// `[α = 0, β = 0, γ = 0]`.
    pub zero: [bool; 3],
    pub condition: String,
}

fn stratum(name: &str, kind: OrbitKind, zero: [bool; 3], condition: &str) -> StratumSpec {
    StratumSpec { name: name.into(), kind, zero, condition: condition.into() }
}

/// Strata of the orbit picture, including degenerate sub-cases of the
/// parametrised cylinders (some of `α, β, γ` zero but not all).
pub fn strata(family: Md4Family) -> Result<Vec<StratumSpec>> {
    use Md4Family::*;
    use OrbitKind::*;
    let (f, t) = (false, true);
    Ok(match family {
        G411 => vec![stratum("point", Point, [f, f, t], "gamma = 0"), stratum("plane", Plane2D, [f; 3], "gamma != 0")],
        G412 => vec![stratum("point", Point, [f, f, t], "gamma = 0"), stratum("half-plane", HalfPlane, [f; 3], "gamma != 0")],
        G421 | G422 | G423 => vec![
            stratum("point", Point, [f, t, t], "beta = gamma = 0"),
            stratum("cylinder", ParamCurveCylinder, [f; 3], "beta != 0, gamma != 0"),
            stratum("cylinder", ParamCurveCylinder, [f, t, f], "beta = 0, gamma != 0"),
            stratum("cylinder", ParamCurveCylinder, [f, f, t], "beta != 0, gamma = 0"),
        ],
        G424 => vec![
            stratum("point", Point, [f, t, t], "beta = gamma = 0"),
            stratum("open", OpenDense4D, [f; 3], "beta^2 + gamma^2 != 0"),
            stratum("open", OpenDense4D, [f, t, f], "beta = 0, gamma != 0"),
        ],
        G431 | G432 | G433 | G434 => vec![
            stratum("point", Point, [t, t, t], "alpha = beta = gamma = 0"),
            stratum("cylinder", ParamCurveCylinder, [f; 3], "alpha, beta, gamma != 0"),
            stratum("cylinder", ParamCurveCylinder, [t, f, f], "alpha = 0"),
            stratum("cylinder", ParamCurveCylinder, [f, t, f], "beta = 0"),
            stratum("cylinder", ParamCurveCylinder, [f, f, t], "gamma = 0"),
            stratum("cylinder", ParamCurveCylinder, [t, t, f], "alpha = beta = 0"),
        ],
        G441 => vec![
            stratum("point", Point, [t, t, t], "alpha = beta = gamma = 0"),
            stratum("paraboloid", Paraboloid, [f; 3], "gamma != 0"),
            stratum("cylinder", Cylinder, [f, f, t], "gamma = 0, alpha^2 + beta^2 != 0"),
        ],
        G442 => vec![
            stratum("point", Point, [t, t, t], "alpha = beta = gamma = 0"),
            stratum("hyperbolic-paraboloid", HyperbolicParaboloid, [f; 3], "gamma != 0"),
            stratum("half-plane-x", HalfPlane, [f, t, t], "beta = gamma = 0, alpha != 0"),
            stratum("half-plane-y", HalfPlane, [t, f, t], "alpha = gamma = 0, beta != 0"),
            stratum("hyperbolic-cylinder", HyperbolicCylinder, [f, f, t], "gamma = 0, alpha beta != 0"),
        ],
        other => return Err(Error::UnknownFamily(other.name().into())),
    })
}

/// Random base functional in a stratum: non-zero coordinates have modulus
/// in `[0.5, 1.5]` and random sign; `δ` is uniform in `[−1.5, 1.5]`.
pub fn random_base<R: Rng>(spec: &StratumSpec, rng: &mut R) -> Functional {
    let mut v = [0.0; 4];
    for i in 0..3 {
        if !spec.zero[i] {
            let m: f64 = rng.gen_range(0.5..1.5);
            v[i] = if rng.gen_bool(0.5) { m } else { -m };
        }
    }
    v[3] = rng.gen_range(-1.5..1.5);
    Functional::from_row_slice(&v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumReport {
    pub family: String,
    pub stratum: String,
    pub condition: String,
    pub kind: OrbitKind,
    pub bases: usize,
    pub samples_per_base: usize,
    pub max_residual: f64,
    /// Every base had `rank B_F` equal to the model dimension and the
    /// expected kind.
    pub dims_consistent: bool,
}

impl StratumReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.dims_consistent && self.max_residual < tol
    }
}

/// Sample orbits of random bases in every stratum of `label` and measure
/// membership against the closed-form models.
pub fn atlas_check(label: &Md4Label, bases: usize, samples: usize, seed: u64) -> Result<Vec<StratumReport>> {
    let g = fixtures::md4_table(label)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for spec in strata(label.family)? {
        let mut worst: f64 = 0.0;
        let mut dims_ok = true;
        for _ in 0..bases {
            let f = random_base(&spec, &mut rng);
            let model = orbit_model(label, &f)?;
            dims_ok &= model.kind == spec.kind && model.dim() == coadjoint::orbit_dimension(&g, &f)?;
            let opts = SampleOptions { n: samples, step_scale: 1.0, word_len: None, seed: rng.gen() };
            let sample = coadjoint::sample_orbit_with(&g, &f, &opts)?;
            for i in 0..sample.points.len() {
                worst = worst.max(orbit_membership(&model, &sample.point(i)));
            }
        }
        out.push(StratumReport {
            family: label.family.name().into(),
            stratum: spec.name.clone(),
            condition: spec.condition.clone(),
            kind: spec.kind,
            bases,
            samples_per_base: samples,
            max_residual: worst,
            dims_consistent: dims_ok,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct StratumExport {
    #[serde(flatten)]
    pub spec: StratumSpec,
    pub dim: usize,
    pub example_base: Vec<f64>,
    pub predicates: Vec<Predicate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyAtlas {
    pub label: Md4Label,
    pub topological_type: Option<u8>,
    pub strata: Vec<StratumExport>,
    pub distribution: DistributionSpec,
}

/// JSON-ready description of one family: strata, model kinds, predicates
/// for a representative base of each stratum, and the distribution.
pub fn family_atlas(label: &Md4Label, seed: u64) -> Result<FamilyAtlas> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for spec in strata(label.family)? {
        let f = random_base(&spec, &mut rng);
        let model = orbit_model(label, &f)?;
        out.push(StratumExport { dim: spec.kind.dim(), example_base: model.base.clone(), predicates: model.predicates(), spec });
    }
    Ok(FamilyAtlas {
        label: label.clone(),
        topological_type: label.family.topological_type(),
        strata: out,
        distribution: distribution_spec(label)?,
    })
}

/// Atlases of all twelve default normal forms.
pub fn full_atlas(seed: u64) -> Result<Vec<FamilyAtlas>> {
    GENUINE.iter().map(|&f| family_atlas(&fixtures::default_label(f), seed)).collect()
}
