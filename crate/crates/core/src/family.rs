//! Labels for the 4-dimensional MD families and their canonical parameters.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Md4Family {
    G411,
    G412,
    G421,
    G422,
    G423,
    G424,
    G431,
    G432,
    G433,
    G434,
    G441,
    G442,
    #[serde(rename = "decomposable")]
    DecomposableRnPlus,
    #[serde(rename = "not-md4")]
    NotMd4,
    #[serde(rename = "unclassified")]
    Unclassified,
}

/// The twelve normal-form tables. Together with the decomposable bucket
/// `ℝⁿ ⊕ g̃` they make up the thirteen MD₄ classes.
pub const GENUINE: [Md4Family; 12] = [
    Md4Family::G411,
    Md4Family::G412,
    Md4Family::G421,
    Md4Family::G422,
    Md4Family::G423,
    Md4Family::G424,
    Md4Family::G431,
    Md4Family::G432,
    Md4Family::G433,
    Md4Family::G434,
    Md4Family::G441,
    Md4Family::G442,
];

impl Md4Family {
    pub fn name(self) -> &'static str {
        match self {
            Md4Family::G411 => "g411",
            Md4Family::G412 => "g412",
            Md4Family::G421 => "g421",
            Md4Family::G422 => "g422",
            Md4Family::G423 => "g423",
            Md4Family::G424 => "g424",
            Md4Family::G431 => "g431",
            Md4Family::G432 => "g432",
            Md4Family::G433 => "g433",
            Md4Family::G434 => "g434",
            Md4Family::G441 => "g441",
            Md4Family::G442 => "g442",
            Md4Family::DecomposableRnPlus => "decomposable",
            Md4Family::NotMd4 => "not-md4",
            Md4Family::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(['_', ',', '{', '}'], "");
        let t = t.strip_prefix("g4").map(|r| format!("g4{r}")).unwrap_or(t);
        for f in GENUINE {
            if f.name() == t {
                return Ok(f);
            }
        }
        match t.as_str() {
            "decomposable" => Ok(Md4Family::DecomposableRnPlus),
            "not-md4" => Ok(Md4Family::NotMd4),
            "unclassified" => Ok(Md4Family::Unclassified),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }

    pub fn is_genuine(self) -> bool {
        GENUINE.contains(&self)
    }

    /// Names of the continuous parameters.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Md4Family::G421 | Md4Family::G432 => &["lambda"],
            Md4Family::G423 => &["phi"],
            Md4Family::G431 => &["lambda1", "lambda2"],
            Md4Family::G434 => &["lambda", "phi"],
            _ => &[],
        }
    }

    /// Topological type of the generic-orbit foliation (types 1–9).
    pub fn topological_type(self) -> Option<u8> {
        Some(match self {
            Md4Family::G411 => 1,
            Md4Family::G412 => 2,
            Md4Family::G421 | Md4Family::G422 => 3,
            Md4Family::G423 => 4,
            Md4Family::G424 => 5,
            Md4Family::G431 | Md4Family::G432 | Md4Family::G433 => 6,
            Md4Family::G434 => 7,
            Md4Family::G441 => 8,
            Md4Family::G442 => 9,
            _ => return None,
        })
    }
}

impl fmt::Display for Md4Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ℝⁿ ⊕ g̃` bookkeeping for decomposable algebras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub inner: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Md4Label {
    pub family: Md4Family,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Decomposition>,
}

/// Angles this close to π/2 are snapped to it in canonical form.
const RIGHT_ANGLE_SNAP: f64 = 1e-9;

impl Md4Label {
    pub fn new(family: Md4Family, params: &[f64]) -> Result<Self> {
        let want = family.param_names().len();
        if params.len() != want {
            return Err(Error::BadParams(format!(
                "{family} takes {want} parameter(s), got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::BadParams("parameters must be finite".into()));
        }
        let bad = |msg: &str| Err(Error::BadParams(format!("{family}: {msg}")));
        match family {
            Md4Family::G421 | Md4Family::G432 if params[0] == 0.0 => return bad("λ must be non-zero"),
            Md4Family::G431 if params[0] == 0.0 || params[1] == 0.0 => return bad("λ₁, λ₂ must be non-zero"),
            Md4Family::G423 if !(params[0] > 0.0 && params[0] < PI) => return bad("φ must lie in (0, π)"),
            Md4Family::G434 if params[0] == 0.0 => return bad("λ must be non-zero"),
            Md4Family::G434 if !(params[1] > 0.0 && params[1] < PI) => return bad("φ must lie in (0, π)"),
            _ => {}
        }
        Ok(Md4Label { family, params: params.to_vec(), decomposition: None })
    }

    pub fn plain(family: Md4Family) -> Self {
        Md4Label { family, params: Vec::new(), decomposition: None }
    }

    pub fn decomposable(n: usize, inner: &str) -> Self {
        Md4Label {
            family: Md4Family::DecomposableRnPlus,
            params: Vec::new(),
            decomposition: Some(Decomposition { n, inner: inner.to_string() }),
        }
    }

    /// Canonical representative of the isomorphism class.
    ///
    /// The tables admit symmetries that the classifier cannot see through:
    /// relabelling the eigen-directions (g421, g431) and replacing `T` by
    /// `−T` (g423, g434). The representative chosen is
    /// * g421: `min(λ, 1/λ)`;
    /// * g431: the lexicographically smallest pair among the six
    ///   normalisations of the eigenvalue triple `(λ₁, λ₂, 1)`;
    /// * g423: `φ ∈ (0, π/2]`;
    /// * g434: `φ ∈ (0, π/2]`, and `λ > 0` when `φ = π/2`.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        let p = &self.params;
        match self.family {
            Md4Family::G421 => out.params = vec![p[0].min(1.0 / p[0])],
            Md4Family::G431 => out.params = canonical_triple([p[0], p[1], 1.0]).to_vec(),
            Md4Family::G423 => {
                let phi = snap_right_angle(p[0]);
                out.params = vec![phi.min(PI - phi)];
            }
            Md4Family::G434 => {
                let (mut lambda, mut phi) = (p[0], snap_right_angle(p[1]));
                if phi > FRAC_PI_2 {
                    lambda = -lambda;
                    phi = PI - phi;
                }
                if phi == FRAC_PI_2 {
                    lambda = lambda.abs();
                }
                out.params = vec![lambda, phi];
            }
            _ => {}
        }
        out
    }

    /// Largest absolute parameter difference after canonicalisation, or
    /// `None` when the families differ.
    pub fn param_distance(&self, other: &Md4Label) -> Option<f64> {
        if self.family != other.family || self.params.len() != other.params.len() {
            return None;
        }
        let (a, b) = (self.canonical(), other.canonical());
        Some(a.params.iter().zip(&b.params).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }
}

fn snap_right_angle(phi: f64) -> f64 {
    if (phi - FRAC_PI_2).abs() < RIGHT_ANGLE_SNAP {
        FRAC_PI_2
    } else {
        phi
    }
}

/// Lexicographically smallest `(μ_a/μ_c, μ_b/μ_c)` over orderings of an
/// eigenvalue triple.
pub fn canonical_triple(mu: [f64; 3]) -> [f64; 2] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 0, 1], [1, 2, 0], [2, 1, 0]];
    let mut best: Option<[f64; 2]> = None;
    for p in PERMS {
        let cand = [mu[p[0]] / mu[p[2]], mu[p[1]] / mu[p[2]]];
        best = Some(match best {
            None => cand,
            Some(b) if (cand[0], cand[1]) < (b[0], b[1]) => cand,
            Some(b) => b,
        });
    }
    best.expect("six permutations")
}

impl fmt::Display for Md4Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if !self.params.is_empty() {
            let names = self.family.param_names();
            let parts: Vec<String> = names.iter().zip(&self.params).map(|(n, v)| format!("{n}={v:.6}")).collect();
            write!(f, "({})", parts.join(", "))?;
        }
        if let Some(d) = &self.decomposition {
            write!(f, " [R^{} + {}]", d.n, d.inner)?;
        }
        Ok(())
    }
}
