//! Builtin algebras: the MD₄ normal forms, aff ℝ, aff ℂ, h₃ and abelian
//! algebras. MD₄ tables use the basis order `X, Y, Z, T` (indices 0–3).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use crate::error::{Error, Result};
use crate::family::{Md4Family, Md4Label, GENUINE};
use crate::lie::LieAlgebra;

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;
const T: usize = 3;
const XYZT: [&str; 4] = ["X", "Y", "Z", "T"];

/// Structure constants of a normal-form table.
pub fn md4_table(label: &Md4Label) -> Result<LieAlgebra> {
    let p = &label.params;
    let f = label.family;
    if p.len() != f.param_names().len() {
        return Err(Error::BadParams(format!("{f} needs {} parameter(s)", f.param_names().len())));
    }
    match f {
        Md4Family::G411 => LieAlgebra::from_brackets(&XYZT, &[(T, X, &[(Z, 1.0)])]),
        Md4Family::G412 => LieAlgebra::from_brackets(&XYZT, &[(T, Z, &[(Z, 1.0)])]),
        Md4Family::G421 => {
            LieAlgebra::from_brackets(&XYZT, &[(T, Y, &[(Y, p[0])]), (T, Z, &[(Z, 1.0)])])
        }
        Md4Family::G422 => {
            LieAlgebra::from_brackets(&XYZT, &[(T, Y, &[(Y, 1.0)]), (T, Z, &[(Y, 1.0), (Z, 1.0)])])
        }
        Md4Family::G423 => {
            let (c, s) = (p[0].cos(), p[0].sin());
            LieAlgebra::from_brackets(&XYZT, &[(T, Y, &[(Y, c), (Z, -s)]), (T, Z, &[(Y, s), (Z, c)])])
        }
        Md4Family::G424 => LieAlgebra::from_brackets(
            &XYZT,
            &[
                (X, Y, &[(Z, -1.0)]),
                (X, Z, &[(Y, 1.0)]),
                (T, Y, &[(Y, 1.0)]),
                (T, Z, &[(Z, 1.0)]),
            ],
        ),
        Md4Family::G431 => LieAlgebra::from_brackets(
            &XYZT,
            &[(T, X, &[(X, p[0])]), (T, Y, &[(Y, p[1])]), (T, Z, &[(Z, 1.0)])],
        ),
        Md4Family::G432 => LieAlgebra::from_brackets(
            &XYZT,
            &[(T, X, &[(X, p[0])]), (T, Y, &[(X, 1.0), (Y, p[0])]), (T, Z, &[(Z, 1.0)])],
        ),
        Md4Family::G433 => LieAlgebra::from_brackets(
            &XYZT,
            &[(T, X, &[(X, 1.0)]), (T, Y, &[(X, 1.0), (Y, 1.0)]), (T, Z, &[(Y, 1.0), (Z, 1.0)])],
        ),
        Md4Family::G434 => {
            let (c, s) = (p[1].cos(), p[1].sin());
            LieAlgebra::from_brackets(
                &XYZT,
                &[(T, X, &[(X, c), (Y, -s)]), (T, Y, &[(X, s), (Y, c)]), (T, Z, &[(Z, p[0])])],
            )
        }
        Md4Family::G441 => LieAlgebra::from_brackets(
            &XYZT,
            &[(T, X, &[(Y, -1.0)]), (T, Y, &[(X, 1.0)]), (X, Y, &[(Z, 1.0)])],
        ),
        Md4Family::G442 => LieAlgebra::from_brackets(
            &XYZT,
            &[(T, X, &[(X, -1.0)]), (T, Y, &[(Y, 1.0)]), (X, Y, &[(Z, 1.0)])],
        ),
        Md4Family::DecomposableRnPlus => Ok(LieAlgebra::abelian(4).with_labels(&XYZT)),
        Md4Family::NotMd4 | Md4Family::Unclassified => Err(Error::UnknownFamily(f.name().into())),
    }
}

/// Default fixture label for a family (parameters away from degenerate values).
pub fn default_label(family: Md4Family) -> Md4Label {
    let params: &[f64] = match family {
        Md4Family::G421 | Md4Family::G432 => &[2.0],
        Md4Family::G423 => &[FRAC_PI_3],
        Md4Family::G431 => &[2.0, 3.0],
        Md4Family::G434 => &[2.0, FRAC_PI_3],
        Md4Family::DecomposableRnPlus => return Md4Label::decomposable(4, "0"),
        _ => &[],
    };
    Md4Label::new(family, params).expect("default parameters are admissible")
}

/// The thirteen classification fixtures: twelve normal forms plus `ℝ⁴`.
pub fn md4_fixtures() -> Vec<(Md4Label, LieAlgebra)> {
    let mut out: Vec<(Md4Label, LieAlgebra)> = GENUINE
        .iter()
        .map(|&f| {
            let l = default_label(f);
            let g = md4_table(&l).expect("fixture tables are valid");
            (l, g)
        })
        .collect();
    out.push((default_label(Md4Family::DecomposableRnPlus), LieAlgebra::abelian(4).with_labels(&XYZT)));
    out
}

/// Fixtures for the exponentiality check, including the right-angle members
/// of the rotation families.
pub fn exponentiality_fixtures() -> Vec<(Md4Label, LieAlgebra, bool)> {
    let mut out = Vec::new();
    for &f in &GENUINE {
        let l = default_label(f);
        let expected = !matches!(f, Md4Family::G424 | Md4Family::G441);
        out.push((l.clone(), md4_table(&l).unwrap(), expected));
    }
    for l in [
        Md4Label::new(Md4Family::G423, &[FRAC_PI_2]).unwrap(),
        Md4Label::new(Md4Family::G434, &[2.0, FRAC_PI_2]).unwrap(),
        Md4Label::new(Md4Family::G434, &[-0.5, FRAC_PI_2]).unwrap(),
    ] {
        out.push((l.clone(), md4_table(&l).unwrap(), false));
    }
    out
}

/// aff ℝ: `[X, Y] = Y`.
pub fn aff_r() -> LieAlgebra {
    LieAlgebra::from_brackets(&["X", "Y"], &[(0, 1, &[(1, 1.0)])]).unwrap()
}

/// aff ℂ in the basis `X₁, X₂, Y₁, Y₂`.
pub fn aff_c() -> LieAlgebra {
    LieAlgebra::from_brackets(
        &["X1", "X2", "Y1", "Y2"],
        &[
            (0, 2, &[(2, 1.0)]),
            (0, 3, &[(3, 1.0)]),
            (1, 2, &[(3, 1.0)]),
            (1, 3, &[(2, -1.0)]),
        ],
    )
    .unwrap()
}

/// Heisenberg algebra `[X, Y] = Z`.
pub fn heisenberg() -> LieAlgebra {
    LieAlgebra::from_brackets(&["X", "Y", "Z"], &[(0, 1, &[(2, 1.0)])]).unwrap()
}

pub fn real_diamond() -> LieAlgebra {
    md4_table(&Md4Label::plain(Md4Family::G442)).unwrap()
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 20] = [
    "aff-r", "aff-c", "h3", "abelian3", "abelian4", "real-diamond", "r-semidirect-h3", "g411", "g412",
    "g421", "g422", "g423", "g424", "g431", "g432", "g433", "g434", "g441", "g442", "aff-r-plus-r2",
];

/// Look up a builtin algebra by name.
pub fn builtin(name: &str) -> Result<LieAlgebra> {
    Ok(match name {
        "aff-r" => aff_r(),
        "aff-c" => aff_c(),
        "h3" => heisenberg(),
        "abelian3" => LieAlgebra::abelian(3),
        "abelian4" => LieAlgebra::abelian(4),
        "real-diamond" => real_diamond(),
        "r-semidirect-h3" => md4_table(&Md4Label::plain(Md4Family::G441))?,
        "aff-r-plus-r2" => md4_table(&Md4Label::plain(Md4Family::G412))?,
        other => {
            let f = Md4Family::parse(other).map_err(|_| Error::UnknownFamily(other.into()))?;
            if !f.is_genuine() {
                return Err(Error::UnknownFamily(other.into()));
            }
            md4_table(&default_label(f))?
        }
    })
}
