//! Coadjoint-orbit geometry of low-dimensional solvable Lie algebras and the
//! integer bookkeeping of their group C*-algebra index invariants.
//!
//! * [`lie`] — structure constants, brackets, adjoint matrices, `exp(ad)`.
//! * [`coadjoint`] — Kirillov form, orbit dimension, coadjoint flows.
//! * [`classify`] — MD̄ / MD₄ classification and exponentiality.
//! * [`atlas`] — closed-form orbit models, foliation distributions,
//!   polarization checks.
//! * [`kindex`] — Smith normal form, exactness, winding numbers, δ₀.
//! * [`fredholm`] — discretised Fredholm operators on `L²(ℝ*, dx/|x|)`.
//! * [`cli`] — report builders behind the `orbiton` binary.

pub mod atlas;
pub mod classify;
pub mod cli;
pub mod coadjoint;
pub mod error;
pub mod family;
pub mod fixtures;
pub mod fredholm;
pub mod kindex;
pub mod lie;
pub mod linalg;

pub use error::{Error, Result};
pub use family::{Md4Family, Md4Label};
pub use lie::{LieAlgebra, Vector};
pub use linalg::Subspace;
