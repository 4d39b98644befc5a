//! Shared helpers for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

/// Random invertible matrix with 2-norm condition number at most `max_cond`.
pub fn random_gl<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let s = orbiton::linalg::singular_values(&m);
        let (hi, lo) = (s[0], s[n - 1]);
        if lo > 0.0 && hi / lo <= max_cond {
            return m;
        }
    }
}
