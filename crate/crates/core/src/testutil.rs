//! Shared helpers for the crate's unit tests.

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg;
use crate::qmi::{CenterFormQmi, QmiSet};

/// Random nonempty QMI set with a positive definite shape matrix, built from
/// a random center form.
pub(crate) fn random_set<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> QmiSet {
    let g = linalg::uniform_matrix(n + m, n + m, -1.0, 1.0, rng);
    let abold =
        linalg::symmetrize(&(&g * g.transpose())) + DMatrix::<f64>::identity(n + m, n + m) * 0.3;
    let zeta = linalg::uniform_matrix(n + m, n, -1.0, 1.0, rng);
    let h = linalg::uniform_matrix(n, n, -1.0, 1.0, rng);
    let q = linalg::symmetrize(&(&h * h.transpose())) * 0.3;
    CenterFormQmi { abold, zeta, q }.to_qmi_set()
}
