//! Quadratic-matrix-inequality parameterized sets of systems.
//!
//! A set of system pairs `Z = [A B]^T` is described by the inequality
//!
//! ```text
//! Cb + Bb^T Z + Z^T Bb + Z^T Ab Z <= 0        (PSD order)
//! ```
//!
//! with `Ab > 0` and `Bb^T Ab^{-1} Bb - Cb >= 0` (nonempty set). The same set
//! can be written as a matrix ellipsoid around its center,
//! `(Z - zeta)^T Ab (Z - zeta) <= Q` with `zeta = -Ab^{-1} Bb` and
//! `Q = Bb^T Ab^{-1} Bb - Cb`, which is what sampling and the inflation
//! bound work with.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// A QMI-parameterized set of systems `Z = [A B]^T` (`Z` is `(n+m) x n`).
#[derive(Debug, Clone)]
pub struct QmiSet {
    /// Quadratic coefficient, symmetric positive definite `(n+m) x (n+m)`.
    pub abold: DMatrix<f64>,
    /// Linear coefficient, `(n+m) x n`.
    pub bbold: DMatrix<f64>,
    /// Constant coefficient, symmetric `n x n`.
    pub cbold: DMatrix<f64>,
}

/// Center form of a [`QmiSet`]: the matrix ellipsoid
/// `(Z - zeta)^T Ab (Z - zeta) <= Q`.
#[derive(Debug, Clone)]
pub struct CenterFormQmi {
    /// Shape matrix, shared with the original set.
    pub abold: DMatrix<f64>,
    /// Center `zeta = -Ab^{-1} Bb` (`(n+m) x n`).
    pub zeta: DMatrix<f64>,
    /// Radius matrix `Q = Bb^T Ab^{-1} Bb - Cb`, PSD `n x n`.
    pub q: DMatrix<f64>,
}

impl QmiSet {
    /// Build a set, validating dimensions, positive definiteness of `Ab` and
    /// nonemptiness (`Q >= 0` up to a relative tolerance).
    pub fn new(abold: DMatrix<f64>, bbold: DMatrix<f64>, cbold: DMatrix<f64>) -> Result<Self> {
        let nm = abold.nrows();
        if abold.ncols() != nm {
            return Err(Error::Dimension("quadratic coefficient must be square".into()));
        }
        let n = bbold.ncols();
        if bbold.nrows() != nm {
            return Err(Error::Dimension(format!(
                "linear coefficient is {}x{}, expected {}x{}",
                bbold.nrows(),
                bbold.ncols(),
                nm,
                n
            )));
        }
        if cbold.nrows() != n || cbold.ncols() != n {
            return Err(Error::Dimension(format!(
                "constant coefficient is {}x{}, expected {}x{}",
                cbold.nrows(),
                cbold.ncols(),
                n,
                n
            )));
        }
        if n == 0 || nm <= n {
            return Err(Error::Dimension(
                "need state dimension >= 1 and input dimension >= 1".into(),
            ));
        }
        let set = Self {
            abold: linalg::symmetrize(&abold),
            bbold,
            cbold: linalg::symmetrize(&cbold),
        };
        if !linalg::is_positive_definite(&set.abold) {
            return Err(Error::RankDeficient(
                "quadratic coefficient is not positive definite".into(),
            ));
        }
        let q = set.radius_matrix()?;
        let tol = Self::psd_tolerance(&set.cbold, &q);
        if linalg::lambda_min(&q) < -tol {
            return Err(Error::InconsistentData(
                "the set is empty: the radius matrix has a negative eigenvalue".into(),
            ));
        }
        Ok(set)
    }

    fn psd_tolerance(cbold: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        1e-8 * (1.0 + linalg::spectral_norm(cbold) + linalg::spectral_norm(q))
    }

    /// `(n, m)` recovered from the coefficient shapes.
    pub fn dims(&self) -> (usize, usize) {
        let n = self.bbold.ncols();
        (n, self.bbold.nrows() - n)
    }

    /// Radius matrix `Q = Bb^T Ab^{-1} Bb - Cb` (not clamped).
    fn radius_matrix(&self) -> Result<DMatrix<f64>> {
        let chol = nalgebra::Cholesky::new(self.abold.clone())
            .ok_or_else(|| Error::Singular("quadratic coefficient is not positive definite".into()))?;
        let ainv_b = chol.solve(&self.bbold);
        Ok(linalg::symmetrize(&(self.bbold.transpose() * ainv_b - &self.cbold)))
    }

    /// Signed membership residual: the largest eigenvalue of
    /// `Cb + Bb^T Z + Z^T Bb + Z^T Ab Z`. Nonpositive means `Z` is a member.
    pub fn membership(&self, z: &DMatrix<f64>) -> f64 {
        let (n, m) = self.dims();
        assert_eq!(z.nrows(), n + m, "membership query has wrong row count");
        assert_eq!(z.ncols(), n, "membership query has wrong column count");
        let bt_z = self.bbold.transpose() * z;
        let residual = &self.cbold + &bt_z + bt_z.transpose() + z.transpose() * &self.abold * z;
        linalg::lambda_max(&residual)
    }

    /// Convert to the matrix-ellipsoid form around the set center.
    pub fn to_center_form(&self) -> Result<CenterFormQmi> {
        let chol = nalgebra::Cholesky::new(self.abold.clone())
            .ok_or_else(|| Error::Singular("quadratic coefficient is not positive definite".into()))?;
        let zeta = -chol.solve(&self.bbold);
        let q = self.radius_matrix()?;
        Ok(CenterFormQmi {
            abold: self.abold.clone(),
            zeta,
            q,
        })
    }

    /// Over-approximate the gamma-inflation of this set by another QMI set
    /// with the same `Ab`, `Bb` and the shifted constant
    ///
    /// ```text
    /// Cb_new = Cb - (2 gamma ||Ab^{1/2}|| ||Q^{1/2}|| + gamma^2 ||Ab||) I
    /// ```
    ///
    /// For `gamma = 0` the set is returned unchanged. Every `Z` within
    /// distance `gamma` (induced 2-norm) of a member of `self` is a member
    /// of the result.
    pub fn overapproximate_inflated(&self, gamma: f64) -> Result<QmiSet> {
        if gamma < 0.0 {
            return Err(Error::Dimension(format!(
                "inflation radius must be nonnegative, got {gamma}"
            )));
        }
        if gamma == 0.0 {
            return Ok(self.clone());
        }
        let (n, _) = self.dims();
        // ||Ab^{1/2}|| = sqrt(lambda_max(Ab)), same for Q by spectral mapping
        let a_max = linalg::lambda_max(&self.abold).max(0.0);
        let q = self.radius_matrix()?;
        let q_max = linalg::lambda_max(&q).max(0.0);
        let correction = 2.0 * gamma * a_max.sqrt() * q_max.sqrt() + gamma * gamma * a_max;
        let cbold = &self.cbold - DMatrix::<f64>::identity(n, n) * correction;
        // the correction only enlarges the set, so validity is preserved
        Ok(QmiSet {
            abold: self.abold.clone(),
            bbold: self.bbold.clone(),
            cbold,
        })
    }
}

impl CenterFormQmi {
    /// `(n, m)` recovered from the center shape.
    pub fn dims(&self) -> (usize, usize) {
        let n = self.zeta.ncols();
        (n, self.zeta.nrows() - n)
    }

    /// Reconstruct the coefficient form: `Bb = -Ab zeta`,
    /// `Cb = zeta^T Ab zeta - Q`.
    pub fn to_qmi_set(&self) -> QmiSet {
        let bbold = -(&self.abold * &self.zeta);
        let cbold = linalg::symmetrize(&(self.zeta.transpose() * &self.abold * &self.zeta - &self.q));
        QmiSet {
            abold: self.abold.clone(),
            bbold,
            cbold,
        }
    }

    /// Signed membership residual of the shifted form:
    /// `lambda_max((Z - zeta)^T Ab (Z - zeta) - Q)`.
    pub fn membership(&self, z: &DMatrix<f64>) -> f64 {
        let centered = z - &self.zeta;
        let residual = centered.transpose() * &self.abold * centered - &self.q;
        linalg::lambda_max(&residual)
    }

    /// Draw a member `zeta + Ab^{-1/2} U Q^{1/2}` where `U` is a random
    /// contraction with `||U|| = radius_fraction` (1.0 samples the boundary
    /// shell).
    pub fn sample_member<R: Rng + ?Sized>(&self, radius_fraction: f64, rng: &mut R) -> Result<DMatrix<f64>> {
        let (n, m) = self.dims();
        let a_inv_sqrt = linalg::sym_inv_sqrt(&self.abold)?;
        let q_sqrt = linalg::sym_sqrt(&self.q);
        let raw = linalg::uniform_matrix(n + m, n, -1.0, 1.0, rng);
        let norm = linalg::spectral_norm(&raw);
        if norm == 0.0 {
            return Ok(self.zeta.clone());
        }
        let contraction = raw * (radius_fraction.clamp(0.0, 1.0) / norm);
        Ok(&self.zeta + a_inv_sqrt * contraction * q_sqrt)
    }

    /// Draw a point of the gamma-inflated set: a member plus a perturbation
    /// of induced 2-norm `lambda <= gamma` in a random direction.
    pub fn sample_inflated_point<R: Rng + ?Sized>(
        &self,
        gamma: f64,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let (n, m) = self.dims();
        // half the draws sit on the boundary shell where the bound is tight
        let fraction = if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random_range(0.0..=1.0)
        };
        let member = self.sample_member(fraction, rng)?;
        let dir = linalg::uniform_matrix(n + m, n, -1.0, 1.0, rng);
        let dir_norm = linalg::spectral_norm(&dir);
        if dir_norm == 0.0 {
            return Ok(member);
        }
        let lambda = if rng.random_bool(0.5) {
            gamma
        } else {
            rng.random_range(0.0..=gamma)
        };
        Ok(member + dir * (lambda / dir_norm))
    }
}

/// Stack `X0` over `V0` and check the full-row-rank precondition.
fn stacked_full_rank(x0: &DMatrix<f64>, v0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x0.ncols() != v0.ncols() {
        return Err(Error::Dimension(format!(
            "state and input data have {} and {} columns",
            x0.ncols(),
            v0.ncols()
        )));
    }
    let stacked = linalg::vstack(x0, v0);
    let need = stacked.nrows();
    let got = linalg::numerical_rank(&stacked);
    if got < need {
        return Err(Error::RankDeficient(format!(
            "stacked data matrix has rank {got} < {need}; collect richer data"
        )));
    }
    Ok(stacked)
}

/// Least-squares system pair from masked data: the unique `[A B]` with
/// `X1 = A X0 + B V0` under the rank assumption, returned as
/// `Z = [A B]^T`.
pub fn data_center(x0: &DMatrix<f64>, x1: &DMatrix<f64>, v0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let stacked = stacked_full_rank(x0, v0)?;
    if x1.ncols() != x0.ncols() || x1.nrows() != x0.nrows() {
        return Err(Error::Dimension("shifted states do not match states".into()));
    }
    let pinv = linalg::right_pseudoinverse(&stacked)?;
    Ok((x1 * pinv).transpose())
}

/// The singleton set containing exactly the pair explaining clean data:
/// `Ab = I`, `Bb^T = -X1 [X0; V0]^+`, `Cb = Bb^T Bb`.
pub fn clean_singleton_set(
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
) -> Result<QmiSet> {
    clean_gamma_set(x0, x1, v0, 0.0)
}

/// The spectral-norm ball of radius `gamma` around the clean-data pair:
/// same `Ab`, `Bb` as the singleton and `Cb = Bb^T Bb - gamma^2 I`.
pub fn clean_gamma_set(
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
    gamma: f64,
) -> Result<QmiSet> {
    if gamma < 0.0 {
        return Err(Error::Dimension(format!(
            "ball radius must be nonnegative, got {gamma}"
        )));
    }
    let center = data_center(x0, x1, v0)?;
    Ok(spectral_ball(&center, gamma))
}

/// The spectral-norm ball `||Z - center|| <= gamma` as a QMI set.
pub fn spectral_ball(center: &DMatrix<f64>, gamma: f64) -> QmiSet {
    let nm = center.nrows();
    let n = center.ncols();
    let bbold = -center;
    let cbold = linalg::symmetrize(&(bbold.transpose() * &bbold))
        - DMatrix::<f64>::identity(n, n) * gamma * gamma;
    QmiSet {
        abold: DMatrix::identity(nm, nm),
        bbold,
        cbold,
    }
}

/// The consistency set of disturbed data under the energy bound
/// `D D^T <= Delta Delta^T`:
///
/// ```text
/// Ab = W W^T,  Bb = -W X1^T,  Cb = X1 X1^T - Delta Delta^T,   W = [X0; V0]
/// ```
pub fn noisy_consistency_set(
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
    delta: &DMatrix<f64>,
) -> Result<QmiSet> {
    let stacked = stacked_full_rank(x0, v0)?;
    if x1.ncols() != x0.ncols() || x1.nrows() != x0.nrows() {
        return Err(Error::Dimension("shifted states do not match states".into()));
    }
    if delta.nrows() != x1.nrows() {
        return Err(Error::Dimension(format!(
            "disturbance bound has {} rows, expected {}",
            delta.nrows(),
            x1.nrows()
        )));
    }
    let abold = linalg::symmetrize(&(&stacked * stacked.transpose()));
    let bbold = -(&stacked * x1.transpose());
    let cbold = linalg::symmetrize(&(x1 * x1.transpose() - delta * delta.transpose()));
    QmiSet::new(abold, bbold, cbold)
}
