//! Mechanical checks of the privacy claims.
//!
//! The audits answer, with explicit witnesses, three questions about what an
//! honest-but-curious cloud (or anyone holding its view) can do:
//!
//! * it CAN identify the masked pair that generated the data it received;
//! * it CANNOT invert that pair back to the true system: for any candidate
//!   input matrix sharing the true column space there is a whole family of
//!   alternative systems plus keys reproducing the identical data;
//! * it CANNOT assemble the realized closed loop: the gap between the
//!   cloud-reconstructible loop and the true one is a nonzero matrix built
//!   from secret key material.
//!
//! Privacy is audited as non-injectivity witnessed by constructed preimages,
//! not as an information-theoretic measure. Alternatives are built along the
//! column space of the true input matrix, so the audit needs ground truth
//! and never ships in the cloud exchange.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::Plant;
use crate::transform::{self, Stage1Keys, Stage2Keys};

/// Exactly the information set visible across the trust boundary: masked
/// data, the declared disturbance bound, and published synthesis outputs.
/// No key material, no ground truth, no recorded disturbance.
#[derive(Debug, Clone)]
pub struct CloudView {
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub v0: DMatrix<f64>,
    /// Disturbance bound factor, present on the disturbed path.
    pub delta: Option<DMatrix<f64>>,
    /// Published privacy budget, once synthesis ran.
    pub gamma_bar: Option<f64>,
    /// Published gain, once synthesis ran.
    pub k_bar: Option<DMatrix<f64>>,
}

impl CloudView {
    pub fn dims(&self) -> (usize, usize) {
        (self.x0.nrows(), self.v0.nrows())
    }
}

/// An alternative explanation of the cloud's data: a system pair plus
/// stage-1 keys that reproduce the identical view.
#[derive(Debug, Clone)]
pub struct AlternativeSystem {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub f1_hat: DMatrix<f64>,
    pub g1_hat: DMatrix<f64>,
}

/// What the cloud can identify: the unique `(A, B)` with
/// `X1 = A X0 + B V0`, solved by least squares and certified unique by the
/// rank check.
///
/// Computed via an SVD least-squares solve, a route independent of the
/// pseudoinverse used on the synthesis side.
pub fn identify_transformed_pair(view: &CloudView) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = view.dims();
    let stacked = linalg::vstack(&view.x0, &view.v0);
    if linalg::numerical_rank(&stacked) < n + m {
        return Err(Error::RankDeficient(
            "stacked data is rank deficient: the explaining pair is not unique".into(),
        ));
    }
    let svd = stacked.transpose().svd(true, true);
    let z = svd
        .solve(&view.x1.transpose(), 1e-14)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    let a_bar = z.view((0, 0), (n, n)).transpose().into_owned();
    let b_bar = z.view((n, 0), (m, n)).transpose().into_owned();
    Ok((a_bar, b_bar))
}

/// Construct an alternative system consistent with the identified pair:
///
/// ```text
/// A_hat = A_bar - Bc F~,   B_hat = Bc G~,
/// F1_hat = G~^{-1} F~,     I + G1_hat = B_hat^+ B_bar
/// ```
///
/// so that `A_hat + B_hat F1_hat = A_bar` exactly and
/// `B_hat (I + G1_hat) = B_bar` whenever `Bc` spans the column space behind
/// `B_bar`. Every such alternative reproduces `X1` from `(X0, V0)`.
pub fn construct_alternative_system(
    a_bar: &DMatrix<f64>,
    b_bar: &DMatrix<f64>,
    b_candidate: &DMatrix<f64>,
    f_tilde: &DMatrix<f64>,
    g_tilde: &DMatrix<f64>,
) -> Result<AlternativeSystem> {
    let n = a_bar.nrows();
    let m = b_bar.ncols();
    if b_candidate.nrows() != n || b_candidate.ncols() != m {
        return Err(Error::Dimension(format!(
            "candidate input matrix is {}x{}, expected {}x{}",
            b_candidate.nrows(),
            b_candidate.ncols(),
            n,
            m
        )));
    }
    if f_tilde.nrows() != m || f_tilde.ncols() != n || g_tilde.nrows() != m || g_tilde.ncols() != m
    {
        return Err(Error::Dimension("key draft dimensions are off".into()));
    }
    if linalg::numerical_rank(b_candidate) < m {
        return Err(Error::RankDeficient(
            "candidate input matrix must have full column rank".into(),
        ));
    }
    let g_lu = g_tilde.clone().lu();
    let g_inv = g_lu
        .try_inverse()
        .ok_or_else(|| Error::Singular("key draft G~ must be invertible".into()))?;

    let a_hat = a_bar - b_candidate * f_tilde;
    let b_hat = b_candidate * g_tilde;
    let f1_hat = &g_inv * f_tilde;
    // left-inverse composition: I + G1_hat solves B_hat (I + G1_hat) = B_bar
    let b_hat_pinv = linalg::right_pseudoinverse(&b_hat.transpose())?.transpose();
    let i_plus_g1_hat = &b_hat_pinv * b_bar;
    let g1_hat = &i_plus_g1_hat - DMatrix::<f64>::identity(m, m);
    Ok(AlternativeSystem {
        a_hat,
        b_hat,
        f1_hat,
        g1_hat,
    })
}

/// Relative residual of the alternative's reconstruction of `X1` from
/// `(X0, V0)` through its own keys.
pub fn reproduction_residual(
    alt: &AlternativeSystem,
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
) -> f64 {
    let m = alt.g1_hat.nrows();
    let u_hat = &alt.f1_hat * x0 + (DMatrix::<f64>::identity(m, m) + &alt.g1_hat) * v0;
    let rebuilt = &alt.a_hat * x0 + &alt.b_hat * u_hat;
    (x1 - rebuilt).norm() / (1.0 + x1.norm())
}

/// The cloud-reconstructible loop and the secret gap to the realized one:
///
/// ```text
/// A_cl_bar = A* + B* F1 + (B* + B* G1) K_bar
/// Delta    = B* (F2 - F1) + B* (G2 - G1) K_bar
/// ```
///
/// with `A_cl_bar + Delta = A* + B* K*` as an exact identity.
pub fn closed_loop_gap(
    plant: &Plant,
    stage1: &Stage1Keys,
    stage2: &Stage2Keys,
    k_bar: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = plant.b_star();
    let a_cl_bar = plant.a_star() + b * &stage1.f1 + (b + b * &stage1.g1) * k_bar;
    let delta = b * (&stage2.f2 - &stage1.f1) + b * (&stage2.g2 - &stage1.g1) * k_bar;
    (a_cl_bar, delta)
}

/// Result of the open-loop privacy audit on one trial.
#[derive(Debug, Clone)]
pub struct OpenLoopAudit {
    /// Constructed alternatives, all reproducing the view.
    pub alternatives: Vec<AlternativeSystem>,
    /// Worst relative reconstruction residual across alternatives.
    pub max_residual: f64,
    /// Smallest pairwise separation between alternative systems (and from
    /// the truth), in Frobenius norm of `[A B]`.
    pub min_separation: f64,
}

/// Draw `count` alternatives along the true input directions and check that
/// each reproduces the view. Distinctness is measured pairwise and against
/// the truth.
pub fn run_open_loop_audit<R: Rng + ?Sized>(
    view: &CloudView,
    plant: &Plant,
    count: usize,
    rng: &mut R,
) -> Result<OpenLoopAudit> {
    let (a_bar, b_bar) = identify_transformed_pair(view)?;
    let n = plant.state_dim();
    let m = plant.input_dim();
    let mut alternatives = Vec::with_capacity(count);
    let mut max_residual = 0.0_f64;
    for _ in 0..count {
        let f_tilde = linalg::uniform_matrix(m, n, -1.0, 1.0, rng);
        let g_tilde = loop {
            let g = linalg::uniform_matrix(m, m, -1.0, 1.0, rng);
            if linalg::condition_number(&g) < 1e8 {
                break g;
            }
        };
        let alt =
            construct_alternative_system(&a_bar, &b_bar, plant.b_star(), &f_tilde, &g_tilde)?;
        max_residual = max_residual.max(reproduction_residual(&alt, &view.x0, &view.x1, &view.v0));
        alternatives.push(alt);
    }

    let mut min_separation = f64::INFINITY;
    let truth_a = plant.a_star();
    let truth_b = plant.b_star();
    for (i, alt) in alternatives.iter().enumerate() {
        let to_truth = ((&alt.a_hat - truth_a).norm().powi(2)
            + (&alt.b_hat - truth_b).norm().powi(2))
        .sqrt();
        min_separation = min_separation.min(to_truth);
        for other in alternatives.iter().skip(i + 1) {
            let d = ((&alt.a_hat - &other.a_hat).norm().powi(2)
                + (&alt.b_hat - &other.b_hat).norm().powi(2))
            .sqrt();
            min_separation = min_separation.min(d);
        }
    }
    Ok(OpenLoopAudit {
        alternatives,
        max_residual,
        min_separation,
    })
}

/// Result of the closed-loop privacy audit on one trial.
#[derive(Debug, Clone)]
pub struct ClosedLoopAudit {
    /// Norm of the secret gap.
    pub delta_norm: f64,
    /// Residual of the exact identity `A_cl_bar + Delta - (A* + B* K*)`.
    pub identity_residual: f64,
    /// Spectral radius of the realized closed loop.
    pub rho_closed_loop: f64,
}

/// Evaluate the closed-loop gap identity and the realized loop.
pub fn run_closed_loop_audit(
    plant: &Plant,
    stage1: &Stage1Keys,
    stage2: &Stage2Keys,
    k_bar: &DMatrix<f64>,
) -> ClosedLoopAudit {
    let (a_cl_bar, delta) = closed_loop_gap(plant, stage1, stage2, k_bar);
    let k_star = transform::post_process(stage2, k_bar);
    let realized = plant.closed_loop(&k_star);
    let identity_residual = (&a_cl_bar + &delta - &realized).norm();
    ClosedLoopAudit {
        delta_norm: linalg::spectral_norm(&delta),
        identity_residual,
        rho_closed_loop: linalg::spectral_radius(&realized),
    }
}
