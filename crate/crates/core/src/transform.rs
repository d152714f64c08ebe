//! Client-side masking: the input-side pre-processing of collected data and
//! the post-processing that unmasks the controller returned by the cloud.
//!
//! Stage-1 keys `(F1, G1)` mask the input channel of the data before it
//! leaves the client:
//!
//! ```text
//! V0 = (I + G1)^{-1} (U0 - F1 X0)
//! ```
//!
//! so the cloud sees data generated by the shifted pair
//! `(A* + B* F1, B* + B* G1)`. Stage-2 keys `(F2, G2)` are drawn inside the
//! robustness ball of radius `gamma_bar / ||B*||` around stage 1 and unmask
//! the returned gain as `K* = F2 + (I + G2) K_bar`, so the realized closed
//! loop differs from anything reconstructible from the cloud's view.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::DataSet;

/// Default per-entry range for stage-1 key sampling.
pub const DEFAULT_KEY_RANGE: (f64, f64) = (-1.0, 1.0);

/// Default fraction of the privacy ball radius used when drawing stage-2
/// keys. Drawing near the boundary maximizes the closed-loop perturbation.
pub const DEFAULT_FILL_FACTOR: f64 = 0.9;

/// Retry budget for rejection sampling of keys.
pub const MAX_KEY_ATTEMPTS: usize = 100;

/// Condition-number ceiling for `I + G1`.
pub const STAGE1_COND_LIMIT: f64 = 1e8;

/// Relative floor for the nonzero-direction requirement on stage-2 keys:
/// `||[F2-F1 G2-G1] [I; K_bar]|| >= STAGE2_DIRECTION_FLOOR * ||[F2-F1 G2-G1]||`.
pub const STAGE2_DIRECTION_FLOOR: f64 = 1e-8;

/// Secret stage-1 masking pair.
#[derive(Debug, Clone)]
pub struct Stage1Keys {
    /// State-feedback component, `m x n`.
    pub f1: DMatrix<f64>,
    /// Input-mixing component, `m x m`; `I + G1` is invertible by
    /// construction.
    pub g1: DMatrix<f64>,
}

/// Secret stage-2 unmasking pair, drawn inside the privacy ball.
#[derive(Debug, Clone)]
pub struct Stage2Keys {
    /// `m x n`.
    pub f2: DMatrix<f64>,
    /// `m x m`.
    pub g2: DMatrix<f64>,
}

/// A data set whose input channel has been replaced by the masked inputs.
#[derive(Debug, Clone)]
pub struct MaskedData {
    /// Unchanged state snapshots (`n x T`).
    pub x0: DMatrix<f64>,
    /// Unchanged shifted states (`n x T`).
    pub x1: DMatrix<f64>,
    /// Masked inputs (`m x T`).
    pub v0: DMatrix<f64>,
    /// Recorded disturbance carried along for tests/audits (`n x T`).
    pub d0: DMatrix<f64>,
    /// Horizon length `T`.
    pub horizon: usize,
}

/// Condition number of `I + G1`; the acceptance predicate for stage-1 draws.
pub(crate) fn stage1_condition(g1: &DMatrix<f64>) -> f64 {
    let m = g1.nrows();
    linalg::condition_number(&(DMatrix::<f64>::identity(m, m) + g1))
}

/// Draw stage-1 keys with i.i.d. entries uniform on `range`, redrawing until
/// `I + G1` is well conditioned.
pub fn generate_stage1_keys<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    range: (f64, f64),
    rng: &mut R,
) -> Result<Stage1Keys> {
    let (lo, hi) = range;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::KeyGeneration(format!(
            "entry range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    for _ in 0..MAX_KEY_ATTEMPTS {
        let f1 = linalg::uniform_matrix(m, n, lo, hi, rng);
        let g1 = linalg::uniform_matrix(m, m, lo, hi, rng);
        if stage1_condition(&g1) < STAGE1_COND_LIMIT {
            return Ok(Stage1Keys { f1, g1 });
        }
    }
    Err(Error::KeyGeneration(format!(
        "no well-conditioned I + G1 after {MAX_KEY_ATTEMPTS} draws"
    )))
}

/// Apply the stage-1 transform: `V0 = (I + G1)^{-1} (U0 - F1 X0)`.
///
/// States are passed through unchanged, so the masked data satisfies
/// `X1 = (A* + B* F1) X0 + (B* + B* G1) V0 (+ D0)`.
pub fn pre_process(data: &DataSet, keys: &Stage1Keys) -> Result<MaskedData> {
    let n = data.x0.nrows();
    let m = data.u0.nrows();
    if keys.f1.nrows() != m || keys.f1.ncols() != n {
        return Err(Error::Dimension(format!(
            "F1 is {}x{}, expected {}x{}",
            keys.f1.nrows(),
            keys.f1.ncols(),
            m,
            n
        )));
    }
    if keys.g1.nrows() != m || keys.g1.ncols() != m {
        return Err(Error::Dimension(format!(
            "G1 is {}x{}, expected {}x{}",
            keys.g1.nrows(),
            keys.g1.ncols(),
            m,
            m
        )));
    }
    let i_plus_g1 = DMatrix::<f64>::identity(m, m) + &keys.g1;
    let lu = i_plus_g1.lu();
    let rhs = &data.u0 - &keys.f1 * &data.x0;
    let v0 = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I + G1 is singular".into()))?;
    Ok(MaskedData {
        x0: data.x0.clone(),
        x1: data.x1.clone(),
        v0,
        d0: data.d0.clone(),
        horizon: data.horizon,
    })
}

/// Invert the stage-1 transform: `U0 = F1 X0 + (I + G1) V0`.
pub fn unmask_inputs(masked: &MaskedData, keys: &Stage1Keys) -> DMatrix<f64> {
    let m = keys.g1.nrows();
    let i_plus_g1 = DMatrix::<f64>::identity(m, m) + &keys.g1;
    &keys.f1 * &masked.x0 + i_plus_g1 * &masked.v0
}

/// Draw stage-2 keys: the joint difference `[F2-F1 G2-G1]` gets spectral norm
/// `fill_factor * gamma_bar / b_norm_bound` and must not annihilate
/// `[I; K_bar]` (which would reproduce the cloud-visible closed loop).
pub fn generate_stage2_keys<R: Rng + ?Sized>(
    stage1: &Stage1Keys,
    k_bar: &DMatrix<f64>,
    gamma_bar: f64,
    b_norm_bound: f64,
    fill_factor: f64,
    rng: &mut R,
) -> Result<Stage2Keys> {
    if gamma_bar <= 0.0 {
        return Err(Error::NoPrivacyBudget(gamma_bar));
    }
    if b_norm_bound <= 0.0 {
        return Err(Error::KeyGeneration(format!(
            "bound on the input-matrix norm must be positive, got {b_norm_bound}"
        )));
    }
    if !(fill_factor > 0.0 && fill_factor <= 1.0) {
        return Err(Error::KeyGeneration(format!(
            "fill factor must lie in (0, 1], got {fill_factor}"
        )));
    }
    let m = stage1.f1.nrows();
    let n = stage1.f1.ncols();
    if k_bar.nrows() != m || k_bar.ncols() != n {
        return Err(Error::Dimension(format!(
            "K_bar is {}x{}, expected {}x{}",
            k_bar.nrows(),
            k_bar.ncols(),
            m,
            n
        )));
    }
    let target = fill_factor * gamma_bar / b_norm_bound;
    let selector = linalg::vstack(&DMatrix::<f64>::identity(n, n), k_bar);

    for _ in 0..MAX_KEY_ATTEMPTS {
        let raw = linalg::uniform_matrix(m, n + m, -1.0, 1.0, rng);
        let norm = linalg::spectral_norm(&raw);
        if norm == 0.0 {
            continue;
        }
        let diff = raw * (target / norm);
        let projected = &diff * &selector;
        if linalg::spectral_norm(&projected) < STAGE2_DIRECTION_FLOOR * target {
            continue;
        }
        let df = diff.columns(0, n).into_owned();
        let dg = diff.columns(n, m).into_owned();
        return Ok(Stage2Keys {
            f2: &stage1.f1 + df,
            g2: &stage1.g1 + dg,
        });
    }
    Err(Error::KeyGeneration(format!(
        "no admissible stage-2 draw after {MAX_KEY_ATTEMPTS} attempts"
    )))
}

/// Unmask the cloud's gain: `K* = F2 + (I + G2) K_bar`.
pub fn post_process(stage2: &Stage2Keys, k_bar: &DMatrix<f64>) -> DMatrix<f64> {
    let m = stage2.g2.nrows();
    &stage2.f2 + (DMatrix::<f64>::identity(m, m) + &stage2.g2) * k_bar
}

/// Joint stage difference `[F2-F1 G2-G1]` (`m x (n+m)`).
pub fn key_difference(stage1: &Stage1Keys, stage2: &Stage2Keys) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(stage1.f1.nrows(), stage1.f1.ncols() + stage1.g1.ncols());
    out.view_mut((0, 0), stage1.f1.shape())
        .copy_from(&(&stage2.f2 - &stage1.f1));
    out.view_mut((0, stage1.f1.ncols()), stage1.g1.shape())
        .copy_from(&(&stage2.g2 - &stage1.g1));
    out
}

/// Check the two stage-2 admissibility predicates for an existing key pair:
/// ball membership `||[F2-F1 G2-G1]|| <= gamma_bar / b_norm_bound` and the
/// nonzero-direction floor.
pub fn stage2_keys_admissible(
    stage1: &Stage1Keys,
    stage2: &Stage2Keys,
    k_bar: &DMatrix<f64>,
    gamma_bar: f64,
    b_norm_bound: f64,
) -> bool {
    let diff = key_difference(stage1, stage2);
    let norm = linalg::spectral_norm(&diff);
    if norm > gamma_bar / b_norm_bound * (1.0 + 1e-12) {
        return false;
    }
    let n = stage1.f1.ncols();
    let selector = linalg::vstack(&DMatrix::<f64>::identity(n, n), k_bar);
    linalg::spectral_norm(&(&diff * selector)) >= STAGE2_DIRECTION_FLOOR * norm
}
