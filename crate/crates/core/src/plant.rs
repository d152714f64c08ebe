//! Simulation of the unknown discrete-time LTI system and experiment data
//! collection.
//!
//! The true system matrices live behind [`Plant`] and are consumed only by
//! simulation, tests and audits — never by the cloud-facing code paths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// The true system `x(t+1) = A* x(t) + B* u(t)`, hidden behind the
/// simulation interface.
#[derive(Debug, Clone)]
pub struct Plant {
    a_star: DMatrix<f64>,
    b_star: DMatrix<f64>,
}

impl Plant {
    /// Build a plant, validating that `A*` is square, dimensions agree and
    /// `B*` has full column rank.
    pub fn new(a_star: DMatrix<f64>, b_star: DMatrix<f64>) -> Result<Self> {
        let n = a_star.nrows();
        if a_star.ncols() != n {
            return Err(Error::Dimension(format!(
                "state matrix must be square, got {}x{}",
                a_star.nrows(),
                a_star.ncols()
            )));
        }
        if n == 0 || b_star.ncols() == 0 {
            return Err(Error::Dimension("state and input dimensions must be >= 1".into()));
        }
        if b_star.nrows() != n {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows, expected {}",
                b_star.nrows(),
                n
            )));
        }
        if linalg::numerical_rank(&b_star) < b_star.ncols() {
            return Err(Error::RankDeficient(
                "input matrix must have full column rank".into(),
            ));
        }
        Ok(Self { a_star, b_star })
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a_star.nrows()
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b_star.ncols()
    }

    /// True state matrix (ground truth: tests and audits only).
    pub fn a_star(&self) -> &DMatrix<f64> {
        &self.a_star
    }

    /// True input matrix (ground truth: tests and audits only).
    pub fn b_star(&self) -> &DMatrix<f64> {
        &self.b_star
    }

    /// Closed-loop matrix `A* + B* K`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a_star + &self.b_star * k
    }

    /// The discretized batch reactor used by the experiments: an open-loop
    /// unstable four-state, two-input system.
    pub fn batch_reactor() -> Self {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                1178.0, 1.0, 511.0, -403.0, //
                -51.0, 661.0, -11.0, 61.0, //
                76.0, 335.0, 560.0, 382.0, //
                0.0, 335.0, 89.0, 849.0,
            ],
        ) * 1e-3;
        let b = DMatrix::from_row_slice(
            4,
            2,
            &[
                4.0, -87.0, //
                467.0, 1.0, //
                213.0, -235.0, //
                213.0, -16.0,
            ],
        ) * 1e-3;
        Self::new(a, b).expect("batch reactor constants are well formed")
    }
}

/// One collected experiment: state snapshots, shifted states, applied inputs
/// and the recorded disturbance.
///
/// `d0` is kept so tests and audits can replay the exact experiment; the
/// cloud-facing serialization never includes it.
#[derive(Debug, Clone)]
pub struct DataSet {
    /// States `x(0) .. x(T-1)`, one column per sample (`n x T`).
    pub x0: DMatrix<f64>,
    /// States `x(1) .. x(T)` (`n x T`).
    pub x1: DMatrix<f64>,
    /// Inputs `u(0) .. u(T-1)` (`m x T`).
    pub u0: DMatrix<f64>,
    /// Recorded disturbance `d(0) .. d(T-1)` (`n x T`); all-zero when the
    /// experiment was disturbance-free. Test/audit only.
    pub d0: DMatrix<f64>,
    /// Horizon length `T`.
    pub horizon: usize,
}

/// Energy bound `D D^T <= Delta Delta^T` that the generated disturbance
/// satisfies by construction.
#[derive(Debug, Clone)]
pub struct DisturbanceModel {
    /// Bound factor `Delta` (`n x n`, identity-scaled for the uniform
    /// generator).
    pub delta: DMatrix<f64>,
    /// Amplitude of the per-entry uniform distribution.
    pub d_max: f64,
}

/// Run the plant forward from `x_init` under the given input columns and
/// optional disturbance columns, collecting the data matrices.
pub fn simulate_collect(
    plant: &Plant,
    x_init: &DVector<f64>,
    inputs: &DMatrix<f64>,
    disturbance: Option<&DMatrix<f64>>,
) -> Result<DataSet> {
    let n = plant.state_dim();
    let m = plant.input_dim();
    let horizon = inputs.ncols();
    if horizon == 0 {
        return Err(Error::Dimension("need at least one input column".into()));
    }
    if x_init.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {}",
            x_init.len(),
            n
        )));
    }
    if inputs.nrows() != m {
        return Err(Error::Dimension(format!(
            "input matrix has {} rows, expected {}",
            inputs.nrows(),
            m
        )));
    }
    if let Some(d) = disturbance {
        if d.nrows() != n || d.ncols() != horizon {
            return Err(Error::Dimension(format!(
                "disturbance is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                n,
                horizon
            )));
        }
    }

    let mut x0 = DMatrix::<f64>::zeros(n, horizon);
    let mut x1 = DMatrix::<f64>::zeros(n, horizon);
    let mut d0 = DMatrix::<f64>::zeros(n, horizon);
    let mut x = x_init.clone();
    for t in 0..horizon {
        x0.set_column(t, &x);
        let u = inputs.column(t);
        let mut next = plant.a_star() * &x + plant.b_star() * u;
        if let Some(d) = disturbance {
            next += d.column(t);
            d0.set_column(t, &d.column(t));
        }
        x1.set_column(t, &next);
        x = next;
    }

    Ok(DataSet {
        x0,
        x1,
        u0: inputs.clone(),
        d0,
        horizon,
    })
}

/// Whether the stacked matrix `[X0; U0]` has full row rank `n + m`, with the
/// crate-wide relative rank tolerance.
pub fn check_rank_assumption(data: &DataSet) -> bool {
    let stacked = linalg::vstack(&data.x0, &data.u0);
    linalg::numerical_rank(&stacked) == data.x0.nrows() + data.u0.nrows()
}

/// Draw an `n x horizon` disturbance with i.i.d. entries uniform on
/// `[-d_max, d_max]` together with the bound it deterministically satisfies:
/// `Delta Delta^T = n d_max^2 T I`.
pub fn generate_uniform_disturbance<R: Rng + ?Sized>(
    n: usize,
    horizon: usize,
    d_max: f64,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DisturbanceModel)> {
    if d_max < 0.0 {
        return Err(Error::Dimension(format!(
            "disturbance amplitude must be nonnegative, got {d_max}"
        )));
    }
    let d0 = if d_max == 0.0 {
        DMatrix::zeros(n, horizon)
    } else {
        linalg::uniform_matrix(n, horizon, -d_max, d_max, rng)
    };
    let scale = (n as f64 * d_max * d_max * horizon as f64).sqrt();
    let delta = DMatrix::<f64>::identity(n, n) * scale;
    Ok((d0, DisturbanceModel { delta, d_max }))
}
