//! The outsourced algorithm: solve the stabilization LMI for a data-derived
//! QMI set and maximize the privacy budget gamma by bisection over
//! feasibility problems.
//!
//! The budget is the largest ball radius around the masked system for which
//! one gain stabilizes everything in the ball; it is also exactly the room
//! available for drawing the stage-2 keys. Everything here consumes only
//! cloud-visible quantities; there is no randomness on this side of the
//! exchange.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lmi::{self, ConeProblem, SolveStatus};
use crate::qmi::{self, QmiSet};

/// Absolute bisection tolerance on gamma.
pub const GAMMA_TOL: f64 = 1e-4;

/// Status of one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

impl SynthStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthStatus::Feasible => "feasible",
            SynthStatus::Infeasible => "infeasible",
            SynthStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::str::FromStr for SynthStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "feasible" => Ok(SynthStatus::Feasible),
            "infeasible" => Ok(SynthStatus::Infeasible),
            "numerical-failure" => Ok(SynthStatus::NumericalFailure),
            other => Err(Error::Parse(format!("unknown status {other:?}"))),
        }
    }
}

/// Certified solution of a feasible synthesis.
#[derive(Debug, Clone)]
pub struct StabilizingSolution {
    /// Lyapunov certificate, symmetric positive definite.
    pub p: DMatrix<f64>,
    /// Raw LMI variable.
    pub y: DMatrix<f64>,
    /// Gain `K = Y P^{-1}`.
    pub k: DMatrix<f64>,
    /// Independently rechecked margin `-lambda_max(block)`, positive.
    pub margin: f64,
}

/// Output of the cloud algorithm.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub status: SynthStatus,
    /// Largest certified ball radius (0 for plain feasibility solves).
    pub gamma_bar: f64,
    /// Present iff `status == Feasible`.
    pub solution: Option<StabilizingSolution>,
    /// Bisection probes as `(gamma, feasible)` in query order; empty for
    /// plain feasibility solves.
    pub trace: Vec<(f64, bool)>,
}

impl SynthesisOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status == SynthStatus::Feasible
    }

    /// Feasibility along the probe trace must be monotone: no feasible probe
    /// may sit above an infeasible one. A violation marks a solver-tolerance
    /// incident.
    pub fn trace_is_monotone(&self) -> bool {
        let mut lowest_infeasible = f64::INFINITY;
        for &(gamma, feasible) in &self.trace {
            if !feasible {
                lowest_infeasible = lowest_infeasible.min(gamma);
            }
        }
        self.trace
            .iter()
            .all(|&(gamma, feasible)| !feasible || gamma < lowest_infeasible + 1e-12)
    }

    fn infeasible(trace: Vec<(f64, bool)>) -> Self {
        Self {
            status: SynthStatus::Infeasible,
            gamma_bar: 0.0,
            solution: None,
            trace,
        }
    }
}

/// Solve a single feasibility problem and wrap the certified result.
pub fn solve_feasibility(problem: &ConeProblem) -> SynthesisOutcome {
    let result = lmi::solve_feasibility(problem);
    let status = match result.status {
        SolveStatus::Feasible => SynthStatus::Feasible,
        SolveStatus::Infeasible => SynthStatus::Infeasible,
        SolveStatus::NumericalFailure => SynthStatus::NumericalFailure,
    };
    let solution = match (result.status, result.p, result.y) {
        (SolveStatus::Feasible, Some(p), Some(y)) => match gain_from(&p, &y) {
            Ok(k) => Some(StabilizingSolution {
                margin: -result.lambda_max,
                p,
                y,
                k,
            }),
            Err(_) => None,
        },
        _ => None,
    };
    let status = if status == SynthStatus::Feasible && solution.is_none() {
        SynthStatus::NumericalFailure
    } else {
        status
    };
    SynthesisOutcome {
        status,
        gamma_bar: 0.0,
        solution,
        trace: Vec::new(),
    }
}

/// Recover `K = Y P^{-1}` from a certificate.
fn gain_from(p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(p))
        .ok_or_else(|| Error::Numerical("certificate P is not positive definite".into()))?;
    // K P = Y  <=>  P K^T = Y^T
    Ok(chol.solve(&y.transpose()).transpose())
}

/// Maximize gamma such that the ball of radius gamma around the clean-data
/// pair admits a common stabilizing gain.
///
/// Returns the largest certified gamma (to [`GAMMA_TOL`]) together with the
/// certificate obtained at that radius. Data inconsistent with any
/// stabilizable pair yields an infeasible outcome.
pub fn maximize_gamma_clean(
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
) -> Result<SynthesisOutcome> {
    let center = qmi::data_center(x0, x1, v0)?;
    let bracket_hint = linalg::spectral_norm(&center) + 1.0;
    maximize_gamma(bracket_hint, move |gamma| {
        Ok(qmi::spectral_ball(&center, gamma))
    })
}

/// Maximize gamma for disturbed data: the consistency set is inflated by
/// gamma and over-approximated before solving, so any returned gain
/// stabilizes the whole inflated set.
pub fn maximize_gamma_noisy(
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    v0: &DMatrix<f64>,
    delta: &DMatrix<f64>,
) -> Result<SynthesisOutcome> {
    let base = qmi::noisy_consistency_set(x0, x1, v0, delta)?;
    let center = base.to_center_form()?;
    let bracket_hint = linalg::spectral_norm(&center.zeta) + 1.0;
    maximize_gamma(bracket_hint, move |gamma| base.overapproximate_inflated(gamma))
}

/// Bisection driver shared by the clean and the disturbed path; sound
/// because the feasible radii form an interval (the sets are nested in
/// gamma).
fn maximize_gamma<F>(bracket_hint: f64, set_at: F) -> Result<SynthesisOutcome>
where
    F: Fn(f64) -> Result<QmiSet>,
{
    let mut trace: Vec<(f64, bool)> = Vec::new();
    let mut best: Option<(f64, StabilizingSolution)> = None;

    let probe = |gamma: f64, trace: &mut Vec<(f64, bool)>| -> Result<bool> {
        let set = set_at(gamma)?;
        let problem = lmi::assemble_lmi(&set)?;
        let outcome = solve_feasibility(&problem);
        // numerical failures are treated as infeasible probes: the bisection
        // then only under-reports gamma, never over-reports it
        let feasible = outcome.is_feasible();
        trace.push((gamma, feasible));
        Ok(feasible)
    };

    if !probe(0.0, &mut trace)? {
        return Ok(SynthesisOutcome::infeasible(trace));
    }

    let mut lo = 0.0_f64;
    let mut hi = bracket_hint.max(GAMMA_TOL);
    let mut doublings = 0;
    while probe(hi, &mut trace)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Numerical(
                "no infeasible bracket found while doubling gamma".into(),
            ));
        }
    }

    while hi - lo > GAMMA_TOL {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut trace)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // certificate at the certified radius (re-solve at lo; lo = 0 is known
    // feasible from the first probe)
    let set = set_at(lo)?;
    let problem = lmi::assemble_lmi(&set)?;
    let result = lmi::solve_feasibility(&problem);
    if result.status == SolveStatus::Feasible {
        let p = result.p.expect("feasible result carries P");
        let y = result.y.expect("feasible result carries Y");
        let lambda = lmi::verify_certificate(&problem, &p, &y)?;
        if lambda <= -problem.eps_strict() {
            let k = gain_from(&p, &y)?;
            best = Some((
                lo,
                StabilizingSolution {
                    p,
                    y,
                    k,
                    margin: -lambda,
                },
            ));
        }
    }

    match best {
        Some((gamma_bar, solution)) => Ok(SynthesisOutcome {
            status: SynthStatus::Feasible,
            gamma_bar,
            solution: Some(solution),
            trace,
        }),
        None => Ok(SynthesisOutcome {
            status: SynthStatus::NumericalFailure,
            gamma_bar: 0.0,
            solution: None,
            trace,
        }),
    }
}
