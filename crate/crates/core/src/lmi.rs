//! Assembly and solution of the stabilization LMI.
//!
//! For a QMI set with coefficients `(Ab, Bb, Cb)`, a gain `K = Y P^{-1}`
//! stabilizes every member of the set iff there are `P > 0` and `Y` making
//! the block matrix
//!
//! ```text
//! [ -P - Cb     0       Bb^T   ]
//! [    0       -P      [P;Y]^T ]
//! [   Bb      [P;Y]    -Ab     ]   < 0
//! ```
//!
//! negative definite. The map `(P, Y) -> block` is affine, so feasibility is
//! a small semidefinite program. It is solved here by a log-det barrier
//! path-following method on the phase-I form `min t s.t. block <= t I`,
//! which needs no external solver, is deterministic, and always terminates
//! with a certified answer: a returned point is only called feasible after
//! an independent eigenvalue recheck of the assembled block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::qmi::QmiSet;

/// Floor on the Lyapunov variable: the solver enforces `P >= EPS_P * I`.
pub const EPS_P: f64 = 1e-8;

/// Relative strictness margin: a point certifies feasibility only when the
/// block's largest eigenvalue is at most `-eps_strict` with
/// `eps_strict = EPS_STRICT_REL * (1 + ||Cb||)`.
pub const EPS_STRICT_REL: f64 = 1e-7;

/// The feasibility problem for one QMI set: decision variables `(P, Y)`,
/// one block LMI of size `2n + (n+m)` plus the `P >= EPS_P * I` floor.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    set: QmiSet,
    n: usize,
    m: usize,
    eps_strict: f64,
}

/// Assemble the LMI for a set; the block layout is fixed by the set
/// dimensions.
pub fn assemble_lmi(set: &QmiSet) -> Result<ConeProblem> {
    let (n, m) = set.dims();
    if n == 0 || m == 0 {
        return Err(Error::Dimension("need n >= 1 and m >= 1".into()));
    }
    let eps_strict = EPS_STRICT_REL * (1.0 + linalg::spectral_norm(&set.cbold));
    Ok(ConeProblem {
        set: set.clone(),
        n,
        m,
        eps_strict,
    })
}

impl ConeProblem {
    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Side length of the block matrix, `2n + (n+m)`.
    pub fn block_size(&self) -> usize {
        3 * self.n + self.m
    }

    pub fn set(&self) -> &QmiSet {
        &self.set
    }

    /// Strictness margin for this problem instance.
    pub fn eps_strict(&self) -> f64 {
        self.eps_strict
    }

    /// Number of scalar decision variables (`P` symmetric plus `Y` dense).
    pub fn num_vars(&self) -> usize {
        self.n * (self.n + 1) / 2 + self.m * self.n
    }

    /// Evaluate the block matrix at a candidate `(P, Y)`.
    ///
    /// This dense assembly is the reference used to verify solver output; it
    /// shares no code with the solver's internal pencil representation.
    pub fn block(&self, p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (n, m) = (self.n, self.m);
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Dimension(format!(
                "P is {}x{}, expected {}x{}",
                p.nrows(),
                p.ncols(),
                n,
                n
            )));
        }
        if y.nrows() != m || y.ncols() != n {
            return Err(Error::Dimension(format!(
                "Y is {}x{}, expected {}x{}",
                y.nrows(),
                y.ncols(),
                m,
                n
            )));
        }
        let r3 = 2 * n;
        let size = self.block_size();
        let mut g = DMatrix::<f64>::zeros(size, size);
        g.view_mut((0, 0), (n, n)).copy_from(&(-(p + &self.set.cbold)));
        g.view_mut((n, n), (n, n)).copy_from(&(-p));
        g.view_mut((r3, 0), (n + m, n)).copy_from(&self.set.bbold);
        g.view_mut((0, r3), (n, n + m))
            .copy_from(&self.set.bbold.transpose());
        let stacked = linalg::vstack(p, y);
        g.view_mut((r3, n), (n + m, n)).copy_from(&stacked);
        g.view_mut((n, r3), (n, n + m)).copy_from(&stacked.transpose());
        g.view_mut((r3, r3), (n + m, n + m))
            .copy_from(&(-&self.set.abold));
        Ok(g)
    }

    /// Split a solver variable vector into `(P, Y)`.
    fn unpack(&self, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, m) = (self.n, self.m);
        let mut p = DMatrix::<f64>::zeros(n, n);
        let mut idx = 0;
        for a in 0..n {
            for b in a..n {
                p[(a, b)] = x[idx];
                p[(b, a)] = x[idx];
                idx += 1;
            }
        }
        let mut y = DMatrix::<f64>::zeros(m, n);
        for c in 0..m {
            for d in 0..n {
                y[(c, d)] = x[idx];
                idx += 1;
            }
        }
        (p, y)
    }

    /// The affine pencil of the solver: the block above, augmented with the
    /// diagonal block `EPS_P * I - P` that enforces the Lyapunov floor.
    fn pencil(&self) -> Pencil {
        let (n, m) = (self.n, self.m);
        let base = self.block_size();
        let size = base + n;
        let r2 = n;
        let r3 = 2 * n;
        let r4 = base;

        let mut g0 = DMatrix::<f64>::zeros(size, size);
        g0.view_mut((0, 0), (n, n)).copy_from(&(-&self.set.cbold));
        g0.view_mut((r3, 0), (n + m, n)).copy_from(&self.set.bbold);
        g0.view_mut((0, r3), (n, n + m))
            .copy_from(&self.set.bbold.transpose());
        g0.view_mut((r3, r3), (n + m, n + m))
            .copy_from(&(-&self.set.abold));
        for i in 0..n {
            g0[(r4 + i, r4 + i)] = EPS_P;
        }

        let mut vars = Vec::with_capacity(self.num_vars());
        for a in 0..n {
            for b in a..n {
                let mut entries = Vec::with_capacity(10);
                let push_sym = |entries: &mut Vec<(usize, usize, f64)>,
                                    r: usize,
                                    c: usize,
                                    v: f64| {
                    entries.push((r, c, v));
                    if r != c {
                        entries.push((c, r, v));
                    }
                };
                // (1,1) and (2,2): -P ; (4,4): -P
                push_sym(&mut entries, a, b, -1.0);
                push_sym(&mut entries, r2 + a, r2 + b, -1.0);
                push_sym(&mut entries, r4 + a, r4 + b, -1.0);
                // (3,2) block carries P in its top rows: entry (r3+a, r2+b)
                push_sym(&mut entries, r3 + a, r2 + b, 1.0);
                if a != b {
                    push_sym(&mut entries, r3 + b, r2 + a, 1.0);
                }
                vars.push(entries);
            }
        }
        for c in 0..m {
            for d in 0..n {
                // (3,2) block carries Y in its bottom rows
                vars.push(vec![(r3 + n + c, r2 + d, 1.0), (r2 + d, r3 + n + c, 1.0)]);
            }
        }
        Pencil { size, g0, vars }
    }
}

/// Independent certificate check: largest eigenvalue of the freshly
/// assembled block at `(P, Y)`.
pub fn verify_certificate(problem: &ConeProblem, p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::lambda_max(&problem.block(p, y)?))
}

/// Solver verdict for one feasibility problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// A certified strictly feasible point was found.
    Feasible,
    /// No point with the required margin exists (up to solver tolerance).
    Infeasible,
    /// The backend failed to converge or the candidate failed verification.
    NumericalFailure,
}

/// Outcome of one LMI feasibility solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Certified point, present iff status is `Feasible`.
    pub p: Option<DMatrix<f64>>,
    pub y: Option<DMatrix<f64>>,
    /// Largest block eigenvalue: at the returned point when feasible,
    /// otherwise the best (smallest) value the solver could reach.
    pub lambda_max: f64,
    /// Total Newton iterations spent.
    pub newton_steps: usize,
}

/// Solve the feasibility problem.
///
/// Feasible outcomes carry a `(P, Y)` whose block eigenvalues were rechecked
/// by [`verify_certificate`]; the solver's own bookkeeping is never trusted
/// for the final verdict.
pub fn solve_feasibility(problem: &ConeProblem) -> SolveResult {
    let pencil = problem.pencil();
    let scale = linalg::spectral_norm(&pencil.g0).max(1.0);
    let scaled = Pencil {
        size: pencil.size,
        g0: &pencil.g0 / scale,
        vars: pencil.vars.clone(),
    };
    let target = -problem.eps_strict / scale;
    let opts = BarrierOpts {
        feas_target: Some(target),
        ..BarrierOpts::default()
    };
    let run = minimize_lambda_max(&scaled, &opts);

    let reached_target = run.t <= target;
    match run.termination {
        Termination::Failure if !reached_target => {
            return SolveResult {
                status: SolveStatus::NumericalFailure,
                p: None,
                y: None,
                lambda_max: run.t * scale,
                newton_steps: run.newton_steps,
            };
        }
        _ => {}
    }

    if !reached_target {
        return SolveResult {
            status: SolveStatus::Infeasible,
            p: None,
            y: None,
            lambda_max: run.t * scale,
            newton_steps: run.newton_steps,
        };
    }

    // rescale variables back to original units and recheck independently
    let (p_scaled, y_scaled) = problem.unpack(&run.x);
    let p = p_scaled * scale;
    let y = y_scaled * scale;
    let lambda = verify_certificate(problem, &p, &y).unwrap_or(f64::INFINITY);
    let p_floor_ok = linalg::lambda_min(&p) >= EPS_P * 0.99;
    if lambda <= -problem.eps_strict && p_floor_ok {
        SolveResult {
            status: SolveStatus::Feasible,
            p: Some(p),
            y: Some(y),
            lambda_max: lambda,
            newton_steps: run.newton_steps,
        }
    } else {
        SolveResult {
            status: SolveStatus::NumericalFailure,
            p: None,
            y: None,
            lambda_max: lambda,
            newton_steps: run.newton_steps,
        }
    }
}

// ---------------------------------------------------------------------------
// phase-I barrier solver: minimize lambda_max of an affine symmetric pencil
// ---------------------------------------------------------------------------

/// Affine symmetric pencil `G(x) = G0 + sum_i x_i G_i`, the `G_i` stored as
/// sparse entry lists (both halves of each symmetric pair listed).
struct Pencil {
    size: usize,
    g0: DMatrix<f64>,
    vars: Vec<Vec<(usize, usize, f64)>>,
}

impl Pencil {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = self.g0.clone();
        for (i, entries) in self.vars.iter().enumerate() {
            let xi = x[i];
            for &(r, c, v) in entries {
                g[(r, c)] += xi * v;
            }
        }
        g
    }
}

struct BarrierOpts {
    eta0: f64,
    mu: f64,
    /// Absolute duality-gap target on the (scaled) objective.
    gap_tol: f64,
    /// Newton-decrement-squared threshold per centering stage.
    stage_tol_sq: f64,
    max_stage_iters: usize,
    max_stages: usize,
    /// Stop as soon as the certified upper bound `t` falls below this.
    feas_target: Option<f64>,
}

impl Default for BarrierOpts {
    fn default() -> Self {
        Self {
            eta0: 1.0,
            mu: 20.0,
            gap_tol: 1e-9,
            stage_tol_sq: 1e-4,
            max_stage_iters: 60,
            max_stages: 60,
            feas_target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Termination {
    /// Gap target reached.
    Converged,
    /// `feas_target` reached early.
    Target,
    /// Newton or line search stalled before either criterion.
    Failure,
}

struct BarrierRun {
    x: DVector<f64>,
    /// Final upper bound on `lambda_max(G(x))`; the slack variable of the
    /// phase-I form, kept strictly above the pencil's top eigenvalue.
    t: f64,
    termination: Termination,
    newton_steps: usize,
}

/// Barrier objective `eta * t - logdet(t I - G(x))` and its derivatives, via
/// one Cholesky factorization per evaluation point.
fn barrier_value(pencil: &Pencil, x: &DVector<f64>, t: f64, eta: f64) -> Option<f64> {
    let g = pencil.eval(x);
    let s = DMatrix::<f64>::identity(pencil.size, pencil.size) * t - g;
    let chol = nalgebra::Cholesky::new(s)?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Some(eta * t - logdet)
}

fn minimize_lambda_max(pencil: &Pencil, opts: &BarrierOpts) -> BarrierRun {
    let d = pencil.vars.len();
    let cone = pencil.size as f64;
    let mut x = DVector::<f64>::zeros(d);
    let lam0 = linalg::lambda_max(&pencil.g0);
    let mut t = lam0 + 0.1 * (1.0 + lam0.abs());
    let mut eta = opts.eta0;
    let mut steps = 0usize;

    for _stage in 0..opts.max_stages {
        let mut centered = false;
        for _iter in 0..opts.max_stage_iters {
            if let Some(target) = opts.feas_target {
                if t <= target {
                    return BarrierRun {
                        x,
                        t,
                        termination: Termination::Target,
                        newton_steps: steps,
                    };
                }
            }

            let g = pencil.eval(&x);
            let s = DMatrix::<f64>::identity(pencil.size, pencil.size) * t - &g;
            let chol = match nalgebra::Cholesky::new(s) {
                Some(c) => c,
                None => {
                    return BarrierRun {
                        x,
                        t,
                        termination: Termination::Failure,
                        newton_steps: steps,
                    }
                }
            };
            let s_inv = chol.inverse();
            let s_inv2 = &s_inv * &s_inv;

            // gradient over (x, t)
            let mut grad = DVector::<f64>::zeros(d + 1);
            for (i, entries) in pencil.vars.iter().enumerate() {
                let mut v = 0.0;
                for &(r, c, coef) in entries {
                    v += coef * s_inv[(c, r)];
                }
                grad[i] = v;
            }
            grad[d] = eta - s_inv.trace();

            // Hessian over (x, t)
            let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
            for i in 0..d {
                for j in i..d {
                    let mut v = 0.0;
                    for &(a, b, ci) in &pencil.vars[i] {
                        for &(c, dd, cj) in &pencil.vars[j] {
                            v += ci * cj * s_inv[(b, c)] * s_inv[(dd, a)];
                        }
                    }
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
            }
            for i in 0..d {
                let mut v = 0.0;
                for &(r, c, coef) in &pencil.vars[i] {
                    v += coef * s_inv2[(c, r)];
                }
                hess[(i, d)] = -v;
                hess[(d, i)] = -v;
            }
            hess[(d, d)] = s_inv2.trace();

            // Newton direction with escalating ridge on factorization failure
            let mut ridge = 0.0;
            let dir = loop {
                let mut h = hess.clone();
                if ridge > 0.0 {
                    for k in 0..=d {
                        h[(k, k)] += ridge;
                    }
                }
                if let Some(ch) = nalgebra::Cholesky::new(h) {
                    break Some(ch.solve(&(-&grad)));
                }
                ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
                if ridge > 1.0 {
                    break None;
                }
            };
            let dir = match dir {
                Some(d) => d,
                None => {
                    return BarrierRun {
                        x,
                        t,
                        termination: Termination::Failure,
                        newton_steps: steps,
                    }
                }
            };

            let slope: f64 = grad.dot(&dir);
            let decrement_sq = -slope;
            if decrement_sq <= opts.stage_tol_sq {
                centered = true;
                break;
            }

            // damped step: stay strictly inside the cone and decrease f
            let f0 = match barrier_value(pencil, &x, t, eta) {
                Some(v) => v,
                None => {
                    return BarrierRun {
                        x,
                        t,
                        termination: Termination::Failure,
                        newton_steps: steps,
                    }
                }
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha >= 1e-14 {
                let x_new = &x + dir.rows(0, d) * alpha;
                let t_new = t + dir[d] * alpha;
                if let Some(f_new) = barrier_value(pencil, &x_new, t_new, eta) {
                    if f_new <= f0 + 0.25 * alpha * slope {
                        x = x_new;
                        t = t_new;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            steps += 1;
            if !accepted {
                return BarrierRun {
                    x,
                    t,
                    termination: Termination::Failure,
                    newton_steps: steps,
                };
            }
        }

        if !centered {
            // ran out of stage iterations without centering
            return BarrierRun {
                x,
                t,
                termination: Termination::Failure,
                newton_steps: steps,
            };
        }
        if cone / eta <= opts.gap_tol {
            return BarrierRun {
                x,
                t,
                termination: Termination::Converged,
                newton_steps: steps,
            };
        }
        eta *= opts.mu;
    }

    BarrierRun {
        x,
        t,
        termination: Termination::Failure,
        newton_steps: steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmi::spectral_ball;
    use crate::testutil::random_set;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_singleton(a: f64, b: f64) -> ConeProblem {
        let z = DMatrix::from_column_slice(2, 1, &[a, b]);
        assemble_lmi(&spectral_ball(&z, 0.0)).unwrap()
    }

    #[test]
    fn block_layout_dimensions() {
        let problem = scalar_singleton(1.5, 2.0);
        assert_eq!(problem.block_size(), 4);
        assert_eq!(problem.num_vars(), 2);
    }

    #[test]
    fn scalar_candidate_evaluation() {
        // (A, B) = (1.5, 2), K = -0.7 puts the closed loop at 0.1. The block
        // at P = 1 is indefinite (P too large for the Lyapunov recursion),
        // while P = 0.5 certifies it: the scalar feasibility condition is
        // 1 - P (1 + K^2) - (A + B K)^2 > 0.
        let problem = scalar_singleton(1.5, 2.0);
        let k = -0.7;

        let p_big = DMatrix::from_element(1, 1, 1.0);
        let y_big = DMatrix::from_element(1, 1, k * 1.0);
        let big = linalg::lambda_max(&problem.block(&p_big, &y_big).unwrap());
        assert!(big > 0.0, "P = 1 should not certify, got lambda_max {big}");

        let p_ok = DMatrix::from_element(1, 1, 0.5);
        let y_ok = DMatrix::from_element(1, 1, k * 0.5);
        let ok = linalg::lambda_max(&problem.block(&p_ok, &y_ok).unwrap());
        assert!(ok < 0.0, "P = 0.5 should certify, got lambda_max {ok}");
    }

    #[test]
    fn pencil_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=2);
            let set = random_set(n, m, &mut rng);
            let problem = assemble_lmi(&set).unwrap();
            let pencil = problem.pencil();

            let x = linalg::uniform_vector(problem.num_vars(), -2.0, 2.0, &mut rng);
            let (p, y) = problem.unpack(&x);
            let dense = problem.block(&p, &y).unwrap();
            let from_pencil = pencil.eval(&x);

            let base = problem.block_size();
            let top = from_pencil.view((0, 0), (base, base)).into_owned();
            assert!((top - &dense).norm() <= 1e-13 * (1.0 + dense.norm()));

            // augmented corner must be EPS_P * I - P
            let corner = from_pencil.view((base, base), (n, n)).into_owned();
            let expected = DMatrix::<f64>::identity(n, n) * EPS_P - &p;
            assert!((corner - expected).norm() <= 1e-13);
        }
    }

    #[test]
    fn stabilizable_scalar_singleton_is_feasible() {
        let problem = scalar_singleton(0.5, 1.0);
        let result = solve_feasibility(&problem);
        assert_eq!(result.status, SolveStatus::Feasible);
        let p = result.p.unwrap();
        let y = result.y.unwrap();
        let k = y[(0, 0)] / p[(0, 0)];
        assert!((0.5 + k).abs() < 1.0, "returned gain must stabilize: k = {k}");
        assert!(result.lambda_max <= -problem.eps_strict());
    }

    #[test]
    fn unstabilizable_singleton_is_infeasible() {
        // (A, B) = (2, 0): no input authority, |A| > 1
        let problem = scalar_singleton(2.0, 0.0);
        let result = solve_feasibility(&problem);
        assert_eq!(result.status, SolveStatus::Infeasible);
        assert!(result.lambda_max > 0.0);
    }

    #[test]
    fn feasible_certificates_pass_margin_recheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut feasible_seen = 0;
        for _ in 0..30 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=2);
            let set = random_set(n, m, &mut rng);
            let problem = assemble_lmi(&set).unwrap();
            let result = solve_feasibility(&problem);
            if result.status == SolveStatus::Feasible {
                feasible_seen += 1;
                let lam =
                    verify_certificate(&problem, result.p.as_ref().unwrap(), result.y.as_ref().unwrap())
                        .unwrap();
                assert!(lam <= -problem.eps_strict());
                assert!(linalg::lambda_min(result.p.as_ref().unwrap()) >= EPS_P * 0.99);
            }
        }
        assert!(feasible_seen >= 5, "test needs feasible instances, saw {feasible_seen}");
    }

    #[test]
    fn solved_gamma_ball_gain_stabilizes_every_corner() {
        // sample members of a feasible ball and check the spectral radius
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let center = DMatrix::from_column_slice(2, 1, &[0.8, 1.0]);
        let set = spectral_ball(&center, 0.3);
        let problem = assemble_lmi(&set).unwrap();
        let result = solve_feasibility(&problem);
        assert_eq!(result.status, SolveStatus::Feasible);
        let p = result.p.unwrap();
        let y = result.y.unwrap();
        let k = y[(0, 0)] / p[(0, 0)];
        for _ in 0..500 {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let r = rng.random_range(0.0..=0.3_f64);
            let a = 0.8 + r * angle.cos();
            let b = 1.0 + r * angle.sin();
            assert!((a + b * k).abs() < 1.0, "member ({a}, {b}) escapes under k = {k}");
        }
    }

    #[test]
    fn min_lambda_max_matches_known_optimum() {
        // pencil G(x) = diag(x - 1, -x - 1) has min lambda_max = -1 at x = 0
        let pencil = Pencil {
            size: 2,
            g0: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            vars: vec![vec![(0, 0, 1.0), (1, 1, -1.0)]],
        };
        let run = minimize_lambda_max(&pencil, &BarrierOpts::default());
        assert_eq!(run.termination, Termination::Converged);
        assert_abs_diff_eq!(run.t, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(run.x[0], 0.0, epsilon = 1e-4);
    }
}
