//! Stealthy bias-injection attacks against the norm-threshold anomaly
//! detector, under four knowledge policies.
//!
//! The adversary adds a signal `a(t)` to the actuator channel, driven to a
//! steady offset by the first-order recursion
//! `a(t+1) = beta a(t) + (1 - beta) a_inf`. It shapes `a_inf` to push the
//! believed steady state `x_inf = (I - A_cl_hat)^{-1} B_cl_hat a_inf`
//! exactly to the detector threshold. How well the believed model matches
//! the true closed loop decides whether the realized impact saturates,
//! undershoots, or trips the detector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::audit::{self, CloudView};
use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::Plant;
use crate::transform::{Stage1Keys, Stage2Keys};

/// Knowledge level of the attacker (what it plugs into the steady-state
/// map). Display renders the conventional roman labels I..IV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackPolicy {
    /// (I) exact knowledge: true closed loop, true input matrix.
    Exact,
    /// (II) pure estimate: masked pair and published gain only.
    Estimate,
    /// (III) estimate plus side knowledge of the true input-matrix norm.
    NormBound,
    /// (IV) estimate plus the true input matrix itself.
    TrueInput,
}

impl AttackPolicy {
    pub const ALL: [AttackPolicy; 4] = [
        AttackPolicy::Exact,
        AttackPolicy::Estimate,
        AttackPolicy::NormBound,
        AttackPolicy::TrueInput,
    ];
}

impl std::fmt::Display for AttackPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            AttackPolicy::Exact => "I",
            AttackPolicy::Estimate => "II",
            AttackPolicy::NormBound => "III",
            AttackPolicy::TrueInput => "IV",
        };
        write!(f, "{label}")
    }
}

impl std::str::FromStr for AttackPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "EXACT" => Ok(AttackPolicy::Exact),
            "II" | "ESTIMATE" => Ok(AttackPolicy::Estimate),
            "III" | "NORM" | "NORM-BOUND" => Ok(AttackPolicy::NormBound),
            "IV" | "TRUE-INPUT" => Ok(AttackPolicy::TrueInput),
            other => Err(Error::Parse(format!("unknown attack policy {other:?}"))),
        }
    }
}

/// Attack experiment parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttackConfig {
    /// Attack pole, strictly inside (0, 1).
    pub beta: f64,
    /// Detector threshold on the residual norm.
    pub delta_alpha: f64,
    /// Injection start time.
    pub t_inj: usize,
    /// Detector activation time.
    pub t_a: usize,
    /// Simulation horizon.
    pub t_end: usize,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Dimension(format!(
                "attack pole must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.delta_alpha < 0.0 {
            return Err(Error::Dimension("detector threshold must be >= 0".into()));
        }
        if !(self.t_inj < self.t_a && self.t_a < self.t_end) {
            return Err(Error::Dimension(format!(
                "need t_inj < t_a < t_end, got {} / {} / {}",
                self.t_inj, self.t_a, self.t_end
            )));
        }
        Ok(())
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            delta_alpha: 0.2,
            t_inj: 10,
            t_a: 400,
            t_end: 500,
        }
    }
}

/// The adversary's believed closed-loop and input matrices.
#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub a_cl_hat: DMatrix<f64>,
    pub b_cl_hat: DMatrix<f64>,
}

/// Ground truth handed to the policies that are granted it.
pub struct AttackGroundTruth<'a> {
    pub plant: &'a Plant,
    pub stage1: &'a Stage1Keys,
    pub stage2: &'a Stage2Keys,
    pub k_bar: &'a DMatrix<f64>,
}

/// Build the believed model for one policy. The estimate-based policies use
/// only view-derivable quantities; ground truth enters exactly where the
/// policy is granted it.
pub fn build_policy_model(
    policy: AttackPolicy,
    truth: &AttackGroundTruth<'_>,
    view: &CloudView,
) -> Result<PolicyModel> {
    let k_bar = view
        .k_bar
        .as_ref()
        .ok_or_else(|| Error::Dimension("view carries no published gain".into()))?;
    if policy == AttackPolicy::Exact {
        let b = truth.plant.b_star();
        let a_cl = truth.plant.a_star()
            + b * &truth.stage2.f2
            + (b + b * &truth.stage2.g2) * truth.k_bar;
        return Ok(PolicyModel {
            a_cl_hat: a_cl,
            b_cl_hat: b.clone(),
        });
    }

    let (a_bar, b_bar) = audit::identify_transformed_pair(view)?;
    let a_cl_hat = &a_bar + &b_bar * k_bar;
    let b_cl_hat = match policy {
        AttackPolicy::Estimate => b_bar,
        AttackPolicy::NormBound => {
            let scale =
                linalg::spectral_norm(truth.plant.b_star()) / linalg::spectral_norm(&b_bar);
            b_bar * scale
        }
        AttackPolicy::TrueInput => truth.plant.b_star().clone(),
        AttackPolicy::Exact => unreachable!(),
    };
    Ok(PolicyModel { a_cl_hat, b_cl_hat })
}

/// Shape the steady bias: with `M = (I - A_cl_hat)^{-1} B_cl_hat` and top
/// singular triple `(s1, u1, v1)`, the minimum-energy input with believed
/// impact exactly at the threshold is `a_inf = (delta_alpha / s1) v1`.
pub fn design_bias(model: &PolicyModel, delta_alpha: f64) -> Result<DVector<f64>> {
    let n = model.a_cl_hat.nrows();
    let lu = (DMatrix::<f64>::identity(n, n) - &model.a_cl_hat).lu();
    let steady_map = lu
        .solve(&model.b_cl_hat)
        .ok_or_else(|| Error::AttackUndefined("believed closed loop has a pole at one".into()))?;
    let svd = steady_map.clone().svd(true, true);
    let (mut s1, mut idx) = (0.0_f64, 0usize);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > s1 {
            s1 = s;
            idx = i;
        }
    }
    if s1 <= 0.0 {
        return Err(Error::AttackUndefined(
            "believed steady-state map has no reachable impact".into(),
        ));
    }
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let direction = v_t.row(idx).transpose();
    Ok(direction * (delta_alpha / s1))
}

/// Simulated attacked run.
#[derive(Debug, Clone)]
pub struct AttackTrajectory {
    /// States `x(0) .. x(t_end)`, one column per instant (`n x (t_end+1)`).
    pub states: DMatrix<f64>,
    /// Applied inputs `u(t) + a(t)` for `t < t_end` (`m x t_end`).
    pub inputs: DMatrix<f64>,
    /// Attack signal values (`m x (t_end+1)`).
    pub attack: DMatrix<f64>,
    /// Residual norms `||x(t)||` for every instant.
    pub residual_norms: Vec<f64>,
    /// Mean residual norm over the final 10% of the horizon.
    pub steady_state_residual: f64,
    /// Detector activation time carried over from the config.
    pub t_a: usize,
}

/// Run the true closed loop under the attack recursion.
///
/// The loop `A* + B* K*` must be Schur; the attack holds at zero before
/// `t_inj` and then relaxes toward `a_inf` with pole `beta`.
pub fn simulate_attack(
    plant: &Plant,
    k_star: &DMatrix<f64>,
    config: &AttackConfig,
    a_inf: &DVector<f64>,
    x_init: &DVector<f64>,
) -> Result<AttackTrajectory> {
    config.validate()?;
    let n = plant.state_dim();
    let m = plant.input_dim();
    if a_inf.len() != m {
        return Err(Error::Dimension(format!(
            "steady bias has length {}, expected {}",
            a_inf.len(),
            m
        )));
    }
    if x_init.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {}",
            x_init.len(),
            n
        )));
    }
    let a_cl = plant.closed_loop(k_star);
    let rho = linalg::spectral_radius(&a_cl);
    if rho >= 1.0 {
        return Err(Error::UnstableClosedLoop(format!(
            "spectral radius {rho} >= 1; no steady state exists"
        )));
    }

    let t_end = config.t_end;
    let mut states = DMatrix::<f64>::zeros(n, t_end + 1);
    let mut inputs = DMatrix::<f64>::zeros(m, t_end);
    let mut attack = DMatrix::<f64>::zeros(m, t_end + 1);
    let mut x = x_init.clone();
    let mut a = DVector::<f64>::zeros(m);
    states.set_column(0, &x);
    for t in 0..t_end {
        attack.set_column(t, &a);
        let u = k_star * &x + &a;
        let next = plant.a_star() * &x + plant.b_star() * &u;
        inputs.set_column(t, &u);
        states.set_column(t + 1, &next);
        x = next;
        a = if t < config.t_inj {
            DVector::zeros(m)
        } else {
            &a * config.beta + a_inf * (1.0 - config.beta)
        };
    }
    attack.set_column(t_end, &a);

    let residual_norms: Vec<f64> = (0..=t_end).map(|t| states.column(t).norm()).collect();
    let window_start = t_end - t_end / 10;
    let steady_state_residual = residual_norms[window_start..].iter().sum::<f64>()
        / (t_end - window_start + 1) as f64;

    Ok(AttackTrajectory {
        states,
        inputs,
        attack,
        residual_norms,
        steady_state_residual,
        t_a: config.t_a,
    })
}

/// Closed-form steady impact of a bias on a Schur loop:
/// `||(I - A_cl)^{-1} B a_inf||`.
pub fn steady_state_impact(
    a_cl: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_inf: &DVector<f64>,
) -> Result<f64> {
    let n = a_cl.nrows();
    let lu = (DMatrix::<f64>::identity(n, n) - a_cl).lu();
    let x_inf = lu
        .solve(&(b * a_inf))
        .ok_or_else(|| Error::AttackUndefined("closed loop has a pole at one".into()))?;
    Ok(x_inf.norm())
}

/// Convenience: draw an initial state uniform on `[-range, range]`.
pub fn random_initial_state<R: Rng + ?Sized>(n: usize, range: f64, rng: &mut R) -> DVector<f64> {
    linalg::uniform_vector(n, -range, range, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn scalar_model(a: f64, b: f64) -> PolicyModel {
        PolicyModel {
            a_cl_hat: DMatrix::from_element(1, 1, a),
            b_cl_hat: DMatrix::from_element(1, 1, b),
        }
    }

    #[test]
    fn scalar_bias_by_hand() {
        // A_cl = 0.5, B = 1: M = 2, delta_alpha = 0.2 -> |a_inf| = 0.1
        let model = scalar_model(0.5, 1.0);
        let a_inf = design_bias(&model, 0.2).unwrap();
        assert_abs_diff_eq!(a_inf[0].abs(), 0.1, epsilon = 1e-12);
        let impact = steady_state_impact(&model.a_cl_hat, &model.b_cl_hat, &a_inf).unwrap();
        assert_abs_diff_eq!(impact, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn zero_budget_zero_bias() {
        let model = scalar_model(0.5, 1.0);
        let a_inf = design_bias(&model, 0.0).unwrap();
        assert_eq!(a_inf.norm(), 0.0);
    }

    #[test]
    fn pole_at_one_rejected() {
        let model = scalar_model(1.0, 1.0);
        assert!(matches!(
            design_bias(&model, 0.2),
            Err(Error::AttackUndefined(_))
        ));
    }

    #[test]
    fn zero_reach_rejected() {
        let model = scalar_model(0.5, 0.0);
        assert!(matches!(
            design_bias(&model, 0.2),
            Err(Error::AttackUndefined(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = AttackConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.beta = 1.0;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.5;
        cfg.t_inj = 450;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unattacked_stable_loop_decays() {
        let plant = Plant::new(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let k = DMatrix::from_element(1, 1, -0.5); // loop at 0.4
        let cfg = AttackConfig::default();
        let traj = simulate_attack(
            &plant,
            &k,
            &cfg,
            &DVector::zeros(1),
            &DVector::from_element(1, 3.0),
        )
        .unwrap();
        assert!(traj.steady_state_residual <= 1e-10);
        assert!(traj.residual_norms[0] > 1.0);
    }

    #[test]
    fn scalar_attack_reaches_designed_steady_state() {
        // believed model equals truth: empirical steady residual ~ threshold
        let plant = Plant::new(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let k = DMatrix::from_element(1, 1, -0.4); // loop at 0.5
        let model = scalar_model(0.5, 1.0);
        let a_inf = design_bias(&model, 0.2).unwrap();
        let cfg = AttackConfig::default();
        let traj = simulate_attack(&plant, &k, &cfg, &a_inf, &DVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(traj.steady_state_residual, 0.2, epsilon = 1e-8);
    }

    #[test]
    fn unstable_loop_is_refused() {
        let plant = Plant::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let k = DMatrix::from_element(1, 1, 0.0);
        let cfg = AttackConfig::default();
        assert!(matches!(
            simulate_attack(&plant, &k, &cfg, &DVector::zeros(1), &DVector::zeros(1)),
            Err(Error::UnstableClosedLoop(_))
        ));
    }

    #[test]
    fn attack_recursion_converges_geometrically() {
        let plant = Plant::new(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let k = DMatrix::from_element(1, 1, 0.0);
        let cfg = AttackConfig {
            beta: 0.5,
            delta_alpha: 0.2,
            t_inj: 10,
            t_a: 80,
            t_end: 100,
        };
        let a_inf = DVector::from_element(1, 0.3);
        let traj = simulate_attack(&plant, &k, &cfg, &a_inf, &DVector::zeros(1)).unwrap();
        for t in cfg.t_inj..=cfg.t_end {
            let gap = (traj.attack.column(t) - &a_inf).norm();
            let bound = cfg.beta.powi((t - cfg.t_inj) as i32) * a_inf.norm();
            assert!(gap <= bound + 1e-12, "t = {t}: gap {gap} > bound {bound}");
        }
    }

    #[test]
    fn empirical_steady_state_matches_closed_form() {
        let plant = Plant::new(
            DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.0, 0.7]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[-0.3, 0.0, 0.0, -0.4]);
        let a_cl = plant.closed_loop(&k);
        assert!(linalg::spectral_radius(&a_cl) < 1.0);
        let a_inf = DVector::from_column_slice(&[0.05, -0.08]);
        let cfg = AttackConfig::default();
        let traj = simulate_attack(&plant, &k, &cfg, &a_inf, &DVector::zeros(2)).unwrap();
        let closed_form = steady_state_impact(&a_cl, plant.b_star(), &a_inf).unwrap();
        let rel = (traj.steady_state_residual - closed_form).abs() / closed_form;
        assert!(rel <= 1e-4, "empirical {} vs closed form {closed_form}", traj.steady_state_residual);
    }
}
