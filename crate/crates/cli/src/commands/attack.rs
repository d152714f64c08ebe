//! `attack`: run the pipeline once, then compare the four adversary
//! policies on the same trial, next to the unattacked response.

use std::fs;

use nalgebra::DVector;
use privddc::adversary::{self, AttackConfig, AttackGroundTruth, AttackPolicy};
use privddc::matcsv::format_value;
use privddc::Result;

use crate::config::ExperimentConfig;
use crate::plot;
use crate::report::trajectory_csv;
use crate::seeds::{rng_for, Purpose};
use crate::{pipeline, EXIT_INFEASIBLE, EXIT_OK};

pub fn run(cfg: &ExperimentConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let artifacts = pipeline::run_trial(cfg, Some(&cfg.out), 0, 0.0)?;
    if !artifacts.outcome.is_feasible() {
        eprintln!("synthesis infeasible; no attack comparison possible");
        return Ok(EXIT_INFEASIBLE);
    }
    let sol = artifacts.outcome.solution.as_ref().unwrap();
    let stage2 = artifacts.stage2.as_ref().unwrap();
    let k_star = artifacts.k_star.as_ref().unwrap();
    let view = artifacts.view();
    let truth = AttackGroundTruth {
        plant: &artifacts.plant,
        stage1: &artifacts.stage1,
        stage2,
        k_bar: &sol.k,
    };
    let attack_cfg = AttackConfig {
        beta: cfg.beta,
        delta_alpha: cfg.delta_alpha,
        t_inj: cfg.t_inj,
        t_a: cfg.t_a,
        t_end: cfg.t_end,
    };
    let n = artifacts.plant.state_dim();
    let m = artifacts.plant.input_dim();
    let mut traj_rng = rng_for(cfg.seed, Purpose::Trajectory, 0);
    let x_init = adversary::random_initial_state(n, cfg.x0_range.1.abs(), &mut traj_rng);

    // no-attack baseline plus one run per policy
    let zero_bias = DVector::zeros(m);
    let baseline =
        adversary::simulate_attack(&artifacts.plant, k_star, &attack_cfg, &zero_bias, &x_init)?;
    fs::write(cfg.out.join("trajectory_noattack.csv"), trajectory_csv(&baseline))?;

    let mut summary = String::from("policy,steady_state_residual,believed_impact,true_impact\n");
    let mut curves: Vec<Vec<f64>> = Vec::new();
    let true_cl = artifacts.plant.closed_loop(k_star);
    for policy in AttackPolicy::ALL {
        let model = adversary::build_policy_model(policy, &truth, &view)?;
        let a_inf = adversary::design_bias(&model, cfg.delta_alpha)?;
        let traj =
            adversary::simulate_attack(&artifacts.plant, k_star, &attack_cfg, &a_inf, &x_init)?;
        let true_impact =
            adversary::steady_state_impact(&true_cl, artifacts.plant.b_star(), &a_inf)?;
        summary.push_str(&format!(
            "{policy},{},{},{}\n",
            format_value(traj.steady_state_residual),
            format_value(cfg.delta_alpha),
            format_value(true_impact),
        ));
        fs::write(
            cfg.out.join(format!("trajectory_policy_{policy}.csv")),
            trajectory_csv(&traj),
        )?;
        curves.push(traj.residual_norms.clone());
    }
    fs::write(cfg.out.join("attack_summary.csv"), summary)?;

    // residual curves side by side for the comparison figure
    let rows: Vec<Vec<f64>> = (0..=cfg.t_end)
        .map(|t| {
            let mut row = vec![t as f64, baseline.residual_norms[t]];
            row.extend(curves.iter().map(|c| c[t]));
            row
        })
        .collect();
    plot::write_dat(
        &cfg.out.join("attack_residuals.dat"),
        &["t", "no_attack", "policy_I", "policy_II", "policy_III", "policy_IV"],
        &rows,
    )?;
    plot::line_plot_script(
        &cfg.out.join("attack_residuals.gp"),
        "attack_residuals.dat",
        "Bias injection under each knowledge policy",
        "||r(t)||",
        &[
            (2, "no attack"),
            (3, "policy I"),
            (4, "policy II"),
            (5, "policy III"),
            (6, "policy IV"),
        ],
        Some((cfg.delta_alpha, "detector threshold")),
    )?;

    println!(
        "attack comparison written to {} (threshold {})",
        cfg.out.display(),
        cfg.delta_alpha
    );
    Ok(EXIT_OK)
}
