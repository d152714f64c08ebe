//! `case-study`: one full clean-path run with reports, audits and the
//! unattacked closed-loop trajectory.

use std::fs;

use nalgebra::DVector;
use privddc::adversary::{self, AttackConfig};
use privddc::audit;
use privddc::matcsv::format_value;
use privddc::{linalg, qmi, Result};

use crate::config::ExperimentConfig;
use crate::plot;
use crate::report::{audit_csv, trajectory_csv};
use crate::seeds::{rng_for, Purpose};
use crate::{pipeline, EXIT_INFEASIBLE, EXIT_OK};

pub fn run(cfg: &ExperimentConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let artifacts = pipeline::run_trial(cfg, Some(&cfg.out), 0, 0.0)?;

    let mut report = String::new();
    report.push_str(&format!("status={}\n", artifacts.outcome.status.as_str()));
    report.push_str(&format!("gamma_bar={}\n", format_value(artifacts.outcome.gamma_bar)));

    if !artifacts.outcome.is_feasible() {
        fs::write(cfg.out.join("report.txt"), report)?;
        eprintln!("synthesis infeasible; see {}", cfg.out.join("report.txt").display());
        return Ok(EXIT_INFEASIBLE);
    }

    let sol = artifacts.outcome.solution.as_ref().unwrap();
    let stage2 = artifacts.stage2.as_ref().unwrap();
    let k_star = artifacts.k_star.as_ref().unwrap();
    let rho_true = linalg::spectral_radius(&artifacts.plant.closed_loop(k_star));

    // masked center loop, reconstructible on the cloud side
    let center = qmi::data_center(&artifacts.masked.x0, &artifacts.masked.x1, &artifacts.masked.v0)?;
    let n = artifacts.plant.state_dim();
    let m = artifacts.plant.input_dim();
    let a_bar = center.view((0, 0), (n, n)).transpose().into_owned();
    let b_bar = center.view((n, 0), (m, n)).transpose().into_owned();
    let rho_masked = linalg::spectral_radius(&(a_bar + b_bar * &sol.k));

    report.push_str(&format!("margin={}\n", format_value(sol.margin)));
    report.push_str(&format!("rho_closed_loop={}\n", format_value(rho_true)));
    report.push_str(&format!("rho_masked_center_loop={}\n", format_value(rho_masked)));
    report.push_str(&format!(
        "gain_residual={}\n",
        format_value((&sol.k * &sol.p - &sol.y).norm() / (1.0 + sol.y.norm()))
    ));

    // audits
    let mut audit_rng = rng_for(cfg.seed, Purpose::Audit, 0);
    let open = audit::run_open_loop_audit(&artifacts.view(), &artifacts.plant, 10, &mut audit_rng)?;
    let closed = audit::run_closed_loop_audit(&artifacts.plant, &artifacts.stage1, stage2, &sol.k);
    fs::write(cfg.out.join("audit.csv"), audit_csv(&open, &closed))?;
    report.push_str(&format!("open_loop_alternatives={}\n", open.alternatives.len()));
    report.push_str(&format!(
        "open_loop_max_residual={}\n",
        format_value(open.max_residual)
    ));
    report.push_str(&format!("closed_loop_gap_norm={}\n", format_value(closed.delta_norm)));
    report.push_str(&format!(
        "closed_loop_identity_residual={}\n",
        format_value(closed.identity_residual)
    ));
    fs::write(cfg.out.join("report.txt"), report)?;

    // unattacked trajectory of the realized loop
    let attack_cfg = AttackConfig {
        beta: cfg.beta,
        delta_alpha: cfg.delta_alpha,
        t_inj: cfg.t_inj,
        t_a: cfg.t_a,
        t_end: cfg.t_end,
    };
    let mut traj_rng = rng_for(cfg.seed, Purpose::Trajectory, 0);
    let x_init = adversary::random_initial_state(n, cfg.x0_range.1.abs(), &mut traj_rng);
    let zero_bias = DVector::zeros(m);
    let traj = adversary::simulate_attack(&artifacts.plant, k_star, &attack_cfg, &zero_bias, &x_init)?;
    fs::write(cfg.out.join("trajectory.csv"), trajectory_csv(&traj))?;
    let rows: Vec<Vec<f64>> = traj
        .residual_norms
        .iter()
        .enumerate()
        .map(|(t, r)| vec![t as f64, *r])
        .collect();
    plot::write_dat(&cfg.out.join("trajectory.dat"), &["t", "state_norm"], &rows)?;
    plot::line_plot_script(
        &cfg.out.join("trajectory.gp"),
        "trajectory.dat",
        "Unattacked closed loop",
        "||x(t)||",
        &[(2, "state norm")],
        None,
    )?;

    println!(
        "case study: feasible, gamma_bar = {:.4}, rho(closed loop) = {:.4}, outputs in {}",
        artifacts.outcome.gamma_bar,
        rho_true,
        cfg.out.display()
    );
    Ok(EXIT_OK)
}
