//! CSV rendering of trajectories and audit summaries.

use privddc::adversary::AttackTrajectory;
use privddc::audit::{ClosedLoopAudit, OpenLoopAudit};
use privddc::matcsv::format_value;

/// Trajectory CSV: `t, x_1..x_n, a_1..a_m, residual_norm`.
pub fn trajectory_csv(traj: &AttackTrajectory) -> String {
    let n = traj.states.nrows();
    let m = traj.attack.nrows();
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 1..=m {
        out.push_str(&format!(",a_{i}"));
    }
    out.push_str(",residual_norm\n");
    for t in 0..traj.states.ncols() {
        out.push_str(&t.to_string());
        for i in 0..n {
            out.push(',');
            out.push_str(&format_value(traj.states[(i, t)]));
        }
        for i in 0..m {
            out.push(',');
            out.push_str(&format_value(traj.attack[(i, t)]));
        }
        out.push(',');
        out.push_str(&format_value(traj.residual_norms[t]));
        out.push('\n');
    }
    out
}

/// Audit CSV: one metric per row.
pub fn audit_csv(open: &OpenLoopAudit, closed: &ClosedLoopAudit) -> String {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("open_loop_alternatives,{}\n", open.alternatives.len()));
    out.push_str(&format!(
        "open_loop_max_reproduction_residual,{}\n",
        format_value(open.max_residual)
    ));
    out.push_str(&format!(
        "open_loop_min_separation,{}\n",
        format_value(open.min_separation)
    ));
    out.push_str(&format!("closed_loop_gap_norm,{}\n", format_value(closed.delta_norm)));
    out.push_str(&format!(
        "closed_loop_identity_residual,{}\n",
        format_value(closed.identity_residual)
    ));
    out.push_str(&format!(
        "rho_closed_loop,{}\n",
        format_value(closed.rho_closed_loop)
    ));
    out
}
