//! `audit`: replay the privacy audits against a recorded run directory
//! (ground truth, secrets and exchange files written by `case-study` or
//! `attack`).

use std::fs;
use std::path::Path;

use privddc::audit::{self, CloudView};
use privddc::matcsv;
use privddc::plant::Plant;
use privddc::transform::{Stage1Keys, Stage2Keys};
use privddc::{exchange, Error, Result};

use crate::report::audit_csv;
use crate::seeds::{rng_for, Purpose};
use crate::EXIT_OK;

pub fn run(run_dir: &Path, seed: u64) -> Result<i32> {
    let truth_dir = run_dir.join("ground_truth");
    let secrets_dir = run_dir.join("secrets");
    let exchange_dir = run_dir.join("cloud_exchange");

    let a_star = matcsv::read_named_matrix(&truth_dir.join("A.csv"), "A")?;
    let b_star = matcsv::read_named_matrix(&truth_dir.join("B.csv"), "B")?;
    let d0 = matcsv::read_named_matrix(&truth_dir.join("D0.csv"), "D0")?;
    let plant = Plant::new(a_star, b_star)?;

    let stage1 = Stage1Keys {
        f1: matcsv::read_named_matrix(&secrets_dir.join("F1.csv"), "F1")?,
        g1: matcsv::read_named_matrix(&secrets_dir.join("G1.csv"), "G1")?,
    };

    let request = exchange::read_request(&exchange_dir)?;
    let response = exchange::read_response(&exchange_dir)?;
    if !response.is_feasible() {
        return Err(Error::Parse(
            "recorded synthesis was not feasible; nothing to audit".into(),
        ));
    }
    let k_bar = response.solution.as_ref().unwrap().k.clone();
    let view = CloudView {
        gamma_bar: Some(response.gamma_bar),
        k_bar: Some(k_bar.clone()),
        ..request
    };

    // open-loop audit on the view as received; when the run recorded a
    // disturbance, also with the auditor granted it
    let mut rng = rng_for(seed, Purpose::Audit, 0);
    let open = if view.delta.is_some() {
        let mut denoised = view.clone();
        denoised.x1 = &view.x1 - &d0;
        audit::run_open_loop_audit(&denoised, &plant, 10, &mut rng)?
    } else {
        audit::run_open_loop_audit(&view, &plant, 10, &mut rng)?
    };

    let stage2 = Stage2Keys {
        f2: matcsv::read_named_matrix(&secrets_dir.join("F2.csv"), "F2")?,
        g2: matcsv::read_named_matrix(&secrets_dir.join("G2.csv"), "G2")?,
    };
    let closed = audit::run_closed_loop_audit(&plant, &stage1, &stage2, &k_bar);

    fs::write(run_dir.join("audit_report.csv"), audit_csv(&open, &closed))?;
    println!(
        "audit: {} alternatives, max reproduction residual {:.2e}, gap norm {:.4}, identity residual {:.2e}, rho {:.4}",
        open.alternatives.len(),
        open.max_residual,
        closed.delta_norm,
        closed.identity_residual,
        closed.rho_closed_loop
    );
    Ok(EXIT_OK)
}
