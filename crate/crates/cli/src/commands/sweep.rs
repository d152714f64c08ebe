//! `sweep`: disturbance-amplitude sweep; per amplitude, many independent
//! collect+synthesize trials, with the budget distribution binned into
//! 0.01-wide intervals plus a dedicated infeasible bin.

use std::fs;

use privddc::matcsv::format_value;
use privddc::synth::SynthStatus;
use privddc::Result;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::plot;
use crate::{pipeline, EXIT_OK};

const BIN_WIDTH: f64 = 0.01;

pub fn run(cfg: &ExperimentConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let grid = &cfg.d_max_grid;

    // trials execute in parallel; results are merged by (grid, trial) index
    let mut results: Vec<(usize, u64, SynthStatus, f64)> = grid
        .par_iter()
        .enumerate()
        .flat_map_iter(|(gi, &d_max)| {
            (0..cfg.trials as u64).map(move |trial| (gi, d_max, trial))
        })
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(gi, d_max, trial)| {
            let global_trial = gi as u64 * 1_000_000 + trial;
            let artifacts = pipeline::run_trial(cfg, None, global_trial, d_max)
                .expect("sweep trial failed");
            (gi, trial, artifacts.outcome.status, artifacts.outcome.gamma_bar)
        })
        .collect();
    results.sort_by_key(|&(gi, trial, _, _)| (gi, trial));

    let mut trials_csv = String::from("d_max,trial,status,gamma_bar\n");
    for &(gi, trial, status, gamma) in &results {
        trials_csv.push_str(&format!(
            "{},{},{},{}\n",
            format_value(grid[gi]),
            trial,
            status.as_str(),
            format_value(gamma)
        ));
    }
    fs::write(cfg.out.join("sweep_trials.csv"), trials_csv)?;

    // binning: fractions per d_max of infeasible and of each 0.01 interval
    let max_gamma = results
        .iter()
        .filter(|r| r.2 == SynthStatus::Feasible)
        .map(|r| r.3)
        .fold(0.0_f64, f64::max);
    let n_bins = ((max_gamma / BIN_WIDTH).ceil() as usize).max(1);

    let mut fractions = vec![vec![0.0_f64; grid.len()]; n_bins + 1]; // row 0: infeasible
    let mut medians = vec![0.0_f64; grid.len()];
    for (gi, _) in grid.iter().enumerate() {
        let col: Vec<&(usize, u64, SynthStatus, f64)> =
            results.iter().filter(|r| r.0 == gi).collect();
        let total = col.len() as f64;
        let mut budgets: Vec<f64> = Vec::with_capacity(col.len());
        for r in &col {
            if r.2 == SynthStatus::Feasible {
                budgets.push(r.3);
                let bin = ((r.3 / BIN_WIDTH).ceil() as usize).clamp(1, n_bins);
                fractions[bin][gi] += 1.0 / total;
            } else {
                budgets.push(0.0);
                fractions[0][gi] += 1.0 / total;
            }
        }
        budgets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians[gi] = budgets[budgets.len() / 2];
    }

    let mut bins_csv = String::from("bin_lo,bin_hi");
    for &d in grid {
        bins_csv.push_str(&format!(",{}", format_value(d)));
    }
    bins_csv.push('\n');
    bins_csv.push_str("infeasible,infeasible");
    for gi in 0..grid.len() {
        bins_csv.push_str(&format!(",{}", format_value(fractions[0][gi])));
    }
    bins_csv.push('\n');
    for bin in 1..=n_bins {
        bins_csv.push_str(&format!(
            "{},{}",
            format_value((bin - 1) as f64 * BIN_WIDTH),
            format_value(bin as f64 * BIN_WIDTH)
        ));
        for gi in 0..grid.len() {
            bins_csv.push_str(&format!(",{}", format_value(fractions[bin][gi])));
        }
        bins_csv.push('\n');
    }
    bins_csv.push_str("median,median");
    for &m in &medians {
        bins_csv.push_str(&format!(",{}", format_value(m)));
    }
    bins_csv.push('\n');
    fs::write(cfg.out.join("sweep_bins.csv"), bins_csv)?;

    // heatmap matrix: one row per bin (infeasible last), one column per d_max
    let mut matrix_rows: Vec<Vec<f64>> = Vec::with_capacity(n_bins + 1);
    for bin in 1..=n_bins {
        matrix_rows.push(fractions[bin].clone());
    }
    matrix_rows.push(fractions[0].clone());
    plot::write_dat(
        &cfg.out.join("sweep_bins.dat"),
        &["fraction_matrix_rows_bins_cols_dmax"],
        &matrix_rows,
    )?;
    plot::heatmap_script(
        &cfg.out.join("sweep_heatmap.gp"),
        "sweep_bins.dat",
        "Privacy budget distribution vs disturbance amplitude",
        "d_max grid index",
        "budget bin (0.01 wide, top row = infeasible)",
    )?;

    println!(
        "sweep over {} amplitudes x {} trials written to {} (medians: {})",
        grid.len(),
        cfg.trials,
        cfg.out.display(),
        medians
            .iter()
            .map(|m| format!("{m:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(EXIT_OK)
}
