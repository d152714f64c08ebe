//! End-to-end flows: mask, outsource through the exchange directory,
//! unmask, and audit — on both the clean and the disturbed path.

mod common;

use common::*;
use privddc::audit;
use privddc::exchange;
use privddc::linalg;
use privddc::synth::{self, SynthStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

#[test]
fn clean_pipeline_stabilizes_and_stays_private() {
    let trial = clean_trial(7);
    assert!(trial.outcome.is_feasible());
    assert!(trial.outcome.gamma_bar > 0.0);

    let k_star = trial.k_star.as_ref().unwrap();
    let rho = linalg::spectral_radius(&trial.plant.closed_loop(k_star));
    assert!(rho < 1.0, "realized loop must be Schur, rho = {rho}");

    // open-loop: the view admits many explanations
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let open = audit::run_open_loop_audit(&trial.view(), &trial.plant, 5, &mut rng).unwrap();
    assert!(open.max_residual <= 1e-9);
    assert!(open.min_separation > 1e-6);

    // closed-loop: nonzero gap, exact identity
    let closed = audit::run_closed_loop_audit(
        &trial.plant,
        &trial.stage1,
        trial.stage2.as_ref().unwrap(),
        &trial.outcome.solution.as_ref().unwrap().k,
    );
    assert!(closed.delta_norm > 0.0);
    assert!(closed.identity_residual <= 1e-10);
    assert!(closed.rho_closed_loop < 1.0);
}

#[test]
fn noisy_pipeline_stabilizes_through_overapproximation() {
    let trial = noisy_trial(11, 0.04);
    assert!(trial.outcome.is_feasible());
    let k_star = trial.k_star.as_ref().unwrap();
    let rho = linalg::spectral_radius(&trial.plant.closed_loop(k_star));
    assert!(rho < 1.0, "noisy-path loop must be Schur, rho = {rho}");

    // auditor granted the recorded disturbance reaches the same conclusions
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let open = audit::run_open_loop_audit(&trial.denoised_view(), &trial.plant, 5, &mut rng).unwrap();
    assert!(open.max_residual <= 1e-9);
}

#[test]
fn exchange_directory_drives_the_cloud_side() {
    // the synthesis consumed here is exactly what round-tripped through the
    // files, so the serialized view alone must suffice
    let trial = clean_trial(13);
    let dir = tempdir().unwrap();
    let mut view = trial.view();
    view.gamma_bar = None;
    view.k_bar = None;
    exchange::write_request(dir.path(), &view).unwrap();

    let request = exchange::read_request(dir.path()).unwrap();
    let outcome = match &request.delta {
        Some(delta) => {
            synth::maximize_gamma_noisy(&request.x0, &request.x1, &request.v0, delta).unwrap()
        }
        None => synth::maximize_gamma_clean(&request.x0, &request.x1, &request.v0).unwrap(),
    };
    exchange::write_response(dir.path(), &outcome).unwrap();
    assert!(exchange::only_exchange_files(dir.path()).unwrap());

    let response = exchange::read_response(dir.path()).unwrap();
    assert_eq!(response.status, SynthStatus::Feasible);
    assert!((response.gamma_bar - trial.outcome.gamma_bar).abs() <= 1e-12);
    let k_file = response.solution.unwrap().k;
    let k_mem = &trial.outcome.solution.as_ref().unwrap().k;
    assert!((&k_file - k_mem).norm() <= 1e-12 * (1.0 + k_mem.norm()));
}

#[test]
fn pipeline_is_deterministic_per_seed() {
    let a = clean_trial(21);
    let b = clean_trial(21);
    assert_eq!(a.outcome.gamma_bar, b.outcome.gamma_bar);
    assert_eq!(
        a.outcome.solution.as_ref().unwrap().k,
        b.outcome.solution.as_ref().unwrap().k
    );
    assert_eq!(a.k_star.as_ref().unwrap(), b.k_star.as_ref().unwrap());

    let c = clean_trial(22);
    assert_ne!(a.outcome.solution.as_ref().unwrap().k, c.outcome.solution.as_ref().unwrap().k);
}

#[test]
fn short_horizon_fails_the_rank_gate() {
    use privddc::plant::{self, Plant};
    use privddc::qmi;
    // T = 5 < n + m = 6: row rank is bounded by the column count
    let reactor = Plant::batch_reactor();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x_init = linalg::uniform_vector(4, -2.5, 2.5, &mut rng);
    let inputs = linalg::uniform_matrix(2, 5, -5.0, 5.0, &mut rng);
    let data = plant::simulate_collect(&reactor, &x_init, &inputs, None).unwrap();
    assert!(!plant::check_rank_assumption(&data));
    let err = qmi::clean_singleton_set(&data.x0, &data.x1, &data.u0).unwrap_err();
    assert!(matches!(err, privddc::Error::RankDeficient(_)));
}
