//! Shared fixtures for the integration and acceptance suites.

use nalgebra::{DMatrix, DVector};
use privddc::adversary;
use privddc::audit::CloudView;
use privddc::plant::{self, DataSet, DisturbanceModel, Plant};
use privddc::qmi::{CenterFormQmi, QmiSet};
use privddc::synth::{self, SynthesisOutcome};
use privddc::transform::{self, MaskedData, Stage1Keys, Stage2Keys};
use privddc::linalg;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default stage-2 fill factor used by the experiments.
pub const FILL_FACTOR: f64 = 0.9;

/// One full clean-path pipeline run on the batch reactor with the standard
/// experiment parameters (T=20, inputs U(-5,5), x0 U(-2.5,2.5), keys
/// U(-1,1)).
pub struct CleanTrial {
    pub seed: u64,
    pub plant: Plant,
    pub data: DataSet,
    pub stage1: Stage1Keys,
    pub masked: MaskedData,
    pub outcome: SynthesisOutcome,
    /// Stage-2 keys and the final gain, present when the budget is positive.
    pub stage2: Option<Stage2Keys>,
    pub k_star: Option<DMatrix<f64>>,
    /// Fresh initial state for attack simulations.
    pub x_attack: DVector<f64>,
}

impl CleanTrial {
    pub fn view(&self) -> CloudView {
        CloudView {
            x0: self.masked.x0.clone(),
            x1: self.masked.x1.clone(),
            v0: self.masked.v0.clone(),
            delta: None,
            gamma_bar: self.outcome.is_feasible().then_some(self.outcome.gamma_bar),
            k_bar: self.outcome.solution.as_ref().map(|s| s.k.clone()),
        }
    }
}

pub fn clean_trial(seed: u64) -> CleanTrial {
    let reactor = Plant::batch_reactor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_init = linalg::uniform_vector(4, -2.5, 2.5, &mut rng);
    let inputs = linalg::uniform_matrix(2, 20, -5.0, 5.0, &mut rng);
    let data = plant::simulate_collect(&reactor, &x_init, &inputs, None).expect("simulate");
    assert!(plant::check_rank_assumption(&data), "seed {seed}: rank assumption failed");
    let stage1 = transform::generate_stage1_keys(4, 2, transform::DEFAULT_KEY_RANGE, &mut rng)
        .expect("stage-1 keys");
    let masked = transform::pre_process(&data, &stage1).expect("pre-process");
    let outcome =
        synth::maximize_gamma_clean(&masked.x0, &masked.x1, &masked.v0).expect("synthesis");
    let (stage2, k_star) = match (&outcome.solution, outcome.gamma_bar > 0.0) {
        (Some(sol), true) => {
            let b_norm = linalg::spectral_norm(reactor.b_star());
            let stage2 = transform::generate_stage2_keys(
                &stage1,
                &sol.k,
                outcome.gamma_bar,
                b_norm,
                FILL_FACTOR,
                &mut rng,
            )
            .expect("stage-2 keys");
            let k_star = transform::post_process(&stage2, &sol.k);
            (Some(stage2), Some(k_star))
        }
        _ => (None, None),
    };
    let x_attack = adversary::random_initial_state(4, 2.5, &mut rng);
    CleanTrial {
        seed,
        plant: reactor,
        data,
        stage1,
        masked,
        outcome,
        stage2,
        k_star,
        x_attack,
    }
}

/// One full disturbed-path pipeline run on the batch reactor.
pub struct NoisyTrial {
    pub seed: u64,
    pub plant: Plant,
    pub data: DataSet,
    pub model: DisturbanceModel,
    pub stage1: Stage1Keys,
    pub masked: MaskedData,
    pub outcome: SynthesisOutcome,
    pub stage2: Option<Stage2Keys>,
    pub k_star: Option<DMatrix<f64>>,
}

impl NoisyTrial {
    pub fn view(&self) -> CloudView {
        CloudView {
            x0: self.masked.x0.clone(),
            x1: self.masked.x1.clone(),
            v0: self.masked.v0.clone(),
            delta: Some(self.model.delta.clone()),
            gamma_bar: self.outcome.is_feasible().then_some(self.outcome.gamma_bar),
            k_bar: self.outcome.solution.as_ref().map(|s| s.k.clone()),
        }
    }

    /// The auditor's strengthened view with the recorded disturbance removed
    /// from the shifted states.
    pub fn denoised_view(&self) -> CloudView {
        let mut view = self.view();
        view.x1 = &self.masked.x1 - &self.masked.d0;
        view
    }
}

pub fn noisy_trial(seed: u64, d_max: f64) -> NoisyTrial {
    let reactor = Plant::batch_reactor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_init = linalg::uniform_vector(4, -2.5, 2.5, &mut rng);
    let inputs = linalg::uniform_matrix(2, 20, -5.0, 5.0, &mut rng);
    let (d0, model) =
        plant::generate_uniform_disturbance(4, 20, d_max, &mut rng).expect("disturbance");
    let data = plant::simulate_collect(&reactor, &x_init, &inputs, Some(&d0)).expect("simulate");
    let stage1 = transform::generate_stage1_keys(4, 2, transform::DEFAULT_KEY_RANGE, &mut rng)
        .expect("stage-1 keys");
    let masked = transform::pre_process(&data, &stage1).expect("pre-process");
    // a zero disturbance bound degenerates to the clean path
    let outcome = if d_max > 0.0 {
        synth::maximize_gamma_noisy(&masked.x0, &masked.x1, &masked.v0, &model.delta)
            .expect("synthesis")
    } else {
        synth::maximize_gamma_clean(&masked.x0, &masked.x1, &masked.v0).expect("synthesis")
    };
    let (stage2, k_star) = match (&outcome.solution, outcome.gamma_bar > 0.0) {
        (Some(sol), true) => {
            let b_norm = linalg::spectral_norm(reactor.b_star());
            let stage2 = transform::generate_stage2_keys(
                &stage1,
                &sol.k,
                outcome.gamma_bar,
                b_norm,
                FILL_FACTOR,
                &mut rng,
            )
            .expect("stage-2 keys");
            let k_star = transform::post_process(&stage2, &sol.k);
            (Some(stage2), Some(k_star))
        }
        _ => (None, None),
    };
    NoisyTrial {
        seed,
        plant: reactor,
        data,
        model,
        stage1,
        masked,
        outcome,
        stage2,
        k_star,
    }
}

/// Brute-force scalar oracle: largest gamma such that some gain k keeps the
/// whole Euclidean ball of radius gamma around (a, b) strictly Schur:
/// `|a + b k| + gamma sqrt(1 + k^2) < 1`, maximized over k by a refining
/// grid search.
pub fn scalar_gamma_oracle(a: f64, b: f64) -> f64 {
    let mut best = 0.0_f64;
    let mut lo = -50.0;
    let mut hi = 50.0;
    for _pass in 0..4 {
        let mut best_k = lo;
        let steps = 4000;
        for i in 0..=steps {
            let k = lo + (hi - lo) * i as f64 / steps as f64;
            let margin = (1.0 - (a + b * k).abs()) / (1.0 + k * k).sqrt();
            if margin > best {
                best = margin;
                best_k = k;
            }
        }
        let width = (hi - lo) / steps as f64 * 4.0;
        lo = best_k - width;
        hi = best_k + width;
    }
    best
}

/// Random nonempty QMI set with positive definite shape, via its center form.
pub fn random_qmi_set<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> QmiSet {
    let g = linalg::uniform_matrix(n + m, n + m, -1.0, 1.0, rng);
    let abold =
        linalg::symmetrize(&(&g * g.transpose())) + DMatrix::<f64>::identity(n + m, n + m) * 0.3;
    let zeta = linalg::uniform_matrix(n + m, n, -1.0, 1.0, rng);
    let h = linalg::uniform_matrix(n, n, -1.0, 1.0, rng);
    let q = linalg::symmetrize(&(&h * h.transpose())) * 0.3;
    CenterFormQmi { abold, zeta, q }.to_qmi_set()
}

/// Split a stacked system point `Z = [A B]^T` into `(A, B)`.
pub fn split_system(z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = z.ncols();
    let m = z.nrows() - n;
    (
        z.view((0, 0), (n, n)).transpose().into_owned(),
        z.view((n, 0), (m, n)).transpose().into_owned(),
    )
}

/// Median of a slice (copied and sorted internally).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}
