//! Shared pipeline steps: plant loading, data collection, masking,
//! outsourcing through the exchange directory, unmasking.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use privddc::audit::CloudView;
use privddc::exchange;
use privddc::matcsv;
use privddc::plant::{self, DataSet, DisturbanceModel, Plant};
use privddc::synth::{self, SynthesisOutcome};
use privddc::transform::{self, MaskedData, Stage1Keys, Stage2Keys};
use privddc::{linalg, Error, Result};

use crate::config::ExperimentConfig;
use crate::seeds::{rng_for, Purpose};

/// Everything one trial produces.
pub struct PipelineArtifacts {
    pub plant: Plant,
    pub data: DataSet,
    pub model: Option<DisturbanceModel>,
    pub stage1: Stage1Keys,
    pub masked: MaskedData,
    pub outcome: SynthesisOutcome,
    pub stage2: Option<Stage2Keys>,
    pub k_star: Option<DMatrix<f64>>,
    pub b_norm_bound: f64,
}

impl PipelineArtifacts {
    pub fn view(&self) -> CloudView {
        CloudView {
            x0: self.masked.x0.clone(),
            x1: self.masked.x1.clone(),
            v0: self.masked.v0.clone(),
            delta: self.model.as_ref().map(|m| m.delta.clone()),
            gamma_bar: self.outcome.is_feasible().then_some(self.outcome.gamma_bar),
            k_bar: self.outcome.solution.as_ref().map(|s| s.k.clone()),
        }
    }
}

/// Load the built-in plant or a `A.csv`/`B.csv` directory.
pub fn load_plant(cfg: &ExperimentConfig) -> Result<Plant> {
    if cfg.plant == "batch-reactor" {
        return Ok(Plant::batch_reactor());
    }
    let dir = Path::new(&cfg.plant);
    let a = matcsv::read_named_matrix(&dir.join("A.csv"), "A")?;
    let b = matcsv::read_named_matrix(&dir.join("B.csv"), "B")?;
    Plant::new(a, b)
}

/// Collect one experiment, redrawing (bounded) if the excitation misses the
/// rank condition.
pub fn collect(
    cfg: &ExperimentConfig,
    plant: &Plant,
    trial: u64,
    d_max: f64,
) -> Result<(DataSet, Option<DisturbanceModel>)> {
    let n = plant.state_dim();
    let m = plant.input_dim();
    for attempt in 0..10 {
        let mut rng = rng_for(cfg.seed, Purpose::Data, trial * 1000 + attempt);
        let x_init = linalg::uniform_vector(n, cfg.x0_range.0, cfg.x0_range.1, &mut rng);
        let inputs =
            linalg::uniform_matrix(m, cfg.horizon, cfg.input_range.0, cfg.input_range.1, &mut rng);
        let (d0, model) = if d_max > 0.0 {
            let mut drng = rng_for(cfg.seed, Purpose::Disturbance, trial * 1000 + attempt);
            let (d0, model) = plant::generate_uniform_disturbance(n, cfg.horizon, d_max, &mut drng)?;
            (Some(d0), Some(model))
        } else {
            (None, None)
        };
        let data = plant::simulate_collect(plant, &x_init, &inputs, d0.as_ref())?;
        if plant::check_rank_assumption(&data) {
            return Ok((data, model));
        }
    }
    Err(Error::RankDeficient(format!(
        "excitation never reached full row rank {} (horizon {} too short?)",
        n + m,
        cfg.horizon
    )))
}

/// Client-side synthesis driver working purely in memory (used by the
/// sweep, where no exchange directory is wanted).
pub fn synthesize_in_memory(
    masked: &MaskedData,
    model: Option<&DisturbanceModel>,
) -> Result<SynthesisOutcome> {
    match model {
        Some(m) => synth::maximize_gamma_noisy(&masked.x0, &masked.x1, &masked.v0, &m.delta),
        None => synth::maximize_gamma_clean(&masked.x0, &masked.x1, &masked.v0),
    }
}

/// Cloud-side synthesis from a request that already round-tripped the
/// exchange files.
pub fn synthesize_from_request(view: &CloudView) -> Result<SynthesisOutcome> {
    match &view.delta {
        Some(delta) => synth::maximize_gamma_noisy(&view.x0, &view.x1, &view.v0, delta),
        None => synth::maximize_gamma_clean(&view.x0, &view.x1, &view.v0),
    }
}

/// Run one full trial. When `out_dir` is set, the cloud step goes through
/// `<out_dir>/cloud_exchange/` on disk and ground truth plus key material
/// are recorded under `ground_truth/` and `secrets/`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    trial: u64,
    d_max: f64,
) -> Result<PipelineArtifacts> {
    let plant = load_plant(cfg)?;
    let n = plant.state_dim();
    let m = plant.input_dim();
    let (data, model) = collect(cfg, &plant, trial, d_max)?;

    let mut key_rng = rng_for(cfg.seed, Purpose::Stage1Keys, trial);
    let stage1 = transform::generate_stage1_keys(n, m, cfg.key_range, &mut key_rng)?;
    let masked = transform::pre_process(&data, &stage1)?;

    let request = CloudView {
        x0: masked.x0.clone(),
        x1: masked.x1.clone(),
        v0: masked.v0.clone(),
        delta: model.as_ref().map(|dm| dm.delta.clone()),
        gamma_bar: None,
        k_bar: None,
    };

    let outcome = match out_dir {
        Some(dir) => {
            let exchange_dir = dir.join("cloud_exchange");
            exchange::write_request(&exchange_dir, &request)?;
            // the cloud consumes only what the files carry
            let read_back = exchange::read_request(&exchange_dir)?;
            let outcome = synthesize_from_request(&read_back)?;
            exchange::write_response(&exchange_dir, &outcome)?;

            let truth_dir = dir.join("ground_truth");
            fs::create_dir_all(&truth_dir)?;
            matcsv::write_matrix(&truth_dir.join("A.csv"), "A", plant.a_star())?;
            matcsv::write_matrix(&truth_dir.join("B.csv"), "B", plant.b_star())?;
            matcsv::write_matrix(&truth_dir.join("D0.csv"), "D0", &data.d0)?;
            matcsv::write_matrix(&truth_dir.join("U0.csv"), "U0", &data.u0)?;

            let secrets = dir.join("secrets");
            exchange::write_secret_matrix(&secrets, &exchange_dir, "F1", &stage1.f1)?;
            exchange::write_secret_matrix(&secrets, &exchange_dir, "G1", &stage1.g1)?;
            outcome
        }
        None => synthesize_in_memory(&masked, model.as_ref())?,
    };

    let b_norm_bound = cfg
        .b_norm_bound
        .unwrap_or_else(|| linalg::spectral_norm(plant.b_star()));

    let (stage2, k_star) = match (&outcome.solution, outcome.gamma_bar > 0.0) {
        (Some(sol), true) => {
            let mut rng2 = rng_for(cfg.seed, Purpose::Stage2Keys, trial);
            let stage2 = transform::generate_stage2_keys(
                &stage1,
                &sol.k,
                outcome.gamma_bar,
                b_norm_bound,
                cfg.rho,
                &mut rng2,
            )?;
            let k_star = transform::post_process(&stage2, &sol.k);
            if let Some(dir) = out_dir {
                let secrets = dir.join("secrets");
                let exchange_dir = dir.join("cloud_exchange");
                exchange::write_secret_matrix(&secrets, &exchange_dir, "F2", &stage2.f2)?;
                exchange::write_secret_matrix(&secrets, &exchange_dir, "G2", &stage2.g2)?;
                matcsv::write_matrix(&dir.join("K_star.csv"), "K_star", &k_star)?;
            }
            (Some(stage2), Some(k_star))
        }
        _ => (None, None),
    };

    Ok(PipelineArtifacts {
        plant,
        data,
        model,
        stage1,
        masked,
        outcome,
        stage2,
        k_star,
        b_norm_bound,
    })
}
