//! The cloud exchange directory: the only channel between client and cloud,
//! a directory of CSV matrices plus a manifest.
//!
//! Request files: `X0.csv`, `X1.csv`, `V0.csv`, optional `delta.csv`, and
//! `manifest.txt` with `key=value` lines naming `n`, `m`, `T` and the path
//! kind. Response files: `P.csv`, `Y.csv`, `K.csv`, `gamma.txt`,
//! `status.txt`. Nothing else ever crosses the boundary; key material and
//! recorded disturbances stay on the client.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::audit::CloudView;
use crate::error::{Error, Result};
use crate::matcsv;
use crate::synth::{StabilizingSolution, SynthStatus, SynthesisOutcome};

/// File names of a request.
pub const REQUEST_FILES: [&str; 5] = ["X0.csv", "X1.csv", "V0.csv", "delta.csv", "manifest.txt"];

/// File names of a response.
pub const RESPONSE_FILES: [&str; 5] = ["P.csv", "Y.csv", "K.csv", "gamma.txt", "status.txt"];

/// Write the client request (the cloud's entire information set) into `dir`.
pub fn write_request(dir: &Path, view: &CloudView) -> Result<()> {
    fs::create_dir_all(dir)?;
    matcsv::write_matrix(&dir.join("X0.csv"), "X0", &view.x0)?;
    matcsv::write_matrix(&dir.join("X1.csv"), "X1", &view.x1)?;
    matcsv::write_matrix(&dir.join("V0.csv"), "V0", &view.v0)?;
    let kind = if let Some(delta) = &view.delta {
        matcsv::write_matrix(&dir.join("delta.csv"), "delta", delta)?;
        "noisy"
    } else {
        "clean"
    };
    let (n, m) = view.dims();
    let manifest = format!(
        "n={}\nm={}\nT={}\nkind={}\n",
        n,
        m,
        view.x0.ncols(),
        kind
    );
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

fn manifest_value(text: &str, key: &str) -> Result<String> {
    text.lines()
        .find_map(|line| line.strip_prefix(&format!("{key}=")).map(str::to_string))
        .ok_or_else(|| Error::Parse(format!("manifest misses key {key:?}")))
}

/// Read a request back; the returned view carries no synthesis outputs.
pub fn read_request(dir: &Path) -> Result<CloudView> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let n: usize = manifest_value(&manifest, "n")?
        .parse()
        .map_err(|_| Error::Parse("bad n in manifest".into()))?;
    let m: usize = manifest_value(&manifest, "m")?
        .parse()
        .map_err(|_| Error::Parse("bad m in manifest".into()))?;
    let kind = manifest_value(&manifest, "kind")?;

    let x0 = matcsv::read_named_matrix(&dir.join("X0.csv"), "X0")?;
    let x1 = matcsv::read_named_matrix(&dir.join("X1.csv"), "X1")?;
    let v0 = matcsv::read_named_matrix(&dir.join("V0.csv"), "V0")?;
    if x0.nrows() != n || x1.nrows() != n || v0.nrows() != m {
        return Err(Error::Parse("manifest dimensions do not match matrices".into()));
    }
    let delta = match kind.as_str() {
        "noisy" => Some(matcsv::read_named_matrix(&dir.join("delta.csv"), "delta")?),
        "clean" => None,
        other => return Err(Error::Parse(format!("unknown exchange kind {other:?}"))),
    };
    Ok(CloudView {
        x0,
        x1,
        v0,
        delta,
        gamma_bar: None,
        k_bar: None,
    })
}

/// Publish a synthesis outcome into `dir`.
pub fn write_response(dir: &Path, outcome: &SynthesisOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("status.txt"), format!("{}\n", outcome.status.as_str()))?;
    matcsv::write_scalar(&dir.join("gamma.txt"), outcome.gamma_bar)?;
    if let Some(sol) = &outcome.solution {
        matcsv::write_matrix(&dir.join("P.csv"), "P", &sol.p)?;
        matcsv::write_matrix(&dir.join("Y.csv"), "Y", &sol.y)?;
        matcsv::write_matrix(&dir.join("K.csv"), "K", &sol.k)?;
    }
    Ok(())
}

/// Read a published outcome back. The margin is not transported; it is set
/// to zero and must be recomputed by the consumer when needed.
pub fn read_response(dir: &Path) -> Result<SynthesisOutcome> {
    let status: SynthStatus = fs::read_to_string(dir.join("status.txt"))?.parse()?;
    let gamma_bar = matcsv::read_scalar(&dir.join("gamma.txt"))?;
    let solution = if status == SynthStatus::Feasible {
        let p = matcsv::read_named_matrix(&dir.join("P.csv"), "P")?;
        let y = matcsv::read_named_matrix(&dir.join("Y.csv"), "Y")?;
        let k = matcsv::read_named_matrix(&dir.join("K.csv"), "K")?;
        Some(StabilizingSolution {
            p,
            y,
            k,
            margin: 0.0,
        })
    } else {
        None
    };
    Ok(SynthesisOutcome {
        status,
        gamma_bar,
        solution,
        trace: Vec::new(),
    })
}

/// Names that must never appear in an exchange directory (client secrets).
pub const FORBIDDEN_IN_EXCHANGE: [&str; 6] = [
    "F1.csv", "G1.csv", "F2.csv", "G2.csv", "D0.csv", "U0.csv",
];

/// Check that a directory holds only declared exchange files.
pub fn only_exchange_files(dir: &Path) -> Result<bool> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        let known = REQUEST_FILES.contains(&name.as_str())
            || RESPONSE_FILES.contains(&name.as_str());
        if !known {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Serialize a matrix under a secrets directory (key material); refuses to
/// write inside an exchange directory.
pub fn write_secret_matrix(secrets_dir: &Path, exchange_dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    let canonical_secret = secrets_dir;
    if canonical_secret.starts_with(exchange_dir) {
        return Err(Error::Parse(
            "refusing to write key material inside the exchange directory".into(),
        ));
    }
    fs::create_dir_all(secrets_dir)?;
    matcsv::write_matrix(&secrets_dir.join(format!("{name}.csv")), name, m)
}
