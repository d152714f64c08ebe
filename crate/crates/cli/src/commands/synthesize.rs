//! `synthesize`: the cloud side alone. Consumes a request directory,
//! publishes the response next to it. Sees nothing but the exchange files.

use std::path::Path;

use privddc::exchange;
use privddc::Result;

use crate::{pipeline, EXIT_INFEASIBLE, EXIT_OK};

pub fn run(exchange_dir: &Path) -> Result<i32> {
    let request = exchange::read_request(exchange_dir)?;
    let outcome = pipeline::synthesize_from_request(&request)?;
    exchange::write_response(exchange_dir, &outcome)?;
    println!(
        "synthesize: {} (gamma_bar = {:.6})",
        outcome.status.as_str(),
        outcome.gamma_bar
    );
    Ok(if outcome.is_feasible() { EXIT_OK } else { EXIT_INFEASIBLE })
}
