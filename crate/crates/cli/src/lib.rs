//! Command-line experiment runner: seeded, deterministic, writing CSV data
//! and gnuplot script/data pairs.

use std::collections::BTreeMap;
use std::path::PathBuf;

pub mod commands {
    pub mod attack;
    pub mod audit_cmd;
    pub mod case_study;
    pub mod sweep;
    pub mod synthesize;
}
pub mod config;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod seeds;

use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

pub fn usage() -> String {
    format!(
        "\
privddc - privacy-preserving outsourced controller synthesis experiments

USAGE:
  privddc <command> [--config FILE] [--<key> <value> ...]

COMMANDS:
  case-study   collect, mask, outsource, unmask; writes reports + audits
  attack       case-study plus the four-policy bias-injection comparison
  sweep        disturbance sweep: budget distribution per amplitude
  synthesize   cloud side only: consume --exchange DIR, publish the result
  audit        replay the privacy audits on a recorded --run DIR

CONFIG KEYS (flag --<key> <value>, file line key=value, env {prefix}<KEY>):
  {keys}

  Precedence: defaults < --config file < environment < flags.
  Ranges are written \"lo,hi\"; the d-max grid is a comma list.

EXIT CODES:
  0 success, 1 error, 2 synthesis infeasible
",
        prefix = config::ENV_PREFIX,
        keys = config::KEYS.join(", ")
    )
}

/// Parse arguments and dispatch. Returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(args: Vec<String>) -> privddc::Result<i32> {
    let mut it = args.into_iter();
    let command = match it.next() {
        Some(c) if c == "--help" || c == "-h" => {
            println!("{}", usage());
            return Ok(EXIT_OK);
        }
        Some(c) => c,
        None => {
            eprintln!("{}", usage());
            return Ok(EXIT_ERROR);
        }
    };

    let mut config_file: Option<PathBuf> = None;
    let mut flags: BTreeMap<String, String> = BTreeMap::new();
    let mut extras: BTreeMap<String, String> = BTreeMap::new();
    while let Some(arg) = it.next() {
        if arg == "--help" || arg == "-h" {
            println!("{}", usage());
            return Ok(EXIT_OK);
        }
        let Some(key) = arg.strip_prefix("--") else {
            return Err(privddc::Error::Parse(format!(
                "unexpected argument {arg:?} (flags look like --key value)"
            )));
        };
        let value = it.next().ok_or_else(|| {
            privddc::Error::Parse(format!("missing value for --{key}"))
        })?;
        match key {
            "config" => config_file = Some(PathBuf::from(value)),
            "exchange" | "run" => {
                extras.insert(key.to_string(), value);
            }
            _ => {
                flags.insert(key.to_string(), value);
            }
        }
    }

    let cfg = ExperimentConfig::resolve(config_file.as_deref(), &flags)?;
    match command.as_str() {
        "case-study" => commands::case_study::run(&cfg),
        "attack" => commands::attack::run(&cfg),
        "sweep" => commands::sweep::run(&cfg),
        "synthesize" => {
            let dir = extras.get("exchange").ok_or_else(|| {
                privddc::Error::Parse("synthesize needs --exchange DIR".into())
            })?;
            commands::synthesize::run(std::path::Path::new(dir))
        }
        "audit" => {
            let dir = extras.get("run").ok_or_else(|| {
                privddc::Error::Parse("audit needs --run DIR".into())
            })?;
            commands::audit_cmd::run(std::path::Path::new(dir), cfg.seed)
        }
        other => {
            eprintln!("unknown command {other:?}\n\n{}", usage());
            Ok(EXIT_ERROR)
        }
    }
}
