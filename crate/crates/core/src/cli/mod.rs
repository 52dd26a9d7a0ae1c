//! Command-line front end: `sapg-crr <subcommand> [--config=FILE] [--key=value ...]`.

mod check;
mod commands;
mod config;

use std::fs;
use std::path::PathBuf;

pub use check::{run_all as run_checks, run_scalar_sapg, scalar_oracle, SuiteResult};
pub use commands::{load_measurements, split_batches, Measurements, Noise};
pub use config::{parse_config, Config, KNOWN_KEYS};

use crate::error::{Error, Result};

pub const USAGE: &str = "\
usage: sapg-crr <subcommand> [--config=FILE] [--key=value ...]

subcommands:
  corrupt   build a corrupted dataset (out, source, noise, operator, sigma, miv, ...)
  train     learn a CRR prior with SAPG (data, out, algorithm, B, iterations, gamma, ...)
  mmse      posterior mean and std maps (data, out, checkpoint, mmse_samples, ...)
  map       MAP reconstruction with a trained prior (data, out, checkpoint, lambda_grid, ...)
  tv        smoothed-TV baseline with grid search (data, out, tv_grid, ...)
  eval      PSNR/SSIM table (data, estimate, csv)
  check     run the gradient, adjoint and oracle self-tests
";

const SUBCOMMANDS: &[&str] = &["corrupt", "train", "mmse", "map", "tv", "eval", "check"];

fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
    format!("error: code={} message=\"{msg}\"", e.code())
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::UnknownKey(_) | Error::MissingKey(_) | Error::MalformedConfig { .. } | Error::BadValue { .. }
    )
}

/// Builds the resolved configuration from `--config=FILE` and `--key=value` tokens.
pub fn build_config(args: &[String]) -> Result<(Config, Vec<String>)> {
    let mut file = None;
    let mut rest = Vec::new();
    for a in args {
        match a.strip_prefix("--config=") {
            Some(p) => file = Some(PathBuf::from(p)),
            None => rest.push(a.clone()),
        }
    }
    let mut cfg = match file {
        Some(p) => parse_config(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?,
        None => Config::default(),
    };
    let positional = cfg.apply_overrides(&rest)?;
    cfg.validate()?;
    Ok((cfg, positional))
}

fn configure_threads(cfg: &Config) -> Result<()> {
    if let Some(n) = cfg.get_opt::<usize>("threads")? {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cmd: &str, cfg: &Config) -> Result<String> {
    configure_threads(cfg)?;
    let summary = match cmd {
        "corrupt" => commands::corrupt(cfg)?,
        "train" => commands::train(cfg)?,
        "mmse" => commands::mmse(cfg)?,
        "map" => commands::map(cfg)?,
        "tv" => commands::tv(cfg)?,
        "eval" => commands::eval(cfg)?,
        _ => unreachable!("subcommand checked by dispatch"),
    };
    if let Some(out) = cfg.get_opt::<String>("out")? {
        let path = PathBuf::from(out).join("run.log");
        let text = format!("# sapg-crr {cmd}\n{}", cfg.echo());
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(summary)
}

fn check() -> i32 {
    let mut failed = 0;
    for r in run_checks() {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        0
    } else {
        eprintln!("error: code=check_failed message=\"{failed} suite(s) failed\"");
        2
    }
}

/// Runs one command line (without the program name) and returns the exit code.
pub fn dispatch(args: &[String]) -> i32 {
    let (cfg, positional) = match build_config(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            return 1;
        }
    };
    let cmd = match positional.as_slice() {
        [c] if SUBCOMMANDS.contains(&c.as_str()) => c.as_str(),
        [] => {
            eprint!("{USAGE}");
            return 1;
        }
        _ => {
            eprintln!("error: code=usage message=\"expected one subcommand, got {positional:?}\"");
            eprint!("{USAGE}");
            return 1;
        }
    };
    if cmd == "check" {
        return check();
    }
    match run(cmd, &cfg) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            if is_usage_error(&e) {
                1
            } else {
                2
            }
        }
    }
}
