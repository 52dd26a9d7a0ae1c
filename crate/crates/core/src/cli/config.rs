//! Flat `key = value` configuration with command-line overrides.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every key any subcommand reads.
pub const KNOWN_KEYS: &[&str] = &[
    // shared
    "seed", "threads", "out", "data", "skip", "count", "preview",
    // corrupt
    "source", "n_images", "height", "width", "channels", "noise", "operator", "blur_size",
    "blur_strength", "sigma", "miv", "missing",
    // train
    "algorithm", "B", "iterations", "delta0", "delta", "m_n", "gamma", "gamma_prime",
    "kernel_posterior", "kernel_prior", "checkpoint_every", "normalize_by_b", "scale_conv",
    "scale_spline", "scale_bias", "scale_log_scale", "train_images", "prior_images",
    "warmstart_iters", "warmstart_step", "warmstart_fraction", "init",
    // architecture
    "crr_mid_ch", "crr_channels", "crr_kernel_size", "knots", "knot_spacing", "use_diff",
    "use_bias", "learn_log_scale", "m_min", "m_max", "radius",
    // estimators
    "checkpoint", "mmse_warmstart", "mmse_samples", "lambda", "lambda_grid", "map_iters",
    "map_step", "optimizer", "tol", "tv_grid", "tv_eps",
    // eval
    "estimate", "csv",
];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// resolved value of every key read so far, defaults included
    used: RefCell<BTreeMap<String, String>>,
}

/// `key = value` per line; `#` starts a comment; later lines win.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || Error::MalformedConfig {
            line: n + 1,
            text: raw.to_string(),
        };
        let (k, v) = line.split_once('=').ok_or_else(malformed)?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(malformed());
        }
        cfg.values.insert(k.to_string(), v.to_string());
    }
    Ok(cfg)
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Apply `--key=value` tokens; anything else is returned as positional.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<Vec<String>> {
        let mut positional = Vec::new();
        for a in args {
            match a.strip_prefix("--") {
                Some(kv) => {
                    let (k, v) = kv.split_once('=').ok_or_else(|| {
                        Error::InvalidArgument(format!("expected --key=value, got {a}"))
                    })?;
                    self.set(k, v);
                }
                None => positional.push(a.clone()),
            }
        }
        Ok(positional)
    }

    /// Rejects keys outside [`KNOWN_KEYS`].
    pub fn validate(&self) -> Result<()> {
        match self.values.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            Some(k) => Err(Error::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn record(&self, key: &str, value: &str) {
        self.used.borrow_mut().insert(key.to_string(), value.to_string());
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            Some(raw) => {
                let v = raw.parse::<T>().map_err(|_| Error::BadValue {
                    key: key.into(),
                    value: raw.clone(),
                })?;
                self.record(key, raw);
                Ok(v)
            }
            None => {
                self.record(key, &default.to_string());
                Ok(default)
            }
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            Some(raw) => {
                let v = raw.parse::<T>().map_err(|_| Error::BadValue {
                    key: key.into(),
                    value: raw.clone(),
                })?;
                self.record(key, raw);
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn require(&self, key: &str) -> Result<String> {
        self.get_opt::<String>(key)?
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get_str(&self, key: &str, default: &str) -> Result<String> {
        self.get(key, default.to_string())
    }

    /// Accepts `true/false`, `1/0`, `yes/no`.
    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        let raw = self.get_str(key, if default { "true" } else { "false" })?;
        match raw.as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::BadValue {
                key: key.into(),
                value: raw,
            }),
        }
    }

    /// Comma-separated reals.
    pub fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let default_text = default
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let raw = self.get_str(key, &default_text)?;
        raw.split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::BadValue {
                    key: key.into(),
                    value: raw.clone(),
                })
            })
            .collect()
    }

    /// Resolved configuration as re-parseable text.
    pub fn echo(&self) -> String {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_comments() {
        let c = parse_config("# header\ngamma = 1e-4  # step\n\nB=4\n").unwrap();
        assert_eq!(c.get("gamma", 0.0).unwrap(), 1e-4);
        assert_eq!(c.get("B", 1usize).unwrap(), 4);
        assert_eq!(c.get("m_n", 1usize).unwrap(), 1);
    }

    #[test]
    fn unknown_key_is_reported() {
        let c = parse_config("bogus_key = 1").unwrap();
        match c.validate() {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "bogus_key"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_has_number() {
        match parse_config("gamma = 1\nnot a pair\n") {
            Err(Error::MalformedConfig { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn command_line_beats_file() {
        let mut c = parse_config("gamma = 1e-4\ngamma = 2e-4").unwrap();
        assert_eq!(c.get("gamma", 0.0).unwrap(), 2e-4);
        let rest = c
            .apply_overrides(&["--gamma=5e-6".to_string(), "train".to_string()])
            .unwrap();
        assert_eq!(c.get("gamma", 0.0).unwrap(), 5e-6);
        assert_eq!(rest, vec!["train".to_string()]);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config("sigma = 0.05").unwrap();
        c.get("sigma", 0.1).unwrap();
        c.get("miv", 25.0).unwrap();
        c.get_list("lambda_grid", &[0.1, 0.2]).unwrap();
        let again = parse_config(&c.echo()).unwrap();
        assert_eq!(again.get("sigma", 0.0).unwrap(), 0.05);
        assert_eq!(again.get("miv", 0.0).unwrap(), 25.0);
        assert_eq!(again.get_list("lambda_grid", &[]).unwrap(), vec![0.1, 0.2]);
        assert!(again.validate().is_ok());
    }

    #[test]
    fn bad_value_is_typed_error() {
        let c = parse_config("B = four").unwrap();
        assert!(matches!(c.get("B", 1usize), Err(Error::BadValue { .. })));
    }
}
