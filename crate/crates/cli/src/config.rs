//! Run configuration: flat `key = value` files merged with command-line
//! flags (flags win).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cowqkd::{ParamsBuilder, Protocol, SystemParams, Variant};

use crate::CliError;

/// Keys accepted in config files; identical to the long flag names.
pub const KEYS: [&str; 15] = [
    "pd", "eta-d", "ea", "f", "mu", "tb", "variant", "atten", "L", "protocol", "out", "seed",
    "samples", "k", "fail",
];

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_SCAN_RANGE: &str = "0:150:5";

/// Raw string values keyed by option name.
pub type Settings = BTreeMap<String, String>;

/// Parses a config file: one `key = value` per line, `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Settings, CliError> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "config line {}: expected `key = value`, got `{}`",
                i + 1,
                raw.trim()
            )));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!(
                "config line {}: unknown key `{key}`",
                i + 1
            )));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Settings, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses `start:stop:step` (inclusive of `stop` when `step` divides the
/// span) or a single length.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("invalid length range `{s}`: {why}"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad("not a number"));
    match parts.as_slice() {
        [single] => {
            let v = num(single)?;
            if !v.is_finite() {
                return Err(bad("not finite"));
            }
            Ok(vec![v])
        }
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                return Err(bad("not finite"));
            }
            if stop < start {
                return Err(bad("stop < start"));
            }
            if start == stop {
                return Ok(vec![start]);
            }
            if step <= 0.0 {
                return Err(bad("step must be > 0"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        _ => Err(bad("expected start:stop:step")),
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub builder: ParamsBuilder,
    pub lengths_km: Vec<f64>,
    pub mu: Option<f64>,
    pub tb: Option<f64>,
    pub protocol: Protocol,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub samples: u64,
    pub rounds: Option<u64>,
    pub fail: Option<f64>,
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .map_err(|_| CliError::Config(format!("`{key}`: `{v}` is not a number")))
}

fn parse_count(key: &str, v: &str) -> Result<u64, CliError> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    // Accept scientific notation such as 1e10 when it denotes an integer.
    let x = parse_f64(key, v)?;
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(CliError::Config(format!(
            "`{key}`: `{v}` is not a non-negative integer"
        )))
    }
}

impl RunConfig {
    /// Resolves merged settings. `default_range` applies when no `L` is given.
    pub fn resolve(settings: &Settings, default_range: &str) -> Result<Self, CliError> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let float = |k: &str| get(k).map(|v| parse_f64(k, v)).transpose();

        let mut builder = SystemParams::builder();
        if let Some(v) = float("pd")? {
            builder = builder.dark_count(v);
        }
        if let Some(v) = float("eta-d")? {
            builder = builder.detector_efficiency(v);
        }
        if let Some(v) = float("ea")? {
            builder = builder.misalignment(v);
        }
        if let Some(v) = float("f")? {
            builder = builder.ec_efficiency(v);
        }
        if let Some(v) = float("atten")? {
            builder = builder.attenuation_db_per_km(v);
        }
        if let Some(v) = get("variant") {
            builder = builder.variant(
                v.parse::<Variant>()
                    .map_err(|e| CliError::Config(e.to_string()))?,
            );
        }
        let mu = float("mu")?;
        let tb = float("tb")?;
        if let Some(v) = mu {
            builder = builder.mu(v);
        }
        if let Some(v) = tb {
            builder = builder.t_b(v);
        }
        // Surface parameter errors before any work starts.
        builder
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let protocol = match get("protocol") {
            Some(v) => v
                .parse::<Protocol>()
                .map_err(|e| CliError::Config(e.to_string()))?,
            None => Protocol::Cow,
        };
        let lengths_km = parse_range(get("L").unwrap_or(default_range))?;
        if lengths_km.iter().any(|&l| l < 0.0) {
            return Err(CliError::Config("lengths must be ≥ 0".into()));
        }

        Ok(Self {
            builder,
            lengths_km,
            mu,
            tb,
            protocol,
            out: get("out").map(PathBuf::from),
            seed: get("seed")
                .map(|v| parse_count("seed", v))
                .transpose()?
                .unwrap_or(DEFAULT_SEED),
            samples: get("samples")
                .map(|v| parse_count("samples", v))
                .transpose()?
                .unwrap_or(DEFAULT_SAMPLES),
            rounds: get("k").map(|v| parse_count("k", v)).transpose()?,
            fail: float("fail")?,
        })
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        self.builder
            .build()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// The single length required by `point` and `optimize`.
    pub fn single_length(&self) -> Result<f64, CliError> {
        match self.lengths_km.as_slice() {
            [l] => Ok(*l),
            _ => Err(CliError::Config(
                "this command takes a single length (--L <km>)".into(),
            )),
        }
    }
}
