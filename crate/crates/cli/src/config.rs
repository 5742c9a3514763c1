//! Flat `key = value` config files and the value parsers shared with flags.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key a config file may set: the long flag names without dashes.
pub const KNOWN_KEYS: &[&str] = &[
    "out",
    "svg",
    "norm-tol",
    "threads",
    "gamma-steps",
    "r-steps",
    "r-max",
    "alpha-sq",
    "gamma",
    "r",
    "theta",
    "phi",
    "baseline",
    "n-max",
    "alpha-delta-sq",
    "angle",
    "angles",
    "min",
    "max",
    "points",
    "cutoff",
    "tol",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// `#` starts a comment; keys accept `_` or `-`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Validation(format!(
                    "config line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag if given, else the config entry, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => match self.raw(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| CliError::Validation(format!("config `{key}`: cannot parse `{s}`"))),
                None => Ok(default),
            },
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .raw(key)
                .map(|s| {
                    s.parse()
                        .map_err(|_| CliError::Validation(format!("config `{key}`: cannot parse `{s}`")))
                })
                .transpose(),
        }
    }

    /// Angles go through [`parse_angle`].
    pub fn pick_angle(&self, flag: Option<&str>, key: &str, default: f64) -> Result<f64, CliError> {
        match flag.or_else(|| self.raw(key)) {
            Some(s) => parse_angle(s),
            None => Ok(default),
        }
    }

    pub fn pick_list(&self, flag: Option<&str>, key: &str, default: &str, angles: bool) -> Result<Vec<f64>, CliError> {
        parse_list(flag.or_else(|| self.raw(key)).unwrap_or(default), angles)
    }

    pub fn pick_flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        self.pick(None, key, false)
    }
}

/// A number, or a multiple of π: `pi`, `pi/8`, `3pi/4`, `3*pi/4`, `-pi/2`.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Validation(format!("cannot parse angle `{s}`"));
    let t = s.trim().to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().map_err(|_| bad())?),
        None => (t.as_str(), 1.0),
    };
    let coeff = num
        .strip_suffix("pi")
        .or_else(|| num.strip_suffix("π"))
        .ok_or_else(bad)?
        .trim()
        .trim_end_matches('*')
        .trim();
    let k = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(k * PI / den)
}

pub fn parse_list(s: &str, angles: bool) -> Result<Vec<f64>, CliError> {
    let items: Result<Vec<f64>, CliError> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            if angles {
                parse_angle(p)
            } else {
                p.parse()
                    .map_err(|_| CliError::Validation(format!("cannot parse number `{p}`")))
            }
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(CliError::Validation(format!("empty list `{s}`")));
    }
    Ok(items)
}
