//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::CliError;
use crate::netlist::units::parse_number;
use crate::seltb::PARAM_KEYS;
use crate::solver::{Method, SolverConfig};

/// Keys understood besides the bench parameters.
pub const RUN_KEYS: &[&str] = &[
    "out_dir",
    "precision",
    "preset",
    "fire_at",
    "tstop",
    "tstep_max",
    "reltol",
    "vntol",
    "abstol",
    "gmin",
    "lte_tol",
    "method",
];

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LATCHSIM_OUT_DIR";
pub const DEFAULT_PRECISION: usize = 9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// `#` starts a comment; blank lines are ignored; keys are
    /// case-insensitive and must be known.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Parse(format!("config line {}: expected key = value", k + 1)));
            };
            let key = key.trim().to_ascii_lowercase();
            if !RUN_KEYS.contains(&key.as_str()) && !PARAM_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", k + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| parse_number(v).ok_or_else(|| CliError::Parse(format!("config key `{key}`: bad number `{v}`"))))
            .transpose()
    }

    /// Bench parameter entries in key order.
    pub fn bench_values(&self) -> Result<Vec<(String, f64)>, CliError> {
        let mut out = Vec::new();
        for key in self.values.keys().filter(|k| PARAM_KEYS.contains(&k.as_str())) {
            out.push((key.clone(), self.number(key)?.unwrap_or_default()));
        }
        Ok(out)
    }

    /// Solver settings, with `tstep_max` as the step ceiling.
    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let mut c = SolverConfig::default();
        if let Some(v) = self.number("reltol")? {
            c.reltol = v;
        }
        if let Some(v) = self.number("vntol")? {
            c.vntol = v;
        }
        if let Some(v) = self.number("abstol")? {
            c.abstol = v;
        }
        if let Some(v) = self.number("gmin")? {
            c.gmin = v;
        }
        if let Some(v) = self.number("lte_tol")? {
            c.lte_tol = v;
        }
        if let Some(v) = self.number("tstep_max")? {
            c.h_max = Some(v);
        }
        if let Some(m) = self.get("method") {
            c.method = match m.to_ascii_lowercase().as_str() {
                "tr" | "trap" | "trapezoidal" => Method::Trapezoidal,
                "be" | "euler" | "backward-euler" => Method::BackwardEuler,
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key `method`: expected tr or be, got `{m}`"
                    )))
                }
            };
        }
        Ok(c)
    }
}

/// Flag, then config file, then environment, then the working directory.
pub fn resolve_out_dir(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = file.get("out_dir") {
        return PathBuf::from(p);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("."),
    }
}

pub fn resolve_precision(flag: Option<usize>, file: &FileConfig) -> Result<usize, CliError> {
    let p = match flag {
        Some(p) => p,
        None => match file.get("precision") {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Parse(format!("config key `precision`: bad integer `{s}`")))?,
            None => DEFAULT_PRECISION,
        },
    };
    if !(1..=17).contains(&p) {
        return Err(CliError::Usage(format!("precision must be 1..=17 digits, got {p}")));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = FileConfig::parse("# bench\nC2 = 22u\nreltol=1e-4  # tighter\n\nmethod = be\n").unwrap();
        assert_eq!(c.bench_values().unwrap(), vec![("c2".to_string(), 22e-6)]);
        let s = c.solver().unwrap();
        assert_eq!(s.reltol, 1e-4);
        assert_eq!(s.method, Method::BackwardEuler);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(FileConfig::parse("bogus = 1"), Err(CliError::Usage(_))));
        assert!(matches!(FileConfig::parse("c2 22u"), Err(CliError::Parse(_))));
        let c = FileConfig::parse("c2 = lots").unwrap();
        assert!(matches!(c.bench_values(), Err(CliError::Parse(_))));
    }

    #[test]
    fn precision_bounds() {
        let c = FileConfig::parse("precision = 6").unwrap();
        assert_eq!(resolve_precision(None, &c).unwrap(), 6);
        assert_eq!(resolve_precision(Some(12), &c).unwrap(), 12);
        assert!(resolve_precision(Some(0), &c).is_err());
    }
}
