//! Plain-text key=value run configuration with flag overrides (flags win).

use std::collections::BTreeMap;
use std::path::Path;

use reslab::potential::PiecewisePotential;
use reslab::units::{UnitScheme, DEFAULT_A0_M, DEFAULT_E1_MEV, DEFAULT_MASS_KG};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Key=value pairs; later assignments win, flags are applied last.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected key=value", lineno + 1)))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(format!("key {key}: '{s}' is not a number"))),
        }
    }

    pub fn get_u32(&self, key: &str) -> Result<Option<u32>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u32>()
                .map(Some)
                .map_err(|_| err(format!("key {key}: '{s}' is not an integer"))),
        }
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| err(format!("key {key}: '{s}' is not a comma list of numbers"))),
        }
    }

    /// Potential from `potential = doublewell|rect|custom|free` plus the
    /// shape parameters; defaults to the alpha-decay double well.
    pub fn potential(&self) -> Result<PiecewisePotential, ConfigError> {
        let kind = self.get("potential").unwrap_or("doublewell");
        match kind {
            "doublewell" => {
                let ell = self.get_f64("ell")?.unwrap_or(1.0);
                let delta = self.get_f64("delta")?.unwrap_or(2.0);
                let lambda = self.get_f64("lambda")?.unwrap_or(436.0);
                PiecewisePotential::double_well(ell, delta, lambda).map_err(|e| err(e.to_string()))
            }
            "rect" => {
                let ell = self.get_f64("ell")?.unwrap_or(1.0);
                let lambda = self.get_f64("lambda")?.unwrap_or(436.0);
                PiecewisePotential::rectangular(ell, lambda).map_err(|e| err(e.to_string()))
            }
            "custom" => {
                let bps = self
                    .get_list("breakpoints")?
                    .ok_or_else(|| err("custom potential needs breakpoints = x0,x1,..."))?;
                let hs = self
                    .get_list("heights")?
                    .ok_or_else(|| err("custom potential needs heights = h0,h1,..."))?;
                PiecewisePotential::from_breakpoints(bps, hs).map_err(|e| err(e.to_string()))
            }
            "free" => Ok(PiecewisePotential::free()),
            other => Err(err(format!("unknown potential kind '{other}'"))),
        }
    }

    pub fn units(&self) -> Result<UnitScheme, ConfigError> {
        let a0 = self.get_f64("a0_m")?.unwrap_or(DEFAULT_A0_M);
        let e1 = self.get_f64("E1_MeV")?.unwrap_or(DEFAULT_E1_MEV);
        let mass = self.get_f64("mass_kg")?.unwrap_or(DEFAULT_MASS_KG);
        UnitScheme::new(a0, e1, mass).map_err(|e| err(e.to_string()))
    }
}
