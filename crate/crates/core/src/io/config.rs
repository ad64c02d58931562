//! Run configuration and its canonical `key=value` form.

use std::collections::BTreeMap;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::classifier::{DEFAULT_D_GRID, DEFAULT_HOLDOUT};
use crate::error::{Error, Result};
use crate::filterbank::{
    FilterBankParams, DEFAULT_ORIENTATIONS, DEFAULT_SIGMA, DEFAULT_SIGMA0, DEFAULT_XI,
};
use crate::numerics::Boundary;
use crate::scattering::Alpha;

/// Keys that determine coefficient values; only these enter [`RunConfig::config_hash`].
const TRANSFORM_KEYS: [&str; 11] = [
    "alpha",
    "boundary",
    "c",
    "height",
    "j",
    "kept_fraction",
    "m_max",
    "sigma",
    "sigma0",
    "width",
    "xi",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub j: usize,
    pub c: usize,
    pub m_max: usize,
    pub alpha: Alpha,
    pub sigma: f64,
    pub xi: f64,
    pub sigma0: f64,
    pub boundary: Boundary,
    /// Image dimensions fed to the transform (after any padding of the dataset).
    pub width: usize,
    pub height: usize,
    /// Cosine truncation; `None` keeps plain scattering coefficients.
    pub kept_fraction: Option<f64>,
    pub d_grid: Vec<usize>,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Worker threads; never serialized.
    pub thread_count: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            j: 3,
            c: DEFAULT_ORIENTATIONS,
            m_max: 2,
            alpha: Alpha::Half,
            sigma: DEFAULT_SIGMA,
            xi: DEFAULT_XI,
            sigma0: DEFAULT_SIGMA0,
            boundary: Boundary::Mirror,
            width: 32,
            height: 32,
            kept_fraction: None,
            d_grid: DEFAULT_D_GRID.to_vec(),
            holdout_fraction: DEFAULT_HOLDOUT,
            seed: 0,
            thread_count: None,
        }
    }
}

impl RunConfig {
    pub fn bank_params(&self) -> FilterBankParams {
        FilterBankParams {
            j: self.j,
            c: self.c,
            sigma: self.sigma,
            xi: self.xi,
            sigma0: self.sigma0,
            grid_w: self.width,
            grid_h: self.height,
            boundary: self.boundary,
        }
    }

    /// Copies the filter parameters of a bank into this configuration.
    pub fn with_bank_params(mut self, p: &FilterBankParams) -> Self {
        self.j = p.j;
        self.c = p.c;
        self.sigma = p.sigma;
        self.xi = p.xi;
        self.sigma0 = p.sigma0;
        self.width = p.grid_w;
        self.height = p.grid_h;
        self.boundary = p.boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.bank_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(f) = self.kept_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("kept_fraction {f} outside (0, 1]")));
            }
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "holdout_fraction {} outside (0, 0.5]",
                self.holdout_fraction
            )));
        }
        if self.d_grid.is_empty() {
            return Err(Error::Config("d_grid is empty".into()));
        }
        if self.thread_count == Some(0) {
            return Err(Error::Config("thread_count must be positive".into()));
        }
        Ok(())
    }

    fn entries(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("alpha", self.alpha.to_string());
        m.insert("boundary", self.boundary.to_string());
        m.insert("c", self.c.to_string());
        m.insert(
            "d_grid",
            self.d_grid
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("height", self.height.to_string());
        m.insert("holdout_fraction", format!("{:?}", self.holdout_fraction));
        m.insert("j", self.j.to_string());
        m.insert(
            "kept_fraction",
            self.kept_fraction
                .map_or("none".into(), |f| format!("{f:?}")),
        );
        m.insert("m_max", self.m_max.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("sigma", format!("{:?}", self.sigma));
        m.insert("sigma0", format!("{:?}", self.sigma0));
        m.insert("width", self.width.to_string());
        m.insert("xi", format!("{:?}", self.xi));
        m
    }

    /// One `key=value` line per field, keys sorted; floats in shortest
    /// round-trip form. `thread_count` is omitted.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    /// Hex SHA-256 over the canonical lines of the transform keys.
    pub fn config_hash(&self) -> String {
        let entries = self.entries();
        let mut h = Sha256::new();
        for k in TRANSFORM_KEYS {
            h.update(format!("{k}={}\n", entries[k]).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed line '{line}'")))?;
            if kv.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::Config(format!("duplicate key '{k}'")));
            }
        }
        let mut take = |k: &str| -> Result<&str> {
            kv.remove(k)
                .ok_or_else(|| Error::Config(format!("missing key '{k}'")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value '{v}' for '{k}'")))
        }
        let cfg = Self {
            alpha: take("alpha")?
                .parse()
                .map_err(|e: Error| Error::Config(e.to_string()))?,
            boundary: take("boundary")?
                .parse()
                .map_err(|e: Error| Error::Config(e.to_string()))?,
            c: num("c", take("c")?)?,
            d_grid: take("d_grid")?
                .split(',')
                .map(|d| num("d_grid", d.trim()))
                .collect::<Result<_>>()?,
            height: num("height", take("height")?)?,
            holdout_fraction: num("holdout_fraction", take("holdout_fraction")?)?,
            j: num("j", take("j")?)?,
            kept_fraction: match take("kept_fraction")? {
                "none" => None,
                v => Some(num("kept_fraction", v)?),
            },
            m_max: num("m_max", take("m_max")?)?,
            seed: num("seed", take("seed")?)?,
            sigma: num("sigma", take("sigma")?)?,
            sigma0: num("sigma0", take("sigma0")?)?,
            width: num("width", take("width")?)?,
            xi: num("xi", take("xi")?)?,
            thread_count: None,
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Errors unless two artifacts were produced under the same transform configuration.
pub fn check_hash(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Config(format!(
            "configuration hash mismatch: artifact {found}, expected {expected}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let cfg = RunConfig {
            kept_fraction: Some(1.0 / 3.0),
            seed: 17,
            thread_count: Some(3),
            ..RunConfig::default()
        };
        let text = cfg.canonical();
        assert!(!text.contains("thread"));
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(
            back,
            RunConfig {
                thread_count: None,
                ..cfg.clone()
            }
        );
        assert_eq!(back.canonical(), text);
        assert_eq!(back.config_hash(), cfg.config_hash());
    }

    #[test]
    fn hash_tracks_transform_keys_only() {
        let base = RunConfig::default();
        let h = base.config_hash();
        assert_eq!(h.len(), 64);
        let other = |f: fn(&mut RunConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c.config_hash()
        };
        assert_ne!(other(|c| c.alpha = Alpha::One), h);
        assert_ne!(other(|c| c.m_max = 3), h);
        assert_ne!(other(|c| c.kept_fraction = Some(0.5)), h);
        assert_eq!(other(|c| c.seed = 99), h);
        assert_eq!(other(|c| c.thread_count = Some(8)), h);
        assert_eq!(other(|c| c.d_grid = vec![3]), h);
    }

    #[test]
    fn parse_rejects_bad_input() {
        let text = RunConfig::default().canonical();
        assert!(RunConfig::parse(&text.replace("j=3", "j=x")).is_err());
        assert!(RunConfig::parse(&format!("{text}extra=1\n")).is_err());
        assert!(RunConfig::parse(&text.replace("seed=0\n", "")).is_err());
        assert!(
            RunConfig::parse(&text.replace("holdout_fraction=0.2", "holdout_fraction=0.9"))
                .is_err()
        );
        assert!(check_hash("a", "b").is_err());
    }
}
