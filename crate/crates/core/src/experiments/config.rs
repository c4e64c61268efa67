use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::DEFAULT_FLUX_H;
use crate::witness::DEFAULT_M;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Exact `|x - y|^2` matching cost between `mu` and an equal-count `nu`.
    MatchCost,
    /// `W_2^2((0,R)^2; mu, n)` against the constant density `n`.
    W2Lebesgue,
    /// Normalized witness value, with the exact `p = 1` cost alongside.
    WitnessLower,
    /// Certified flux upper bound on `W_2^2((0,R)^2; mu, n)`.
    FluxUpper,
    /// Lower bound, exact values and upper bound on one instance.
    Sandwich,
    /// `r*^4` at the centre, with half-difference and cell-energy moments.
    Moments,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::MatchCost,
        Kind::W2Lebesgue,
        Kind::WitnessLower,
        Kind::FluxUpper,
        Kind::Sandwich,
        Kind::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::MatchCost => "match_cost",
            Kind::W2Lebesgue => "w2_lebesgue",
            Kind::WitnessLower => "witness_lower",
            Kind::FluxUpper => "flux_upper",
            Kind::Sandwich => "sandwich",
            Kind::Moments => "moments",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(Error::invalid(format!("unknown format {s:?} (csv or jsonl)"))),
        }
    }
}

impl Format {
    /// From a file extension, defaulting to JSONL.
    pub fn for_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(rename = "R")]
    pub rs: Vec<u32>,
    pub seeds: usize,
    /// Master seed.
    pub seed: u64,
    pub intensity: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub h: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub force: bool,
}

impl ExperimentConfig {
    pub fn new(kind: Kind, rs: Vec<u32>, seeds: usize) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            rs,
            seeds,
            seed: 0,
            intensity: 1.0,
            m: DEFAULT_M,
            h: DEFAULT_FLUX_H,
            out: None,
            format: Format::Jsonl,
            force: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rs.is_empty() {
            return Err(Error::invalid("no R values"));
        }
        if let Some(r) = self.rs.iter().find(|r| **r < 4 || !r.is_power_of_two()) {
            return Err(Error::invalid(format!("R = {r} is not a power of 2 that is >= 4")));
        }
        if self.seeds == 0 {
            return Err(Error::invalid("seed count must be >= 1"));
        }
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(Error::invalid(format!("intensity must be positive, got {}", self.intensity)));
        }
        if self.m.is_nan() || self.m <= 0.0 {
            return Err(Error::invalid(format!("M must be positive, got {}", self.m)));
        }
        let inv = 1.0 / self.h;
        if !(self.h > 0.0 && self.h <= 0.25) || inv.fract() != 0.0 || !(inv as u64).is_power_of_two() {
            return Err(Error::invalid(format!("h must be 1/2^k with k >= 2, got {}", self.h)));
        }
        Ok(())
    }

    /// Applies one `key=value` setting. Keys mirror the command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::invalid(format!("bad {what} value {value:?}"));
        match key {
            "kind" => self.kind = value.parse()?,
            "R" => self.rs = parse_r_list(value)?,
            "seeds" => self.seeds = value.parse().map_err(|_| bad("seeds"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "intensity" => self.intensity = value.parse().map_err(|_| bad("intensity"))?,
            "M" => self.m = value.parse().map_err(|_| bad("M"))?,
            "grid-h" | "grid_h" | "h" => self.h = value.parse().map_err(|_| bad("grid-h"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "force" => self.force = value.parse().map_err(|_| bad("force"))?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Flat `key=value` text; blank lines and `#` comments are skipped.
    /// Settings apply on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                msg: format!("line {}: expected key=value", k + 1),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                msg: format!("line {}: {e}", k + 1),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(Kind::MatchCost, Vec::new(), 1);
        cfg.apply_text(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Comma-separated list of side lengths.
pub fn parse_r_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::invalid(format!("bad R value {t:?}")))
        })
        .collect()
}
