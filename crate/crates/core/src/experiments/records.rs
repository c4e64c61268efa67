use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Format, Kind};
use crate::error::{Error, Result};

/// One `(kind, R, seed)` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub kind: Kind,
    #[serde(rename = "R")]
    pub r: u32,
    pub seed: u64,
    pub value: f64,
    /// Set when the value is not a plain measurement (brutal bound, a
    /// violated check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    #[serde(default)]
    pub aux: BTreeMap<String, f64>,
}

const CSV_FIXED: [&str; 5] = ["kind", "R", "seed", "value", "flag"];

fn to_csv(records: &[ScalingRecord]) -> String {
    let keys: BTreeSet<&String> = records.iter().flat_map(|r| r.aux.keys()).collect();
    let mut out = CSV_FIXED.join(",");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for rec in records {
        out.push_str(&format!(
            "{},{},{},{:e},{}",
            rec.kind,
            rec.r,
            rec.seed,
            rec.value,
            rec.flag.as_deref().unwrap_or("")
        ));
        for k in &keys {
            out.push(',');
            if let Some(v) = rec.aux.get(*k) {
                out.push_str(&format!("{v:e}"));
            }
        }
        out.push('\n');
    }
    out
}

fn to_jsonl(records: &[ScalingRecord]) -> Result<String> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes records; an existing file is only replaced when `force` is set.
pub fn write_records(records: &[ScalingRecord], path: &Path, format: Format, force: bool) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(records),
        Format::Jsonl => to_jsonl(records)?,
    };
    let mut opts = fs::OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut f = opts.open(path).map_err(|e| {
        if e.kind() == io::ErrorKind::AlreadyExists {
            Error::io(path, io::Error::new(e.kind(), "output exists; pass --force to overwrite"))
        } else {
            Error::io(path, e)
        }
    })?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a record file written by [`write_records`], choosing the format by
/// extension.
pub fn read_records(path: &Path) -> Result<Vec<ScalingRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    match Format::for_path(path) {
        Format::Jsonl => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| serde_json::from_str(l).map_err(|e| perr(k + 1, e.to_string())))
            .collect(),
        Format::Csv => {
            let mut lines = text.lines();
            let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
            if header.len() < CSV_FIXED.len() || header[..CSV_FIXED.len()] != CSV_FIXED {
                return Err(perr(1, format!("header must start with {}", CSV_FIXED.join(","))));
            }
            let mut out = Vec::new();
            for (k, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != header.len() {
                    return Err(perr(k + 2, format!("expected {} fields", header.len())));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| perr(k + 2, format!("bad number {s:?}")));
                let mut aux = BTreeMap::new();
                for (name, v) in header[CSV_FIXED.len()..].iter().zip(&f[CSV_FIXED.len()..]) {
                    if !v.is_empty() {
                        aux.insert(name.to_string(), num(v)?);
                    }
                }
                out.push(ScalingRecord {
                    kind: f[0].parse()?,
                    r: f[1].parse().map_err(|_| perr(k + 2, "bad R".into()))?,
                    seed: f[2].parse().map_err(|_| perr(k + 2, "bad seed".into()))?,
                    value: num(f[3])?,
                    flag: (!f[4].is_empty()).then(|| f[4].to_string()),
                    aux,
                });
            }
            Ok(out)
        }
    }
}
