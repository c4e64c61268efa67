use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::records::ScalingRecord;
use crate::error::{Error, Result};
use crate::stats::MeanEstimate;

/// Regression of the per-`R` mean on a function of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `a + b ln R`.
    LogR,
    /// `a + b sqrt(ln R)`.
    SqrtLogR,
}

impl Model {
    pub fn regressor(self, r: f64) -> f64 {
        match self {
            Model::LogR => r.ln(),
            Model::SqrtLogR => r.ln().sqrt(),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::LogR => "a + b ln R",
            Model::SqrtLogR => "a + b sqrt(ln R)",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s {
            "log" | "ln" | "log_r" => Ok(Model::LogR),
            "sqrtlog" | "sqrt_log" | "sqrt_log_r" => Ok(Model::SqrtLogR),
            _ => Err(Error::invalid(format!("unknown model {s:?} (log or sqrtlog)"))),
        }
    }
}

/// Per-`R` summary feeding the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RPoint {
    #[serde(rename = "R")]
    pub r: u32,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub a: f64,
    pub b: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// Coefficient of determination over the per-`R` means.
    pub r_squared: f64,
    pub points: Vec<RPoint>,
}

impl FitResult {
    /// `b / se_b`; infinite for an exact fit with nonzero slope.
    pub fn slope_t(&self) -> f64 {
        self.b / self.se_b
    }
}

/// Per-`R` means of `value(record)` in increasing `R`.
pub fn per_r_means(records: &[ScalingRecord], value: impl Fn(&ScalingRecord) -> f64) -> Vec<RPoint> {
    let mut by_r: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for rec in records {
        by_r.entry(rec.r).or_default().push(value(rec));
    }
    by_r.into_iter()
        .map(|(r, xs)| {
            let e = MeanEstimate::from_samples(&xs);
            RPoint {
                r,
                mean: e.mean,
                stderr: e.stderr,
                n: e.n,
            }
        })
        .collect()
}

/// Ordinary least squares of the per-`R` means of the record values on the
/// model regressor, each `R` weighted equally.
pub fn fit(records: &[ScalingRecord], model: Model) -> Result<FitResult> {
    fit_with(records, model, |rec| rec.value)
}

/// Per-area response `value / R^2`.
pub fn per_area(rec: &ScalingRecord) -> f64 {
    rec.value / (rec.r as f64).powi(2)
}

/// [`fit`] with an arbitrary per-record response.
pub fn fit_with(
    records: &[ScalingRecord],
    model: Model,
    value: impl Fn(&ScalingRecord) -> f64,
) -> Result<FitResult> {
    let points = per_r_means(records, value);
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "a fit needs at least 3 distinct R values, got {}",
            points.len()
        )));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| model.regressor(p.r as f64)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let s2 = sse / (k - 2.0);
    Ok(FitResult {
        model,
        a,
        b,
        se_a: (s2 * (1.0 / k + xm * xm / sxx)).sqrt(),
        se_b: (s2 / sxx).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points,
    })
}
