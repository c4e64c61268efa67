use std::fmt::Write;

use super::fit::{per_r_means, FitResult, RPoint};
use super::records::ScalingRecord;

/// Header row of the per-`R` summary file.
pub const TABLE_HEADER: &str = "R,n,mean,stderr";

/// A fitted slope passes when positive and more than this many standard
/// errors from zero.
pub const SLOPE_T_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Human-readable table.
    pub text: String,
    /// Machine-readable summary starting with [`TABLE_HEADER`].
    pub csv: String,
    pub warning: Option<String>,
    /// Slope check, when a fit was given.
    pub pass: Option<bool>,
}

/// Per-`R` mean and standard error, the fit line and the slope verdict.
/// With a fit the table shows the means that were fitted, otherwise the
/// means of the raw values.
pub fn report(records: &[ScalingRecord], fit: Option<&FitResult>) -> Report {
    let points: Vec<RPoint> = match fit {
        Some(f) => f.points.clone(),
        None => per_r_means(records, |r| r.value),
    };
    let mut text = String::new();
    let mut kinds: Vec<&str> = records.iter().map(|r| r.kind.name()).collect();
    kinds.dedup();
    let flagged = records.iter().filter(|r| r.flag.is_some()).count();
    let warning = records.is_empty().then(|| "no records".to_string());
    writeln!(
        text,
        "kind: {}  records: {}  flagged: {flagged}",
        if kinds.is_empty() { "-".to_string() } else { kinds.join(",") },
        records.len()
    )
    .unwrap();
    if let Some(w) = &warning {
        writeln!(text, "warning: {w}").unwrap();
    }
    writeln!(text, "{:>6} {:>6} {:>16} {:>16}", "R", "n", "mean", "stderr").unwrap();
    let mut csv = format!("{TABLE_HEADER}\n");
    for p in &points {
        writeln!(text, "{:>6} {:>6} {:>16.6e} {:>16.6e}", p.r, p.n, p.mean, p.stderr).unwrap();
        writeln!(csv, "{},{},{:e},{:e}", p.r, p.n, p.mean, p.stderr).unwrap();
    }
    let pass = fit.map(|f| {
        let ok = f.b > 0.0 && f.slope_t() > SLOPE_T_THRESHOLD;
        writeln!(
            text,
            "fit {}: a = {:.6e} (se {:.3e}), b = {:.6e} (se {:.3e}), b/se = {:.3}, R^2 = {:.4}",
            f.model,
            f.a,
            f.se_a,
            f.b,
            f.se_b,
            f.slope_t(),
            f.r_squared
        )
        .unwrap();
        writeln!(
            text,
            "slope check (b > 0, b/se > {SLOPE_T_THRESHOLD}): {}",
            if ok { "PASS" } else { "FAIL" }
        )
        .unwrap();
        ok
    });
    Report {
        text,
        csv,
        warning,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_records_give_an_empty_table_with_warning() {
        let r = report(&[], None);
        assert_eq!(r.warning.as_deref(), Some("no records"));
        assert_eq!(r.csv, format!("{TABLE_HEADER}\n"));
        assert!(r.pass.is_none());
        assert!(r.text.contains("warning: no records"));
    }
}
