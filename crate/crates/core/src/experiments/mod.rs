//! Scaling sweeps over `(R, seed)`, least-squares fits and result files.

mod config;
mod fit;
mod records;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::assignment::{semidiscrete_w2_exact, solve_assignment, Exponent};
use crate::dyadic::{CountTree, DyadicCube};
use crate::error::Result;
use crate::flux::{solve_cell_cached, upper_bound, CellProblem};
use crate::point_process::{sample_conditioned_pair, PointSet, Rect, RngStream};
use crate::witness::{build_witness, witness_value};

pub use config::{ExperimentConfig, Format, Kind};
pub use fit::{fit, fit_with, per_area, per_r_means, FitResult, Model, RPoint};
pub use records::{read_records, write_records, ScalingRecord};
pub use report::{report, Report, TABLE_HEADER, SLOPE_T_THRESHOLD};

/// The sample for one `(R, seed)` job: Poisson `mu` on `(0, R)^2` and a
/// uniform `nu` with the same number of points. Every kind draws from the
/// same stream, so records of different kinds share instances.
pub fn job_sample(master: u64, r: u32, seed: u64, intensity: f64) -> Result<(PointSet, PointSet)> {
    let bx = Rect::square(r as f64)?;
    sample_conditioned_pair(&bx, intensity, &RngStream::new(master, format!("R{r}/s{seed}")))
}

/// Runs every `(R, seed)` job of the configuration in parallel; records are
/// sorted by `(kind, R, seed)`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ScalingRecord>> {
    cfg.validate()?;
    let jobs: Vec<(u32, u64)> = cfg
        .rs
        .iter()
        .flat_map(|&r| (0..cfg.seeds as u64).map(move |s| (r, s)))
        .collect();
    let mut out = jobs
        .par_iter()
        .map(|&(r, seed)| run_job(cfg, r, seed))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (a.kind.name(), a.r, a.seed).cmp(&(b.kind.name(), b.r, b.seed)));
    Ok(out)
}

fn run_job(cfg: &ExperimentConfig, r: u32, seed: u64) -> Result<ScalingRecord> {
    let (mu, nu) = job_sample(cfg.seed, r, seed, cfg.intensity)?;
    let bx = Rect::square(r as f64)?;
    let mut aux = BTreeMap::new();
    aux.insert("n_points".to_string(), mu.len() as f64);
    let mut flag = None;
    let value = match cfg.kind {
        Kind::MatchCost => {
            let plan = solve_assignment(&mu, &nu, Exponent::P2)?;
            aux.insert("cost_per_point".into(), per_point(plan.cost, mu.len()));
            plan.cost
        }
        Kind::W2Lebesgue => {
            let w = semidiscrete_w2_exact(&mu, &bx, density(&mu, r))?;
            w.value
        }
        Kind::WitnessLower => {
            let w = build_witness(&mu, r, cfg.m, cfg.h)?;
            let v = witness_value(&w, &mu, &nu)?;
            let p1 = solve_assignment(&mu, &nu, Exponent::P1)?.cost;
            aux.insert("raw".into(), v.raw);
            aux.insert("lipschitz".into(), v.lipschitz);
            aux.insert("exceptional_area".into(), w.exceptional_area());
            aux.insert("integral".into(), w.integral());
            aux.insert("exact_p1".into(), p1);
            if v.normalized > p1 {
                flag = Some("duality_violation".to_string());
            }
            v.normalized
        }
        Kind::FluxUpper => {
            let u = upper_bound(&mu, r, cfg.h)?;
            aux.insert("coarse".into(), u.coarse);
            aux.insert("flux_term".into(), u.flux_term);
            aux.insert("brutal".into(), f64::from(u.brutal));
            if let Some(d) = u.divergence_residual {
                aux.insert("divergence_residual".into(), d);
            }
            if u.brutal {
                flag = Some("brutal".to_string());
            }
            u.total
        }
        Kind::Sandwich => {
            let w = build_witness(&mu, r, cfg.m, cfg.h)?;
            let lower = witness_value(&w, &mu, &nu)?.normalized;
            let p1 = solve_assignment(&mu, &nu, Exponent::P1)?.cost;
            let w2 = semidiscrete_w2_exact(&mu, &bx, density(&mu, r))?.value;
            let upper = upper_bound(&mu, r, cfg.h)?;
            aux.insert("lower".into(), lower);
            aux.insert("exact_p1".into(), p1);
            aux.insert("exact_w2".into(), w2);
            aux.insert("upper".into(), upper.total);
            aux.insert("brutal".into(), f64::from(upper.brutal));
            let mut bad = Vec::new();
            if lower > p1 {
                bad.push("lower>p1");
            }
            if w2 > upper.total {
                bad.push("w2>upper");
            }
            if !bad.is_empty() {
                flag = Some(bad.join(","));
            }
            w2
        }
        Kind::Moments => {
            let tree = CountTree::build(&mu)?;
            let root = DyadicCube::root(r)?;
            let area = (r as f64).powi(2);
            let kids = root.children().expect("R >= 4");
            let nq = tree.half_diff(&root) as f64;
            aux.insert("half_diff_sq_per_area".into(), nq * nq / area);
            let prod = tree.half_diff(&kids[0]) as f64 * tree.half_diff(&kids[1]) as f64;
            aux.insert("sibling_product_per_area".into(), prod / (area / 4.0));
            let cell = solve_cell_cached(&CellProblem::from_tree(&tree, root, cfg.h)?)?;
            aux.insert("cell_energy_per_area".into(), cell.energy() / area);
            let rs = tree.stopping_scale_local([0.5 * r as f64, 0.5 * r as f64]).value(r);
            rs.powi(4)
        }
    };
    Ok(ScalingRecord {
        kind: cfg.kind,
        r,
        seed,
        value,
        flag,
        aux,
    })
}

fn density(ps: &PointSet, r: u32) -> f64 {
    ps.len() as f64 / (r as f64).powi(2)
}

fn per_point(cost: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        cost / n as f64
    }
}
