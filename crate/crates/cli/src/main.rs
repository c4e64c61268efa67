//! Command-line front end for `matchlab`.
//!
//! Exit codes: 0 success, 1 usage error, 2 invariant violation, 3 I/O or
//! malformed input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchlab::assignment::{
    semidiscrete_w2_exact, solve_assignment, verify_cyclic_monotonicity, Exponent, MatchingPlan,
};
use matchlab::experiments::{
    self, fit_with, job_sample, per_area, read_records, report, write_records, ExperimentConfig, Format,
    Kind, Model,
};
use matchlab::flux::upper_bound_with_flux;
use matchlab::witness::{build_witness, witness_value};
use matchlab::{Error, PointSet, Rect, RngStream};
use serde_json::json;

#[derive(Parser)]
#[command(name = "matchlab", version, about = "Poisson matching experiments on dyadic squares")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

/// Flags shared by every subcommand; they override values from `--config`.
#[derive(Args, Clone, Default)]
struct Common {
    /// Side lengths, comma separated (powers of 2).
    #[arg(long = "R", global = true, value_name = "LIST")]
    r: Option<String>,
    /// Number of seeds per side length.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    intensity: Option<f64>,
    /// Stopping constant of the witness.
    #[arg(long = "M", global = true)]
    m: Option<f64>,
    /// Grid spacing for witness quadrature and flux cells.
    #[arg(long = "grid-h", global = true)]
    grid_h: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or jsonl.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Flat key=value file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Poisson sample (and an equal-count uniform companion).
    Sample,
    /// Exact optimal matching between two point sets.
    Match {
        #[arg(long)]
        mu: Option<PathBuf>,
        #[arg(long)]
        nu: Option<PathBuf>,
        /// Cost exponent, 1 or 2.
        #[arg(long, default_value_t = 2)]
        p: u32,
    },
    /// W_2^2 between a sample and its constant density.
    W2 {
        #[arg(long)]
        mu: Option<PathBuf>,
    },
    /// Build the dual witness and evaluate it.
    Witness,
    /// Certified flux upper bound.
    Flux,
    /// Lower bound <= exact <= upper bound over the R list and seeds.
    Sandwich,
    /// Sweep one experiment kind over the R list and seeds.
    Scaling {
        #[arg(long)]
        kind: Option<String>,
    },
    /// Least-squares fit of a record file.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        /// log or sqrtlog.
        #[arg(long, default_value = "log")]
        model: String,
        /// Fit the raw values instead of value / R^2.
        #[arg(long)]
        raw: bool,
    },
    /// Quick invariant checks on small instances.
    Check,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Invariant(_) | Error::Solver(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => 3,
    }
}

fn config(common: &Common, kind: Kind) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(kind, vec![16], 1);
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        cfg.apply_text(&text, path)?;
    }
    let c = common.clone();
    let flags: [(&str, Option<String>); 7] = [
        ("R", c.r),
        ("seeds", c.seeds.map(|v| v.to_string())),
        ("seed", c.seed.map(|v| v.to_string())),
        ("intensity", c.intensity.map(|v| v.to_string())),
        ("M", c.m.map(|v| v.to_string())),
        ("grid-h", c.grid_h.map(|v| v.to_string())),
        ("format", c.format),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = c.out {
        cfg.out = Some(out);
    }
    cfg.force |= c.force;
    if common.format.is_none() {
        if let Some(out) = &cfg.out {
            cfg.format = Format::for_path(out);
        }
    }
    Ok(cfg)
}

fn first_r(cfg: &ExperimentConfig) -> Result<u32, Error> {
    cfg.rs
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("no R given".into()))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &serde_json::Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")));
}

fn refuse_existing(path: &Path, force: bool) -> Result<(), Error> {
    if path.exists() && !force {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                "output exists; pass --force to overwrite",
            ),
        });
    }
    Ok(())
}

/// `mu` and `nu` from files, or the `(R, seed)` sample of the sweep.
fn instance(cfg: &ExperimentConfig, mu: Option<&PathBuf>, nu: Option<&PathBuf>) -> Result<(PointSet, PointSet), Error> {
    match (mu, nu) {
        (Some(a), Some(b)) => Ok((PointSet::load(a)?, PointSet::load(b)?)),
        (None, None) => job_sample(cfg.seed, first_r(cfg)?, 0, cfg.intensity),
        _ => Err(Error::InvalidArgument("give both --mu and --nu or neither".into())),
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    let common = &cli.common;
    match &cli.cmd {
        Command::Sample => {
            let cfg = config(common, Kind::MatchCost)?;
            let r = first_r(&cfg)?;
            cfg.validate()?;
            let (mu, nu) = job_sample(cfg.seed, r, 0, cfg.intensity)?;
            if let Some(out) = &cfg.out {
                let nu_path = out.with_extension("nu.csv");
                refuse_existing(out, cfg.force)?;
                refuse_existing(&nu_path, cfg.force)?;
                mu.save(out)?;
                nu.save(&nu_path)?;
            }
            print_json(&json!({"R": r, "seed": cfg.seed, "n_points": mu.len()}));
        }
        Command::Match { mu, nu, p } => {
            let cfg = config(common, Kind::MatchCost)?;
            let (a, b) = instance(&cfg, mu.as_ref(), nu.as_ref())?;
            let exp = Exponent::from_int(*p)?;
            let plan = solve_assignment(&a, &b, exp)?;
            let rep = verify_cyclic_monotonicity(&plan, &a, &b, 2000, 6, &RngStream::new(cfg.seed, "cli-check"))?;
            if !rep.ok() {
                return Err(Error::Invariant(format!("plan is not cyclically monotone: {}", rep.min_sum)));
            }
            if let Some(out) = &cfg.out {
                refuse_existing(out, cfg.force)?;
                let f = fs::File::create(out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
                plan.write_csv(&a, &b, std::io::BufWriter::new(f))
                    .map_err(|e| Error::Io { path: out.clone(), source: e })?;
            }
            print_json(&json!({"n": plan.len(), "p": p, "cost": plan.cost}));
        }
        Command::W2 { mu } => {
            let cfg = config(common, Kind::W2Lebesgue)?;
            let ps = match mu {
                Some(path) => PointSet::load(path)?,
                None => job_sample(cfg.seed, first_r(&cfg)?, 0, cfg.intensity)?.0,
            };
            let bx = *ps.bbox();
            let w = semidiscrete_w2_exact(&ps, &bx, ps.len() as f64 / bx.area())?;
            print_json(&serde_json::to_value(&w)?);
        }
        Command::Witness => {
            let cfg = config(common, Kind::WitnessLower)?;
            cfg.validate()?;
            let r = first_r(&cfg)?;
            let (mu, nu) = job_sample(cfg.seed, r, 0, cfg.intensity)?;
            let w = build_witness(&mu, r, cfg.m, cfg.h)?;
            let v = witness_value(&w, &mu, &nu)?;
            if let Some(out) = &cfg.out {
                refuse_existing(out, cfg.force)?;
                w.write_grid(out)?;
            }
            print_json(&json!({
                "R": r,
                "M": cfg.m,
                "raw": v.raw,
                "lipschitz": v.lipschitz,
                "normalized": v.normalized,
                "exceptional_area": w.exceptional_area(),
                "integral": w.integral(),
            }));
        }
        Command::Flux => {
            let cfg = config(common, Kind::FluxUpper)?;
            cfg.validate()?;
            let r = first_r(&cfg)?;
            let (mu, _) = job_sample(cfg.seed, r, 0, cfg.intensity)?;
            let (rep, flux) = upper_bound_with_flux(&mu, r, cfg.h)?;
            if let (Some(out), Some(f)) = (&cfg.out, &flux) {
                refuse_existing(out, cfg.force)?;
                f.write_grid(out)?;
            }
            print_json(&serde_json::to_value(&rep)?);
        }
        Command::Sandwich => {
            let cfg = config(common, Kind::Sandwich)?;
            return sweep(cfg);
        }
        Command::Scaling { kind } => {
            let mut cfg = config(common, Kind::MatchCost)?;
            if let Some(k) = kind {
                cfg.kind = k.parse()?;
            }
            return sweep(cfg);
        }
        Command::Fit { input, model, raw } => {
            let recs = read_records(input)?;
            let model: Model = model.parse()?;
            let f = if *raw {
                fit_with(&recs, model, |r| r.value)?
            } else {
                fit_with(&recs, model, per_area)?
            };
            let rep = report(&recs, Some(&f));
            emit(&rep.text);
            if let Some(out) = &common.out {
                refuse_existing(out, common.force)?;
                fs::write(out, &rep.csv).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            }
        }
        Command::Check => return check(common),
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(cfg: ExperimentConfig) -> Result<ExitCode, Error> {
    let recs = experiments::run(&cfg)?;
    if let Some(out) = &cfg.out {
        write_records(&recs, out, cfg.format, cfg.force)?;
    }
    emit(&report(&recs, None).text);
    let breaches: Vec<_> = recs
        .iter()
        .filter(|r| r.flag.as_deref().is_some_and(|f| f != "brutal"))
        .collect();
    for b in &breaches {
        eprintln!("violation: kind={} R={} seed={} {}", b.kind, b.r, b.seed, b.flag.as_deref().unwrap_or(""));
    }
    Ok(if breaches.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// Sandwich ordering at `R = 8` and cyclic monotonicity of an exact plan.
fn check(common: &Common) -> Result<ExitCode, Error> {
    let mut cfg = config(common, Kind::Sandwich)?;
    if common.r.is_none() {
        cfg.rs = vec![8];
    }
    if common.seeds.is_none() {
        cfg.seeds = 5;
    }
    cfg.kind = Kind::Sandwich;
    let mut failures = Vec::new();
    for rec in experiments::run(&cfg)? {
        if let Some(flag) = rec.flag.filter(|f| f != "brutal") {
            failures.push(format!("sandwich R={} seed={}: {flag}", rec.r, rec.seed));
        }
    }
    let bx = Rect::square(22.0)?;
    let stream = RngStream::new(cfg.seed, "check");
    let a = matchlab::point_process::sample_uniform_n(&bx, 500, &stream.child("a"))?;
    let b = matchlab::point_process::sample_uniform_n(&bx, 500, &stream.child("b"))?;
    let plan: MatchingPlan = solve_assignment(&a, &b, Exponent::P2)?;
    let rep = verify_cyclic_monotonicity(&plan, &a, &b, 10_000, 6, &stream.child("cycles"))?;
    if !rep.ok() {
        failures.push(format!("cyclic monotonicity: min cycle sum {}", rep.min_sum));
    }
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    emit(&format!("checks: {} failure(s)\n", failures.len()));
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
