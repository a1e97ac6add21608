use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use sparse_pce::basis::enumerate_basis;
use sparse_pce::report::BuildInfo;
use sparse_pce::sampling::MeasurementSystem;
use sparse_pce::solver::{
    cross_validate_delta, default_delta_grid, solve_bpdn, unweight, SolveOptions,
};

use crate::commands::{out_file, write_text};
use crate::config::{parse_grid, ConfigMap};

#[derive(Args)]
pub struct RecoverArgs {
    /// Measurement-system CSV file (as written by the library).
    #[arg(long)]
    system: Option<PathBuf>,
    /// Residual tolerance; mutually exclusive with --cv.
    #[arg(long, conflicts_with = "cv")]
    delta: Option<f64>,
    /// Select the tolerance by cross-validation.
    #[arg(long)]
    cv: bool,
    /// Cross-validation folds (default 4).
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated candidate deltas (default: 12 log-spaced values over
    /// [1e-6, 1] times the rhs norm).
    #[arg(long)]
    grid: Option<String>,
    /// Fold-assignment seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CvEcho {
    candidate_deltas: Vec<f64>,
    validation_errors: Vec<f64>,
    chosen_delta: f64,
    folds: usize,
}

#[derive(Serialize)]
struct Telemetry {
    build: BuildInfo,
    seed: u64,
    config: BTreeMap<String, String>,
    delta_used: f64,
    residual_norm: f64,
    iterations: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvEcho>,
}

pub fn run(args: RecoverArgs, config: &ConfigMap) -> Result<i32> {
    let system_path: PathBuf = config.resolve_required(args.system, "system")?;
    let folds: usize = config.resolve(args.folds, "folds", 4)?;
    let seed: u64 = config.resolve(args.seed, "seed", 0)?;
    let out: PathBuf = config.resolve(args.out, "out", PathBuf::from("out"))?;
    let use_cv = args.cv || args.delta.is_none() && config.resolve(Some(false), "cv", false)?;

    let file = std::fs::File::open(&system_path)
        .with_context(|| format!("opening {}", system_path.display()))?;
    let system = MeasurementSystem::from_csv(std::io::BufReader::new(file))?;

    let (delta, cv_echo) = if let Some(delta) = args.delta {
        (delta, None)
    } else if use_cv {
        let grid = match &args.grid {
            Some(raw) => parse_grid(raw)?,
            None => default_delta_grid(system.rhs().norm()),
        };
        let report = cross_validate_delta(&system, folds, &grid, seed)?;
        let echo = CvEcho {
            candidate_deltas: report.candidate_deltas.clone(),
            validation_errors: report.validation_errors.clone(),
            chosen_delta: report.chosen_delta,
            folds: report.folds,
        };
        (report.chosen_delta, Some(echo))
    } else {
        bail!("either --delta or --cv is required");
    };

    let solution = solve_bpdn(&system, delta, &SolveOptions::default())?;

    // Solution CSV: solver variable plus physical (unweighted) coefficients.
    let basis = enumerate_basis(system.dimension(), system.order())?;
    let physical = unweight(&solution.coefficients, &basis, system.weights_applied());
    let mut csv = String::from("index,coefficient,physical_coefficient\n");
    for j in 0..solution.coefficients.len() {
        csv.push_str(&format!(
            "{j},{},{}\n",
            solution.coefficients[j], physical[j]
        ));
    }
    write_text(&out_file(&out, "solution.csv")?, &csv)?;

    let mut echo = BTreeMap::new();
    echo.insert("system".into(), system_path.display().to_string());
    echo.insert("folds".into(), folds.to_string());
    echo.insert("kind".into(), system.kind().as_str().into());
    echo.insert("rows".into(), system.rows().to_string());
    echo.insert("columns".into(), system.columns().to_string());

    let telemetry = Telemetry {
        build: BuildInfo::current(),
        seed,
        config: echo,
        delta_used: solution.delta_used,
        residual_norm: solution.residual_norm,
        iterations: solution.iterations,
        converged: solution.converged,
        cv: cv_echo,
    };
    let mut json = serde_json::to_string_pretty(&telemetry)?;
    json.push('\n');
    write_text(&out_file(&out, "telemetry.json")?, &json)?;

    Ok(if solution.converged { 0 } else { 1 })
}
