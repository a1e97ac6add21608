use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use sparse_pce::basis::enumerate_basis;
use sparse_pce::diagnostics::{
    coherence_pair, epsilon_q_estimate, max_offdiagonal_inner_product, nullspace_dim,
    ric_exhaustive, ric_monte_carlo, DiagnosticsReport, RicEntry, TruncationSet,
};
use sparse_pce::experiments::{evaluate_planted, manufacture};
use sparse_pce::report::BuildInfo;
use sparse_pce::sampling::{assemble, draw_samples, SystemKind};
use sparse_pce::Error;

use crate::commands::{out_file, write_text};
use crate::config::ConfigMap;

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Input dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Total polynomial order p.
    #[arg(long)]
    order: Option<usize>,
    /// Number of samples behind the diagnosed system (default 2P).
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of derivative-bearing samples; 0 diagnoses the standard
    /// system (default 1).
    #[arg(long)]
    fraction: Option<f64>,
    /// Master seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Candidate-point budget for the coherence search (default 20000).
    #[arg(long)]
    budget: Option<usize>,
    /// Largest sparsity level for restricted isometry estimates (default 2).
    #[arg(long = "ric-max-s")]
    ric_max_s: Option<usize>,
    /// Monte Carlo trials when exhaustive enumeration exceeds its guard
    /// (default 20000).
    #[arg(long = "ric-trials")]
    ric_trials: Option<usize>,
    /// Monte Carlo draws for the truncation-bias estimate (default 200000).
    #[arg(long = "epsq-samples")]
    epsq_samples: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiagnoseFile {
    build: BuildInfo,
    seed: u64,
    config: BTreeMap<String, String>,
    report: DiagnosticsReport,
    /// Reference value 0.1 / sqrt(P) quoted alongside the truncation-bias
    /// estimate; not asserted.
    epsilon_q_reference_bound: f64,
}

pub fn run(args: DiagnoseArgs, config: &ConfigMap) -> Result<i32> {
    let dim: usize = config.resolve_required(args.dim, "dim")?;
    let order: usize = config.resolve_required(args.order, "order")?;
    let basis = enumerate_basis(dim, order)?;
    let p = basis.cardinality();

    let n: usize = config.resolve(args.n, "n", 2 * p)?;
    let fraction: f64 = config.resolve(args.fraction, "fraction", 1.0)?;
    let seed: u64 = config.resolve(args.seed, "seed", 0)?;
    let budget: usize = config.resolve(args.budget, "budget", 20_000)?;
    let ric_max_s: usize = config.resolve(args.ric_max_s, "ric-max-s", 2)?;
    let ric_trials: usize = config.resolve(args.ric_trials, "ric-trials", 20_000)?;
    let epsq_samples: usize = config.resolve(args.epsq_samples, "epsq-samples", 200_000)?;
    let out: PathBuf = config.resolve(args.out, "out", PathBuf::from("out"))?;

    let kind = if fraction > 0.0 {
        SystemKind::GradientEnhanced
    } else {
        SystemKind::Standard
    };
    let weighted = kind == SystemKind::GradientEnhanced;

    // Measurement system over a planted expansion; the rhs does not affect
    // any of the diagnostics.
    let problem = manufacture(basis.clone(), p.min(8), seed)?;
    let samples = draw_samples(dim, n, fraction, seed)?;
    let evaluator = |_: usize, xi: &[f64], g: bool| {
        let (value, gradient) = evaluate_planted(&problem, xi)?;
        Ok((value, g.then_some(gradient)))
    };
    let system = assemble(&basis, &samples, &evaluator, kind, weighted)?;

    let trunc = TruncationSet::for_order(order);
    let pair = coherence_pair(&basis, &trunc, budget, seed)?;

    let mut ric = Vec::new();
    for s in 1..=ric_max_s.min(p) {
        let entry = match ric_exhaustive(&system, s) {
            Ok(est) => RicEntry {
                s,
                value: est.value,
                subsets_examined: est.subsets_examined,
                mode: "exhaustive".into(),
            },
            Err(Error::SubsetGuard { .. }) => {
                let est = ric_monte_carlo(&system, s, ric_trials, seed)?;
                RicEntry {
                    s,
                    value: est.value,
                    subsets_examined: est.subsets_examined,
                    mode: "monte-carlo".into(),
                }
            }
            Err(other) => return Err(other.into()),
        };
        ric.push(entry);
    }

    let report = DiagnosticsReport {
        mu: pair.mu,
        beta: pair.beta,
        ric,
        nullspace_dim: nullspace_dim(&system, 1e-10)?,
        max_offdiag_inner_product: max_offdiagonal_inner_product(&system),
        epsilon_q_estimate: epsilon_q_estimate(&basis, &trunc, kind, epsq_samples, seed)?,
    };

    let mut echo = BTreeMap::new();
    echo.insert("dim".into(), dim.to_string());
    echo.insert("order".into(), order.to_string());
    echo.insert("cardinality".into(), p.to_string());
    echo.insert("n".into(), n.to_string());
    echo.insert("fraction".into(), fraction.to_string());
    echo.insert("budget".into(), budget.to_string());
    echo.insert("ric-max-s".into(), ric_max_s.to_string());
    echo.insert("ric-trials".into(), ric_trials.to_string());
    echo.insert("epsq-samples".into(), epsq_samples.to_string());
    echo.insert("kind".into(), kind.as_str().into());

    let file = DiagnoseFile {
        build: BuildInfo::current(),
        seed,
        config: echo,
        epsilon_q_reference_bound: 0.1 / (p as f64).sqrt(),
        report,
    };
    let path = out_file(&out, "diagnose_report.json")?;
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    write_text(&path, &json)?;
    Ok(0)
}
