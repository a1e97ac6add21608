use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};

use sparse_pce::basis::enumerate_basis;
use sparse_pce::experiments::{
    manufacture, run_recovery_study, CostModel, NoiseConfig, StudyConfig,
};
use sparse_pce::pde::{build_kl, reference_coefficients, run_pde_study, PdeStudyConfig, ReferenceConfig};

use crate::commands::{out_file, write_text};
use crate::config::{parse_grid, ConfigMap};

#[derive(Subcommand)]
pub enum ExperimentCommand {
    /// Manufactured sparse PCE recovery study.
    Manufactured(ManufacturedArgs),
    /// Stochastic diffusion PDE recovery study with adjoint gradients.
    Pde(PdeArgs),
}

#[derive(Args)]
pub struct ManufacturedArgs {
    /// Preset: `desk` (d=8, p=3, |C|=10) or `paper` (d=25, p=3, |C|=50;
    /// heavy).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    /// Planted sparsity |C|.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Relative cost of a derivative-bearing sample.
    #[arg(long)]
    nu: Option<f64>,
    /// Fraction of samples carrying derivatives.
    #[arg(long)]
    fraction: Option<f64>,
    /// Multiplicative noise variance applied to values and derivatives.
    #[arg(long = "noise-variance")]
    noise_variance: Option<f64>,
    /// Override the value-observation noise variance.
    #[arg(long = "noise-values-variance")]
    noise_values_variance: Option<f64>,
    /// Override the derivative-observation noise variance.
    #[arg(long = "noise-derivatives-variance")]
    noise_derivatives_variance: Option<f64>,
    /// Comma-separated equivalent sample sizes.
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PdeArgs {
    /// Preset: `desk` (d=4, mesh 32) or `paper-pde` (d=30, mesh 256;
    /// heavy).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Elements per side of the study mesh.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reference-solve mesh (default: the study mesh).
    #[arg(long = "ref-mesh")]
    ref_mesh: Option<usize>,
    /// Reference least-squares oversampling factor.
    #[arg(long = "ref-oversample")]
    ref_oversample: Option<usize>,
    #[arg(long = "ref-seed")]
    ref_seed: Option<u64>,
    /// KL grid resolution per axis.
    #[arg(long = "kl-grid")]
    kl_grid: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "mean-log")]
    mean_log: Option<f64>,
    #[arg(long = "corr-length")]
    corr_length: Option<f64>,
    /// Retain only the first K basis coefficients.
    #[arg(long = "max-coeffs")]
    max_coeffs: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cmd: ExperimentCommand, config: &ConfigMap) -> Result<i32> {
    match cmd {
        ExperimentCommand::Manufactured(args) => run_manufactured(args, config),
        ExperimentCommand::Pde(args) => run_pde(args, config),
    }
}

fn run_manufactured(args: ManufacturedArgs, config: &ConfigMap) -> Result<i32> {
    let preset: String = config.resolve(args.preset, "preset", "desk".into())?;
    let (d_dim, d_order, d_sparsity) = match preset.as_str() {
        "paper" => {
            eprintln!(
                "warning: paper preset (d=25, P=3276) takes orders of magnitude longer than desk scale"
            );
            (25usize, 3usize, 50usize)
        }
        _ => (8, 3, 10),
    };
    let dim: usize = config.resolve(args.dim, "dim", d_dim)?;
    let order: usize = config.resolve(args.order, "order", d_order)?;
    let sparsity: usize = config.resolve(args.sparsity, "sparsity", d_sparsity)?;
    let nu: f64 = config.resolve(args.nu, "nu", 2.0)?;
    let fraction: f64 = config.resolve(args.fraction, "fraction", 1.0)?;
    let noise_common: f64 = config.resolve(args.noise_variance, "noise-variance", 0.0)?;
    let noise_values: f64 = config.resolve(
        args.noise_values_variance,
        "noise-values-variance",
        noise_common,
    )?;
    let noise_derivatives: f64 = config.resolve(
        args.noise_derivatives_variance,
        "noise-derivatives-variance",
        noise_common,
    )?;
    let grid_raw: String = config.resolve(args.n_grid, "n-grid", "30,50,70,90,120,165,250".into())?;
    let n_grid = parse_grid(&grid_raw)?;
    let reps: usize = config.resolve(args.reps, "reps", 100)?;
    let seed: u64 = config.resolve(args.seed, "seed", 0)?;
    let out: PathBuf = config.resolve(args.out, "out", PathBuf::from("out"))?;

    let basis = enumerate_basis(dim, order)?;
    let problem = manufacture(basis, sparsity, seed)?;
    let cfg = StudyConfig {
        cost: CostModel { nu },
        n_grid,
        gradient_fraction: fraction,
        noise: NoiseConfig {
            value_variance: noise_values,
            derivative_variance: noise_derivatives,
        },
        replications: reps,
        seed,
    };
    let report = run_recovery_study(&problem, &cfg)?;

    write_text(
        &out_file(&out, "manufactured_report.json")?,
        &report.to_json_string(),
    )?;
    write_text(&out_file(&out, "manufactured_curve.csv")?, &report.curve_csv())?;
    Ok(0)
}

fn run_pde(args: PdeArgs, config: &ConfigMap) -> Result<i32> {
    let preset: String = config.resolve(args.preset, "preset", "desk".into())?;
    let (d_dim, d_mesh, d_klgrid, d_maxc) = match preset.as_str() {
        "paper-pde" => {
            eprintln!(
                "warning: paper-pde preset (d=30, mesh 256) takes orders of magnitude longer than desk scale"
            );
            (30usize, 256usize, 64usize, Some(2500usize))
        }
        _ => (4, 32, 32, None),
    };
    let dim: usize = config.resolve(args.dim, "dim", d_dim)?;
    let mesh: usize = config.resolve(args.mesh, "mesh", d_mesh)?;
    let order: usize = config.resolve(args.order, "order", 3)?;
    let nu: f64 = config.resolve(args.nu, "nu", 2.0)?;
    let fraction: f64 = config.resolve(args.fraction, "fraction", 1.0)?;
    let grid_raw: String = config.resolve(args.n_grid, "n-grid", "16,24,40,60".into())?;
    let n_grid = parse_grid(&grid_raw)?;
    let reps: usize = config.resolve(args.reps, "reps", 50)?;
    let seed: u64 = config.resolve(args.seed, "seed", 0)?;
    let ref_mesh: usize = config.resolve(args.ref_mesh, "ref-mesh", mesh)?;
    let ref_oversample: usize = config.resolve(args.ref_oversample, "ref-oversample", 20)?;
    let ref_seed: u64 = config.resolve(args.ref_seed, "ref-seed", seed ^ 0x5eed)?;
    let kl_grid: usize = config.resolve(args.kl_grid, "kl-grid", d_klgrid)?;
    let sigma: f64 = config.resolve(args.sigma, "sigma", 0.5)?;
    let mean_log: f64 = config.resolve(args.mean_log, "mean-log", 0.1)?;
    let corr_length: f64 = config.resolve(args.corr_length, "corr-length", 1.0 / 16.0)?;
    let max_coeffs: Option<usize> = match args.max_coeffs {
        Some(v) => Some(v),
        None => d_maxc,
    };
    let out: PathBuf = config.resolve(args.out, "out", PathBuf::from("out"))?;

    let field = build_kl(dim, kl_grid, sigma, mean_log, corr_length)?;
    let basis = enumerate_basis(dim, order)?;
    let ref_cfg = ReferenceConfig {
        mesh_n: ref_mesh,
        oversample: ref_oversample,
        seed: ref_seed,
    };
    let cfg = PdeStudyConfig {
        mesh_n: mesh,
        cost: CostModel { nu },
        n_grid,
        gradient_fraction: fraction,
        replications: reps,
        seed,
        max_coefficients: max_coeffs,
    };

    // Reference coefficients are part of the deliverable: one CSV row per
    // retained basis function.
    let reference = reference_coefficients(&field, &basis, &ref_cfg, max_coeffs)?;
    let mut ref_csv = String::from("index,total,degrees,coefficient\n");
    for (j, idx) in basis.indices().iter().take(reference.len()).enumerate() {
        let degrees = idx
            .degrees()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        ref_csv.push_str(&format!("{j},{},{degrees},{}\n", idx.total(), reference[j]));
    }

    let report = run_pde_study(&field, &basis, &cfg, &ref_cfg)?;

    write_text(&out_file(&out, "pde_report.json")?, &report.to_json_string())?;
    write_text(&out_file(&out, "pde_curve.csv")?, &report.curve_csv())?;
    write_text(&out_file(&out, "pde_reference.csv")?, &ref_csv)?;
    Ok(0)
}
