//! Manufactured sparse PCE recovery studies.
//!
//! A [`ManufacturedProblem`] plants a sparse coefficient vector: `P` i.i.d.
//! standard Gaussian draws of which the `|C|` largest in magnitude survive.
//! Studies sweep an equivalent-sample-size grid `N~ = N_e + nu * N_g`, run
//! seeded replications of sample / assemble / cross-validate / solve, and
//! report recovery probabilities (success means RRMSE below `1e-4`) plus
//! RRMSE statistics.
//!
//! Replications are independent jobs with counter-derived seeds, so parallel
//! execution cannot change any reported number.

use nalgebra::DVector;
use rand::Rng;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::exec;
use crate::report::{BuildInfo, ExperimentReport, GridPointReport};
use crate::rng::{self, Stream};
use crate::sampling::{assemble, draw_samples, QoiEvaluator, SystemKind};
use crate::solver::{cross_validate_delta, default_delta_grid, solve_bpdn, unweight, SolveOptions};
use crate::stats::mean_std;

/// RRMSE threshold for a successful recovery (0.01%).
pub const SUCCESS_RRMSE: f64 = 1e-4;

/// A planted sparse expansion.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub basis: Basis,
    pub planted: DVector<f64>,
    pub sparsity: usize,
    pub seed: u64,
}

/// Draws `P` i.i.d. standard Gaussian coefficients and keeps the `sparsity`
/// largest in magnitude (randomized support). Deterministic from `seed`.
pub fn manufacture(basis: Basis, sparsity: usize, seed: u64) -> Result<ManufacturedProblem> {
    let p = basis.cardinality();
    if sparsity > p {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} exceeds basis cardinality {p}"
        )));
    }
    let mut rng = rng::stream_rng(seed, Stream::Manufacture, 0);
    let draws = rng::normal_vec(&mut rng, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| draws[j].abs().total_cmp(&draws[i].abs()).then(i.cmp(&j)));
    let mut planted = DVector::zeros(p);
    for &j in order.iter().take(sparsity) {
        planted[j] = draws[j];
    }
    Ok(ManufacturedProblem {
        basis,
        planted,
        sparsity,
        seed,
    })
}

/// Evaluates the planted expansion and its full gradient at `point`.
pub fn evaluate_planted(problem: &ManufacturedProblem, point: &[f64]) -> Result<(f64, Vec<f64>)> {
    let basis = &problem.basis;
    let values = basis.row_values(point)?;
    let value = values
        .iter()
        .zip(problem.planted.iter())
        .map(|(a, c)| a * c)
        .sum();
    let mut gradient = Vec::with_capacity(basis.dimension());
    for k in 0..basis.dimension() {
        let partials = basis.row_partials(point, k)?;
        gradient.push(
            partials
                .iter()
                .zip(problem.planted.iter())
                .map(|(a, c)| a * c)
                .sum(),
        );
    }
    Ok((value, gradient))
}

/// Multiplicative observation noise: returns `x * (1 + e)` with
/// `e ~ N(0, variance)`, independent per call.
pub fn apply_noise<R: Rng + ?Sized>(x: f64, variance: f64, rng: &mut R) -> f64 {
    if variance == 0.0 {
        return x;
    }
    x * (1.0 + variance.sqrt() * rng::standard_normal(rng))
}

/// Noise variances for value and derivative observations.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    pub value_variance: f64,
    pub derivative_variance: f64,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.value_variance == 0.0 && self.derivative_variance == 0.0
    }
}

/// Wraps an evaluator with per-scalar multiplicative noise. Each sample gets
/// its own noise stream keyed by the sample index; within a sample the value
/// draw comes first, then one draw per derivative component.
pub struct NoisyEvaluator<'a, E: QoiEvaluator> {
    inner: &'a E,
    noise: NoiseConfig,
    seed: u64,
}

impl<'a, E: QoiEvaluator> NoisyEvaluator<'a, E> {
    pub fn new(inner: &'a E, noise: NoiseConfig, seed: u64) -> Self {
        Self { inner, noise, seed }
    }
}

impl<E: QoiEvaluator> QoiEvaluator for NoisyEvaluator<'_, E> {
    fn evaluate(
        &self,
        sample: usize,
        xi: &[f64],
        with_gradient: bool,
    ) -> Result<(f64, Option<Vec<f64>>)> {
        let (value, gradient) = self.inner.evaluate(sample, xi, with_gradient)?;
        if self.noise.is_noiseless() {
            return Ok((value, gradient));
        }
        let mut rng = rng::stream_rng(self.seed, Stream::Noise, sample as u64);
        let value = apply_noise(value, self.noise.value_variance, &mut rng);
        let gradient = gradient.map(|g| {
            g.into_iter()
                .map(|v| apply_noise(v, self.noise.derivative_variance, &mut rng))
                .collect()
        });
        Ok((value, gradient))
    }
}

/// Relative cost `nu` of a derivative-bearing sample.
#[derive(Debug, Clone, Copy)]
pub struct CostModel {
    pub nu: f64,
}

/// Sample counts realizing an equivalent size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleCounts {
    pub n_total: usize,
    pub n_e: usize,
    pub n_g: usize,
    /// Realized `n_e + nu * n_g`.
    pub equivalent: f64,
}

impl CostModel {
    /// Converts an equivalent size to sample counts: `N` is the largest
    /// total with `N_g = round(fraction * N)`, `N_e = N - N_g`, and
    /// `N_e + nu * N_g <= n_tilde`.
    pub fn split(&self, n_tilde: f64, fraction: f64) -> Result<SampleCounts> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "gradient fraction {fraction} outside [0, 1]"
            )));
        }
        let cost = |n: usize| -> (usize, usize, f64) {
            let n_g = (fraction * n as f64).round() as usize;
            let n_e = n - n_g;
            (n_e, n_g, n_e as f64 + self.nu * n_g as f64)
        };
        let cap = (n_tilde / self.nu.min(1.0)).ceil() as usize + 2;
        let mut best: Option<SampleCounts> = None;
        for n in 1..=cap {
            let (n_e, n_g, equivalent) = cost(n);
            if equivalent <= n_tilde {
                best = Some(SampleCounts {
                    n_total: n,
                    n_e,
                    n_g,
                    equivalent,
                });
            }
        }
        best.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "equivalent size {n_tilde} admits no sample counts at nu = {}",
                self.nu
            ))
        })
    }
}

/// Sweep configuration for a recovery study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub cost: CostModel,
    pub n_grid: Vec<f64>,
    pub gradient_fraction: f64,
    pub noise: NoiseConfig,
    pub replications: usize,
    pub seed: u64,
}

pub(crate) struct ReplicationOutcome {
    pub rrmse: f64,
    pub converged: bool,
}

/// One sample / assemble / cross-validate / solve / compare pass. Shared by
/// the manufactured and PDE studies.
pub(crate) fn run_replication(
    basis: &Basis,
    reference: &DVector<f64>,
    evaluator: &dyn QoiEvaluator,
    counts: SampleCounts,
    master_seed: u64,
    replication_index: u64,
    retain_columns: Option<usize>,
) -> Result<ReplicationOutcome> {
    let d = basis.dimension();
    let fraction = if counts.n_total == 0 {
        0.0
    } else {
        counts.n_g as f64 / counts.n_total as f64
    };
    let sample_seed = rng::derive_seed(master_seed, Stream::Replication, replication_index);
    let samples = draw_samples(d, counts.n_total, fraction, sample_seed)?;
    // With no derivative-bearing samples the pipeline degrades to the
    // standard-normalized problem.
    let (kind, weighted) = if counts.n_g > 0 {
        (SystemKind::GradientEnhanced, true)
    } else {
        (SystemKind::Standard, false)
    };
    let mut system = assemble(basis, &samples, evaluator, kind, weighted)?;
    if let Some(keep) = retain_columns {
        system.retain_columns(keep);
    }

    let grid = default_delta_grid(system.rhs().norm());
    let cv_seed = rng::derive_seed(master_seed, Stream::CvFolds, replication_index);
    let cv = cross_validate_delta(&system, 4, &grid, cv_seed)?;
    let solution = solve_bpdn(&system, cv.chosen_delta, &SolveOptions::default())?;
    let recovered = unweight(&solution.coefficients, basis, weighted);

    let len = recovered.len().min(reference.len());
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    for j in 0..len {
        let d = recovered[j] - reference[j];
        diff_sq += d * d;
        ref_sq += reference[j] * reference[j];
    }
    let rrmse = if ref_sq > 0.0 {
        (diff_sq / ref_sq).sqrt()
    } else {
        diff_sq.sqrt()
    };
    Ok(ReplicationOutcome {
        rrmse,
        converged: solution.converged,
    })
}

pub(crate) fn aggregate_point(
    n_tilde: f64,
    counts: SampleCounts,
    outcomes: &[ReplicationOutcome],
) -> GridPointReport {
    let rrmse: Vec<f64> = outcomes.iter().map(|o| o.rrmse).collect();
    let (mean_rrmse, std_rrmse) = mean_std(&rrmse);
    let successes = outcomes
        .iter()
        .filter(|o| o.converged && o.rrmse < SUCCESS_RRMSE)
        .count();
    let non_converged = outcomes.iter().filter(|o| !o.converged).count();
    GridPointReport {
        n_tilde,
        equivalent_cost: counts.equivalent,
        n_total: counts.n_total,
        n_e: counts.n_e,
        n_g: counts.n_g,
        replications: outcomes.len(),
        successes,
        success_probability: successes as f64 / outcomes.len().max(1) as f64,
        mean_rrmse,
        std_rrmse,
        non_converged,
    }
}

/// Runs the manufactured recovery study over the equivalent-size grid.
pub fn run_recovery_study(
    problem: &ManufacturedProblem,
    cfg: &StudyConfig,
) -> Result<ExperimentReport> {
    if cfg.replications == 0 || cfg.n_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "study needs at least one replication and one grid point".into(),
        ));
    }
    let mut points = Vec::with_capacity(cfg.n_grid.len());
    for (gi, &n_tilde) in cfg.n_grid.iter().enumerate() {
        let counts = cfg.cost.split(n_tilde, cfg.gradient_fraction)?;
        let outcomes: Vec<ReplicationOutcome> = exec::try_map_indices(cfg.replications, |r| {
            let replication_index = (gi * cfg.replications + r) as u64;
            let noise_seed = rng::derive_seed(cfg.seed, Stream::Noise, replication_index);
            let evaluator = |_: usize, xi: &[f64], g: bool| {
                let (value, gradient) = evaluate_planted(problem, xi)?;
                Ok((value, g.then_some(gradient)))
            };
            let noisy = NoisyEvaluator::new(&evaluator, cfg.noise, noise_seed);
            let outcome = run_replication(
                &problem.basis,
                &problem.planted,
                &noisy,
                counts,
                cfg.seed,
                replication_index,
                None,
            )?;
            if !outcome.converged {
                log::warn!(
                    "replication {replication_index} at n_tilde {n_tilde} did not certify; counted as failure"
                );
            }
            Ok::<_, Error>(outcome)
        })?;
        points.push(aggregate_point(n_tilde, counts, &outcomes));
    }

    let mut config = std::collections::BTreeMap::new();
    config.insert("dim".into(), problem.basis.dimension().to_string());
    config.insert("order".into(), problem.basis.order().to_string());
    config.insert("cardinality".into(), problem.basis.cardinality().to_string());
    config.insert("sparsity".into(), problem.sparsity.to_string());
    config.insert("problem-seed".into(), problem.seed.to_string());
    config.insert("nu".into(), cfg.cost.nu.to_string());
    config.insert("fraction".into(), cfg.gradient_fraction.to_string());
    config.insert(
        "n-grid".into(),
        cfg.n_grid
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    config.insert("reps".into(), cfg.replications.to_string());
    config.insert(
        "noise-values-variance".into(),
        cfg.noise.value_variance.to_string(),
    );
    config.insert(
        "noise-derivatives-variance".into(),
        cfg.noise.derivative_variance.to_string(),
    );

    Ok(ExperimentReport {
        study: "manufactured".into(),
        build: BuildInfo::current(),
        seed: cfg.seed,
        nu: cfg.cost.nu,
        gradient_fraction: cfg.gradient_fraction,
        success_threshold: SUCCESS_RRMSE,
        config,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;

    #[test]
    fn manufacture_keeps_largest_magnitudes() {
        let basis = enumerate_basis(3, 3).unwrap();
        let p = basis.cardinality();
        let problem = manufacture(basis, 5, 17).unwrap();
        let nonzero: Vec<f64> = problem
            .planted
            .iter()
            .copied()
            .filter(|v| *v != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 5);
        // Every kept magnitude at least as large as every dropped draw.
        let mut rng = rng::stream_rng(17, Stream::Manufacture, 0);
        let draws = rng::normal_vec(&mut rng, p);
        let min_kept = nonzero.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
        let dropped_max = draws
            .iter()
            .map(|v| v.abs())
            .filter(|&m| m < min_kept)
            .count();
        assert_eq!(dropped_max, p - 5);
    }

    #[test]
    fn manufacture_extremes() {
        let basis = enumerate_basis(2, 2).unwrap();
        let p = basis.cardinality();
        let all = manufacture(basis.clone(), p, 3).unwrap();
        assert_eq!(all.planted.iter().filter(|v| **v != 0.0).count(), p);
        let none = manufacture(basis.clone(), 0, 3).unwrap();
        assert_eq!(none.planted.norm(), 0.0);
        assert!(manufacture(basis, p + 1, 3).is_err());
    }

    #[test]
    fn paper_scale_shape() {
        let basis = enumerate_basis(25, 3).unwrap();
        let problem = manufacture(basis, 50, 1).unwrap();
        assert_eq!(problem.planted.len(), 3276);
        assert_eq!(problem.planted.iter().filter(|v| **v != 0.0).count(), 50);
    }

    #[test]
    fn evaluate_planted_edge_cases() {
        let basis = enumerate_basis(2, 2).unwrap();
        let mut problem = manufacture(basis, 0, 5).unwrap();
        let (v, g) = evaluate_planted(&problem, &[0.4, -1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);

        // Single nonzero at the constant index: value c, zero gradient.
        problem.planted[0] = 2.5;
        let (v, g) = evaluate_planted(&problem, &[1.3, 0.2]).unwrap();
        assert_eq!(v, 2.5);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn planted_gradient_matches_finite_differences() {
        let basis = enumerate_basis(3, 3).unwrap();
        let problem = manufacture(basis, 6, 9).unwrap();
        let point = [0.31, -0.77, 1.42];
        let (_, grad) = evaluate_planted(&problem, &point).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut hi = point;
            let mut lo = point;
            hi[k] += h;
            lo[k] -= h;
            let fd = (evaluate_planted(&problem, &hi).unwrap().0
                - evaluate_planted(&problem, &lo).unwrap().0)
                / (2.0 * h);
            let rel = (grad[k] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel <= 1e-6, "k={k} rel={rel}");
        }
    }

    #[test]
    fn noise_basics() {
        let mut rng = rng::stream_rng(3, Stream::Noise, 0);
        assert_eq!(apply_noise(1.7, 0.0, &mut rng), 1.7);
        assert_eq!(apply_noise(0.0, 1e-3, &mut rng), 0.0);
    }

    #[test]
    fn noise_mean_is_unbiased() {
        // CLT check: sample mean of output / x within 3 sigma of 1.
        let variance = 1e-5;
        let n = 1_000_000;
        let mut rng = rng::stream_rng(12, Stream::Noise, 7);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += apply_noise(2.0, variance, &mut rng) / 2.0;
        }
        let mean = acc / n as f64;
        let bound = 3.0 * (variance / n as f64).sqrt();
        assert!((mean - 1.0).abs() < bound, "mean {mean}, bound {bound}");
    }

    #[test]
    fn cost_split_examples() {
        // Standard pipeline: equivalent size equals the sample count.
        let counts = CostModel { nu: 2.0 }.split(30.0, 0.0).unwrap();
        assert_eq!(
            counts,
            SampleCounts {
                n_total: 30,
                n_e: 30,
                n_g: 0,
                equivalent: 30.0
            }
        );
        // All-gradient at nu = 2 halves the sample count.
        let counts = CostModel { nu: 2.0 }.split(50.0, 1.0).unwrap();
        assert_eq!(counts.n_total, 25);
        assert_eq!(counts.n_g, 25);
        assert_eq!(counts.equivalent, 50.0);
        // Mixed fraction respects the budget.
        let counts = CostModel { nu: 2.0 }.split(50.0, 0.2).unwrap();
        assert!(counts.equivalent <= 50.0);
        assert_eq!(counts.n_g, (0.2 * counts.n_total as f64).round() as usize);
        // nu < 1 allows n_total above n_tilde.
        let counts = CostModel { nu: 0.5 }.split(10.0, 1.0).unwrap();
        assert_eq!(counts.n_total, 20);
    }

    #[test]
    fn tiny_study_runs_and_is_deterministic() {
        let basis = enumerate_basis(3, 2).unwrap();
        let problem = manufacture(basis, 3, 2).unwrap();
        let cfg = StudyConfig {
            cost: CostModel { nu: 2.0 },
            n_grid: vec![20.0, 40.0],
            gradient_fraction: 1.0,
            noise: NoiseConfig::noiseless(),
            replications: 4,
            seed: 31,
        };
        let a = run_recovery_study(&problem, &cfg).unwrap();
        let b = run_recovery_study(&problem, &cfg).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert_eq!(a.points.len(), 2);
        // Oversampled noiseless point should recover every time.
        assert_eq!(a.points[1].successes, 4);
    }
}
