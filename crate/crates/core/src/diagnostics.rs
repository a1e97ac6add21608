//! Stability diagnostics: coherence parameters, restricted isometry
//! estimates, null-space dimension, column inner products, and the
//! sample-count bound.
//!
//! The coherence suprema are searched over a truncated input domain with a
//! budget of candidate points (dense radial grids along coordinate axes and
//! random directions); the result is a lower bound on the true supremum and
//! is reported as such. Subset enumeration and Monte Carlo trials
//! parallelize with a deterministic max reduction.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, Stream};
use crate::sampling::{MeasurementSystem, SystemKind};

/// Default epsilon for the truncation radius; kept fixed so the domain is
/// reproducible.
pub const DEFAULT_TRUNCATION_EPSILON: f64 = 1e-2;

/// Fixed seed behind the pure-function coherence searches.
const COHERENCE_DEFAULT_SEED: u64 = 0x5eed_c0de;

/// Truncated input domain `{ xi : ||xi||^2 <= (4 + eps) p + 2 }` on which
/// Hermite polynomials are uniformly bounded.
#[derive(Debug, Clone, Copy)]
pub struct TruncationSet {
    radius_sq: f64,
    epsilon: f64,
}

impl TruncationSet {
    pub fn new(order: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            radius_sq: (4.0 + epsilon) * order as f64 + 2.0,
            epsilon,
        })
    }

    /// Radius with the default epsilon `1e-2`.
    pub fn for_order(order: usize) -> Self {
        Self::new(order, DEFAULT_TRUNCATION_EPSILON).expect("positive default epsilon")
    }

    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.iter().map(|v| v * v).sum::<f64>() <= self.radius_sq
    }
}

/// Both coherence parameters evaluated on one shared candidate set.
#[derive(Debug, Clone, Copy)]
pub struct CoherencePair {
    /// `sup |psi_k|^2`: standard-normalization coherence.
    pub mu: f64,
    /// `sup ||X(:,k)||^2` over gradient-normalized column blocks.
    pub beta: f64,
    pub candidates: usize,
}

/// Candidate points: dense radial grids (64 steps from the origin to the
/// boundary sphere, endpoints included) along every coordinate axis and
/// enough random unit directions to exhaust the budget.
fn candidate_points(d: usize, trunc: &TruncationSet, budget: usize, seed: u64) -> Vec<Vec<f64>> {
    let radial_steps = 64;
    let radius = trunc.radius();
    let axis_dirs: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            e
        })
        .collect();
    let total_dirs = (budget / radial_steps).max(axis_dirs.len() + 1);
    let mut dirs = axis_dirs;
    let mut rng = rng::stream_rng(seed, Stream::CoherenceSearch, 0);
    while dirs.len() < total_dirs {
        let mut v = rng::normal_vec(&mut rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        dirs.push(v);
    }
    let mut points = Vec::with_capacity(dirs.len() * radial_steps);
    for dir in &dirs {
        for j in 0..radial_steps {
            let t = radius * j as f64 / (radial_steps - 1) as f64;
            points.push(dir.iter().map(|&u| t * u).collect());
        }
    }
    points
}

fn coherence_on_points(basis: &Basis, points: &[Vec<f64>]) -> CoherencePair {
    let weights = basis.gradient_weights();
    let d = basis.dimension();
    let maxima: Vec<(f64, f64)> = exec::map_indices(points.len(), |i| {
        let xi = &points[i];
        let values = basis.row_values(xi).expect("candidate dimension");
        let mut mu = 0.0f64;
        for v in &values {
            mu = mu.max(v * v);
        }
        let mut block_sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        for k in 0..d {
            let partials = basis.row_partials(xi, k).expect("candidate dimension");
            for (acc, pv) in block_sq.iter_mut().zip(&partials) {
                *acc += pv * pv;
            }
        }
        let mut beta = 0.0f64;
        for (j, b) in block_sq.iter().enumerate() {
            beta = beta.max(weights[j] * weights[j] * b);
        }
        (mu, beta)
    });
    let mut mu = 0.0f64;
    let mut beta = 0.0f64;
    for (m, b) in maxima {
        mu = mu.max(m);
        beta = beta.max(b);
    }
    CoherencePair {
        mu,
        beta,
        candidates: points.len(),
    }
}

/// Evaluates both coherence parameters on one shared, seeded candidate set.
/// The returned values are lower bounds on the true suprema.
pub fn coherence_pair(
    basis: &Basis,
    trunc: &TruncationSet,
    search_budget: usize,
    seed: u64,
) -> Result<CoherencePair> {
    if search_budget < 1000 {
        return Err(Error::InvalidArgument(format!(
            "coherence search budget must be at least 1000 points, got {search_budget}"
        )));
    }
    let points = candidate_points(basis.dimension(), trunc, search_budget, seed);
    Ok(coherence_on_points(basis, &points))
}

/// Standard-normalization coherence `sup_{k, xi in Q} |psi_k(xi)|^2`
/// (budgeted lower bound; deterministic).
pub fn coherence_mu(basis: &Basis, trunc: &TruncationSet, search_budget: usize) -> Result<f64> {
    Ok(coherence_pair(basis, trunc, search_budget, COHERENCE_DEFAULT_SEED)?.mu)
}

/// Gradient-normalized block coherence `sup_{k, xi in Q} ||X(:,k)||^2`
/// where `X` stacks the `d` derivative rows and the value row (budgeted
/// lower bound; deterministic).
pub fn coherence_beta(basis: &Basis, trunc: &TruncationSet, search_budget: usize) -> Result<f64> {
    Ok(coherence_pair(basis, trunc, search_budget, COHERENCE_DEFAULT_SEED)?.beta)
}

/// A restricted isometry estimate at sparsity `s`.
#[derive(Debug, Clone, Copy)]
pub struct RicEstimate {
    pub s: usize,
    pub value: f64,
    pub subsets_examined: u64,
}

/// Subset count guard for exhaustive enumeration.
pub const RIC_EXHAUSTIVE_GUARD: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut value: u128 = 1;
    for i in 1..=k {
        value = value.checked_mul((n - k + i) as u128)?;
        value /= i as u128;
    }
    Some(value)
}

/// Gramian of the `1/sqrt(N)`-scaled system.
fn scaled_gramian(system: &MeasurementSystem) -> DMatrix<f64> {
    crate::sampling::gramian(system)
}

fn subset_deviation(gram: &DMatrix<f64>, subset: &[usize]) -> f64 {
    let s = subset.len();
    if s == 1 {
        return (gram[(subset[0], subset[0])] - 1.0).abs();
    }
    let m = DMatrix::from_fn(s, s, |i, j| gram[(subset[i], subset[j])]);
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max((l - 1.0).abs()))
}

/// Exact restricted isometry constant by enumerating every `s`-column
/// subset of the `1/sqrt(N)`-scaled matrix. Deviations are monotone in the
/// subset, so size-`s` subsets dominate all smaller ones.
pub fn ric_exhaustive(system: &MeasurementSystem, s: usize) -> Result<RicEstimate> {
    let p = system.columns();
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!(
            "sparsity level {s} outside 1..={p}"
        )));
    }
    let count = binomial(p, s).unwrap_or(u128::MAX);
    if count > RIC_EXHAUSTIVE_GUARD {
        return Err(Error::SubsetGuard {
            p,
            s,
            count,
            guard: RIC_EXHAUSTIVE_GUARD,
        });
    }
    let gram = scaled_gramian(system);

    // Partition the enumeration by the first subset element.
    let per_first: Vec<f64> = exec::map_indices(p - s + 1, |first| {
        let mut subset: Vec<usize> = (0..s).map(|i| first + i).collect();
        let mut worst = 0.0f64;
        loop {
            worst = worst.max(subset_deviation(&gram, &subset));
            // Advance positions 1.. (position 0 stays at `first`).
            let mut pos = s;
            loop {
                if pos == 1 {
                    pos = 0;
                    break;
                }
                pos -= 1;
                if subset[pos] < p - (s - pos) {
                    subset[pos] += 1;
                    for q in (pos + 1)..s {
                        subset[q] = subset[q - 1] + 1;
                    }
                    break;
                }
            }
            if pos == 0 {
                break;
            }
        }
        worst
    });
    let value = per_first.into_iter().fold(0.0f64, f64::max);
    Ok(RicEstimate {
        s,
        value,
        subsets_examined: count as u64,
    })
}

/// Monte Carlo lower bound on the restricted isometry constant: the maximum
/// deviation over `trials` random subsets. Trial `i` depends only on
/// `(seed, i)`, so a longer run examines a superset of subsets and the
/// estimate is nondecreasing in `trials`.
pub fn ric_monte_carlo(
    system: &MeasurementSystem,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<RicEstimate> {
    let p = system.columns();
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!(
            "sparsity level {s} outside 1..={p}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let gram = scaled_gramian(system);
    let deviations: Vec<f64> = exec::map_indices(trials, |i| {
        let mut rng = rng::stream_rng(seed, Stream::RicSubsets, i as u64);
        let mut subset = Vec::with_capacity(s);
        while subset.len() < s {
            let j = rng.random_range(0..p);
            if !subset.contains(&j) {
                subset.push(j);
            }
        }
        subset.sort_unstable();
        subset_deviation(&gram, &subset)
    });
    Ok(RicEstimate {
        s,
        value: deviations.into_iter().fold(0.0f64, f64::max),
        subsets_examined: trials as u64,
    })
}

/// Numerical null-space dimension: `P` minus the count of singular values
/// above `tol * sigma_max`.
pub fn nullspace_dim(system: &MeasurementSystem, tol: f64) -> Result<usize> {
    let a = system.matrix();
    let svd = nalgebra::SVD::try_new(a.clone(), false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::LinearSolve("SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &x| m.max(x));
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&x| x > tol * sigma_max)
        .count();
    Ok(system.columns() - rank)
}

/// Absolute pairwise column inner products, diagonal zeroed.
pub fn column_inner_products(system: &MeasurementSystem) -> DMatrix<f64> {
    let a = system.matrix();
    let mut g = a.transpose() * a;
    let p = g.ncols();
    for i in 0..p {
        g[(i, i)] = 0.0;
        for j in 0..p {
            g[(i, j)] = g[(i, j)].abs();
        }
    }
    // Symmetrize the roundoff between (i,j) and (j,i) products.
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = avg;
            g[(j, i)] = avg;
        }
    }
    g
}

/// Largest off-diagonal absolute column inner product.
pub fn max_offdiagonal_inner_product(system: &MeasurementSystem) -> f64 {
    let g = column_inner_products(system);
    g.iter().fold(0.0f64, |m, &v| m.max(v))
}

/// Scan cap for the sample bound.
pub const SAMPLE_BOUND_CAP: usize = 10_000_000;

/// Smallest integer `N` with
/// `N delta_star >= (s mu / c_q) [s + log(2s) + s log(P/s) - log(prob_q^N - p_star)]`,
/// found by scanning upward. Once `prob_q^N <= p_star` the right side is
/// undefined for every larger `N`, which is reported as unsatisfiable.
pub fn sample_bound(
    s: usize,
    p: usize,
    mu: f64,
    c_q: f64,
    delta_star: f64,
    p_star: f64,
    prob_q: f64,
) -> Result<usize> {
    if s == 0 || p == 0 || s > p {
        return Err(Error::InvalidArgument(format!(
            "invalid sparsity/basis sizes s = {s}, P = {p}"
        )));
    }
    if !(delta_star > 0.0 && delta_star < 1.0) || !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::InvalidArgument(
            "delta_star and p_star must lie in (0, 1)".into(),
        ));
    }
    if !(prob_q > 0.0 && prob_q <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prob_q {prob_q} outside (0, 1]"
        )));
    }
    if !(mu > 0.0) || !(c_q > 0.0) {
        return Err(Error::InvalidArgument(
            "mu and c_q must be positive".into(),
        ));
    }
    let s_f = s as f64;
    let fixed = s_f + (2.0 * s_f).ln() + s_f * (p as f64 / s_f).ln();
    let scale = s_f * mu / c_q;
    for n in 1..=SAMPLE_BOUND_CAP {
        let tail = prob_q.powi(n as i32);
        if tail <= p_star {
            return Err(Error::SampleBoundUnsatisfiable { cap: n });
        }
        let rhs = scale * (fixed - (tail - p_star).ln());
        if n as f64 * delta_star >= rhs {
            return Ok(n);
        }
    }
    Err(Error::SampleBoundUnsatisfiable {
        cap: SAMPLE_BOUND_CAP,
    })
}

/// Monte Carlo estimate of the truncation bias
/// `|| E[X^T X | xi in Q] - I ||_2` for the given system kind (standard rows
/// or weighted gradient-enhanced blocks).
pub fn epsilon_q_estimate(
    basis: &Basis,
    trunc: &TruncationSet,
    kind: SystemKind,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let d = basis.dimension();
    let p = basis.cardinality();
    let weights = basis.gradient_weights();

    // Accumulate X^T X over accepted draws, in chunks for parallelism.
    let chunks = 64.min(samples);
    let per_chunk = samples.div_ceil(chunks);
    let partials: Vec<(DMatrix<f64>, usize)> = exec::map_indices(chunks, |chunk| {
        let mut acc = DMatrix::<f64>::zeros(p, p);
        let mut accepted = 0usize;
        let mut rng = rng::stream_rng(seed, Stream::Selftest, chunk as u64);
        for _ in 0..per_chunk {
            let xi = rng::normal_vec(&mut rng, d);
            if !trunc.contains(&xi) {
                continue;
            }
            accepted += 1;
            let mut values = basis.row_values(&xi).expect("dimension");
            match kind {
                SystemKind::Standard => {
                    for i in 0..p {
                        for j in i..p {
                            acc[(i, j)] += values[i] * values[j];
                        }
                    }
                }
                SystemKind::GradientEnhanced => {
                    for (v, w) in values.iter_mut().zip(&weights) {
                        *v *= w;
                    }
                    for i in 0..p {
                        for j in i..p {
                            acc[(i, j)] += values[i] * values[j];
                        }
                    }
                    for k in 0..d {
                        let mut partials_row = basis.row_partials(&xi, k).expect("dimension");
                        for (v, w) in partials_row.iter_mut().zip(&weights) {
                            *v *= w;
                        }
                        for i in 0..p {
                            for j in i..p {
                                acc[(i, j)] += partials_row[i] * partials_row[j];
                            }
                        }
                    }
                }
            }
        }
        (acc, accepted)
    });

    let mut total = DMatrix::<f64>::zeros(p, p);
    let mut accepted = 0usize;
    for (acc, n) in partials {
        total += acc;
        accepted += n;
    }
    if accepted == 0 {
        return Err(Error::InvalidArgument(
            "no Monte Carlo draws landed inside the truncation set".into(),
        ));
    }
    let mut m = total / accepted as f64;
    for i in 0..p {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
        m[(i, i)] -= 1.0;
    }
    let eig = SymmetricEigen::new(m);
    Ok(eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs())))
}

/// JSON payload of the `diagnose` subcommand.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiagnosticsReport {
    pub mu: f64,
    pub beta: f64,
    pub ric: Vec<RicEntry>,
    pub nullspace_dim: usize,
    pub max_offdiag_inner_product: f64,
    pub epsilon_q_estimate: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RicEntry {
    pub s: usize,
    pub value: f64,
    pub subsets_examined: u64,
    pub mode: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use crate::experiments::{evaluate_planted, manufacture};
    use crate::sampling::{assemble, draw_samples};
    use approx::assert_abs_diff_eq;

    fn system_for(
        d: usize,
        p: usize,
        n: usize,
        fraction: f64,
        weighted: bool,
        seed: u64,
    ) -> MeasurementSystem {
        let basis = enumerate_basis(d, p).unwrap();
        let problem = manufacture(basis, (d + p).min(4), seed).unwrap();
        let samples = draw_samples(d, n, fraction, seed ^ 0x55) .unwrap();
        let kind = if fraction > 0.0 {
            SystemKind::GradientEnhanced
        } else {
            SystemKind::Standard
        };
        let evaluator = |_: usize, xi: &[f64], g: bool| {
            let (value, gradient) = evaluate_planted(&problem, xi)?;
            Ok((value, g.then_some(gradient)))
        };
        assemble(&problem.basis, &samples, &evaluator, kind, weighted).unwrap()
    }

    #[test]
    fn truncation_radius_formula() {
        let t = TruncationSet::for_order(3);
        assert_abs_diff_eq!(t.radius_sq(), (4.0 + 1e-2) * 3.0 + 2.0, epsilon = 1e-15);
        assert!(t.contains(&[1.0, 2.0, 3.0]));
        assert!(!t.contains(&[4.0, 0.0, 0.0]));
        assert!(TruncationSet::new(2, 0.0).is_err());
    }

    #[test]
    fn coherence_trivial_cases() {
        // Constant basis: |psi_0|^2 = 1 everywhere.
        let b = enumerate_basis(1, 0).unwrap();
        let t = TruncationSet::for_order(0);
        assert_abs_diff_eq!(coherence_mu(&b, &t, 1000).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(coherence_beta(&b, &t, 1000).unwrap(), 1.0, epsilon = 1e-14);

        // Linear basis: sup of xi^2 on Q is the squared radius, attained on
        // the boundary.
        let b = enumerate_basis(1, 1).unwrap();
        let t = TruncationSet::for_order(1);
        assert_abs_diff_eq!(
            coherence_mu(&b, &t, 1000).unwrap(),
            t.radius_sq(),
            epsilon = 1e-12
        );
        // Column for psi_1 is (1, xi)/sqrt(2): sup is (1 + radius^2)/2.
        assert_abs_diff_eq!(
            coherence_beta(&b, &t, 1000).unwrap(),
            (t.radius_sq() + 1.0) / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coherence_beta_grid_search_oracle() {
        // 1-d dense grid search oracle for the beta column supremum.
        let b = enumerate_basis(1, 1).unwrap();
        let t = TruncationSet::for_order(1);
        let beta = coherence_beta(&b, &t, 2000).unwrap();
        let mut oracle = 0.0f64;
        let r = t.radius();
        for i in 0..=100_000 {
            let x = -r + 2.0 * r * i as f64 / 100_000.0;
            oracle = oracle.max((1.0 + x * x) / 2.0).max(1.0);
        }
        assert!((beta - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn coherence_growth_sanity_bound() {
        // Order-of-magnitude check against the exponential coherence bound
        // with asymptotic base about 3.7; generous constant, not equality.
        let b = enumerate_basis(2, 3).unwrap();
        let t = TruncationSet::for_order(3);
        let mu = coherence_mu(&b, &t, 4000).unwrap();
        assert!(mu <= 10.0 * 3.8f64.powi(3), "mu = {mu}");
        assert!(mu > 1.0);
    }

    #[test]
    fn beta_never_exceeds_mu_on_shared_candidates() {
        for seed in 0..10 {
            let d = 1 + (seed as usize % 3);
            let p = 1 + (seed as usize % 4);
            let b = enumerate_basis(d, p).unwrap();
            let t = TruncationSet::for_order(p);
            let pair = coherence_pair(&b, &t, 1500, seed).unwrap();
            assert!(
                pair.beta <= pair.mu + 1e-12,
                "beta {} > mu {} at seed {seed}",
                pair.beta,
                pair.mu
            );
        }
    }

    #[test]
    fn ric_s1_is_worst_column_norm_deviation() {
        let system = system_for(2, 2, 15, 0.0, false, 3);
        let est = ric_exhaustive(&system, 1).unwrap();
        let gram = crate::sampling::gramian(&system);
        let oracle = (0..system.columns())
            .map(|j| (gram[(j, j)] - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert_abs_diff_eq!(est.value, oracle, epsilon = 1e-13);
        assert_eq!(est.subsets_examined, system.columns() as u64);
    }

    #[test]
    fn ric_zero_for_orthonormal_columns() {
        // Columns of norm sqrt(N) that are exactly orthogonal: delta_s = 0.
        let csv = "\
dim,order,kind,weights_applied,n_samples,sample,role,rhs,a0,a1,a2
1,2,standard,0,3,0,value,1.0,1.7320508075688772,0.0,0.0
1,2,standard,0,3,1,value,0.0,0.0,1.7320508075688772,0.0
1,2,standard,0,3,2,value,0.0,0.0,0.0,1.7320508075688772
";
        let system = MeasurementSystem::from_csv(csv.as_bytes()).unwrap();
        for s in 1..=3 {
            let est = ric_exhaustive(&system, s).unwrap();
            assert!(est.value <= 1e-12, "s={s} value={}", est.value);
        }
    }

    #[test]
    fn ric_guard_triggers() {
        let system = system_for(3, 4, 10, 0.0, false, 5);
        // C(35, 6) = 1,623,160 > 1e6.
        let err = ric_exhaustive(&system, 6).unwrap_err();
        assert!(matches!(err, Error::SubsetGuard { .. }));
    }

    #[test]
    fn ric_monte_carlo_properties() {
        let system = system_for(2, 2, 12, 0.0, false, 9);
        // Full coverage reproduces the exhaustive value: C(6,2) = 15
        // subsets, 2000 trials make a miss vanishingly unlikely.
        let exact = ric_exhaustive(&system, 2).unwrap();
        let mc = ric_monte_carlo(&system, 2, 2000, 4).unwrap();
        assert_abs_diff_eq!(mc.value, exact.value, epsilon = 1e-13);

        // Nested seeds: doubling the trial count never lowers the bound.
        let mut prev = 0.0;
        for trials in [1usize, 2, 4, 8, 16, 32, 64] {
            let est = ric_monte_carlo(&system, 2, trials, 11).unwrap();
            assert!(est.value >= prev - 1e-15);
            prev = est.value;
        }
        assert!(ric_monte_carlo(&system, 2, 1, 0).unwrap().value >= 0.0);
    }

    #[test]
    fn ric_full_sparsity_is_gramian_spectral_deviation() {
        let system = system_for(2, 1, 8, 0.0, false, 21);
        let p = system.columns();
        let est = ric_exhaustive(&system, p).unwrap();
        let gram = crate::sampling::gramian(&system);
        let mut m = gram.clone();
        for i in 0..p {
            m[(i, i)] -= 1.0;
        }
        let spectral = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
        assert_abs_diff_eq!(est.value, spectral, epsilon = 1e-12);
    }

    #[test]
    fn nullspace_dimensions_match_theory() {
        // Standard, undersampled: P - N.
        let system = system_for(3, 3, 11, 0.0, false, 13);
        let p = system.columns();
        assert_eq!(nullspace_dim(&system, 1e-10).unwrap(), p - 11);

        // Gradient-enhanced, all flagged: max(0, P - (d+1) N).
        let system = system_for(3, 3, 4, 1.0, true, 14);
        assert_eq!(nullspace_dim(&system, 1e-10).unwrap(), p.saturating_sub(4 * 4));

        // Oversampled: full column rank.
        let system = system_for(3, 3, 60, 0.0, false, 15);
        assert_eq!(nullspace_dim(&system, 1e-10).unwrap(), 0);
    }

    #[test]
    fn inner_products_zero_for_orthogonal_columns() {
        let csv = "\
dim,order,kind,weights_applied,n_samples,sample,role,rhs,a0,a1
1,1,standard,0,2,0,value,1.0,2.0,0.0
1,1,standard,0,2,1,value,0.0,0.0,-3.0
";
        let system = MeasurementSystem::from_csv(csv.as_bytes()).unwrap();
        let g = column_inner_products(&system);
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(1, 1)], 0.0);
        assert_abs_diff_eq!(g[(0, 1)], 0.0, epsilon = 1e-15);
        assert_eq!(max_offdiagonal_inner_product(&system), 0.0);
    }

    #[test]
    fn weight_factor_inequality_grid() {
        // (1 + sqrt((i-1)(j-1))) / sqrt(i j) <= (1 + sqrt(i j)) / sqrt((1+i)(1+j))
        // for all 1 <= i, j <= 50.
        for i in 1..=50u32 {
            for j in 1..=50u32 {
                let (fi, fj) = (f64::from(i), f64::from(j));
                let lhs = (1.0 + ((fi - 1.0) * (fj - 1.0)).sqrt()) / (fi * fj).sqrt();
                let rhs = (1.0 + (fi * fj).sqrt()) / ((1.0 + fi) * (1.0 + fj)).sqrt();
                assert!(lhs <= rhs + 1e-14, "violated at i={i} j={j}");
            }
        }
    }

    #[test]
    fn sample_bound_examples() {
        // prob_q = 1 reduces to the closed form.
        let (s, p, mu, c_q, d_star, p_star) = (5usize, 165usize, 50.0, 1.0, 0.4652, 0.9);
        let n = sample_bound(s, p, mu, c_q, d_star, p_star, 1.0).unwrap();
        let s_f = s as f64;
        let closed =
            (s_f * mu / (c_q * d_star)) * (s_f + (2.0 * s_f).ln() + s_f * (p as f64 / s_f).ln() - (1.0 - p_star).ln());
        assert_eq!(n, closed.ceil() as usize);

        // Independent scalar scan oracle.
        let fixed = s_f + (2.0 * s_f).ln() + s_f * (p as f64 / s_f).ln();
        let prob_q = 0.999_f64;
        let mut oracle = None;
        for cand in 1..1_000_000usize {
            let tail = prob_q.powi(cand as i32);
            if tail <= p_star {
                break;
            }
            if cand as f64 * d_star >= (s_f * mu / c_q) * (fixed - (tail - p_star).ln()) {
                oracle = Some(cand);
                break;
            }
        }
        assert_eq!(
            sample_bound(s, p, mu, c_q, d_star, p_star, prob_q).ok(),
            oracle
        );

        // Unsatisfiable: the truncation probability mass runs out first.
        let err = sample_bound(10, 200, 100.0, 1.0, 0.4652, 0.9, 0.5).unwrap_err();
        assert!(matches!(err, Error::SampleBoundUnsatisfiable { .. }));
    }

    #[test]
    fn epsilon_q_matches_quadrature_oracle_1d() {
        // Dense Simpson quadrature of E[psi_i psi_j | Q] on [-r, r] as an
        // independent oracle for the Monte Carlo estimator.
        let basis = enumerate_basis(1, 2).unwrap();
        let trunc = TruncationSet::for_order(2);
        let p = basis.cardinality();
        let r = trunc.radius();
        let steps = 20_000;
        let h = 2.0 * r / steps as f64;
        let density =
            |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut moments = DMatrix::<f64>::zeros(p, p);
        let mut mass = 0.0;
        for k in 0..=steps {
            let x = -r + k as f64 * h;
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let values = basis.row_values(&[x]).unwrap();
            mass += w * density(x);
            for i in 0..p {
                for j in 0..p {
                    moments[(i, j)] += w * density(x) * values[i] * values[j];
                }
            }
        }
        let mut m = moments / mass;
        for i in 0..p {
            m[(i, i)] -= 1.0;
        }
        let oracle = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));

        let estimate =
            epsilon_q_estimate(&basis, &trunc, SystemKind::Standard, 400_000, 8).unwrap();
        // The spectral norm of a sampled moment matrix carries an upward
        // noise bias of order sqrt(P / samples); 0.02 absolute covers it.
        assert!(
            (estimate - oracle).abs() <= 0.02,
            "estimate {estimate} oracle {oracle}"
        );
    }
}
