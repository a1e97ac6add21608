//! Runtime self-check suite behind the `selftest` CLI subcommand.
//!
//! Re-runs the quadrature, finite-difference, and oracle property checks on
//! a pristine installation and reports one pass/fail line per property.
//! Everything here finishes in a few seconds.

use crate::basis::enumerate_basis;
use crate::diagnostics::{ric_exhaustive, ric_monte_carlo};
use crate::experiments::{evaluate_planted, manufacture};
use crate::hermite::{hermite_derivative, hermite_eval};
use crate::pde::{build_kl, solve_adjoint_gradient, solve_forward};
use crate::quadrature::GaussHermite;
use crate::rng::{self, Stream};
use crate::sampling::{assemble, draw_samples, SystemKind};
use crate::solver::{solve_bpdn, SolveOptions};

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("worst deviation {worst:.3e} (tolerance {tol:.1e})"),
    }
}

fn orthonormality() -> CheckResult {
    let mut worst = 0.0f64;
    for d in 1..=2usize {
        let p = 4;
        let basis = enumerate_basis(d, p).expect("basis");
        let rule = GaussHermite::new(2 * p + 2).expect("rule");
        for (i, a) in basis.indices().iter().enumerate() {
            for b in basis.indices().iter().skip(i) {
                let val = rule.integrate_tensor(d, |xi| {
                    basis.eval_multivariate(a, xi).unwrap() * basis.eval_multivariate(b, xi).unwrap()
                });
                let expected = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((val - expected).abs());
            }
        }
    }
    check("hermite-orthonormality", worst, 1e-10)
}

fn gradient_norm_identity() -> CheckResult {
    let d = 2usize;
    let p = 4;
    let basis = enumerate_basis(d, p).expect("basis");
    let rule = GaussHermite::new(2 * p + 2).expect("rule");
    let mut worst = 0.0f64;
    for (i, a) in basis.indices().iter().enumerate() {
        for b in basis.indices().iter().skip(i) {
            let val = rule.integrate_tensor(d, |xi| {
                let mut acc = basis.eval_multivariate(a, xi).unwrap()
                    * basis.eval_multivariate(b, xi).unwrap();
                for k in 0..d {
                    acc += basis.eval_multivariate_partial(a, xi, k).unwrap()
                        * basis.eval_multivariate_partial(b, xi, k).unwrap();
                }
                acc
            });
            let expected = if a == b { 1.0 + a.total() as f64 } else { 0.0 };
            worst = worst.max((val - expected).abs());
        }
    }
    check("gradient-norm-identity", worst, 1e-10)
}

fn derivative_identity() -> CheckResult {
    let mut rng = rng::stream_rng(0xc0ffee, Stream::Selftest, 2);
    let mut worst_exact = 0.0f64;
    let mut worst_fd = 0.0f64;
    let h = 1e-6;
    for _ in 0..200 {
        let x = rng::standard_normal(&mut rng);
        for order in 1..=20usize {
            let exact = hermite_derivative(order, x);
            let via_identity = (order as f64).sqrt() * hermite_eval(order - 1, x);
            worst_exact = worst_exact.max((exact - via_identity).abs());
            let fd = (hermite_eval(order, x + h) - hermite_eval(order, x - h)) / (2.0 * h);
            worst_fd = worst_fd.max((exact - fd).abs());
        }
    }
    let passed = worst_exact == 0.0 && worst_fd <= 1e-8;
    CheckResult {
        name: "hermite-derivative-identity",
        passed,
        detail: format!("identity deviation {worst_exact:.1e}, central-FD deviation {worst_fd:.3e}"),
    }
}

fn basis_enumeration() -> CheckResult {
    let checks = [
        (25usize, 3usize, 3276usize),
        (30, 3, 5456),
        (1, 0, 1),
    ];
    let mut passed = true;
    let mut detail = String::new();
    for (d, p, expected) in checks {
        let basis = enumerate_basis(d, p).expect("basis");
        let again = enumerate_basis(d, p).expect("basis");
        if basis.cardinality() != expected || basis != again {
            passed = false;
        }
        detail.push_str(&format!("P({d},{p})={} ", basis.cardinality()));
    }
    CheckResult {
        name: "basis-enumeration",
        passed,
        detail,
    }
}

fn weight_inequality() -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=50u32 {
        for j in 1..=50u32 {
            let (fi, fj) = (f64::from(i), f64::from(j));
            let lhs = (1.0 + ((fi - 1.0) * (fj - 1.0)).sqrt()) / (fi * fj).sqrt();
            let rhs = (1.0 + (fi * fj).sqrt()) / ((1.0 + fi) * (1.0 + fj)).sqrt();
            worst = worst.max(lhs - rhs);
        }
    }
    check("weight-factor-inequality", worst.max(0.0), 1e-14)
}

fn ric_consistency() -> CheckResult {
    let basis = enumerate_basis(2, 2).expect("basis");
    let problem = manufacture(basis, 3, 11).expect("problem");
    let samples = draw_samples(2, 10, 0.0, 12).expect("samples");
    let evaluator = |_: usize, xi: &[f64], g: bool| {
        let (value, gradient) = evaluate_planted(&problem, xi)?;
        Ok((value, g.then_some(gradient)))
    };
    let system = assemble(&problem.basis, &samples, &evaluator, SystemKind::Standard, false)
        .expect("assemble");
    let exact = ric_exhaustive(&system, 2).expect("exhaustive");
    let mc = ric_monte_carlo(&system, 2, 2000, 7).expect("mc");
    check("ric-oracle-consistency", (exact.value - mc.value).abs(), 1e-12)
}

fn bpdn_analytic_cases() -> CheckResult {
    // Zero solution when delta dominates the rhs norm.
    let basis = enumerate_basis(3, 2).expect("basis");
    let problem = manufacture(basis, 4, 5).expect("problem");
    let samples = draw_samples(3, 12, 0.0, 6).expect("samples");
    let evaluator = |_: usize, xi: &[f64], g: bool| {
        let (value, gradient) = evaluate_planted(&problem, xi)?;
        Ok((value, g.then_some(gradient)))
    };
    let system = assemble(&problem.basis, &samples, &evaluator, SystemKind::Standard, false)
        .expect("assemble");
    let sol = solve_bpdn(&system, system.rhs().norm() * 1.25, &SolveOptions::default())
        .expect("solve");
    let zero_dev = sol.coefficients.norm();

    // Exactly sparse all-gradient instance recovered at delta = 0.
    let basis = enumerate_basis(4, 3).expect("basis");
    let problem = manufacture(basis, 5, 8).expect("problem");
    let samples = draw_samples(4, 30, 1.0, 9).expect("samples");
    let evaluator = |_: usize, xi: &[f64], g: bool| {
        let (value, gradient) = evaluate_planted(&problem, xi)?;
        Ok((value, g.then_some(gradient)))
    };
    let system = assemble(
        &problem.basis,
        &samples,
        &evaluator,
        SystemKind::GradientEnhanced,
        true,
    )
    .expect("assemble");
    let sol = solve_bpdn(&system, 0.0, &SolveOptions::default()).expect("solve");
    let recovered = crate::solver::unweight(&sol.coefficients, &problem.basis, true);
    let rec_dev = (recovered - &problem.planted).norm() / problem.planted.norm();

    let passed = zero_dev == 0.0 && sol.converged && rec_dev <= 1e-8;
    CheckResult {
        name: "bpdn-analytic-cases",
        passed,
        detail: format!("zero-case norm {zero_dev:.1e}, planted recovery RRMSE {rec_dev:.3e}"),
    }
}

fn adjoint_finite_difference() -> CheckResult {
    let d = 2;
    let field = build_kl(d, 16, 0.5, 0.1, 1.0 / 16.0).expect("kl");
    let mut worst = 0.0f64;
    for rep in 0..2u64 {
        let mut rng = rng::stream_rng(31, Stream::Selftest, rep);
        let xi: Vec<f64> = rng::normal_vec(&mut rng, d);
        let fs = solve_forward(&field, &xi, 16).expect("forward");
        let grad = solve_adjoint_gradient(&fs.operator, &fs.state, &field, &xi).expect("adjoint");
        let h = 1e-5;
        for k in 0..d {
            let mut hi = xi.clone();
            let mut lo = xi.clone();
            hi[k] += h;
            lo[k] -= h;
            let fd = (solve_forward(&field, &hi, 16).expect("fd").qoi
                - solve_forward(&field, &lo, 16).expect("fd").qoi)
                / (2.0 * h);
            worst = worst.max((grad[k] - fd).abs() / fd.abs().max(1e-12));
        }
    }
    check("pde-adjoint-vs-fd", worst, 1e-4)
}

fn kl_orthonormality() -> CheckResult {
    let field = build_kl(4, 24, 0.5, 0.1, 0.25).expect("kl");
    let k = field.grid_resolution();
    let h = 1.0 / k as f64;
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in a..4 {
            let mut acc = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let x = (i as f64 + 0.5) * h;
                    let y = (j as f64 + 0.5) * h;
                    acc += h * h * field.eigenfunction(a, x, y) * field.eigenfunction(b, x, y);
                }
            }
            let expected = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((acc - expected).abs());
        }
    }
    check("kl-orthonormality", worst, 1e-8)
}

fn determinism() -> CheckResult {
    let a = draw_samples(3, 50, 0.4, 2024).expect("samples");
    let b = draw_samples(3, 50, 0.4, 2024).expect("samples");
    let mut same = a.flags() == b.flags();
    for i in 0..a.len() {
        same &= a.point(i) == b.point(i);
    }
    let mut rng1 = rng::stream_rng(1, Stream::Selftest, 0);
    let mut rng2 = rng::stream_rng(1, Stream::Selftest, 0);
    let g1: Vec<f64> = rng::normal_vec(&mut rng1, 64);
    let g2: Vec<f64> = rng::normal_vec(&mut rng2, 64);
    same &= g1 == g2;
    CheckResult {
        name: "seeded-determinism",
        passed: same,
        detail: "sample sets and Gaussian streams repeat bit-for-bit".into(),
    }
}

fn gramian_normalization() -> CheckResult {
    // Weighted gradient-enhanced Gramian diagonal has unit expectation.
    let basis = enumerate_basis(2, 2).expect("basis");
    let samples = draw_samples(2, 20_000, 1.0, 99).expect("samples");
    let evaluator =
        |_: usize, xi: &[f64], g: bool| Ok((xi[0], g.then(|| vec![1.0, 0.0])));
    let system = assemble(&basis, &samples, &evaluator, SystemKind::GradientEnhanced, true)
        .expect("assemble");
    let m = crate::sampling::gramian(&system);
    let p = basis.cardinality();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - expected).abs());
        }
    }
    check("gramian-unit-expectation", worst, 0.05)
}

/// Runs every self-check.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        orthonormality(),
        gradient_norm_identity(),
        derivative_identity(),
        basis_enumeration(),
        weight_inequality(),
        ric_consistency(),
        bpdn_analytic_cases(),
        adjoint_finite_difference(),
        kl_orthonormality(),
        gramian_normalization(),
        determinism(),
    ]
}

/// Convenience wrapper returning overall success.
pub fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_suite_is_green() {
        let results = run_all();
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
        assert!(all_pass(&results));
        assert_eq!(results.len(), 11);
    }
}
