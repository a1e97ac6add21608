fn main() {
    use sparse_pce::basis::enumerate_basis;
    use sparse_pce::experiments::*;
    use sparse_pce::sampling::*;
    use sparse_pce::solver::*;
    let basis = enumerate_basis(8, 3).unwrap();
    let problem = manufacture(basis, 10, 0).unwrap();
    for (label, n, fraction) in [("std N=30", 30usize, 0.0), ("std N=70", 70, 0.0), ("grad N=60 (120)", 60, 1.0), ("grad N=125 (250)", 125, 1.0)] {
        for seed in [1u64, 2, 3] {
            let samples = draw_samples(8, n, fraction, seed).unwrap();
            let kind = if fraction > 0.0 { SystemKind::GradientEnhanced } else { SystemKind::Standard };
            let evaluator = |_: usize, xi: &[f64], g: bool| {
                let (v, gr) = evaluate_planted(&problem, xi)?;
                Ok((v, g.then_some(gr)))
            };
            let system = assemble(&problem.basis, &samples, &evaluator, kind, fraction > 0.0).unwrap();
            let t0 = std::time::Instant::now();
            let grid = default_delta_grid(system.rhs().norm());
            let cv = cross_validate_delta(&system, 4, &grid, seed).unwrap();
            let t1 = t0.elapsed();
            let t2 = std::time::Instant::now();
            let sol = solve_bpdn(&system, cv.chosen_delta, &SolveOptions::default()).unwrap();
            println!("{label} seed={seed}: cv={t1:?} final={:?} iters={} conv={}", t2.elapsed(), sol.iterations, sol.converged);
        }
    }
}
