fn main() {
    use sparse_pce::basis::enumerate_basis;
    use sparse_pce::experiments::*;
    use sparse_pce::sampling::*;
    use sparse_pce::solver::*;
    let basis = enumerate_basis(8, 3).unwrap();
    let problem = manufacture(basis, 10, 3).unwrap();
    for (label, n, fraction) in [("grad N=15 (Ntilde 30)", 15usize, 1.0), ("grad N=35 (70)", 35, 1.0), ("std N=50", 50, 0.0), ("std N=90", 90, 0.0), ("std N=165", 165, 0.0), ("std N=250", 250, 0.0)] {
        let samples = draw_samples(8, n, fraction, 99).unwrap();
        let kind = if fraction > 0.0 { SystemKind::GradientEnhanced } else { SystemKind::Standard };
        let evaluator = |_: usize, xi: &[f64], g: bool| {
            let (v, gr) = evaluate_planted(&problem, xi)?;
            Ok((v, g.then_some(gr)))
        };
        let system = assemble(&problem.basis, &samples, &evaluator, kind, fraction > 0.0).unwrap();
        let t0 = std::time::Instant::now();
        let grid = default_delta_grid(system.rhs().norm());
        let cv = cross_validate_delta(&system, 4, &grid, 7).unwrap();
        let t1 = t0.elapsed();
        let t0b = std::time::Instant::now();
        let sol = solve_bpdn(&system, cv.chosen_delta, &SolveOptions::default()).unwrap();
        println!("{label}: rows={} cv={:?} final_solve={:?} iters={} conv={} delta={:.2e}", system.rows(), t1, t0b.elapsed(), sol.iterations, sol.converged, sol.delta_used);
    }
}
