use nalgebra::{DMatrix, DVector};
fn main() {
    use sparse_pce::basis::enumerate_basis;
    use sparse_pce::experiments::*;
    use sparse_pce::sampling::*;
    use sparse_pce::solver::*;
    let basis = enumerate_basis(8, 3).unwrap();
    let problem = manufacture(basis, 10, 3).unwrap();
    let samples = draw_samples(8, 90, 0.0, 99).unwrap();
    let evaluator = |_: usize, xi: &[f64], g: bool| {
        let (v, gr) = evaluate_planted(&problem, xi)?;
        Ok((v, g.then_some(gr)))
    };
    let system = assemble(&problem.basis, &samples, &evaluator, SystemKind::Standard, false).unwrap();
    let sol = solve_bpdn(&system, 6.15e-5, &SolveOptions::default()).unwrap();

    let scale = 1.0 / (system.n_samples() as f64).sqrt();
    let a = system.matrix() * scale;
    let b = system.rhs() * scale;
    let delta = 6.15e-5 * scale;
    let z = &sol.coefficients;
    let p = a.ncols();
    let rows = a.nrows();
    let max_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    for cutoff_rel in [1e-3, 1e-6, 0.0f64] {
        let cutoff = cutoff_rel * max_z;
        let support: Vec<usize> = (0..p).filter(|&j| z[j].abs() > cutoff).collect();
        let s = support.len();
        println!("--- cutoff {cutoff_rel:.0e}: support {s}");
        if s == 0 || s > rows.min(p) { println!("  size reject"); continue; }
        let a_s = DMatrix::from_fn(rows, s, |i, k| a[(i, support[k])]);
        let gram = a_s.transpose() * &a_s;
        let Some(chol) = nalgebra::Cholesky::new(gram) else { println!("  chol fail"); continue };
        let sigma = DVector::from_fn(s, |k, _| if z[support[k]] > 0.0 { 1.0 } else { -1.0 });
        let c_ls = chol.solve(&(a_s.transpose() * &b));
        let r_ls = &b - &a_s * &c_ls;
        let rls_sq = r_ls.norm_squared();
        let slack = delta * delta - rls_sq;
        println!("  rls={:.3e} delta={:.3e} slack={:.3e}", rls_sq.sqrt(), delta, slack);
        if slack < -(1e-24 * b.norm_squared()) { println!("  infeasible-support reject"); continue; }
        let g_inv_sigma = chol.solve(&sigma);
        let h = &a_s * &g_inv_sigma;
        let h_sq = h.norm_squared();
        let theta = if slack > 0.0 && h_sq > 0.0 { (slack / h_sq).sqrt() } else { 0.0 };
        let c_s = &c_ls - &g_inv_sigma * theta;
        let sign_ok = (0..s).all(|k| c_s[k] * sigma[k] > 0.0);
        println!("  theta={theta:.3e} sign_ok={sign_ok}");
        if !sign_ok {
            let bad: Vec<usize> = (0..s).filter(|&k| c_s[k] * sigma[k] <= 0.0).collect();
            println!("  bad signs at support positions {:?} (values {:?})", &bad[..bad.len().min(5)], bad.iter().take(5).map(|&k| c_s[k]).collect::<Vec<_>>());
            continue;
        }
        let mut c = DVector::zeros(p);
        for k in 0..s { c[support[k]] = c_s[k]; }
        let residual = &b - &a * &c;
        let y = if theta > 1e-300 { &residual / theta } else { h.clone() };
        let aty = a.transpose() * &y;
        let infnorm = aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l1: f64 = c.iter().map(|x| x.abs()).sum();
        let dual = (b.dot(&y) - delta * y.norm()) / infnorm.max(1.0);
        println!("  |Aty|inf={infnorm:.6} l1={l1:.6e} dual={dual:.6e} gap={:.3e} tol*l1={:.3e}", l1 - dual, 1e-8*l1.max(1.0));
    }
}
