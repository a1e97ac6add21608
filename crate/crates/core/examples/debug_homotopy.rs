use nalgebra::{DMatrix, DVector};

// Stand-alone copy of the path walk with diagnostics printing.
fn debug_walk(a: &DMatrix<f64>, b: &DVector<f64>, delta: f64) {
    let p = a.ncols();
    let rows = a.nrows();
    let target = delta * delta;
    let mut residual = b.clone();
    let mut g = a.transpose() * &residual;
    let (mut pivot, mut lambda) = (0usize, 0.0f64);
    for j in 0..p {
        if g[j].abs() > lambda { lambda = g[j].abs(); pivot = j; }
    }
    let mut support = vec![pivot];
    let mut sigma = vec![g[pivot].signum()];
    let mut c = DVector::<f64>::zeros(p);
    let mut active = vec![false; p];
    active[pivot] = true;
    let cap = 8 * rows.min(p) + 32;
    for step in 0..cap {
        let s = support.len();
        let a_s = DMatrix::from_fn(rows, s, |i, k| a[(i, support[k])]);
        let gram = a_s.transpose() * &a_s;
        let Some(chol) = nalgebra::Cholesky::new(gram) else { println!("step {step}: chol fail s={s}"); return; };
        let sigma_vec = DVector::from_fn(s, |k, _| sigma[k]);
        let d_s = chol.solve(&sigma_vec);
        let ad = &a_s * &d_s;
        let ad_sq = ad.norm_squared();
        let w = a.transpose() * &ad;
        let mut t_event = lambda;
        let mut event: Option<(bool, usize)> = None;
        let eps = 1e-13 * lambda;
        for j in 0..p {
            if active[j] { continue; }
            for t_cand in [(lambda - g[j]) / (1.0 - w[j]), (lambda + g[j]) / (1.0 + w[j])] {
                if t_cand > eps && t_cand < t_event { t_event = t_cand; event = Some((true, j)); }
            }
        }
        for (k, &j) in support.iter().enumerate() {
            if d_s[k] != 0.0 {
                let t_cand = -c[j] / d_s[k];
                if t_cand > eps && t_cand < t_event { t_event = t_cand; event = Some((false, j)); }
            }
        }
        let r_sq = residual.norm_squared();
        let a1 = residual.dot(&ad);
        let disc = a1 * a1 - ad_sq * (r_sq - target);
        if disc >= 0.0 {
            let t_star = (a1 - disc.sqrt()) / ad_sq;
            if (0.0..=t_event).contains(&t_star) && t_star <= lambda {
                println!("step {step}: CROSSED target, lambda*={:.3e} s={s}", lambda - t_star);
                return;
            }
        }
        for (k, &j) in support.iter().enumerate() { c[j] += t_event * d_s[k]; }
        residual -= &ad * t_event;
        g = a.transpose() * &residual;
        lambda -= t_event;
        if step % 25 == 0 || step > cap - 10 {
            println!("step {step}: lambda={lambda:.4e} s={s} res={:.4e} event={event:?} t={t_event:.3e}", residual.norm());
        }
        if lambda <= 1e-14 * b.norm().max(1.0) {
            println!("step {step}: lambda floor, res={:.3e} target={:.3e}", residual.norm(), delta);
            return;
        }
        match event {
            Some((true, j)) => { active[j] = true; support.push(j); sigma.push(g[j].signum()); }
            Some((false, j)) => {
                let k = support.iter().position(|&x| x == j).unwrap();
                support.remove(k); sigma.remove(k); active[j] = false; c[j] = 0.0;
            }
            None => { println!("step {step}: no event, res={:.3e}", residual.norm()); return; }
        }
    }
    println!("CAP HIT");
}

fn main() {
    use sparse_pce::basis::enumerate_basis;
    use sparse_pce::experiments::*;
    use sparse_pce::sampling::*;
    let basis = enumerate_basis(8, 3).unwrap();
    let problem = manufacture(basis, 10, 3).unwrap();
    for (n, fraction, delta) in [(250usize, 0.0, 1.10e-4), (15, 1.0, 4.03e-5)] {
        println!("==== N={n} fraction={fraction} delta={delta:.2e}");
        let samples = draw_samples(8, n, fraction, 99).unwrap();
        let kind = if fraction > 0.0 { SystemKind::GradientEnhanced } else { SystemKind::Standard };
        let evaluator = |_: usize, xi: &[f64], g: bool| {
            let (v, gr) = evaluate_planted(&problem, xi)?;
            Ok((v, g.then_some(gr)))
        };
        let system = assemble(&problem.basis, &samples, &evaluator, kind, fraction > 0.0).unwrap();
        let scale = 1.0 / (system.n_samples() as f64).sqrt();
        let a = system.matrix() * scale;
        let b = system.rhs() * scale;
        debug_walk(&a, &b, delta * scale);
    }
}
