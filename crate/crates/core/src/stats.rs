//! Small statistics helpers for the experiment reports.

/// Mean and sample standard deviation (n - 1 normalization; zero for fewer
/// than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn diff_and_noise(k1: usize, n1: usize, k2: usize, n2: usize) -> (f64, f64) {
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    (p1 - p2, 1.96 * se)
}

/// True when the first success proportion exceeds the second by more than
/// two-sided 95% binomial noise (normal approximation of the difference).
pub fn proportion_exceeds_noise(k1: usize, n1: usize, k2: usize, n2: usize) -> bool {
    let (diff, noise) = diff_and_noise(k1, n1, k2, n2);
    diff > noise
}

/// True when the first proportion is at least the second up to the same
/// two-sided 95% binomial noise margin.
pub fn proportion_not_below_noise(k1: usize, n1: usize, k2: usize, n2: usize) -> bool {
    let (diff, noise) = diff_and_noise(k1, n1, k2, n2);
    diff >= -noise
}
