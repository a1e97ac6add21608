//! Karhunen-Loeve decomposition of the lognormal diffusion coefficient.
//!
//! The Gaussian covariance kernel
//! `C((x1,y1),(x2,y2)) = exp(-(x1-x2)^2/l^2 - (y1-y2)^2/l^2)` is a tensor
//! product of two identical 1-D kernels, so its eigenpairs on a tensor grid
//! are products of 1-D eigenpairs. The discrete (Nystrom) eigenproblem is
//! solved densely per 1-D factor on a cell-centered grid with midpoint
//! weights; 2-D eigenvalues are the pairwise products, sorted descending,
//! and the top `d` are kept. Eigenfunctions are normalized against the grid
//! quadrature and evaluated elsewhere by clamped bilinear interpolation.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A truncated lognormal Karhunen-Loeve field
/// `a(x, xi) = exp(mean_log + sigma * sum_k sqrt(lambda_k) phi_k(x) xi_k)`.
#[derive(Debug, Clone)]
pub struct KlField {
    dimension: usize,
    grid_resolution: usize,
    sigma: f64,
    mean_log: f64,
    correlation_length: f64,
    /// Descending eigenvalues of the 2-D kernel, top `dimension`.
    eigenvalues: Vec<f64>,
    /// 1-D factor indices (ix, iy) of each kept mode.
    factors: Vec<(usize, usize)>,
    /// 1-D eigenfunctions on the cell-centered grid: `modes x grid`.
    phi_1d: Vec<Vec<f64>>,
}

/// Builds the field: 1-D dense symmetric eigensolve of the covariance
/// factor, product combination, top-`d` truncation.
pub fn build_kl(
    d: usize,
    grid_resolution: usize,
    sigma: f64,
    mean_log: f64,
    correlation_length: f64,
) -> Result<KlField> {
    if d == 0 {
        return Err(Error::InvalidArgument("KL dimension must be >= 1".into()));
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidArgument(
            "KL grid resolution must be >= 2".into(),
        ));
    }
    if !(correlation_length > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(
            "correlation length must be positive and sigma nonnegative".into(),
        ));
    }
    let k = grid_resolution;
    let h = 1.0 / k as f64;
    let centers: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * h).collect();

    // Symmetrized Nystrom matrix h * C for the 1-D factor.
    let mut factor = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let diff = (centers[i] - centers[j]) / correlation_length;
            factor[(i, j)] = h * (-diff * diff).exp();
        }
    }
    let eig = SymmetricEigen::new(factor);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    // Keep every positive 1-D mode; products below the floor are discarded
    // later by the top-d cut.
    let mut lambda_1d = Vec::new();
    let mut phi_1d: Vec<Vec<f64>> = Vec::new();
    for &idx in &order {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            break;
        }
        lambda_1d.push(lambda);
        // Quadrature-normalized eigenfunction with a deterministic sign:
        // the largest-magnitude entry is positive.
        let col = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = col.iter().map(|v| v / h.sqrt()).collect();
        let mut pivot = 0;
        for (i, v) in phi.iter().enumerate() {
            if v.abs() > phi[pivot].abs() {
                pivot = i;
            }
        }
        if phi[pivot] < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        phi_1d.push(phi);
    }

    // All pairwise products, descending, deterministic tie-break.
    let m = lambda_1d.len();
    let mut products: Vec<(f64, usize, usize)> = Vec::with_capacity(m * m);
    for ix in 0..m {
        for iy in 0..m {
            products.push((lambda_1d[ix] * lambda_1d[iy], ix, iy));
        }
    }
    products.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    if products.len() < d {
        return Err(Error::Eigen(format!(
            "only {} positive KL modes available for dimension {d}",
            products.len()
        )));
    }
    let eigenvalues: Vec<f64> = products[..d].iter().map(|p| p.0).collect();
    let factors: Vec<(usize, usize)> = products[..d].iter().map(|p| (p.1, p.2)).collect();
    if eigenvalues[d - 1] <= 0.0 || eigenvalues[d - 1] / eigenvalues[0] <= 1e-12 {
        return Err(Error::Eigen(format!(
            "KL grid too coarse: lambda_{d}/lambda_1 = {:e}",
            eigenvalues[d - 1] / eigenvalues[0]
        )));
    }

    Ok(KlField {
        dimension: d,
        grid_resolution,
        sigma,
        mean_log,
        correlation_length,
        eigenvalues,
        factors,
        phi_1d,
    })
}

impl KlField {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn grid_resolution(&self) -> usize {
        self.grid_resolution
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_log(&self) -> f64 {
        self.mean_log
    }

    pub fn correlation_length(&self) -> f64 {
        self.correlation_length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// 1-D factor indices of mode `k`; swapping them gives the mode that is
    /// the reflection of `k` across the diagonal `x = y`.
    pub fn factor_indices(&self, k: usize) -> (usize, usize) {
        self.factors[k]
    }

    /// Clamped linear interpolation of a 1-D eigenfunction from the
    /// cell-centered grid.
    fn interp_1d(&self, mode: usize, x: f64) -> f64 {
        let phi = &self.phi_1d[mode];
        let k = self.grid_resolution as f64;
        let pos = x * k - 0.5;
        if pos <= 0.0 {
            return phi[0];
        }
        let last = phi.len() - 1;
        if pos >= last as f64 {
            return phi[last];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        phi[i] * (1.0 - frac) + phi[i + 1] * frac
    }

    /// Eigenfunction `phi_k` at a point (bilinear across the tensor grid).
    pub fn eigenfunction(&self, k: usize, x: f64, y: f64) -> f64 {
        let (ix, iy) = self.factors[k];
        self.interp_1d(ix, x) * self.interp_1d(iy, y)
    }

    /// `sigma * sqrt(lambda_k) * phi_k(x, y)`: the sensitivity of the log
    /// field to `xi_k`.
    pub fn sensitivity_factor(&self, k: usize, x: f64, y: f64) -> f64 {
        self.sigma * self.eigenvalues[k].sqrt() * self.eigenfunction(k, x, y)
    }

    /// Log-coefficient `mean_log + sigma sum_k sqrt(lambda_k) phi_k xi_k`.
    pub fn log_coefficient(&self, x: f64, y: f64, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        let mut acc = self.mean_log;
        for (k, &xik) in xi.iter().enumerate() {
            acc += self.sensitivity_factor(k, x, y) * xik;
        }
        Ok(acc)
    }

    /// Realized diffusion coefficient, strictly positive.
    pub fn coefficient(&self, x: f64, y: f64, xi: &[f64]) -> Result<f64> {
        Ok(self.log_coefficient(x, y, xi)?.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_positive_and_sorted() {
        let field = build_kl(6, 32, 0.5, 0.1, 1.0 / 16.0).unwrap();
        let l = field.eigenvalues();
        assert_eq!(l.len(), 6);
        for k in 0..l.len() {
            assert!(l[k] > 0.0);
            if k > 0 {
                assert!(l[k] <= l[k - 1]);
            }
        }
    }

    #[test]
    fn long_correlation_limit_is_rank_one() {
        // l_c >> 1: the kernel is nearly constant, so the leading mode
        // dominates and its eigenfunction is nearly flat.
        let field = build_kl(2, 16, 1.0, 0.0, 50.0).unwrap();
        let l = field.eigenvalues();
        assert!(l[1] / l[0] < 1e-3, "ratio {}", l[1] / l[0]);
        let phi0 = field.eigenfunction(0, 0.1, 0.2);
        let phi1 = field.eigenfunction(0, 0.8, 0.6);
        assert!((phi0 - phi1).abs() / phi0.abs() < 1e-2);
    }

    #[test]
    fn paper_configuration_builds() {
        let field = build_kl(30, 64, 0.5, 0.1, 1.0 / 16.0).unwrap();
        let l = field.eigenvalues();
        assert_eq!(l.len(), 30);
        assert!(l[29] / l[0] > 1e-12);
    }

    #[test]
    fn eigenfunctions_discretely_orthonormal() {
        // Gram matrix of the kept modes under the grid quadrature.
        let field = build_kl(5, 24, 0.5, 0.1, 0.25).unwrap();
        let k = field.grid_resolution();
        let h = 1.0 / k as f64;
        for a in 0..5 {
            for b in 0..5 {
                let mut acc = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        let x = (i as f64 + 0.5) * h;
                        let y = (j as f64 + 0.5) * h;
                        acc += h * h * field.eigenfunction(a, x, y) * field.eigenfunction(b, x, y);
                    }
                }
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (acc - expected).abs() < 1e-8,
                    "gram[{a},{b}] = {acc}"
                );
            }
        }
    }

    #[test]
    fn coefficient_positive_and_deterministic() {
        let field = build_kl(4, 32, 0.5, 0.1, 1.0 / 16.0).unwrap();
        let xi = [1.3, -2.0, 0.4, 3.0];
        let a1 = field.coefficient(0.37, 0.82, &xi).unwrap();
        let a2 = field.coefficient(0.37, 0.82, &xi).unwrap();
        assert_eq!(a1, a2);
        assert!(a1 > 0.0);
        // sigma = 0 degenerates to exp(mean_log).
        let flat = build_kl(4, 32, 0.0, 0.7, 1.0 / 16.0).unwrap();
        let a = flat.coefficient(0.2, 0.9, &xi).unwrap();
        assert!((a - 0.7f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let field = build_kl(3, 16, 0.5, 0.0, 0.25).unwrap();
        assert!(field.coefficient(0.5, 0.5, &[0.0, 0.0]).is_err());
    }
}
