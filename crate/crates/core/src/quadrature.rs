//! Gauss-Hermite quadrature for the standard Gaussian weight.
//!
//! Nodes and weights come from the Golub-Welsch eigendecomposition of the
//! Jacobi matrix of the orthonormal probabilists' Hermite recurrence
//! (off-diagonal `sqrt(k)`), so the rule integrates against the N(0, 1)
//! density directly: `E[f(X)] ~ sum_i w_i f(x_i)`. A rule with `n` nodes is
//! exact for polynomials of degree `2n - 1`, which makes it an independent
//! oracle for the orthonormality and gradient-norm identities.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A Gauss-Hermite rule for the probabilists' (standard Gaussian) weight.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-node rule. Exact for polynomial integrands of degree
    /// `<= 2n - 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "quadrature rule needs at least one node".into(),
            ));
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let node = eig.eigenvalues[i];
                // mu_0 = integral of the N(0,1) density = 1.
                let w = eig.eigenvectors[(0, i)];
                (node, w * w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Approximates `E[f(X)]` for `X ~ N(0, 1)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Approximates `E[f(X)]` for `X ~ N(0, I_d)` with the tensor-product
    /// rule. Cost grows as `n^d`; intended for the small `d` used by the
    /// identity checks.
    pub fn integrate_tensor<F: Fn(&[f64]) -> f64>(&self, dim: usize, f: F) -> f64 {
        let n = self.nodes.len();
        let mut point = vec![0.0; dim];
        let mut total = 0.0;
        let count = n.pow(dim as u32);
        for flat in 0..count {
            let mut rest = flat;
            let mut w = 1.0;
            for slot in point.iter_mut().take(dim) {
                let idx = rest % n;
                rest /= n;
                *slot = self.nodes[idx];
                w *= self.weights[idx];
            }
            total += w * f(&point);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_eval;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_moments() {
        let rule = GaussHermite::new(12).unwrap();
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.integrate(|x| x), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.integrate(|x| x * x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(6)), 15.0, epsilon = 1e-10);
    }

    #[test]
    fn hermite_orthonormality_univariate() {
        let rule = GaussHermite::new(16).unwrap();
        for i in 0..=6 {
            for j in 0..=6 {
                let val = rule.integrate(|x| hermite_eval(i, x) * hermite_eval(j, x));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(val, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn tensor_rule_integrates_products() {
        let rule = GaussHermite::new(8).unwrap();
        // E[x^2 y^2] = 1, E[x y] = 0.
        assert_abs_diff_eq!(
            rule.integrate_tensor(2, |p| p[0] * p[0] * p[1] * p[1]),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(rule.integrate_tensor(2, |p| p[0] * p[1]), 0.0, epsilon = 1e-13);
    }
}
