//! Total-degree multi-index bases of multivariate Hermite polynomials.
//!
//! A basis of dimension `d` and order `p` holds every multi-index
//! `(i_1, ..., i_d)` with `i_1 + ... + i_d <= p`, giving cardinality
//! `P = (d + p)! / (d! p!)`. Indices are ordered by ascending total degree;
//! within a degree they are sorted descending-lexicographically, so degree
//! assigned to lower-numbered variables comes first: `(1,0,...)` precedes
//! `(0,1,...)`. The ordering is a pure function of `(d, p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_derivative, hermite_eval, hermite_table};

/// A d-dimensional multi-index of polynomial degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    degrees: Vec<usize>,
    total: usize,
}

impl MultiIndex {
    pub fn new(degrees: Vec<usize>) -> Self {
        let total = degrees.iter().sum();
        Self { degrees, total }
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dimension(&self) -> usize {
        self.degrees.len()
    }

    /// The index with dimension `k` lowered by one, or `None` when the
    /// degree there is already zero. This is the index picked out by the
    /// derivative identity `d/dxi_k psi_i = sqrt(i_k) psi_{i - e_k}`.
    pub fn lowered(&self, k: usize) -> Option<MultiIndex> {
        if self.degrees.get(k).copied().unwrap_or(0) == 0 {
            return None;
        }
        let mut degrees = self.degrees.clone();
        degrees[k] -= 1;
        Some(MultiIndex::new(degrees))
    }
}

/// Gradient-normalization weight `(1 + sum_k i_k)^{-1/2}`. Multiplying the
/// orthonormal basis function by this weight gives derivative-augmented
/// columns unit expected squared norm. Always in `(0, 1]`.
pub fn gradient_weight(index: &MultiIndex) -> f64 {
    1.0 / ((1 + index.total()) as f64).sqrt()
}

/// An ordered total-degree basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    dimension: usize,
    order: usize,
    indices: Vec<MultiIndex>,
}

/// Binomial coefficient `C(d + p, d)` with overflow detection. Each partial
/// product `C(max(d,p) + k, k)` is an integer, so the running division is
/// exact.
fn cardinality(d: usize, p: usize) -> Option<u128> {
    let small = d.min(p) as u128;
    let large = d.max(p) as u128;
    let mut value: u128 = 1;
    for k in 1..=small {
        value = value.checked_mul(large + k)?;
        value /= k;
    }
    Some(value)
}

/// Enumerates the total-degree basis for dimension `d >= 1` and order
/// `p >= 0`.
pub fn enumerate_basis(d: usize, p: usize) -> Result<Basis> {
    if d == 0 {
        return Err(Error::InvalidArgument("basis dimension must be >= 1".into()));
    }
    let count =
        cardinality(d, p).ok_or(Error::CardinalityOverflow { dim: d, order: p })?;
    if count > usize::MAX as u128 {
        return Err(Error::CardinalityOverflow { dim: d, order: p });
    }
    let mut indices = Vec::with_capacity(count as usize);
    let mut scratch = vec![0usize; d];
    for total in 0..=p {
        push_compositions(&mut scratch, 0, total, &mut indices);
    }
    debug_assert_eq!(indices.len() as u128, count);
    Ok(Basis {
        dimension: d,
        order: p,
        indices,
    })
}

/// Emits all compositions of `remaining` over dimensions `dim..`, assigning
/// larger degrees to earlier dimensions first. This yields the
/// descending-lexicographic order within each total degree.
fn push_compositions(
    scratch: &mut Vec<usize>,
    dim: usize,
    remaining: usize,
    out: &mut Vec<MultiIndex>,
) {
    if dim + 1 == scratch.len() {
        scratch[dim] = remaining;
        out.push(MultiIndex::new(scratch.clone()));
        return;
    }
    for degree in (0..=remaining).rev() {
        scratch[dim] = degree;
        push_compositions(scratch, dim + 1, remaining - degree, out);
    }
}

impl Basis {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis functions, `P`.
    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index(&self, j: usize) -> &MultiIndex {
        &self.indices[j]
    }

    /// Gradient-normalization weights for every basis function.
    pub fn gradient_weights(&self) -> Vec<f64> {
        self.indices.iter().map(gradient_weight).collect()
    }

    /// Tensor-product evaluation `psi_i(point) = prod_k psi_{i_k}(xi_k)`.
    pub fn eval_multivariate(&self, index: &MultiIndex, point: &[f64]) -> Result<f64> {
        self.check_point(index, point)?;
        Ok(index
            .degrees()
            .iter()
            .zip(point)
            .map(|(&deg, &x)| hermite_eval(deg, x))
            .product())
    }

    /// Partial derivative of the tensor product along dimension `k`
    /// (0-based): factor `k` becomes `sqrt(i_k) psi_{i_k - 1}`, the others
    /// stay.
    pub fn eval_multivariate_partial(
        &self,
        index: &MultiIndex,
        point: &[f64],
        k: usize,
    ) -> Result<f64> {
        self.check_point(index, point)?;
        if k >= self.dimension {
            return Err(Error::InvalidArgument(format!(
                "derivative direction {k} out of range for dimension {}",
                self.dimension
            )));
        }
        Ok(index
            .degrees()
            .iter()
            .zip(point)
            .enumerate()
            .map(|(dim, (&deg, &x))| {
                if dim == k {
                    hermite_derivative(deg, x)
                } else {
                    hermite_eval(deg, x)
                }
            })
            .product())
    }

    fn check_point(&self, index: &MultiIndex, point: &[f64]) -> Result<()> {
        if index.dimension() != point.len() || point.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Values of all `P` basis functions at `point`, using shared univariate
    /// tables (one recurrence pass per dimension).
    pub fn row_values(&self, point: &[f64]) -> Result<Vec<f64>> {
        let tables = self.univariate_tables(point)?;
        Ok(self
            .indices
            .iter()
            .map(|idx| {
                idx.degrees()
                    .iter()
                    .enumerate()
                    .map(|(dim, &deg)| tables[dim][deg])
                    .product()
            })
            .collect())
    }

    /// Partial derivatives along `k` of all basis functions at `point`.
    pub fn row_partials(&self, point: &[f64], k: usize) -> Result<Vec<f64>> {
        if k >= self.dimension {
            return Err(Error::InvalidArgument(format!(
                "derivative direction {k} out of range for dimension {}",
                self.dimension
            )));
        }
        let tables = self.univariate_tables(point)?;
        Ok(self
            .indices
            .iter()
            .map(|idx| {
                idx.degrees()
                    .iter()
                    .enumerate()
                    .map(|(dim, &deg)| {
                        if dim == k {
                            if deg == 0 {
                                0.0
                            } else {
                                (deg as f64).sqrt() * tables[dim][deg - 1]
                            }
                        } else {
                            tables[dim][deg]
                        }
                    })
                    .product()
            })
            .collect())
    }

    fn univariate_tables(&self, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        if point.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        Ok(point
            .iter()
            .map(|&x| hermite_table(self.order, x))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cardinality_matches_formula() {
        // (d = 25, p = 3): (28 * 27 * 26) / 6 = 3276.
        assert_eq!(enumerate_basis(25, 3).unwrap().cardinality(), 3276);
        // (d = 30, p = 3): (33 * 32 * 31) / 6 = 5456.
        assert_eq!(enumerate_basis(30, 3).unwrap().cardinality(), 5456);
        // Constant basis.
        let b = enumerate_basis(1, 0).unwrap();
        assert_eq!(b.cardinality(), 1);
        assert_eq!(b.index(0).degrees(), &[0]);
    }

    #[test]
    fn ordering_is_total_degree_then_descending_lex() {
        let b = enumerate_basis(2, 2).unwrap();
        let got: Vec<&[usize]> = b.indices().iter().map(|i| i.degrees()).collect();
        assert_eq!(
            got,
            vec![
                &[0, 0][..],
                &[1, 0][..],
                &[0, 1][..],
                &[2, 0][..],
                &[1, 1][..],
                &[0, 2][..],
            ]
        );
    }

    #[test]
    fn ordering_is_deterministic() {
        let a = enumerate_basis(4, 3).unwrap();
        let b = enumerate_basis(4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indices_unique_and_within_order() {
        let b = enumerate_basis(3, 4).unwrap();
        let mut seen = std::collections::HashSet::new();
        for idx in b.indices() {
            assert!(idx.total() <= 4);
            assert_eq!(idx.total(), idx.degrees().iter().sum::<usize>());
            assert!(seen.insert(idx.degrees().to_vec()), "duplicate {idx:?}");
        }
        assert_eq!(seen.len(), b.cardinality());
    }

    #[test]
    fn overflow_is_reported() {
        let err = enumerate_basis(400, 200).unwrap_err();
        assert!(matches!(err, Error::CardinalityOverflow { dim: 400, order: 200 }));
    }

    #[test]
    fn multivariate_eval_examples() {
        let b = enumerate_basis(2, 3).unwrap();
        // Constant index evaluates to one anywhere.
        let zero = MultiIndex::new(vec![0, 0]);
        assert_eq!(b.eval_multivariate(&zero, &[1.3, -0.2]).unwrap(), 1.0);
        // (1,1) at (a, b) is a * b.
        let ones = MultiIndex::new(vec![1, 1]);
        assert_abs_diff_eq!(
            b.eval_multivariate(&ones, &[0.4, -2.0]).unwrap(),
            -0.8,
            epsilon = 1e-15
        );
        // psi_2(1) = 0 forces the product to zero.
        let idx = MultiIndex::new(vec![2, 1]);
        assert_abs_diff_eq!(
            b.eval_multivariate(&idx, &[1.0, 3.0]).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn partial_examples() {
        let b = enumerate_basis(2, 3).unwrap();
        let zero = MultiIndex::new(vec![0, 0]);
        assert_eq!(b.eval_multivariate_partial(&zero, &[0.3, 1.1], 0).unwrap(), 0.0);
        let e1 = MultiIndex::new(vec![1, 0]);
        assert_eq!(b.eval_multivariate_partial(&e1, &[0.9, -4.0], 0).unwrap(), 1.0);
    }

    #[test]
    fn partial_matches_finite_difference() {
        let b = enumerate_basis(2, 5).unwrap();
        let idx = MultiIndex::new(vec![2, 3]);
        let point = [0.37, -1.21];
        let h = 1e-6;
        for k in 0..2 {
            let mut hi = point;
            let mut lo = point;
            hi[k] += h;
            lo[k] -= h;
            let fd = (b.eval_multivariate(&idx, &hi).unwrap()
                - b.eval_multivariate(&idx, &lo).unwrap())
                / (2.0 * h);
            let exact = b.eval_multivariate_partial(&idx, &point, k).unwrap();
            assert!(
                ((exact - fd) / fd.abs().max(1.0)).abs() <= 1e-6,
                "k={k} exact={exact} fd={fd}"
            );
        }
    }

    #[test]
    fn gradient_weight_examples() {
        assert_eq!(gradient_weight(&MultiIndex::new(vec![0, 0, 0])), 1.0);
        assert_eq!(gradient_weight(&MultiIndex::new(vec![2, 1])), 0.5);
        assert_abs_diff_eq!(
            gradient_weight(&MultiIndex::new(vec![1, 1, 0])),
            1.0 / 3.0f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn row_values_match_elementwise_eval() {
        let b = enumerate_basis(3, 3).unwrap();
        let point = [0.2, -0.9, 1.4];
        let rows = b.row_values(&point).unwrap();
        for (j, idx) in b.indices().iter().enumerate() {
            assert_abs_diff_eq!(
                rows[j],
                b.eval_multivariate(idx, &point).unwrap(),
                epsilon = 1e-14
            );
        }
        let partials = b.row_partials(&point, 1).unwrap();
        for (j, idx) in b.indices().iter().enumerate() {
            assert_abs_diff_eq!(
                partials[j],
                b.eval_multivariate_partial(idx, &point, 1).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let b = enumerate_basis(3, 2).unwrap();
        let idx = MultiIndex::new(vec![1, 0, 0]);
        assert!(b.eval_multivariate(&idx, &[0.0, 0.0]).is_err());
    }
}
