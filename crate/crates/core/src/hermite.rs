//! Orthonormal probabilists' Hermite polynomials.
//!
//! `psi_0 = 1`, `psi_1 = x`, and the orthonormalized three-term recurrence
//!
//! ```text
//! psi_{n+1}(x) = (x * psi_n(x) - sqrt(n) * psi_{n-1}(x)) / sqrt(n + 1)
//! ```
//!
//! so that `E[psi_n(X)^2] = 1` for `X ~ N(0, 1)`. Running the recurrence on
//! the normalized polynomials avoids the factorial growth of the monic `He_n`
//! and stays stable to order 50 and beyond. Derivatives use the exact
//! identity `psi_n' = sqrt(n) * psi_{n-1}`.

/// Evaluates the orthonormal probabilists' Hermite polynomial of `order` at
/// `point`.
pub fn hermite_eval(order: usize, point: f64) -> f64 {
    match order {
        0 => 1.0,
        1 => point,
        _ => {
            let mut prev = 1.0;
            let mut cur = point;
            for n in 1..order {
                let next = (point * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Derivative of the orthonormal Hermite polynomial: `sqrt(order) *
/// psi_{order-1}(point)`, and zero for the constant.
pub fn hermite_derivative(order: usize, point: f64) -> f64 {
    if order == 0 {
        0.0
    } else {
        (order as f64).sqrt() * hermite_eval(order - 1, point)
    }
}

/// Evaluates `psi_0..=psi_max_order` at `point` in one pass of the
/// recurrence. The returned table has `max_order + 1` entries.
pub fn hermite_table(max_order: usize, point: f64) -> Vec<f64> {
    let mut values = Vec::with_capacity(max_order + 1);
    values.push(1.0);
    if max_order == 0 {
        return values;
    }
    values.push(point);
    for n in 1..max_order {
        let next =
            (point * values[n] - (n as f64).sqrt() * values[n - 1]) / ((n + 1) as f64).sqrt();
        values.push(next);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_is_one_everywhere() {
        for x in [-4.0, -0.3, 0.0, 2.5, 9.0] {
            assert_eq!(hermite_eval(0, x), 1.0);
        }
    }

    #[test]
    fn quadratic_root_at_one() {
        // He_2(x) = x^2 - 1 vanishes at 1; normalization keeps the root.
        assert_abs_diff_eq!(hermite_eval(2, 1.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cubic_value_matches_closed_form() {
        // psi_3(x) = (x^3 - 3x) / sqrt(6); at x = 2 this is 2 / sqrt(6).
        assert_abs_diff_eq!(
            hermite_eval(3, 2.0),
            2.0 / 6.0f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn derivative_of_constant_and_linear() {
        assert_eq!(hermite_derivative(0, 0.4), 0.0);
        assert_eq!(hermite_derivative(0, -3.0), 0.0);
        // psi_1(x) = x, so the derivative is 1 = sqrt(1) * psi_0.
        assert_eq!(hermite_derivative(1, 0.7), 1.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for (order, x) in [(4usize, 1.3), (7, -0.6), (12, 2.1)] {
            let fd = (hermite_eval(order, x + h) - hermite_eval(order, x - h)) / (2.0 * h);
            assert_abs_diff_eq!(hermite_derivative(order, x), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn table_agrees_with_pointwise_eval() {
        let table = hermite_table(9, -1.7);
        for (order, value) in table.iter().enumerate() {
            assert_eq!(*value, hermite_eval(order, -1.7));
        }
    }

    #[test]
    fn recurrence_is_stable_at_high_order() {
        // E[psi_50^2] = 1; values at moderate points must stay finite and
        // far from overflow.
        let v = hermite_eval(50, 3.0);
        assert!(v.is_finite());
        assert!(v.abs() < 1e6);
    }
}
