//! Gauss–Hermite quadrature for the weight `e^{-u^2}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

impl QuadratureRule {
    /// Computes the `order`-point rule. Roots are found by Newton's method on
    /// the orthonormal Hermite functions, which stay bounded for large orders.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("quadrature_order", "must be at least 2"));
        }
        let n = order;
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut derivative = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let (p1, p2) = hermite_pair(n, z, pim4);
                derivative = (2.0 * nf).sqrt() * p2;
                let z_prev = z;
                z = z_prev - p1 / derivative;
                if (z - z_prev).abs() <= 1e-15 * z.abs().max(1.0) {
                    let (_, p2) = hermite_pair(n, z, pim4);
                    derivative = (2.0 * nf).sqrt() * p2;
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Domain(format!(
                    "Gauss-Hermite root {i} of order {n} did not converge"
                )));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = 2.0 / (derivative * derivative);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // Ascending order.
        nodes.reverse();
        weights.reverse();
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(Y)]` for `Y ~ N(mean, variance)`, via `y = mean + sqrt(2 variance) u`.
    #[inline]
    pub fn gaussian_expectation(&self, mean: f64, variance: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let scale = (2.0 * variance).sqrt();
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * g(mean + scale * u))
            .sum();
        sum / PI.sqrt()
    }
}

/// Orthonormal Hermite functions of degree `n` and `n - 1` at `z`.
fn hermite_pair(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi_and_nodes_are_symmetric() {
        for order in [2, 3, 5, 16, 40, 64, 80, 101] {
            let rule = QuadratureRule::new(order).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "order {order}: {total}");
            for k in 0..order {
                assert_eq!(rule.nodes()[k], -rule.nodes()[order - 1 - k]);
            }
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn small_rules_match_closed_form() {
        let rule = QuadratureRule::new(2).unwrap();
        assert!((rule.nodes()[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((rule.weights()[0] - PI.sqrt() / 2.0).abs() < 1e-15);
        let rule = QuadratureRule::new(3).unwrap();
        assert!((rule.nodes()[2] - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((rule.weights()[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_gaussian_moments_exactly() {
        let rule = QuadratureRule::new(10).unwrap();
        // E[Y^4] for N(1, 2) is m^4 + 6 m^2 v + 3 v^2 = 1 + 12 + 12.
        let m4 = rule.gaussian_expectation(1.0, 2.0, |y| y.powi(4));
        assert!((m4 - 25.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_order() {
        assert!(QuadratureRule::new(1).is_err());
    }
}
