//! Composite Simpson quadrature on [0, ell].

use crate::error::{Error, Result};

/// Fixed quadrature rule: uniformly spaced nodes with composite Simpson
/// weights. Node count must be odd so every panel is a full Simpson pair.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn simpson(ell: f64, n_points: usize) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Config(format!("quadrature interval length must be positive, got {ell}")));
        }
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "quadrature needs an odd node count >= 3, got {n_points}"
            )));
        }
        let h = ell / (n_points - 1) as f64;
        let mut nodes = Vec::with_capacity(n_points);
        let mut weights = Vec::with_capacity(n_points);
        for i in 0..n_points {
            nodes.push(i as f64 * h);
            let w = if i == 0 || i == n_points - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            weights.push(w * h / 3.0);
        }
        // Land the last node exactly on ell; accumulated rounding is ~1 ulp.
        nodes[n_points - 1] = ell;
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates a function sampled at the rule's nodes.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(*z);
        }
        acc
    }

    /// Integrates pre-sampled values (one per node).
    pub fn integrate_samples(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.nodes.len(), "sample count must match node count");
        let mut acc = 0.0;
        for (s, w) in samples.iter().zip(&self.weights) {
            acc += w * s;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_even_or_tiny_node_counts() {
        assert!(QuadratureRule::simpson(1.0, 2).is_err());
        assert!(QuadratureRule::simpson(1.0, 100).is_err());
        assert!(QuadratureRule::simpson(-1.0, 101).is_err());
    }

    #[test]
    fn exact_on_cubics() {
        let rule = QuadratureRule::simpson(2.0, 5).unwrap();
        // Simpson integrates polynomials through degree 3 exactly.
        let got = rule.integrate(|z| 3.0 * z * z * z - z + 2.0);
        assert_relative_eq!(got, 12.0 - 2.0 + 4.0, max_relative = 1e-14);
    }

    #[test]
    fn converges_on_smooth_integrands() {
        let coarse = QuadratureRule::simpson(1.0, 11).unwrap().integrate(f64::sin);
        let fine = QuadratureRule::simpson(1.0, 601).unwrap().integrate(f64::sin);
        let exact = 1.0 - 1.0_f64.cos();
        assert!((fine - exact).abs() < (coarse - exact).abs());
        assert_relative_eq!(fine, exact, max_relative = 1e-12);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let rule = QuadratureRule::simpson(2.0, 1001).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-12);
    }
}
