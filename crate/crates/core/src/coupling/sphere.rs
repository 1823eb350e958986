//! Product rules for `∫ dΩ/4π` on the unit sphere.

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Result};

/// Angular weighting of the emitted photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmissionPattern {
    #[default]
    Isotropic,
    /// `(3/2)(1 - (ẑ·Ω)²)`, normalized to unit mean.
    DipoleZ,
}

impl EmissionPattern {
    pub fn weight(&self, dir: [f64; 3]) -> f64 {
        match self {
            EmissionPattern::Isotropic => 1.0,
            EmissionPattern::DipoleZ => 1.5 * (1.0 - dir[2] * dir[2]),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            EmissionPattern::Isotropic => 0,
            EmissionPattern::DipoleZ => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EmissionPattern::Isotropic),
            1 => Some(EmissionPattern::DipoleZ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub order: usize,
    pub nodes: Vec<[f64; 3]>,
    /// Positive, summing to one.
    pub weights: Vec<f64>,
}

/// Gauss-Legendre points in `cos θ` times equispaced points in `φ`.
///
/// `order` Legendre points integrate polynomials of degree `2 order - 1` in
/// `cos θ`; the azimuthal grid is rounded up to an even count so the rule is
/// symmetric under each axis reflection.
pub fn build_sphere_quadrature(order: usize) -> Result<SphereQuadrature> {
    if order == 0 {
        return invalid("sphere quadrature order must be at least 1");
    }
    let polar: Vec<(f64, f64)> = if order == 1 {
        vec![(0.0, 2.0)]
    } else {
        GaussLegendre::new(order)
            .expect("order >= 2")
            .as_node_weight_pairs()
            .to_vec()
    };
    let n_phi = (order + order % 2).max(2);
    let mut nodes = Vec::with_capacity(polar.len() * n_phi);
    let mut weights = Vec::with_capacity(polar.len() * n_phi);
    for &(c, w) in &polar {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            nodes.push([s * phi.cos(), s * phi.sin(), c]);
            weights.push(w / (2.0 * n_phi as f64));
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(SphereQuadrature { order, nodes, weights })
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(n, w)| w * f(*n)).sum()
    }

    /// Weights multiplied by the emission pattern.
    pub fn pattern_weights(&self, pattern: EmissionPattern) -> Vec<f64> {
        self.nodes.iter().zip(&self.weights).map(|(n, w)| w * pattern.weight(*n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let q = build_sphere_quadrature(16).unwrap();
        assert_eq!(q.len(), 256);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.weights.iter().all(|&w| w > 0.0));
        for u in 0..3 {
            for v in 0..3 {
                let m = q.integrate(|d| d[u] * d[v]);
                let want = if u == v { 1.0 / 3.0 } else { 0.0 };
                assert!((m - want).abs() < 1e-12);
            }
        }
        // Y20 * Y10 ∝ (3z² - 1) z
        let m = q.integrate(|d| (3.0 * d[2] * d[2] - 1.0) * d[2]);
        assert!(m.abs() < 1e-12);
        let m4 = q.integrate(|d| d[0].powi(4));
        assert!((m4 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn dipole_pattern_normalized() {
        let q = build_sphere_quadrature(8).unwrap();
        let w = q.pattern_weights(EmissionPattern::DipoleZ);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn low_orders() {
        assert!(build_sphere_quadrature(0).is_err());
        let q = build_sphere_quadrature(1).unwrap();
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
    }
}
