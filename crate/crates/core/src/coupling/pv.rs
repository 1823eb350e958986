//! Cauchy principal values by singularity subtraction.
//!
//! `PV ∫_a^b f(x)/(x-p) dx = ∫_a^b (f(x)-f(p))/(x-p) dx + f(p) ln((b-p)/(p-a))`.
//! The smooth remainder is integrated with Gauss-Legendre panels on `[a,p]`
//! and `[p,b]`, whose nodes never touch the pole. The result is a linear rule
//! `Σ c_i f(x_i) + c_p f(p)`, so it can be applied to tabulated values.

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Result};

pub const DEFAULT_PANEL_NODES: usize = 100;

#[derive(Debug, Clone)]
pub struct PvRule {
    pub pole: f64,
    pub nodes: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub pole_coeff: f64,
}

impl PvRule {
    /// `total_nodes` is split evenly between the two panels.
    pub fn new(pole: f64, lower: f64, upper: f64, total_nodes: usize) -> Result<Self> {
        if !(lower < pole && pole < upper) {
            return invalid(format!("pole {pole} must lie strictly inside ({lower}, {upper})"));
        }
        let per_panel = (total_nodes / 2).max(2);
        let gl = GaussLegendre::new(per_panel).expect("at least two nodes");
        let mut nodes = Vec::with_capacity(2 * per_panel);
        let mut coeffs = Vec::with_capacity(2 * per_panel);
        let mut pole_coeff = ((upper - pole) / (pole - lower)).ln();
        for (a, b) in [(lower, pole), (pole, upper)] {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            for &(t, w) in gl.as_node_weight_pairs() {
                let x = mid + half * t;
                let c = half * w / (x - pole);
                nodes.push(x);
                coeffs.push(c);
                pole_coeff -= c;
            }
        }
        Ok(PvRule { pole, nodes, coeffs, pole_coeff })
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self.nodes.iter().zip(&self.coeffs).map(|(&x, &c)| c * f(x)).sum();
        s + self.pole_coeff * f(self.pole)
    }
}

/// `PV ∫_lower^upper f(x)/(x - pole) dx`.
pub fn pv_integrate(f: impl Fn(f64) -> f64, pole: f64, lower: f64, upper: f64) -> Result<f64> {
    pv_integrate_with(f, pole, lower, upper, 2 * DEFAULT_PANEL_NODES)
}

pub fn pv_integrate_with(
    f: impl Fn(f64) -> f64,
    pole: f64,
    lower: f64,
    upper: f64,
    total_nodes: usize,
) -> Result<f64> {
    Ok(PvRule::new(pole, lower, upper, total_nodes)?.apply(f))
}
