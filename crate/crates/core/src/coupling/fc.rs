//! Franck-Condon amplitudes of the displaced harmonic oscillator.
//!
//! The one-dimensional factor is `<m| exp(i k X) |l>` with `X = (a + a†)/√2`,
//! i.e. `X` measured in units of the oscillator length `sqrt(1/(m ω))`.
//! Writing `d = |m - l|` and `n = min(l, m)` it equals
//!
//! ```text
//! i^d sqrt(n!/(n+d)!) (k/√2)^d exp(-k²/4) L_n^(d)(k²/2)
//! ```
//!
//! The three-dimensional amplitude factorizes over Cartesian axes.

use num_complex::Complex64;

use crate::basis::{ModeIndex, TrapSpec};

/// Generalized Laguerre polynomial `L_n^(alpha)(x)` by upward recurrence.
pub fn laguerre(n: u32, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Real part of the 1D factor once the `i^|m-l|` phase is removed.
pub fn fc_1d_real(l: u32, m: u32, kick: f64) -> f64 {
    let (lo, hi) = if l <= m { (l, m) } else { (m, l) };
    let d = hi - lo;
    let mut norm = 1.0;
    for k in (lo + 1)..=hi {
        norm /= (k as f64).sqrt();
    }
    let b = kick / std::f64::consts::SQRT_2;
    norm * b.powi(d as i32) * (-0.25 * kick * kick).exp() * laguerre(lo, d as f64, 0.5 * kick * kick)
}

/// `i^n` for non-negative `n`.
pub fn i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

pub fn fc_1d(l: u32, m: u32, kick: f64) -> Complex64 {
    i_pow(l.abs_diff(m)) * fc_1d_real(l, m, kick)
}

/// Sum over axes of `|l_u - m_u|`; the 3D amplitude carries phase `i^this`.
pub fn phase_order(l: &ModeIndex, m: &ModeIndex) -> u32 {
    l.axes().iter().zip(m.axes()).map(|(a, b)| a.abs_diff(b)).sum()
}

/// Per-axis kick for a photon of wavenumber `kappa_ratio * k0` along `direction`.
///
/// `eta_sq = ω_r/ω` fixes `k0 x0 = η` with `x0 = sqrt(1/(2 m ω))`, so in units of
/// the oscillator length the kick magnitude is `√2 η`.
pub fn axis_kicks(direction: [f64; 3], kappa_ratio: f64, spec: &TrapSpec) -> [f64; 3] {
    let k = kappa_ratio * (2.0 * spec.eta_sq).sqrt();
    [k * direction[0], k * direction[1], k * direction[2]]
}

pub(crate) fn fc_3d_real_kicks(l: &ModeIndex, m: &ModeIndex, kicks: [f64; 3]) -> f64 {
    let la = l.axes();
    let ma = m.axes();
    (0..3).map(|u| fc_1d_real(la[u], ma[u], kicks[u])).product()
}

/// `η_lm(κΩ)`: excited mode `l` to ground mode `m` with recoil along `direction`.
pub fn fc_3d(
    l: &ModeIndex,
    m: &ModeIndex,
    direction: [f64; 3],
    kappa_ratio: f64,
    spec: &TrapSpec,
) -> Complex64 {
    let kicks = axis_kicks(direction, kappa_ratio, spec);
    i_pow(phase_order(l, m)) * fc_3d_real_kicks(l, m, kicks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_modes;

    /// Gauss-Hermite style oracle: direct quadrature of
    /// `∫ ψ_m(x) exp(i k x) ψ_l(x) dx` on a fine grid using Hermite functions.
    fn overlap_oracle(l: u32, m: u32, k: f64) -> Complex64 {
        let hermite_fn = |n: u32, x: f64| -> f64 {
            // normalized Hermite function by stable recurrence
            let mut p0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
            if n == 0 {
                return p0;
            }
            let mut p1 = std::f64::consts::SQRT_2 * x * p0;
            for j in 1..n {
                let j = j as f64;
                let p2 = (2.0 / (j + 1.0)).sqrt() * x * p1 - (j / (j + 1.0)).sqrt() * p0;
                p0 = p1;
                p1 = p2;
            }
            p1
        };
        let n = 20_000;
        let (a, b) = (-14.0f64, 14.0f64);
        let h = (b - a) / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let x = a + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += Complex64::from_polar(w * h * hermite_fn(m, x) * hermite_fn(l, x), k * x);
        }
        acc
    }

    #[test]
    fn zero_kick_is_identity() {
        for l in 0..6 {
            for m in 0..6 {
                let v = fc_1d(l, m, 0.0);
                if l == m {
                    assert_eq!(v, Complex64::new(1.0, 0.0));
                } else {
                    assert_eq!(v.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn ground_overlap_is_gaussian() {
        for &k in &[0.3, 1.0, 1.7, 2.5] {
            let oracle = overlap_oracle(0, 0, k);
            assert!((oracle.re - (-k * k / 4.0f64).exp()).abs() < 1e-12);
            assert!((fc_1d(0, 0, k) - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_position_space_oracle() {
        for l in 0..5 {
            for m in 0..5 {
                for &k in &[0.4, 1.3, -2.0] {
                    let diff = (fc_1d(l, m, k) - overlap_oracle(l, m, k)).norm();
                    assert!(diff < 1e-10, "l={l} m={m} k={k} diff={diff}");
                }
            }
        }
    }

    #[test]
    fn unitarity_of_phase_operator() {
        for l in 0..4 {
            for &k in &[0.5, 2.0, 3.0] {
                let s: f64 = (0..80).map(|m| fc_1d(l, m, k).norm_sqr()).sum();
                assert!((s - 1.0).abs() < 1e-12, "l={l} k={k} sum={s}");
            }
        }
    }

    #[test]
    fn three_dim_limits() {
        let zero = TrapSpec { eta_sq: 0.0, ..TrapSpec::default() };
        let modes = enumerate_modes(3).unwrap();
        let dir = [0.48, -0.6, 0.64];
        for a in &modes {
            for b in &modes {
                let v = fc_3d(a, b, dir, 1.0, &zero);
                assert_eq!(v.norm(), if a == b { 1.0 } else { 0.0 });
            }
        }
        // |kick|^2 = 2 eta^2 over the axes: exp(-2 eta^2 / 4) = exp(-1) at eta^2 = 2
        let spec = TrapSpec { eta_sq: 2.0, ..TrapSpec::default() };
        let g = ModeIndex::GROUND;
        for d in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], dir] {
            assert!((fc_3d(&g, &g, d, 1.0, &spec).re - (-1.0f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn axis_permutation_invariance() {
        let spec = TrapSpec { eta_sq: 1.3, ..TrapSpec::default() };
        let modes = enumerate_modes(3).unwrap();
        let dir = [0.48, -0.6, 0.64];
        let perm = [2, 0, 1];
        let pd = [dir[perm[0]], dir[perm[1]], dir[perm[2]]];
        for a in &modes {
            for b in &modes {
                let v = fc_3d(a, b, dir, 0.8, &spec);
                let w = fc_3d(&a.permuted(perm), &b.permuted(perm), pd, 0.8, &spec);
                assert!((v - w).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn reflection_conjugates() {
        let spec = TrapSpec { eta_sq: 2.0, ..TrapSpec::default() };
        let modes = enumerate_modes(3).unwrap();
        let dir = [0.48, -0.6, 0.64];
        let neg = [-dir[0], -dir[1], -dir[2]];
        for a in &modes {
            for b in &modes {
                let v = fc_3d(a, b, neg, 1.0, &spec);
                let w = fc_3d(a, b, dir, 1.0, &spec).conj();
                assert!((v - w).norm() < 1e-15);
            }
        }
    }
}
