//! Closed-form time dependence of the zeroth- and first-order amplitudes.
//!
//! Every amplitude is a finite sum `Σ_j c_j t^{p_j} exp(z_j t)` with vector
//! coefficients, so all `∫_0^∞ dt` integrals reduce to
//! `∫_0^∞ t^p e^{zt} dt = p!/(-z)^{p+1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::biortho::BiorthoDecomp;
use crate::error::{invalid, Error, Result};

/// Relative eigenvalue separation below which the confluent kernel is used.
pub const DEGENERACY_REL: f64 = 1e-8;
/// Exponents with real part above `-DECAY_REL * scale` count as non-decaying.
const DECAY_REL: f64 = 1e-12;
/// Cross terms smaller than this relative to their operands are dropped.
const NEGLIGIBLE_REL: f64 = 1e-13;

/// `A₀(t) = Σ_k exp(-iλ_k t) v^R(k) v^L(k)†`.
pub fn propagate_a0(decomp: &BiorthoDecomp, t: f64) -> Result<DMatrix<Complex64>> {
    if !(t >= 0.0) {
        return invalid(format!("propagation time must be non-negative, got {t}"));
    }
    let n = decomp.dim();
    let mut scaled = decomp.right.clone();
    for k in 0..n {
        let f = (Complex64::new(0.0, -t) * decomp.eigenvalues[k]).exp();
        for i in 0..n {
            scaled[(i, k)] *= f;
        }
    }
    Ok(scaled * decomp.left.adjoint())
}

/// `-i ∫_0^t exp(-iλ_a (t-τ)) exp(-iλ_b τ) dτ`.
pub fn a1_time_kernel(lambda_a: Complex64, lambda_b: Complex64, t: f64, eps_deg: f64) -> Complex64 {
    let i = Complex64::i();
    let diff = lambda_a - lambda_b;
    if diff.norm() < eps_deg {
        -i * t * (-i * lambda_a * t).exp()
    } else {
        -i * ((-i * lambda_b * t).exp() - (-i * lambda_a * t).exp()) / (i * diff)
    }
}

/// `∫_0^∞ t^p e^{zt} dt`; requires `Re z < 0`.
pub fn gamma_moment(p: u32, z: Complex64) -> Complex64 {
    let fact: f64 = (1..=p).map(|k| k as f64).product();
    Complex64::new(fact, 0.0) / (-z).powu(p + 1)
}

/// One scalar term `c t^p e^{zt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTerm {
    pub coefficient: Complex64,
    pub exponent: Complex64,
    pub power: u32,
}

/// `∫_0^∞ |Σ_j c_j t^{p_j} e^{z_j t}|² dt`.
pub fn infinite_time_overlap(terms: &[TimeTerm]) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in terms {
        if a.power > 2 {
            return invalid("time powers above 2 are not supported");
        }
        if a.coefficient.norm() > 0.0 && !(a.exponent.re < 0.0) {
            return Err(Error::Divergent { re: a.exponent.re, im: a.exponent.im });
        }
    }
    for a in terms {
        for b in terms {
            if a.coefficient.norm() == 0.0 || b.coefficient.norm() == 0.0 {
                continue;
            }
            acc += a.coefficient.conj()
                * b.coefficient
                * gamma_moment(a.power + b.power, a.exponent.conj() + b.exponent);
        }
    }
    Ok(acc.re)
}

/// Vector-valued `v(t) = Σ_j c_j t^{p_j} e^{z_j t}`.
#[derive(Debug, Clone)]
pub struct AmplitudeSeries {
    pub exponents: Vec<Complex64>,
    pub powers: Vec<u32>,
    pub coefficients: Vec<DVector<Complex64>>,
}

impl AmplitudeSeries {
    pub fn dim(&self) -> usize {
        self.coefficients.first().map_or(0, |c| c.len())
    }

    pub fn eval(&self, t: f64) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim());
        for ((z, p), c) in self.exponents.iter().zip(&self.powers).zip(&self.coefficients) {
            let f = (z * t).exp() * t.powi(*p as i32);
            out.axpy(f, c, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Zeroth order: `A₀(t) e_j`.
    pub fn zeroth_order(decomp: &BiorthoDecomp, j: usize) -> Self {
        let n = decomp.dim();
        let mut exponents = Vec::with_capacity(n);
        let mut coefficients = Vec::with_capacity(n);
        for k in 0..n {
            exponents.push(Complex64::new(0.0, -1.0) * decomp.eigenvalues[k]);
            let beta = decomp.left[(j, k)].conj();
            coefficients.push(decomp.right.column(k) * beta);
        }
        AmplitudeSeries { exponents, powers: vec![0; n], coefficients }
    }

    /// First order: `-i ∫_0^t A₀(t-τ) B A₀(τ) dτ e_j`.
    pub fn first_order(decomp: &BiorthoDecomp, block: &DMatrix<Complex64>, j: usize) -> Self {
        let n = decomp.dim();
        let eps = DEGENERACY_REL * decomp.max_abs_eigenvalue();
        let lam = &decomp.eigenvalues;
        // C = L† B R and β = L† e_j
        let c = decomp.left.adjoint() * block * &decomp.right;
        let beta: Vec<Complex64> = (0..n).map(|k| decomp.left[(j, k)].conj()).collect();
        let mut plain = vec![DVector::<Complex64>::zeros(n); n];
        let mut linear = vec![DVector::<Complex64>::zeros(n); n];
        let i = Complex64::i();
        for a in 0..n {
            for b in 0..n {
                let w = c[(a, b)] * beta[b];
                if w.norm() == 0.0 {
                    continue;
                }
                let ra = decomp.right.column(a);
                let diff = lam[a] - lam[b];
                if diff.norm() < eps {
                    linear[a].axpy(-i * w, &ra, Complex64::new(1.0, 0.0));
                } else {
                    // -(e^{-iλ_b t} - e^{-iλ_a t})/(λ_a - λ_b)
                    let f = w / diff;
                    plain[a].axpy(f, &ra, Complex64::new(1.0, 0.0));
                    plain[b].axpy(-f, &ra, Complex64::new(1.0, 0.0));
                }
            }
        }
        let mut exponents = Vec::with_capacity(2 * n);
        let mut powers = Vec::with_capacity(2 * n);
        let mut coefficients = Vec::with_capacity(2 * n);
        for k in 0..n {
            let z = -i * lam[k];
            exponents.push(z);
            powers.push(0);
            coefficients.push(plain[k].clone());
            exponents.push(z);
            powers.push(1);
            coefficients.push(linear[k].clone());
        }
        AmplitudeSeries { exponents, powers, coefficients }
    }

    pub fn scaled(mut self, f: Complex64) -> Self {
        for c in &mut self.coefficients {
            *c *= f;
        }
        self
    }
}

/// `∫_0^∞ u(t)† G v(t) dt`.
///
/// Pairs whose combined exponent does not decay are an error unless their
/// contracted coefficient vanishes (a dark direction of `G`).
pub fn cross_integral(
    u: &AmplitudeSeries,
    g: &DMatrix<Complex64>,
    v: &AmplitudeSeries,
) -> Result<Complex64> {
    let scale = u
        .exponents
        .iter()
        .chain(&v.exponents)
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let gnorm = g.norm();
    let gv: Vec<DVector<Complex64>> = v.coefficients.iter().map(|c| g * c).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, ca) in u.coefficients.iter().enumerate() {
        let na = ca.norm();
        if na == 0.0 {
            continue;
        }
        for (b, gb) in gv.iter().enumerate() {
            let nb = v.coefficients[b].norm();
            if nb == 0.0 {
                continue;
            }
            let w = ca.dotc(gb);
            let z = u.exponents[a].conj() + v.exponents[b];
            if z.re > -DECAY_REL * scale {
                if w.norm() <= NEGLIGIBLE_REL * na * nb * gnorm {
                    continue;
                }
                return Err(Error::Divergent { re: z.re, im: z.im });
            }
            acc += w * gamma_moment(u.powers[a] + v.powers[b], z);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_overlap_examples() {
        let one = |p| TimeTerm { coefficient: c(1.0, 0.0), exponent: c(-1.0, 0.0), power: p };
        assert!((infinite_time_overlap(&[one(0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((infinite_time_overlap(&[one(1)]).unwrap() - 0.25).abs() < 1e-15);
        let bad = TimeTerm { coefficient: c(1.0, 0.0), exponent: c(0.0, 2.0), power: 0 };
        assert!(matches!(infinite_time_overlap(&[bad]), Err(Error::Divergent { .. })));
        let silent = TimeTerm { coefficient: c(0.0, 0.0), exponent: c(0.0, 2.0), power: 0 };
        assert_eq!(infinite_time_overlap(&[silent, one(0)]).unwrap(), 0.5);
    }

    #[test]
    fn kernel_limits() {
        let l = c(0.3, -0.7);
        assert_eq!(a1_time_kernel(l, c(1.0, -2.0), 0.0, 1e-8), c(0.0, 0.0));
        let t = 1.7;
        let want = -Complex64::i() * t * (-Complex64::i() * l * t).exp();
        assert!((a1_time_kernel(l, l, t, 1e-8) - want).norm() < 1e-15);
        // continuity across the switch
        let near = a1_time_kernel(l, l + c(1e-6, 0.0), t, 1e-8);
        assert!((near - want).norm() < 1e-5);
    }

    use gauss_quad::legendre::GaussLegendre;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::basis::TrapSpec;
    use crate::coupling::{build_alpha_tensor, AlphaSettings};
    use crate::dynamics::{biortho_decompose, build_generator, GeneratorOptions};
    use crate::oracle::dopri::{Dopri5, Tolerances};

    fn quick() -> AlphaSettings {
        AlphaSettings { sphere_order: 10, pv_grid: 80, ..AlphaSettings::default() }
    }

    fn small_generator(eta_sq: f64, bare: bool) -> DMatrix<Complex64> {
        let spec = TrapSpec { shells_e: 2, shells_g: 3, eta_sq, n_condensed: 50, n_atoms: 60, ..TrapSpec::default() };
        let alpha = build_alpha_tensor(&spec, &quick()).unwrap();
        build_generator(&alpha, &spec, GeneratorOptions { bare_excited_energies: bare }).unwrap().matrix
    }

    fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
        DVector::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn ode_solve(h: &DMatrix<Complex64>, y0: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let n = y0.len();
        let tight = Tolerances { rtol: 1e-12, atol: 1e-14, ..Tolerances::default() };
        let mut ig = Dopri5::new(
            |_, y: &[Complex64], d: &mut [Complex64]| {
                for i in 0..n {
                    d[i] = (0..n).map(|k| -Complex64::i() * h[(i, k)] * y[k]).sum();
                }
            },
            n,
            1e-3,
            tight,
        );
        let mut y: Vec<Complex64> = y0.iter().cloned().collect();
        ig.integrate(0.0, &mut y, t, |_, _| false).unwrap();
        DVector::from_vec(y)
    }

    #[test]
    fn a0_matches_ode_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (eta_sq, bare) in [(0.7, false), (2.0, false), (2.0, true)] {
            let h = small_generator(eta_sq, bare);
            let d = biortho_decompose(&h).unwrap();
            for t in [0.0, 0.01, 0.05, 0.2] {
                let v = random_vector(h.nrows(), &mut rng);
                let got = propagate_a0(&d, t).unwrap() * &v;
                let want = ode_solve(&h, &v, t);
                assert!((got - want).norm() < 1e-8, "eta_sq {eta_sq} t {t}");
            }
        }
        assert!(propagate_a0(&biortho_decompose(&small_generator(1.0, false)).unwrap(), -1.0).is_err());
    }

    #[test]
    fn first_order_series_matches_ode_oracle() {
        let h = small_generator(2.0, true);
        let n = h.nrows();
        let d = biortho_decompose(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        // (c0, c1)' = -i (H c0, H c1 + B c0)
        let mut big = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&h);
        big.view_mut((n, n), (n, n)).copy_from(&h);
        big.view_mut((n, 0), (n, n)).copy_from(&b);
        for j in 0..n {
            let s = AmplitudeSeries::first_order(&d, &b, j);
            let mut y0 = DVector::zeros(2 * n);
            y0[j] = c(1.0, 0.0);
            for t in [0.02, 0.1] {
                let want = ode_solve(&big, &y0, t).rows(n, n).into_owned();
                assert!((s.eval(t) - want).norm() < 1e-8, "j {j} t {t}");
            }
        }
    }

    #[test]
    fn degenerate_first_order_matches_ode_oracle() {
        // isotropic scalar generator: every pair takes the confluent branch
        let n = 3;
        let h = DMatrix::<Complex64>::identity(n, n) * c(0.4, -1.3);
        let d = biortho_decompose(&h).unwrap();
        let b = DMatrix::from_fn(n, n, |i, k| c(0.1 * (i + 1) as f64, -0.2 * k as f64));
        let mut big = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&h);
        big.view_mut((n, n), (n, n)).copy_from(&h);
        big.view_mut((n, 0), (n, n)).copy_from(&b);
        let s = AmplitudeSeries::first_order(&d, &b, 1);
        let mut y0 = DVector::zeros(2 * n);
        y0[1] = c(1.0, 0.0);
        let want = ode_solve(&big, &y0, 0.9).rows(n, n).into_owned();
        assert!((s.eval(0.9) - want).norm() < 1e-8);
    }

    #[test]
    fn kernel_matches_tau_quadrature() {
        let gl = GaussLegendre::new(60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let la = c(rng.random_range(-3.0..3.0), -rng.random_range(0.05..2.0));
            let lb = c(rng.random_range(-3.0..3.0), -rng.random_range(0.05..2.0));
            let t = rng.random_range(0.0..4.0);
            let i = Complex64::i();
            let re = gl.integrate(0.0, t, |tau| (-i * la * (t - tau) - i * lb * tau).exp().re);
            let im = gl.integrate(0.0, t, |tau| (-i * la * (t - tau) - i * lb * tau).exp().im);
            let want = -i * c(re, im);
            assert!((a1_time_kernel(la, lb, t, 1e-8) - want).norm() < 1e-10);
        }
    }

    fn quadrature_overlap(terms: &[TimeTerm]) -> f64 {
        let slowest = terms.iter().map(|t| -t.exponent.re).fold(f64::INFINITY, f64::min);
        let t_end = 40.0 / slowest;
        let gl = GaussLegendre::new(30).unwrap();
        let panels = 400;
        let h = t_end / panels as f64;
        let f = |t: f64| {
            let v: Complex64 = terms
                .iter()
                .map(|a| a.coefficient * t.powi(a.power as i32) * (a.exponent * t).exp())
                .sum();
            v.norm_sqr()
        };
        (0..panels).map(|k| gl.integrate(k as f64 * h, (k + 1) as f64 * h, f)).sum()
    }

    #[test]
    fn five_term_overlaps_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let terms: Vec<TimeTerm> = (0..5)
                .map(|_| TimeTerm {
                    coefficient: c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    exponent: c(-rng.random_range(0.2..3.0), rng.random_range(-5.0..5.0)),
                    power: rng.random_range(0..=2),
                })
                .collect();
            let exact = infinite_time_overlap(&terms).unwrap();
            let quad = quadrature_overlap(&terms);
            assert!((exact - quad).abs() < 1e-8 * exact.abs().max(1.0), "{exact} vs {quad}");
        }
    }

    #[test]
    fn contraction_and_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for bare in [false, true] {
            let h = small_generator(1.5, bare);
            let d = biortho_decompose(&h).unwrap();
            let id = propagate_a0(&d, 0.0).unwrap();
            assert!((id - DMatrix::identity(h.nrows(), h.nrows())).norm() < 1e-12);
            for _ in 0..20 {
                let t = rng.random_range(0.0..0.5);
                let s = rng.random_range(0.0..0.5);
                let v = random_vector(h.nrows(), &mut rng);
                let a = propagate_a0(&d, t).unwrap();
                assert!((&a * &v).norm() <= v.norm() * (1.0 + 1e-12));
                let lhs = propagate_a0(&d, t + s).unwrap();
                let rhs = &a * propagate_a0(&d, s).unwrap();
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn series_integral_matches_a0_quadrature() {
        let h = small_generator(2.0, false);
        let d = biortho_decompose(&h).unwrap();
        let s = AmplitudeSeries::zeroth_order(&d, 2);
        let g = DMatrix::<Complex64>::identity(h.nrows(), h.nrows());
        let exact = cross_integral(&s, &g, &s).unwrap().re;
        let rate = d.eigenvalues.iter().map(|l| -l.im).fold(f64::INFINITY, f64::min);
        let gl = GaussLegendre::new(30).unwrap();
        let t_end = 40.0 / rate;
        let panels = 400;
        let w = t_end / panels as f64;
        let quad: f64 = (0..panels)
            .map(|k| gl.integrate(k as f64 * w, (k + 1) as f64 * w, |t| propagate_a0(&d, t).unwrap().column(2).norm_squared()))
            .sum();
        assert!((exact - quad).abs() < 1e-8 * exact.max(1.0));
    }
}
