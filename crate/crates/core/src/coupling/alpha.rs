//! The α coupling tensor.
//!
//! Entries are indexed `(l, m, m', l')` over excited × ground × ground ×
//! excited modes and stored densely over composite rows `(l, m)` and columns
//! `(l', m')`. The emission part is the on-shell angular Gram matrix
//!
//! ```text
//! α^r_{lmm'l'} = ∫ dΩ/4π  conj(η_lm(k0 Ω)) η_l'm'(k0 Ω)
//! ```
//!
//! and the level-shift part is the principal value over the photon wavenumber
//!
//! ```text
//! α^i_{lmm'l'} = (1/π) PV ∫_0^{κmax} dκ (κ/k0)³ G_{lmm'l'}(κ) / (k0 - κ)
//! ```
//!
//! with `G(κ)` the same Gram integral at wavenumber `κ`. The full coefficient
//! is `α = α^r + i α^i`. Both parts are Hermitian over the composite index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::fc::{axis_kicks, fc_3d_real_kicks, i_pow, phase_order};
use super::pv::PvRule;
use super::sphere::{build_sphere_quadrature, EmissionPattern, SphereQuadrature};
use crate::basis::{ModeIndex, TrapSpec};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET_BYTES: u64 = 2 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSettings {
    pub sphere_order: usize,
    pub pv_grid: usize,
    /// Upper wavenumber cutoff in units of `k0`.
    pub kappa_max: f64,
    pub include_imaginary: bool,
    pub pattern: EmissionPattern,
    pub budget_bytes: u64,
}

impl Default for AlphaSettings {
    fn default() -> Self {
        AlphaSettings {
            sphere_order: 16,
            pv_grid: 200,
            kappa_max: 4.0,
            include_imaginary: true,
            pattern: EmissionPattern::Isotropic,
            budget_bytes: DEFAULT_BUDGET_BYTES,
        }
    }
}

/// Everything that determines the tensor's values.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorKey {
    pub shells_g: u32,
    pub shells_e: u32,
    pub ground_cap: u32,
    pub excited_cap: u32,
    pub eta_sq: f64,
    pub sphere_order: u32,
    pub pv_grid: u32,
    pub kappa_max: f64,
    pub include_imaginary: bool,
    pub pattern: EmissionPattern,
}

impl TensorKey {
    pub fn new(spec: &TrapSpec, settings: &AlphaSettings) -> Self {
        TensorKey {
            shells_g: spec.shells_g as u32,
            shells_e: spec.shells_e as u32,
            ground_cap: spec.ground_mode_cap.unwrap_or(0) as u32,
            excited_cap: spec.excited_mode_cap.unwrap_or(0) as u32,
            eta_sq: spec.eta_sq,
            sphere_order: settings.sphere_order as u32,
            pv_grid: settings.pv_grid as u32,
            kappa_max: settings.kappa_max,
            include_imaginary: settings.include_imaginary,
            pattern: settings.pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTensor {
    pub key: TensorKey,
    pub excited: Vec<ModeIndex>,
    pub ground: Vec<ModeIndex>,
    /// α^r over composite `(l, m) x (l', m')`, row-major.
    pub emission: Vec<Complex64>,
    /// α^i, same layout.
    pub shift: Vec<Complex64>,
}

pub fn tensor_bytes(n_excited: usize, n_ground: usize) -> u64 {
    let d = (n_excited * n_ground) as u64;
    2 * d * d * std::mem::size_of::<Complex64>() as u64
}

impl AlphaTensor {
    pub fn n_excited(&self) -> usize {
        self.excited.len()
    }

    pub fn n_ground(&self) -> usize {
        self.ground.len()
    }

    pub fn composite_dim(&self) -> usize {
        self.excited.len() * self.ground.len()
    }

    #[inline]
    pub fn offset(&self, l: usize, m: usize, mp: usize, lp: usize) -> usize {
        let ng = self.ground.len();
        (l * ng + m) * self.composite_dim() + lp * ng + mp
    }

    /// Full coefficient `α_{l m m' l'}` (indices into the mode lists).
    #[inline]
    pub fn get(&self, l: usize, m: usize, mp: usize, lp: usize) -> Complex64 {
        let o = self.offset(l, m, mp, lp);
        self.emission[o] + Complex64::i() * self.shift[o]
    }

    #[inline]
    pub fn real_part(&self, l: usize, m: usize, mp: usize, lp: usize) -> Complex64 {
        self.emission[self.offset(l, m, mp, lp)]
    }

    #[inline]
    pub fn imag_part(&self, l: usize, m: usize, mp: usize, lp: usize) -> Complex64 {
        self.shift[self.offset(l, m, mp, lp)]
    }

    /// `α^r` as a composite matrix.
    pub fn emission_matrix(&self) -> DMatrix<Complex64> {
        let d = self.composite_dim();
        DMatrix::from_row_slice(d, d, &self.emission)
    }

    /// Excited-space block `B_{l l'} = α_{l a b l'}` for fixed ground modes `a`, `b`.
    pub fn excited_block(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        let ne = self.n_excited();
        DMatrix::from_fn(ne, ne, |l, lp| self.get(l, a, b, lp))
    }

    /// Emission-only block `α^r_{l a b l'}`.
    pub fn emission_block(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        let ne = self.n_excited();
        DMatrix::from_fn(ne, ne, |l, lp| self.real_part(l, a, b, lp))
    }

    /// `Σ_m α^r_{l m m l}`: angular average of `Σ_m |η_lm|²`.
    pub fn completeness(&self, l: usize) -> f64 {
        (0..self.n_ground()).map(|m| self.real_part(l, m, m, l).re).sum()
    }

    pub fn ground_index(&self, m: &ModeIndex) -> Option<usize> {
        self.ground.iter().position(|g| g == m)
    }

    pub fn excited_index(&self, m: &ModeIndex) -> Option<usize> {
        self.excited.iter().position(|g| g == m)
    }

    pub fn max_shift(&self) -> f64 {
        self.shift.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real factors `sqrt(w_n) r_{lm}(κ Ω_n)` over composite rows and nodes.
fn weighted_real_amplitudes(
    spec: &TrapSpec,
    excited: &[ModeIndex],
    ground: &[ModeIndex],
    quad: &SphereQuadrature,
    weights: &[f64],
    kappa_ratio: f64,
) -> DMatrix<f64> {
    let d = excited.len() * ground.len();
    let nn = quad.len();
    let mut out = DMatrix::<f64>::zeros(d, nn);
    for (n, (dir, w)) in quad.nodes.iter().zip(weights).enumerate() {
        let kicks = axis_kicks(*dir, kappa_ratio, spec);
        let sw = w.sqrt();
        for (li, l) in excited.iter().enumerate() {
            for (mi, m) in ground.iter().enumerate() {
                out[(li * ground.len() + mi, n)] = sw * fc_3d_real_kicks(l, m, kicks);
            }
        }
    }
    out
}

/// Real Gram matrix `Σ_n w_n r_c(κΩ_n) r_c'(κΩ_n)`, symmetrized bit-exactly.
fn real_gram(
    spec: &TrapSpec,
    excited: &[ModeIndex],
    ground: &[ModeIndex],
    quad: &SphereQuadrature,
    weights: &[f64],
    kappa_ratio: f64,
) -> DMatrix<f64> {
    let a = weighted_real_amplitudes(spec, excited, ground, quad, weights, kappa_ratio);
    let mut g = &a * a.transpose();
    let d = g.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

fn add_scaled(acc: &mut DMatrix<f64>, a: f64, g: &DMatrix<f64>) {
    for (x, y) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *x += a * y;
    }
}

pub fn build_alpha_tensor(spec: &TrapSpec, settings: &AlphaSettings) -> Result<AlphaTensor> {
    spec.validate()?;
    let quad = build_sphere_quadrature(settings.sphere_order)?;
    build_alpha_tensor_with(spec, &quad, settings)
}

pub fn build_alpha_tensor_with(
    spec: &TrapSpec,
    quad: &SphereQuadrature,
    settings: &AlphaSettings,
) -> Result<AlphaTensor> {
    let excited = spec.excited_modes()?;
    let ground = spec.ground_modes()?;
    let bytes = tensor_bytes(excited.len(), ground.len());
    if bytes > settings.budget_bytes {
        return Err(Error::ResourceLimit(format!(
            "alpha tensor over {} excited x {} ground modes needs {:.2} GiB, budget is {:.2} GiB",
            excited.len(),
            ground.len(),
            bytes as f64 / (1u64 << 30) as f64,
            settings.budget_bytes as f64 / (1u64 << 30) as f64
        )));
    }
    let mut key = TensorKey::new(spec, settings);
    key.sphere_order = quad.order as u32;
    let ng = ground.len();
    let d = excited.len() * ng;
    let zero = Complex64::new(0.0, 0.0);

    if spec.eta_sq == 0.0 {
        // no recoil: η_lm = δ_lm at every node and wavenumber
        let mut emission = vec![zero; d * d];
        for (li, l) in excited.iter().enumerate() {
            let Some(mi) = ground.iter().position(|g| g == l) else { continue };
            for (lpi, lp) in excited.iter().enumerate() {
                let Some(mpi) = ground.iter().position(|g| g == lp) else { continue };
                emission[(li * ng + mi) * d + lpi * ng + mpi] = Complex64::new(1.0, 0.0);
            }
        }
        return Ok(AlphaTensor { key, excited, ground, emission, shift: vec![zero; d * d] });
    }

    let weights = quad.pattern_weights(settings.pattern);
    let on_shell = real_gram(spec, &excited, &ground, quad, &weights, 1.0);

    let off_shell = if settings.include_imaginary {
        let rule = PvRule::new(1.0, 0.0, settings.kappa_max, settings.pv_grid)?;
        // PV ∫ x³ G(x)/(1-x) = -Σ c_i x_i³ G(x_i) - c_p G(1)
        let acc = rule
            .nodes
            .par_iter()
            .zip(rule.coeffs.par_iter())
            .fold(
                || DMatrix::<f64>::zeros(d, d),
                |mut acc, (&x, &c)| {
                    let g = real_gram(spec, &excited, &ground, quad, &weights, x);
                    add_scaled(&mut acc, c * x * x * x, &g);
                    acc
                },
            )
            .reduce(|| DMatrix::<f64>::zeros(d, d), |a, b| a + b);
        let mut pv = acc;
        add_scaled(&mut pv, rule.pole_coeff, &on_shell);
        pv *= -1.0 / std::f64::consts::PI;
        for i in 0..d {
            for j in (i + 1)..d {
                pv[(j, i)] = pv[(i, j)];
            }
        }
        Some(pv)
    } else {
        None
    };

    let phases: Vec<u32> = excited
        .iter()
        .flat_map(|l| ground.iter().map(move |m| phase_order(l, m)))
        .collect();
    let mut emission = vec![zero; d * d];
    let mut shift = vec![zero; d * d];
    emission.par_chunks_mut(d).zip(shift.par_chunks_mut(d)).enumerate().for_each(
        |(r, (erow, srow))| {
            for c in 0..d {
                // conj(i^{p_r}) i^{p_c}
                let ph = i_pow((4 - phases[r] % 4) + phases[c]);
                erow[c] = ph * on_shell[(r, c)];
                if let Some(pv) = &off_shell {
                    srow[c] = ph * pv[(r, c)];
                }
            }
        },
    );
    Ok(AlphaTensor { key, excited, ground, emission, shift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::fc::fc_3d;

    fn small_spec(eta_sq: f64) -> TrapSpec {
        TrapSpec { shells_g: 4, shells_e: 2, eta_sq, ..TrapSpec::default() }
    }

    #[test]
    fn zero_recoil_is_kronecker() {
        let t = build_alpha_tensor(&small_spec(0.0), &AlphaSettings::default()).unwrap();
        for l in 0..t.n_excited() {
            for m in 0..t.n_ground() {
                for mp in 0..t.n_ground() {
                    for lp in 0..t.n_excited() {
                        let want = if t.excited[l] == t.ground[m] && t.ground[mp] == t.excited[lp] {
                            1.0
                        } else {
                            0.0
                        };
                        assert_eq!(t.get(l, m, mp, lp), Complex64::new(want, 0.0));
                    }
                }
            }
            assert_eq!(t.completeness(l), 1.0);
        }
    }

    #[test]
    fn hermitian_storage_is_exact() {
        let t = build_alpha_tensor(&small_spec(2.0), &AlphaSettings::default()).unwrap();
        let d = t.composite_dim();
        for r in 0..d {
            for c in 0..d {
                assert_eq!(t.emission[r * d + c], t.emission[c * d + r].conj());
                assert_eq!(t.shift[r * d + c], t.shift[c * d + r].conj());
            }
        }
    }

    #[test]
    fn direct_quadrature_agrees() {
        let spec = small_spec(1.5);
        let settings = AlphaSettings { include_imaginary: false, ..AlphaSettings::default() };
        let quad = build_sphere_quadrature(settings.sphere_order).unwrap();
        let t = build_alpha_tensor_with(&spec, &quad, &settings).unwrap();
        let (l, m, mp, lp) = (1, 2, 5, 3);
        let direct: Complex64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(n, w)| {
                *w * fc_3d(&t.excited[l], &t.ground[m], *n, 1.0, &spec).conj()
                    * fc_3d(&t.excited[lp], &t.ground[mp], *n, 1.0, &spec)
            })
            .sum();
        assert!((t.real_part(l, m, mp, lp) - direct).norm() < 1e-14);
    }

    #[test]
    fn budget_refusal() {
        let settings = AlphaSettings { budget_bytes: 1024, ..AlphaSettings::default() };
        let err = build_alpha_tensor(&small_spec(1.0), &settings).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }
}
