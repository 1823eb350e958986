//! Reference solution of the full master equation on a truncated Fock space
//! with one excitation quantum.
//!
//! The excited sector holds one atom in level `l` and `N` ground atoms; the
//! ground sector holds `N + 1` ground atoms. Sideband occupations may deviate
//! from the initial configuration by at most `max_deviation` quanta in the
//! excited sector and one more in the ground sector.

pub mod benchmark;
pub mod dopri;

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{mode_energy, TrapSpec};
use crate::coupling::AlphaTensor;
use crate::decay::OccupationState;
use crate::error::{invalid, Error, Result};
use dopri::{Dopri5, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Sideband deviation allowed in the excited sector.
    pub max_deviation: u64,
    pub max_dim: usize,
    pub t_max: f64,
    /// Stop once the excited population falls below this.
    pub excited_floor: f64,
    pub tolerances: Tolerances,
    /// Include the bare trap energies in the Hamiltonian.
    pub trap_energies: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_deviation: 3,
            max_dim: 5000,
            t_max: 1e4,
            excited_floor: 1e-10,
            tolerances: Tolerances::default(),
            trap_energies: true,
        }
    }
}

/// Many-body basis of both sectors.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub n_excited: usize,
    pub n_ground: usize,
    pub condensate: usize,
    pub initial: Vec<u64>,
    pub max_deviation: u64,
    /// `(level, occupations)` with `Σ occupations = N`.
    pub excited_states: Vec<(usize, Vec<u64>)>,
    /// Occupations with `Σ = N + 1`.
    pub ground_states: Vec<Vec<u64>>,
    excited_index: HashMap<(usize, Vec<u64>), usize>,
    ground_index: HashMap<Vec<u64>, usize>,
}

fn deviation(occ: &[u64], reference: &[u64], condensate: usize) -> u64 {
    occ.iter()
        .zip(reference)
        .enumerate()
        .filter(|(m, _)| *m != condensate)
        .map(|(_, (a, b))| a.abs_diff(*b))
        .sum()
}

/// All occupation vectors with the given total whose sideband part deviates
/// from `reference` by at most `budget`.
fn sideband_configs(reference: &[u64], condensate: usize, total: u64, budget: u64) -> Vec<Vec<u64>> {
    let modes: Vec<usize> = (0..reference.len()).filter(|&m| m != condensate).collect();
    let mut out = Vec::new();
    let mut cur = reference.to_vec();
    fn rec(
        k: usize,
        modes: &[usize],
        reference: &[u64],
        cur: &mut Vec<u64>,
        left: u64,
        used: u64,
        condensate: usize,
        total: u64,
        out: &mut Vec<Vec<u64>>,
    ) {
        if k == modes.len() {
            if used <= total {
                cur[condensate] = total - used;
                out.push(cur.clone());
            }
            return;
        }
        let m = modes[k];
        let r = reference[m];
        let lo = r.saturating_sub(left);
        for v in lo..=r + left {
            let d = v.abs_diff(r);
            cur[m] = v;
            rec(k + 1, modes, reference, cur, left - d, used + v, condensate, total, out);
        }
        cur[m] = r;
    }
    rec(0, &modes, reference, &mut cur, budget, 0, condensate, total, &mut out);
    out
}

impl FockBasis {
    pub fn new(initial: &OccupationState, n_excited: usize, max_deviation: u64) -> Result<Self> {
        let n = initial.n_total();
        let c = initial.condensate;
        let ex = sideband_configs(&initial.ground, c, n, max_deviation);
        let gr = sideband_configs(&initial.ground, c, n + 1, max_deviation + 1);
        let mut excited_states = Vec::with_capacity(ex.len() * n_excited);
        for l in 0..n_excited {
            for occ in &ex {
                excited_states.push((l, occ.clone()));
            }
        }
        let excited_index =
            excited_states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let ground_index = gr.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis {
            n_excited,
            n_ground: initial.ground.len(),
            condensate: c,
            initial: initial.ground.clone(),
            max_deviation,
            excited_states,
            ground_states: gr,
            excited_index,
            ground_index,
        })
    }

    pub fn excited_dim(&self) -> usize {
        self.excited_states.len()
    }

    pub fn ground_dim(&self) -> usize {
        self.ground_states.len()
    }

    pub fn find_excited(&self, level: usize, occ: &[u64]) -> Option<usize> {
        self.excited_index.get(&(level, occ.to_vec())).copied()
    }

    pub fn find_ground(&self, occ: &[u64]) -> Option<usize> {
        self.ground_index.get(occ).copied()
    }

    fn is_boundary(&self, occ: &[u64]) -> bool {
        deviation(occ, &self.initial, self.condensate) >= self.max_deviation
    }
}

/// Matrices of the truncated problem.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub basis: FockBasis,
    /// Effective Hamiltonian on the excited sector.
    pub hamiltonian: DMatrix<Complex64>,
    /// Jump operators excited sector → ground sector, rates included.
    pub jumps: Vec<DMatrix<Complex64>>,
    /// `Γ (1 - Σ_m α^r_{l m m l'})`: emission into modes outside the basis.
    pub escape: DMatrix<Complex64>,
}

impl OracleModel {
    pub fn new(
        spec: &TrapSpec,
        initial: &OccupationState,
        alpha: &AlphaTensor,
        opts: &OracleOptions,
    ) -> Result<Self> {
        let ne = alpha.n_excited();
        let ng = alpha.n_ground();
        if initial.ground.len() != ng || initial.excited >= ne {
            return invalid("initial state does not match the tensor basis");
        }
        let basis = FockBasis::new(initial, ne, opts.max_deviation)?;
        let de = basis.excited_dim();
        let dg = basis.ground_dim();
        if de > opts.max_dim || dg > opts.max_dim {
            return Err(Error::ResourceLimit(format!(
                "Fock basis of {de}+{dg} states exceeds the cap {}",
                opts.max_dim
            )));
        }
        let gamma = spec.gamma;
        let half = Complex64::new(0.0, -0.5 * gamma);
        let mut h = DMatrix::<Complex64>::zeros(de, de);
        for (x, (lp, occ)) in basis.excited_states.iter().enumerate() {
            let mut diag = half;
            if opts.trap_energies {
                diag += mode_energy(&alpha.excited[*lp], spec);
                for (m, &k) in occ.iter().enumerate() {
                    diag += k as f64 * mode_energy(&alpha.ground[m], spec);
                }
            }
            h[(x, x)] += diag;
            for m in 0..ng {
                if occ[m] == 0 {
                    continue;
                }
                for mp in 0..ng {
                    let mut next = occ.clone();
                    next[m] -= 1;
                    next[mp] += 1;
                    let amp = if m == mp {
                        occ[m] as f64
                    } else {
                        (occ[m] as f64 * (occ[mp] + 1) as f64).sqrt()
                    };
                    for l in 0..ne {
                        let a = alpha.get(l, m, mp, *lp);
                        if a == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        match basis.find_excited(l, &next) {
                            Some(y) => h[(y, x)] += half * a * amp,
                            None if basis.is_boundary(occ) => {}
                            None => {
                                return Err(Error::BasisClosure(format!(
                                    "effective Hamiltonian maps level {} {:?} outside the basis",
                                    lp, next
                                )))
                            }
                        }
                    }
                }
            }
        }

        // raw jump images K_c = g_{m'}† e_{l'} for composite c = (l', m')
        let dc = ne * ng;
        let mut raw = vec![DMatrix::<Complex64>::zeros(dg, de); dc];
        for (x, (lp, occ)) in basis.excited_states.iter().enumerate() {
            for mp in 0..ng {
                let mut next = occ.clone();
                next[mp] += 1;
                match basis.find_ground(&next) {
                    Some(f) => {
                        raw[lp * ng + mp][(f, x)] = Complex64::new(((occ[mp] + 1) as f64).sqrt(), 0.0)
                    }
                    None => {
                        return Err(Error::BasisClosure(format!(
                            "emission from level {lp} {occ:?} lands on {next:?} outside the basis"
                        )))
                    }
                }
            }
        }
        // J ρ = Σ_k L_k ρ L_k† with α^r = U μ U†, L_k = sqrt(Γ μ_k) Σ_c conj(U_{c k}) K_c
        let eig = alpha.emission_matrix().symmetric_eigen();
        let mut jumps = Vec::new();
        let mut scale = 0.0f64;
        for mu in eig.eigenvalues.iter() {
            scale = scale.max(mu.abs());
        }
        for k in 0..dc {
            let mu = eig.eigenvalues[k];
            if mu <= 1e-14 * scale {
                continue;
            }
            let mut op = DMatrix::<Complex64>::zeros(dg, de);
            for c in 0..dc {
                let u = eig.eigenvectors[(c, k)].conj();
                if u.norm() > 0.0 {
                    op += &raw[c] * u;
                }
            }
            jumps.push(op * Complex64::new((gamma * mu).sqrt(), 0.0));
        }
        let mut escape = DMatrix::<Complex64>::zeros(de, de);
        for (x, (l, occ)) in basis.excited_states.iter().enumerate() {
            for lp in 0..ne {
                let y = match basis.find_excited(lp, occ) {
                    Some(y) => y,
                    None => continue,
                };
                let mut cpl = if *l == lp { 1.0 } else { 0.0 };
                for m in 0..ng {
                    cpl -= alpha.real_part(*l, m, m, lp).re;
                }
                escape[(x, y)] = Complex64::new(gamma * cpl, 0.0);
            }
        }
        Ok(OracleModel { basis, hamiltonian: h, jumps, escape })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    /// Ground-sector configuration and its probability.
    pub channels: Vec<(Vec<u64>, f64)>,
    pub excited_remaining: f64,
    /// Emission into ground modes outside the truncated basis.
    pub escaped: f64,
    /// `1 - (Σ channels + excited + escaped)`.
    pub trace_deficit: f64,
    pub t_final: f64,
}

impl CascadeResult {
    pub fn probability(&self, occ: &[u64]) -> f64 {
        self.channels.iter().find(|(o, _)| o.as_slice() == occ).map_or(0.0, |(_, p)| *p)
    }

    /// Probability that the condensate ends with `n0` atoms.
    pub fn condensate_channel(&self, condensate: usize, n0: u64) -> f64 {
        self.channels.iter().filter(|(o, _)| o[condensate] == n0).map(|(_, p)| p).sum()
    }
}

/// Deterministic density-matrix evolution of one pump event.
pub fn integrate_cascade(
    spec: &TrapSpec,
    initial: &OccupationState,
    alpha: &AlphaTensor,
    opts: &OracleOptions,
) -> Result<CascadeResult> {
    let model = OracleModel::new(spec, initial, alpha, opts)?;
    let de = model.basis.excited_dim();
    let dg = model.basis.ground_dim();
    let start = model
        .basis
        .find_excited(initial.excited, &initial.ground)
        .expect("initial state is in the basis");
    let h = &model.hamiltonian;
    let hd = h.adjoint();
    let jumps = &model.jumps;
    let escape = &model.escape;
    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let rho = DMatrix::from_column_slice(de, de, &y[..de * de]);
        let i = Complex64::i();
        let drho = (h * &rho) * (-i) + (&rho * &hd) * i;
        dy[..de * de].copy_from_slice(drho.as_slice());
        for f in 0..dg {
            dy[de * de + f] = Complex64::new(0.0, 0.0);
        }
        for l in jumps {
            let lr = l * &rho;
            for f in 0..dg {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..de {
                    acc += lr[(f, x)] * l[(f, x)].conj();
                }
                dy[de * de + f] += acc;
            }
        }
        let mut esc = Complex64::new(0.0, 0.0);
        for x in 0..de {
            for yy in 0..de {
                esc += escape[(x, yy)] * rho[(yy, x)];
            }
        }
        dy[de * de + dg] = esc;
    };
    let dim = de * de + dg + 1;
    let mut y = vec![Complex64::new(0.0, 0.0); dim];
    y[start * de + start] = Complex64::new(1.0, 0.0);
    let rate = h.norm().max(spec.gamma).max(1e-300);
    let mut ig = Dopri5::new(rhs, dim, 0.01 / rate, opts.tolerances);
    let floor = opts.excited_floor;
    let t_final = ig.integrate(0.0, &mut y, opts.t_max, |_, y| {
        (0..de).map(|x| y[x * de + x].re).sum::<f64>() <= floor
    })?;
    let excited_remaining: f64 = (0..de).map(|x| y[x * de + x].re).sum();
    let escaped = y[de * de + dg].re;
    let channels: Vec<(Vec<u64>, f64)> = model
        .basis
        .ground_states
        .iter()
        .enumerate()
        .map(|(f, occ)| (occ.clone(), y[de * de + f].re))
        .collect();
    let total: f64 = channels.iter().map(|(_, p)| p).sum();
    let trace_deficit = 1.0 - (total + excited_remaining + escaped);
    if trace_deficit.abs() > 1e-6 {
        return Err(Error::Accuracy(format!("trace deficit {trace_deficit:.3e} exceeds 1e-6")));
    }
    Ok(CascadeResult { channels, excited_remaining, escaped, trace_deficit, t_final })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEstimate {
    /// Ground configuration, probability, standard error.
    pub channels: Vec<(Vec<u64>, f64, f64)>,
    pub escaped: (f64, f64),
    pub no_jump: (f64, f64),
    pub trajectories: usize,
}

impl JumpEstimate {
    pub fn condensate_channel(&self, condensate: usize, n0: u64) -> (f64, f64) {
        let n = self.trajectories as f64;
        let p: f64 = self.channels.iter().filter(|(o, _, _)| o[condensate] == n0).map(|c| c.1).sum();
        (p, (p * (1.0 - p) / n).sqrt())
    }
}

enum Fate {
    Channel(usize),
    Escaped,
    NoJump,
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Stochastic wavefunction unravelling of the same problem. Trajectory `i`
/// uses seed `seed + i`.
pub fn quantum_jump_estimate(
    spec: &TrapSpec,
    initial: &OccupationState,
    alpha: &AlphaTensor,
    opts: &OracleOptions,
    n_trajectories: usize,
    seed: u64,
) -> Result<JumpEstimate> {
    if n_trajectories == 0 {
        return invalid("at least one trajectory is required");
    }
    let model = OracleModel::new(spec, initial, alpha, opts)?;
    let de = model.basis.excited_dim();
    let dg = model.basis.ground_dim();
    let start = model.basis.find_excited(initial.excited, &initial.ground).expect("in basis");
    let rate = model.hamiltonian.norm().max(spec.gamma).max(1e-300);
    let fates: Vec<Result<Fate>> = (0..n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let h = &model.hamiltonian;
            let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
                for (r, d) in dy.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (x, yx) in y.iter().enumerate() {
                        acc += h[(r, x)] * yx;
                    }
                    *d = acc * Complex64::new(0.0, -1.0);
                }
            };
            let mut ig = Dopri5::new(rhs, de, 0.01 / rate, opts.tolerances);
            let mut psi = vec![Complex64::new(0.0, 0.0); de];
            psi[start] = Complex64::new(1.0, 0.0);
            let target: f64 = rng.random();
            let mut t = 0.0;
            let mut prev = psi.clone();
            loop {
                prev.copy_from_slice(&psi);
                let t_prev = t;
                t = ig.step(t, &mut psi, opts.t_max)?;
                if norm_sq(&psi) <= target {
                    // locate the jump inside the accepted step
                    let (mut lo, mut hi) = (0.0, t - t_prev);
                    let mut trial = psi.clone();
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        ig.fixed_step(t_prev, &prev, mid, &mut trial);
                        if norm_sq(&trial) > target {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    ig.fixed_step(t_prev, &prev, hi, &mut psi);
                    break;
                }
                if t >= opts.t_max {
                    return Ok(Fate::NoJump);
                }
            }
            let v = nalgebra::DVector::from_column_slice(&psi);
            let mut weights: Vec<f64> = Vec::with_capacity(dg + 1);
            let mut per_channel = vec![0.0; dg];
            for l in &model.jumps {
                let out = l * &v;
                for f in 0..dg {
                    per_channel[f] += out[f].norm_sqr();
                }
            }
            weights.extend_from_slice(&per_channel);
            weights.push((v.adjoint() * &model.escape * &v)[(0, 0)].re.max(0.0));
            let total: f64 = weights.iter().sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (f, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return Ok(if f < dg { Fate::Channel(f) } else { Fate::Escaped });
                }
            }
            Ok(Fate::Escaped)
        })
        .collect();
    let mut counts = vec![0usize; dg];
    let (mut esc, mut none) = (0usize, 0usize);
    for f in fates {
        match f? {
            Fate::Channel(c) => counts[c] += 1,
            Fate::Escaped => esc += 1,
            Fate::NoJump => none += 1,
        }
    }
    let n = n_trajectories as f64;
    let est = |k: usize| {
        let p = k as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    };
    let channels = model
        .basis
        .ground_states
        .iter()
        .zip(&counts)
        .map(|(occ, &k)| {
            let (p, e) = est(k);
            (occ.clone(), p, e)
        })
        .collect();
    Ok(JumpEstimate { channels, escaped: est(esc), no_jump: est(none), trajectories: n_trajectories })
}

#[cfg(test)]
mod tests {
    use super::benchmark::{benchmark_spec, benchmark_state};
    use super::*;
    use crate::coupling::{build_alpha_tensor, AlphaSettings};

    fn quick() -> AlphaSettings {
        AlphaSettings { sphere_order: 10, pv_grid: 80, ..AlphaSettings::default() }
    }

    #[test]
    fn no_linewidth_no_emission() {
        let spec = TrapSpec { gamma: 0.0, ..benchmark_spec(5) };
        let alpha = build_alpha_tensor(&benchmark_spec(5), &quick()).unwrap();
        let opts = OracleOptions { t_max: 50.0, ..OracleOptions::default() };
        let r = integrate_cascade(&spec, &benchmark_state(5), &alpha, &opts).unwrap();
        assert!(r.channels.iter().all(|(_, p)| p.abs() < 1e-14));
        assert!((r.excited_remaining - 1.0).abs() < 1e-9);
        assert_eq!(r.escaped, 0.0);
    }

    #[test]
    fn single_mode_without_recoil_emits_into_condensate() {
        let spec = TrapSpec {
            shells_e: 1,
            shells_g: 1,
            eta_sq: 0.0,
            n_atoms: 7,
            n_condensed: 7,
            ..TrapSpec::default()
        };
        let alpha = build_alpha_tensor(&spec, &quick()).unwrap();
        let initial = OccupationState::pure_condensate(1, 0, 7, 0);
        let r = integrate_cascade(&spec, &initial, &alpha, &OracleOptions::default()).unwrap();
        assert!((r.condensate_channel(0, 8) - 1.0).abs() < 1e-8);
        assert!(r.escaped.abs() < 1e-12);
        assert!(r.trace_deficit.abs() < 1e-8);
    }

    #[test]
    fn trace_is_conserved_with_escape() {
        // ground basis lacks odd modes the excited level decays into
        let spec = benchmark_spec(10);
        let alpha = build_alpha_tensor(&spec, &quick()).unwrap();
        let r = integrate_cascade(&spec, &benchmark_state(10), &alpha, &OracleOptions::default()).unwrap();
        assert!(r.escaped > 0.0);
        assert!(r.trace_deficit.abs() < 1e-6);
        let total: f64 = r.channels.iter().map(|c| c.1).sum::<f64>() + r.escaped + r.excited_remaining;
        assert!((total - 1.0).abs() < 1e-6);
        assert!(r.channels.iter().all(|(o, p)| o.iter().sum::<u64>() == 13 && *p > -1e-12));
    }

    #[test]
    fn basis_limits() {
        let spec = benchmark_spec(10);
        let alpha = build_alpha_tensor(&spec, &quick()).unwrap();
        let opts = OracleOptions { max_dim: 3, ..OracleOptions::default() };
        assert!(integrate_cascade(&spec, &benchmark_state(10), &alpha, &opts).is_err());
        let basis = FockBasis::new(&benchmark_state(10), 1, 1).unwrap();
        assert!(basis.find_excited(0, &[10, 2]).is_some());
        assert!(basis.find_excited(0, &[7, 5]).is_none());
        assert_eq!(basis.ground_states.iter().map(|g| g.iter().sum::<u64>()).max(), Some(13));
    }

    #[test]
    fn jump_estimate_is_reproducible_and_consistent() {
        let spec = benchmark_spec(8);
        let alpha = build_alpha_tensor(&spec, &quick()).unwrap();
        let opts = OracleOptions::default();
        let st = benchmark_state(8);
        let a = quantum_jump_estimate(&spec, &st, &alpha, &opts, 3000, 42).unwrap();
        let b = quantum_jump_estimate(&spec, &st, &alpha, &opts, 3000, 42).unwrap();
        assert_eq!(a, b);
        let exact = integrate_cascade(&spec, &st, &alpha, &opts).unwrap();
        for n0 in [8, 9, 10] {
            let (p, se) = a.condensate_channel(0, n0);
            let want = exact.condensate_channel(0, n0);
            assert!((p - want).abs() <= 4.0 * se.max(1e-3), "N0 {n0}: {p} ± {se} vs {want}");
        }
        let total: f64 = a.channels.iter().map(|c| c.1).sum::<f64>() + a.escaped.0 + a.no_jump.0;
        assert!((total - 1.0).abs() < 1e-12);
    }
}
