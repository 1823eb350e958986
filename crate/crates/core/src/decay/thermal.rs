//! Thermal initial conditions: Bose-Einstein ground occupations and a
//! Boltzmann-distributed excited level.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::basis::{mode_energy, ModeIndex, TrapSpec};
use crate::error::{invalid, Result};

/// Initial many-body configuration with one excited atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationState {
    /// `N_m` in ground-basis order.
    pub ground: Vec<u64>,
    /// Index of the condensate mode in `ground`.
    pub condensate: usize,
    /// Index of the occupied excited level.
    pub excited: usize,
}

impl OccupationState {
    /// All `n` atoms condensed, excited atom in level `excited`.
    pub fn pure_condensate(n_ground: usize, condensate: usize, n: u64, excited: usize) -> Self {
        let mut ground = vec![0; n_ground];
        ground[condensate] = n;
        OccupationState { ground, condensate, excited }
    }

    pub fn n_total(&self) -> u64 {
        self.ground.iter().sum()
    }

    pub fn n_condensed(&self) -> u64 {
        self.ground[self.condensate]
    }

    pub fn non_condensed(&self) -> u64 {
        self.n_total() - self.n_condensed()
    }
}

/// `1/(exp(gap/t) - 1)`, zero at `t = 0` for a positive gap.
pub fn bose_occupation(gap: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = gap / t;
    if x > 700.0 {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// Excitation gaps `ω_m - ω_0` over a mode list.
pub fn ground_gaps(modes: &[ModeIndex], spec: &TrapSpec) -> Vec<f64> {
    let e0 = mode_energy(&ModeIndex::GROUND, spec);
    modes.iter().map(|m| mode_energy(m, spec) - e0).collect()
}

fn total_occupation(gaps: &[f64], offset: f64, t: f64) -> f64 {
    gaps.iter().map(|&g| bose_occupation(g + offset, t)).sum()
}

/// Finds `x = ω_0 - μ > 0` with `Σ_m 1/(exp((g_m + x)/t) - 1) = n` over all
/// gaps including the condensate's zero gap.
pub fn grand_canonical_offset(gaps: &[f64], n: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(n > 0.0) {
        return invalid("grand-canonical fit needs t > 0 and n > 0");
    }
    if !gaps.iter().any(|&g| g == 0.0) {
        return invalid("gap list lacks the condensate mode");
    }
    let mut hi = t;
    while total_occupation(gaps, hi, t) > n {
        hi *= 2.0;
    }
    let mut lo = hi;
    while total_occupation(gaps, lo, t) < n {
        lo *= 0.5;
        if lo < 1e-300 {
            return invalid("grand-canonical fit failed to bracket");
        }
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if total_occupation(gaps, mid.exp(), t) > n {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Mean grand-canonical non-condensate population at `(t, n)`.
pub fn grand_canonical_non_condensed(gaps: &[f64], n: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let x = grand_canonical_offset(gaps, n, t)?;
    Ok(gaps.iter().filter(|&&g| g != 0.0).map(|&g| bose_occupation(g + x, t)).sum())
}

/// Normalized Boltzmann weights over the excited levels; `t = 0` puts equal
/// weight on the lowest-energy levels.
pub fn excited_weights(energies: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return invalid(format!("temperature must be non-negative, got {t}"));
    }
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = if t == 0.0 {
        energies.iter().map(|&e| if e == emin { 1.0 } else { 0.0 }).collect()
    } else {
        energies.iter().map(|&e| (-(e - emin) / t).exp()).collect()
    };
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// Precomputed energies for repeated sampling on one basis.
#[derive(Debug, Clone)]
pub struct ThermalSampler {
    pub gaps: Vec<f64>,
    pub excited_energies: Vec<f64>,
    pub condensate: usize,
    pub n_atoms: u64,
}

impl ThermalSampler {
    pub fn new(spec: &TrapSpec) -> Result<Self> {
        spec.validate()?;
        let ground = spec.ground_modes()?;
        let condensate = match ground.iter().position(|m| *m == ModeIndex::GROUND) {
            Some(c) => c,
            None => return invalid("ground basis lacks the condensate mode"),
        };
        let excited = spec.excited_modes()?;
        Ok(ThermalSampler {
            gaps: ground_gaps(&ground, spec),
            excited_energies: excited.iter().map(|m| mode_energy(m, spec)).collect(),
            condensate,
            n_atoms: spec.n_atoms,
        })
    }

    /// Per-mode mean occupations `N_m` for `m ≠ 0` (zero at the condensate).
    pub fn mean_occupations(&self, t_g: f64) -> Result<Vec<f64>> {
        if t_g <= 0.0 {
            return Ok(vec![0.0; self.gaps.len()]);
        }
        let x = grand_canonical_offset(&self.gaps, self.n_atoms as f64, t_g)?;
        Ok(self
            .gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| if i == self.condensate { 0.0 } else { bose_occupation(g + x, t_g) })
            .collect())
    }

    /// Draws ground occupations; the condensate keeps at least one atom.
    pub fn sample_ground<R: Rng>(&self, t_g: f64, rng: &mut R) -> Result<Vec<u64>> {
        if !(t_g >= 0.0) {
            return invalid(format!("temperature must be non-negative, got {t_g}"));
        }
        let n = self.n_atoms;
        if n == 0 {
            return invalid("cannot sample an empty trap");
        }
        let means = self.mean_occupations(t_g)?;
        let dists: Vec<Option<Geometric>> = means
            .iter()
            .map(|&m| {
                if m <= 0.0 {
                    None
                } else {
                    // P(k) = (1-q) q^k with mean q/(1-q)
                    Geometric::new(1.0 / (1.0 + m)).ok()
                }
            })
            .collect();
        let mut cap = n - 1;
        loop {
            let mut occ = vec![0u64; means.len()];
            for (o, d) in occ.iter_mut().zip(&dists) {
                if let Some(d) = d {
                    *o = d.sample(rng).min(cap);
                }
            }
            let excess: u64 = occ.iter().fold(0u64, |a, &b| a.saturating_add(b));
            if excess < n {
                occ[self.condensate] = n - excess;
                return Ok(occ);
            }
            cap /= 2;
            log::warn!("thermal draw exceeded {n} atoms at T_g = {t_g}; resampling with cap {cap}");
        }
    }

    pub fn sample_excited<R: Rng>(&self, t_e: f64, rng: &mut R) -> Result<usize> {
        let w = excited_weights(&self.excited_energies, t_e)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            acc += wj;
            if u < acc {
                return Ok(j);
            }
        }
        Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
    }

    pub fn sample<R: Rng>(&self, t_g: f64, t_e: f64, rng: &mut R) -> Result<OccupationState> {
        let ground = self.sample_ground(t_g, rng)?;
        let excited = self.sample_excited(t_e, rng)?;
        Ok(OccupationState { ground, condensate: self.condensate, excited })
    }
}

/// Draws one thermal initial state from a seeded stream.
pub fn sample_initial(spec: &TrapSpec, t_g: f64, t_e: f64, seed: u64) -> Result<OccupationState> {
    let sampler = ThermalSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampler.sample(t_g, t_e, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrapSpec {
        TrapSpec { shells_g: 6, shells_e: 2, n_atoms: 2000, n_condensed: 1500, ..TrapSpec::default() }
    }

    #[test]
    fn zero_temperature_is_pure() {
        let s = sample_initial(&small(), 0.0, 0.0, 7).unwrap();
        assert_eq!(s.n_condensed(), 2000);
        assert_eq!(s.non_condensed(), 0);
        assert_eq!(s.excited, 0);
    }

    #[test]
    fn grand_canonical_fit_reproduces_total() {
        let spec = small();
        let sampler = ThermalSampler::new(&spec).unwrap();
        for &t in &[0.3, 2.0, 8.0] {
            let x = grand_canonical_offset(&sampler.gaps, 2000.0, t).unwrap();
            let tot = total_occupation(&sampler.gaps, x, t);
            assert!((tot - 2000.0).abs() < 1e-8, "t={t} total={tot}");
        }
    }

    #[test]
    fn sample_mean_matches_bose_sum() {
        let spec = small();
        let sampler = ThermalSampler::new(&spec).unwrap();
        let t = 3.0;
        let want = grand_canonical_non_condensed(&sampler.gaps, 2000.0, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let g = sampler.sample_ground(t, &mut rng).unwrap();
                (2000 - g[sampler.condensate]) as f64
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "mean {mean} want {want} se {se}");
    }

    #[test]
    fn hot_excited_levels_are_uniform() {
        let w = excited_weights(&[1.5, 2.5, 2.5, 2.5], 1e12).unwrap();
        for x in &w {
            assert!((x - 0.25).abs() < 1e-10);
        }
        let cold = excited_weights(&[1.5, 2.5, 2.5, 2.5], 0.0).unwrap();
        assert_eq!(cold, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(excited_weights(&[1.0], -1.0).is_err());
    }

    #[test]
    fn overfull_draws_are_capped() {
        let spec = TrapSpec { n_atoms: 3, n_condensed: 3, ..small() };
        let sampler = ThermalSampler::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = sampler.sample_ground(50.0, &mut rng).unwrap();
            assert_eq!(g.iter().sum::<u64>(), 3);
            assert!(g[sampler.condensate] >= 1);
        }
    }
}
