//! Channel probabilities `P_{N₀+2}` and `P_{N₀}` for one pump event and the
//! resulting condensate-fraction update.
//!
//! Amplitudes carry explicit Bose factors and probabilities are
//! `Γ ∫dt ∫dΩ/4π |amplitude|²`. The angular integral is contracted through
//! `∫dΩ/4π conj(η_{lf}) η_{l'f'} = α^r_{l f f' l'}`.
//!
//! All `(s, j)` time integrals are evaluated once at the reference
//! condensate number `N_ref`. Without bare excited energies the generator is
//! proportional to `N₀`, so a state with `N₀` condensed atoms follows by the
//! time rescaling `t → t N_ref/N₀`.

pub mod thermal;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{mode_energy, ModeIndex, TrapSpec};
use crate::coupling::AlphaTensor;
use crate::dynamics::{
    biortho_decompose, build_generator, cross_integral, AmplitudeSeries, GeneratorOptions,
};
use crate::error::{invalid, Result};

pub use thermal::{
    bose_occupation, excited_weights, grand_canonical_non_condensed, grand_canonical_offset,
    ground_gaps, sample_initial, OccupationState, ThermalSampler,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySettings {
    pub generator: GeneratorOptions,
    /// Keep the first-order (reabsorption) paths; off gives the single-path limit.
    pub first_order: bool,
    /// Upper bound on `max(P_{N₀}, P_{N₀+2})` for the expansion to hold.
    pub threshold: f64,
    /// Required ratio `N₀ / max(a, N - N₀)`.
    pub margin: f64,
    /// Share of single-decay emission that makes a ground mode count toward `a`.
    pub level_share: f64,
}

impl Default for DecaySettings {
    fn default() -> Self {
        DecaySettings {
            generator: GeneratorOptions::default(),
            first_order: true,
            threshold: 0.1,
            margin: 10.0,
            level_share: 1e-3,
        }
    }
}

/// Dimensionless time integrals for one sideband mode `s` and initial level `j`
/// at `N_ref`, without Bose factors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnitIntegrals {
    /// Condensate raising then emission into the condensate.
    pub plus: f64,
    /// Condensate lowering then emission into the condensate.
    pub direct_condensate: f64,
    /// Direct emission into `s`.
    pub direct_sideband: f64,
    /// `2 Re` cross term of the two `N₀`-channel paths.
    pub interference: f64,
}

/// Everything about one basis and emission geometry that does not depend on
/// the initial occupations.
#[derive(Debug, Clone)]
pub struct DecayMachinery {
    pub spec: TrapSpec,
    pub settings: DecaySettings,
    pub condensate: usize,
    pub n_ref: f64,
    pub n_excited: usize,
    pub n_ground: usize,
    pub excited_energies: Vec<f64>,
    /// Indexed `[s * n_excited + j]`; zero for `s` at the condensate.
    pub unit: Vec<UnitIntegrals>,
    /// `α^r_{j m m j}`, indexed `[m * n_excited + j]`.
    pub emission_share: Vec<f64>,
}

/// Per-`s` breakdown for one initial state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelTerms {
    pub p_plus: f64,
    pub direct_condensate: f64,
    pub direct_sideband: f64,
    pub interference: f64,
}

impl ChannelTerms {
    pub fn p_zero(&self) -> f64 {
        self.direct_condensate + self.direct_sideband + self.interference
    }

    fn add(&mut self, o: &ChannelTerms, w: f64) {
        self.p_plus += w * o.p_plus;
        self.direct_condensate += w * o.direct_condensate;
        self.direct_sideband += w * o.direct_sideband;
        self.interference += w * o.interference;
    }
}

impl DecayMachinery {
    pub fn new(alpha: &AlphaTensor, spec: &TrapSpec, settings: DecaySettings) -> Result<Self> {
        spec.validate()?;
        if spec.n_condensed == 0 {
            return invalid("reference condensate number must be positive");
        }
        let generator = build_generator(alpha, spec, settings.generator)?;
        let decomp = biortho_decompose(&generator.matrix)?;
        let c = alpha.ground_index(&ModeIndex::GROUND).expect("checked by build_generator");
        let ne = alpha.n_excited();
        let ng = alpha.n_ground();
        let gamma = spec.gamma;
        let half = Complex64::new(0.0, -0.5 * gamma);
        let g00 = alpha.emission_block(c, c);
        let zeroth: Vec<AmplitudeSeries> =
            (0..ne).map(|j| AmplitudeSeries::zeroth_order(&decomp, j)).collect();
        let first_order = settings.first_order;

        let per_s: Vec<Result<Vec<UnitIntegrals>>> = (0..ng)
            .into_par_iter()
            .map(|s| {
                if s == c {
                    return Ok(vec![UnitIntegrals::default(); ne]);
                }
                let gss = alpha.emission_block(s, s);
                let gs0 = alpha.emission_block(s, c);
                let raising: DMatrix<Complex64> = alpha.excited_block(s, c) * half;
                let lowering: DMatrix<Complex64> = alpha.excited_block(c, s) * half;
                let mut out = Vec::with_capacity(ne);
                for (j, a0) in zeroth.iter().enumerate() {
                    let mut u = UnitIntegrals {
                        direct_sideband: gamma * cross_integral(a0, &gss, a0)?.re,
                        ..Default::default()
                    };
                    if first_order {
                        let up = AmplitudeSeries::first_order(&decomp, &raising, j);
                        let down = AmplitudeSeries::first_order(&decomp, &lowering, j);
                        u.plus = gamma * cross_integral(&up, &g00, &up)?.re;
                        u.direct_condensate = gamma * cross_integral(&down, &g00, &down)?.re;
                        u.interference = 2.0 * gamma * cross_integral(a0, &gs0, &down)?.re;
                    }
                    out.push(u);
                }
                Ok(out)
            })
            .collect();
        let mut unit = Vec::with_capacity(ng * ne);
        for r in per_s {
            unit.extend(r?);
        }
        let mut emission_share = vec![0.0; ng * ne];
        for m in 0..ng {
            for j in 0..ne {
                emission_share[m * ne + j] = alpha.real_part(j, m, m, j).re;
            }
        }
        Ok(DecayMachinery {
            spec: spec.clone(),
            settings,
            condensate: c,
            n_ref: spec.n_condensed as f64,
            n_excited: ne,
            n_ground: ng,
            excited_energies: alpha.excited.iter().map(|m| mode_energy(m, spec)).collect(),
            unit,
            emission_share,
        })
    }

    pub fn unit(&self, s: usize, j: usize) -> &UnitIntegrals {
        &self.unit[s * self.n_excited + j]
    }

    fn check_state(&self, state: &OccupationState) -> Result<()> {
        if state.ground.len() != self.n_ground || state.condensate != self.condensate {
            return invalid("occupation state does not match the machinery basis");
        }
        if state.excited >= self.n_excited {
            return invalid("excited level out of range");
        }
        if state.n_condensed() == 0 {
            return invalid("expansion needs a non-empty condensate");
        }
        Ok(())
    }

    /// Channel terms of sideband mode `s` for initial state `state`.
    pub fn channel(&self, state: &OccupationState, s: usize) -> Result<ChannelTerms> {
        self.check_state(state)?;
        if s >= self.n_ground || s == self.condensate {
            return invalid("sideband mode must be a non-condensate ground mode");
        }
        Ok(self.channel_unchecked(state, s, state.excited))
    }

    fn channel_unchecked(&self, state: &OccupationState, s: usize, j: usize) -> ChannelTerms {
        let n0 = state.n_condensed() as f64;
        let ns = state.ground[s] as f64;
        let r = self.n_ref / n0;
        let u = self.unit(s, j);
        ChannelTerms {
            p_plus: if ns == 0.0 { 0.0 } else { (n0 + 1.0) * (n0 + 2.0) * ns * u.plus * r * r * r },
            direct_condensate: n0 * n0 * (ns + 1.0) * u.direct_condensate * r * r * r,
            direct_sideband: (ns + 1.0) * u.direct_sideband * r,
            interference: n0 * (ns + 1.0) * u.interference * r * r,
        }
    }

    /// Sum over all `s ≠ 0` with the excited level weighted by `weights`.
    pub fn total(&self, state: &OccupationState, weights: &[f64]) -> Result<ChannelTerms> {
        self.check_state(state)?;
        if weights.len() != self.n_excited {
            return invalid("excited weights do not match the basis");
        }
        let mut acc = ChannelTerms::default();
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for s in 0..self.n_ground {
                if s != self.condensate {
                    acc.add(&self.channel_unchecked(state, s, j), w);
                }
            }
        }
        Ok(acc)
    }

    /// Number of ground modes taking at least `level_share` of the
    /// single-decay emission for the given excited weights.
    pub fn level_count(&self, weights: &[f64]) -> usize {
        let per_mode: Vec<f64> = (0..self.n_ground)
            .map(|m| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * self.emission_share[m * self.n_excited + j])
                    .sum()
            })
            .collect();
        let total: f64 = per_mode.iter().sum();
        per_mode.iter().filter(|&&x| x >= self.settings.level_share * total).count()
    }
}

/// `P_{N₀+2}^s` for the state's own excited level.
pub fn p_plus_s(machinery: &DecayMachinery, state: &OccupationState, s: usize) -> Result<f64> {
    Ok(machinery.channel(state, s)?.p_plus)
}

/// `P_{N₀}^s` and its (condensate path, sideband path, interference) split.
pub fn p_zero_s(
    machinery: &DecayMachinery,
    state: &OccupationState,
    s: usize,
) -> Result<(f64, [f64; 3])> {
    let t = machinery.channel(state, s)?;
    Ok((t.p_zero(), [t.direct_condensate, t.direct_sideband, t.interference]))
}

/// `n' = (N₀ + 1 + P_{N₀+2} - P_{N₀}) / (N + 1)`.
pub fn condensate_update(n0: f64, n: f64, p_plus: f64, p_zero: f64) -> f64 {
    (n0 + 1.0 + (p_plus - p_zero)) / (n + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarValidity {
    pub p_max: f64,
    pub threshold: f64,
    pub margin: f64,
    pub a_estimate: usize,
    pub n_condensed: f64,
    pub n_total: f64,
    pub expansion_ok: bool,
    pub bar_condition_ok: bool,
}

impl BarValidity {
    pub fn is_valid(&self) -> bool {
        self.expansion_ok && self.bar_condition_ok
    }

    /// `"expansion"`, `"bar"`, `"expansion+bar"` or `None`.
    pub fn reason(&self) -> Option<&'static str> {
        match (self.expansion_ok, self.bar_condition_ok) {
            (true, true) => None,
            (false, true) => Some("expansion"),
            (true, false) => Some("bar"),
            (false, false) => Some("expansion+bar"),
        }
    }
}

pub fn bar_validity(
    p_plus: f64,
    p_zero: f64,
    n0: f64,
    n: f64,
    a_estimate: usize,
    threshold: f64,
    margin: f64,
) -> BarValidity {
    let p_max = p_plus.max(p_zero);
    let competitor = (a_estimate as f64).max(n - n0);
    BarValidity {
        p_max,
        threshold,
        margin,
        a_estimate,
        n_condensed: n0,
        n_total: n,
        expansion_ok: p_max < threshold,
        bar_condition_ok: n0 > margin * competitor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOutcome {
    pub p_plus: f64,
    pub p_zero: f64,
    /// (condensate path, sideband path, interference).
    pub p_zero_terms: [f64; 3],
    pub n0_mean: f64,
    pub n_total: f64,
    pub n_prime: f64,
    pub n_prime_minus_n: f64,
    pub p_plus_err: f64,
    pub p_zero_err: f64,
    /// Standard error of the per-sample `n' - n`.
    pub delta_err: f64,
    /// Standard error of `P_{N₀+2} - P_{N₀}`.
    pub net_err: f64,
    pub samples: usize,
    pub validity: BarValidity,
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo average over thermal ground occupations, exact over `s` and
/// over the excited-level Boltzmann weights. Sample `i` uses seed `seed + i`.
pub fn averaged_outcome(
    machinery: &DecayMachinery,
    t_g: f64,
    t_e: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DecayOutcome> {
    averaged_outcome_at(machinery, machinery.spec.n_atoms, t_g, t_e, n_samples, seed)
}

/// As [`averaged_outcome`] with the total atom number overridden.
pub fn averaged_outcome_at(
    machinery: &DecayMachinery,
    n_atoms: u64,
    t_g: f64,
    t_e: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DecayOutcome> {
    if n_samples == 0 {
        return invalid("at least one sample is required");
    }
    let mut spec = machinery.spec.clone();
    spec.n_atoms = n_atoms;
    spec.n_condensed = spec.n_condensed.min(n_atoms);
    let sampler = ThermalSampler::new(&spec)?;
    let weights = excited_weights(&machinery.excited_energies, t_e)?;
    let n = n_atoms as f64;
    let draws: Vec<Result<(f64, ChannelTerms)>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let ground = sampler.sample_ground(t_g, &mut rng)?;
            let state = OccupationState { ground, condensate: sampler.condensate, excited: 0 };
            let terms = machinery.total(&state, &weights)?;
            Ok((state.n_condensed() as f64, terms))
        })
        .collect();
    let mut n0s = Vec::with_capacity(n_samples);
    let mut plus = Vec::with_capacity(n_samples);
    let mut zero = Vec::with_capacity(n_samples);
    let mut delta = Vec::with_capacity(n_samples);
    let mut net = Vec::with_capacity(n_samples);
    let mut terms = [0.0; 3];
    for d in draws {
        let (n0, t) = d?;
        n0s.push(n0);
        plus.push(t.p_plus);
        zero.push(t.p_zero());
        delta.push(condensate_update(n0, n, t.p_plus, t.p_zero()) - n0 / n);
        net.push(t.p_plus - t.p_zero());
        terms[0] += t.direct_condensate;
        terms[1] += t.direct_sideband;
        terms[2] += t.interference;
    }
    let k = n_samples as f64;
    for x in &mut terms {
        *x /= k;
    }
    let n0_mean = n0s.iter().sum::<f64>() / k;
    let (p_plus, p_plus_err) = mean_and_error(&plus);
    let (p_zero, p_zero_err) = mean_and_error(&zero);
    let (_, delta_err) = mean_and_error(&delta);
    let (_, net_err) = mean_and_error(&net);
    let n_prime = condensate_update(n0_mean, n, p_plus, p_zero);
    let s = &machinery.settings;
    let validity = bar_validity(
        p_plus,
        p_zero,
        n0_mean,
        n,
        machinery.level_count(&weights),
        s.threshold,
        s.margin,
    );
    Ok(DecayOutcome {
        p_plus,
        p_zero,
        p_zero_terms: terms,
        n0_mean,
        n_total: n,
        n_prime,
        n_prime_minus_n: n_prime - n0_mean / n,
        p_plus_err,
        p_zero_err,
        delta_err,
        net_err,
        samples: n_samples,
        validity,
    })
}
