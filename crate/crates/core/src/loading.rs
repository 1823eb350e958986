//! Sequential pump events with rethermalization in between.

use crate::basis::{shell_degeneracy, TrapSpec};
use crate::decay::{averaged_outcome_at, bar_validity, BarValidity, DecayMachinery};
use crate::error::{invalid, Result};

/// Occupation of all non-condensate modes with `μ` at the condensate energy.
pub fn non_condensed_at(t: f64, shells_g: usize, omega: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (1..shells_g)
        .map(|n| {
            let x = n as f64 * omega / t;
            if x > 700.0 {
                0.0
            } else {
                shell_degeneracy(n) as f64 / x.exp_m1()
            }
        })
        .sum()
}

/// Temperature `k_B T/ω` for which the truncated ideal gas with `μ` pinned at
/// the condensate energy holds `n (1 - fraction)` atoms outside the condensate.
pub fn fraction_to_temperature(fraction: f64, n: f64, shells_g: usize, omega: f64) -> Result<f64> {
    if !(fraction > 0.0) || fraction > 1.0 {
        return invalid(format!("condensate fraction must lie in (0, 1], got {fraction}"));
    }
    if !(n > 0.0) || !(omega > 0.0) {
        return invalid("atom number and trap frequency must be positive");
    }
    let target = n * (1.0 - fraction);
    if target == 0.0 || shells_g < 2 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1e3 * omega);
    while non_condensed_at(hi, shells_g, omega) < target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * omega {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if non_condensed_at(mid, shells_g, omega) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConfig {
    pub t_e: f64,
    pub initial_fraction: f64,
    pub steps: usize,
    pub samples_per_step: usize,
    pub seed: u64,
    /// Set the excited temperature equal to the ground one at every step.
    pub t_e_follows_t_g: bool,
}

impl Default for LoadingConfig {
    fn default() -> Self {
        LoadingConfig {
            t_e: 1.0,
            initial_fraction: 0.99,
            steps: 100,
            samples_per_step: 64,
            seed: 0,
            t_e_follows_t_g: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingStep {
    pub step: usize,
    /// Atom number after the event.
    pub n_atoms: u64,
    pub n0_mean: f64,
    pub fraction: f64,
    /// Standard error of the fraction change in this step.
    pub stderr: f64,
    /// Ground temperature the event was evaluated at.
    pub t_g: f64,
    pub p_plus: f64,
    pub p_zero: f64,
    pub validity: BarValidity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingTrajectory {
    pub initial_atoms: u64,
    pub initial_fraction: f64,
    pub steps: Vec<LoadingStep>,
    pub first_invalid: Option<usize>,
}

/// Iterates single-photon events starting from `spec.n_atoms` atoms. With
/// `machinery = None` both channel probabilities are zero.
pub fn run_loading(
    machinery: Option<&DecayMachinery>,
    spec: &TrapSpec,
    config: &LoadingConfig,
) -> Result<LoadingTrajectory> {
    spec.validate()?;
    let f0 = config.initial_fraction;
    if !(f0 > 0.0) || f0 > 1.0 {
        return invalid(format!("initial fraction must lie in (0, 1], got {f0}"));
    }
    if config.samples_per_step == 0 {
        return invalid("samples per step must be at least 1");
    }
    let mut n = spec.n_atoms;
    let mut n0 = f0 * n as f64;
    let mut steps = Vec::with_capacity(config.steps);
    let mut first_invalid = None;
    for k in 1..=config.steps {
        let fraction = (n0 / n as f64).min(1.0);
        let t_g = fraction_to_temperature(fraction, n as f64, spec.shells_g, spec.omega)?;
        let t_e = if config.t_e_follows_t_g { t_g } else { config.t_e };
        let (p_plus, p_zero, stderr, validity) = match machinery {
            Some(m) => {
                let seed = config.seed.wrapping_add((k as u64) << 32);
                let o = averaged_outcome_at(m, n, t_g, t_e, config.samples_per_step, seed)?;
                let v = bar_validity(
                    o.p_plus,
                    o.p_zero,
                    n0,
                    n as f64,
                    o.validity.a_estimate,
                    m.settings.threshold,
                    m.settings.margin,
                );
                (o.p_plus, o.p_zero, o.net_err / (n as f64 + 1.0), v)
            }
            None => (0.0, 0.0, 0.0, bar_validity(0.0, 0.0, n0, n as f64, 0, 0.1, 10.0)),
        };
        if !validity.is_valid() && first_invalid.is_none() {
            first_invalid = Some(k);
        }
        n0 += 1.0 + (p_plus - p_zero);
        n += 1;
        steps.push(LoadingStep {
            step: k,
            n_atoms: n,
            n0_mean: n0,
            fraction: n0 / n as f64,
            stderr,
            t_g,
            p_plus,
            p_zero,
            validity,
        });
    }
    Ok(LoadingTrajectory { initial_atoms: spec.n_atoms, initial_fraction: f0, steps, first_invalid })
}
