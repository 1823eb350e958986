use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{mode_energy, ModeIndex, TrapSpec};
use crate::coupling::AlphaTensor;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeneratorOptions {
    /// Add the bare excited-trap energies `ω_l^e` to the diagonal.
    pub bare_excited_energies: bool,
}

/// Zeroth-order effective Hamiltonian restricted to the excited modes.
///
/// Amplitudes evolve as `dc/dt = -i H c` with
/// `H_{ll'} = -i (Γ N₀/2) α_{l00l'}`; its anti-Hermitian part
/// `-(Γ N₀/2) α^r_{l00l'}` is negative semidefinite.
#[derive(Debug, Clone)]
pub struct EffectiveGenerator {
    pub matrix: DMatrix<Complex64>,
    /// `N₀ (ω₀^g + ω₀)`; drops out of every probability.
    pub phase_offset: f64,
    pub n_condensed: f64,
    pub gamma: f64,
}

fn check_basis(alpha: &AlphaTensor, spec: &TrapSpec) -> Result<usize> {
    if alpha.excited != spec.excited_modes()? || alpha.ground != spec.ground_modes()? {
        return invalid("alpha tensor was built for a different mode basis");
    }
    match alpha.ground_index(&ModeIndex::GROUND) {
        Some(i) => Ok(i),
        None => invalid("ground basis lacks the condensate mode"),
    }
}

pub fn build_generator(
    alpha: &AlphaTensor,
    spec: &TrapSpec,
    opts: GeneratorOptions,
) -> Result<EffectiveGenerator> {
    let c = check_basis(alpha, spec)?;
    let n0 = spec.n_condensed as f64;
    let scale = Complex64::new(0.0, -0.5 * spec.gamma * n0);
    let mut matrix = alpha.excited_block(c, c) * scale;
    if opts.bare_excited_energies {
        for (i, l) in alpha.excited.iter().enumerate() {
            matrix[(i, i)] += mode_energy(l, spec);
        }
    }
    let condensate_energy = mode_energy(&ModeIndex::GROUND, spec);
    Ok(EffectiveGenerator {
        matrix,
        phase_offset: n0 * condensate_energy + spec.transition_frequency,
        n_condensed: n0,
        gamma: spec.gamma,
    })
}

impl EffectiveGenerator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(H - H†)/(2i)`; amplitude norms are non-increasing iff this is NSD.
    pub fn decay_part(&self) -> DMatrix<Complex64> {
        (&self.matrix - self.matrix.adjoint()) * Complex64::new(0.0, -0.5)
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }
}

/// First-order part of the effective Hamiltonian for one initial occupation.
///
/// For each non-condensate ground mode `m` the excited-space blocks are
/// `raising_{ll'} = -iΓ/2 α_{l m 0 l'}` (operator `g₀† g_m`) and
/// `lowering_{ll'} = -iΓ/2 α_{l 0 m l'}` (operator `g_m† g₀`), kept without
/// Bose factors; those are stored per mode alongside.
#[derive(Debug, Clone)]
pub struct FirstOrderCoupling {
    /// Ground-mode indices `m ≠ 0` in basis order.
    pub modes: Vec<usize>,
    pub raising: Vec<DMatrix<Complex64>>,
    pub lowering: Vec<DMatrix<Complex64>>,
    /// `sqrt((N₀+1) N_m)`.
    pub raising_bose: Vec<f64>,
    /// `sqrt(N₀ (N_m+1))`.
    pub lowering_bose: Vec<f64>,
}

impl FirstOrderCoupling {
    /// `occupations[i]` is the initial population of ground mode `i`.
    pub fn new(alpha: &AlphaTensor, spec: &TrapSpec, occupations: &[u64]) -> Result<Self> {
        let c = check_basis(alpha, spec)?;
        if occupations.len() != alpha.n_ground() {
            return invalid("occupation list does not match the ground basis");
        }
        let half = Complex64::new(0.0, -0.5 * spec.gamma);
        let n0 = occupations[c] as f64;
        let modes: Vec<usize> = (0..alpha.n_ground()).filter(|&m| m != c).collect();
        let raising = modes.iter().map(|&m| alpha.excited_block(m, c) * half).collect();
        let lowering = modes.iter().map(|&m| alpha.excited_block(c, m) * half).collect();
        let raising_bose =
            modes.iter().map(|&m| ((n0 + 1.0) * occupations[m] as f64).sqrt()).collect();
        let lowering_bose =
            modes.iter().map(|&m| (n0 * (occupations[m] as f64 + 1.0)).sqrt()).collect();
        Ok(FirstOrderCoupling { modes, raising, lowering, raising_bose, lowering_bose })
    }

    /// Lowering coefficient for the `k`-th listed mode with its Bose factor applied.
    pub fn lowering_full(&self, k: usize) -> DMatrix<Complex64> {
        &self.lowering[k] * Complex64::new(self.lowering_bose[k], 0.0)
    }

    pub fn raising_full(&self, k: usize) -> DMatrix<Complex64> {
        &self.raising[k] * Complex64::new(self.raising_bose[k], 0.0)
    }
}
