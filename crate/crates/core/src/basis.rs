//! Three-dimensional isotropic oscillator modes.
//!
//! Modes are ordered shell-major (`nx + ny + nz` ascending) and
//! lexicographically in `(nx, ny, nz)` inside a shell. Every tensor in the
//! crate is laid out in this order.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl ModeIndex {
    pub const GROUND: ModeIndex = ModeIndex { nx: 0, ny: 0, nz: 0 };

    pub fn new(nx: u32, ny: u32, nz: u32) -> Self {
        ModeIndex { nx, ny, nz }
    }

    pub fn shell(&self) -> u32 {
        self.nx + self.ny + self.nz
    }

    pub fn axes(&self) -> [u32; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn from_axes(a: [u32; 3]) -> Self {
        ModeIndex::new(a[0], a[1], a[2])
    }

    /// Position of this mode in the canonical flat ordering.
    pub fn flat_index(&self) -> usize {
        let n = self.shell() as usize;
        // modes in shells below n, then lexicographic rank inside shell n
        let below = n * (n + 1) * (n + 2) / 6;
        let nx = self.nx as usize;
        let ny = self.ny as usize;
        // ascending nx; for fixed nx, ascending ny
        let before_nx: usize = (0..nx).map(|a| n - a + 1).sum();
        below + before_nx + ny
    }

    pub fn from_flat_index(idx: usize) -> Self {
        let mut n = 0usize;
        while (n + 1) * (n + 2) * (n + 3) / 6 <= idx {
            n += 1;
        }
        let mut rem = idx - n * (n + 1) * (n + 2) / 6;
        let mut nx = 0usize;
        while rem >= n - nx + 1 {
            rem -= n - nx + 1;
            nx += 1;
        }
        let ny = rem;
        let nz = n - nx - ny;
        ModeIndex::new(nx as u32, ny as u32, nz as u32)
    }

    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let a = self.axes();
        ModeIndex::from_axes([a[perm[0]], a[perm[1]], a[perm[2]]])
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.nx, self.ny, self.nz)
    }
}

pub fn modes_in_shells(shells: usize) -> usize {
    shells * (shells + 1) * (shells + 2) / 6
}

pub fn shell_degeneracy(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// All modes with `nx + ny + nz < shells`, in canonical order.
pub fn enumerate_modes(shells: usize) -> Result<Vec<ModeIndex>> {
    if shells == 0 {
        return invalid("shell count must be at least 1");
    }
    let mut out = Vec::with_capacity(modes_in_shells(shells));
    for n in 0..shells as u32 {
        for nx in 0..=n {
            for ny in 0..=(n - nx) {
                out.push(ModeIndex::new(nx, ny, n - nx - ny));
            }
        }
    }
    Ok(out)
}

/// Physical configuration. Units: hbar = 1, energies in the trap quantum.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec {
    pub omega: f64,
    pub shells_g: usize,
    pub shells_e: usize,
    /// Lamb-Dicke parameter, recoil energy over trap quantum.
    pub eta_sq: f64,
    pub gamma: f64,
    pub transition_frequency: f64,
    pub n_atoms: u64,
    pub n_condensed: u64,
    /// Keep only the first `k` ground modes of the canonical order.
    pub ground_mode_cap: Option<usize>,
    /// Explicit ground basis; replaces the shell enumeration and cap.
    pub ground_mode_list: Option<Vec<ModeIndex>>,
    pub excited_mode_cap: Option<usize>,
}

impl Default for TrapSpec {
    fn default() -> Self {
        TrapSpec {
            omega: 1.0,
            shells_g: 6,
            shells_e: 2,
            eta_sq: 2.0,
            gamma: 1.0,
            transition_frequency: 0.0,
            n_atoms: 10_000,
            n_condensed: 9_500,
            ground_mode_cap: None,
            ground_mode_list: None,
            excited_mode_cap: None,
        }
    }
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shells_g < 1 || self.shells_e < 1 {
            return invalid("shell counts must be at least 1");
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return invalid(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.eta_sq >= 0.0) || !self.eta_sq.is_finite() {
            return invalid(format!("eta_sq must be non-negative, got {}", self.eta_sq));
        }
        if self.n_condensed > self.n_atoms {
            return invalid(format!(
                "condensed number {} exceeds total {}",
                self.n_condensed, self.n_atoms
            ));
        }
        if self.ground_mode_cap == Some(0) || self.excited_mode_cap == Some(0) {
            return invalid("mode caps must be at least 1");
        }
        if let Some(list) = &self.ground_mode_list {
            if list.is_empty() {
                return invalid("explicit ground mode list is empty");
            }
            for (i, m) in list.iter().enumerate() {
                if m.shell() as usize >= self.shells_g {
                    return invalid(format!("ground mode {m} lies outside {} shells", self.shells_g));
                }
                if list[..i].contains(m) {
                    return invalid(format!("ground mode {m} listed twice"));
                }
            }
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.eta_sq.sqrt()
    }

    pub fn ground_modes(&self) -> Result<Vec<ModeIndex>> {
        if let Some(list) = &self.ground_mode_list {
            return Ok(list.clone());
        }
        capped(enumerate_modes(self.shells_g)?, self.ground_mode_cap)
    }

    pub fn excited_modes(&self) -> Result<Vec<ModeIndex>> {
        capped(enumerate_modes(self.shells_e)?, self.excited_mode_cap)
    }
}

fn capped(mut modes: Vec<ModeIndex>, cap: Option<usize>) -> Result<Vec<ModeIndex>> {
    if let Some(k) = cap {
        if k > modes.len() {
            return invalid(format!("mode cap {k} exceeds the {} available modes", modes.len()));
        }
        modes.truncate(k);
    }
    Ok(modes)
}

/// `omega * (nx + ny + nz + 3/2)`.
pub fn mode_energy(m: &ModeIndex, spec: &TrapSpec) -> f64 {
    spec.omega * (m.shell() as f64 + 1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_counts() {
        assert_eq!(enumerate_modes(10).unwrap().len(), 220);
        assert_eq!(enumerate_modes(4).unwrap().len(), 20);
        assert_eq!(enumerate_modes(1).unwrap(), vec![ModeIndex::GROUND]);
        assert!(enumerate_modes(0).is_err());
    }

    #[test]
    fn canonical_order_and_flat_roundtrip() {
        let modes = enumerate_modes(8).unwrap();
        for (i, m) in modes.iter().enumerate() {
            assert_eq!(m.flat_index(), i);
            assert_eq!(ModeIndex::from_flat_index(i), *m);
        }
        for w in modes.windows(2) {
            assert!((w[0].shell(), w[0]) < (w[1].shell(), w[1]));
        }
    }

    #[test]
    fn energies_and_degeneracy() {
        let spec = TrapSpec::default();
        assert_eq!(mode_energy(&ModeIndex::GROUND, &spec), 1.5);
        assert_eq!(mode_energy(&ModeIndex::new(1, 0, 0), &spec), 2.5);
        let modes = enumerate_modes(3).unwrap();
        let shell2: Vec<_> = modes.iter().filter(|m| m.shell() == 2).collect();
        assert_eq!(shell2.len(), 6);
        assert!(shell2.iter().all(|m| mode_energy(m, &spec) == 3.5));
        for n in 0..12 {
            let count = enumerate_modes(n + 1).unwrap().iter().filter(|m| m.shell() as usize == n).count();
            assert_eq!(count, shell_degeneracy(n));
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = TrapSpec::default();
        assert!(s.validate().is_ok());
        s.n_condensed = s.n_atoms + 1;
        assert!(s.validate().is_err());
        let s = TrapSpec { gamma: 0.0, ..TrapSpec::default() };
        assert!(s.validate().is_err());
        let s = TrapSpec { ground_mode_cap: Some(2), shells_g: 2, ..TrapSpec::default() };
        assert_eq!(s.ground_modes().unwrap(), vec![ModeIndex::GROUND, ModeIndex::new(0, 0, 1)]);
    }

    proptest::proptest! {
        #[test]
        fn energy_permutation_invariant(nx in 0u32..20, ny in 0u32..20, nz in 0u32..20) {
            let spec = TrapSpec::default();
            let m = ModeIndex::new(nx, ny, nz);
            for p in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
                proptest::prop_assert_eq!(mode_energy(&m, &spec), mode_energy(&m.permuted(p), &spec));
            }
            proptest::prop_assert_eq!(ModeIndex::from_flat_index(m.flat_index()), m);
        }
    }
}
