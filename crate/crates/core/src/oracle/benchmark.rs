//! Two-mode reference problem for comparing the expansion with the oracle.

use crate::basis::{ModeIndex, TrapSpec};
use crate::coupling::{build_alpha_tensor, AlphaSettings};
use crate::decay::{p_plus_s, p_zero_s, DecayMachinery, DecaySettings, OccupationState};
use crate::error::Result;

use super::{integrate_cascade, OracleOptions};

/// Sideband population of the benchmark's second ground level.
pub const BENCHMARK_SIDEBAND: u64 = 2;

/// One excited level `(0,0,0)`, ground levels `(0,0,0)` and `(0,0,2)`,
/// `η² = 0.5`, `Γ = 1`. The even-parity sideband keeps both channels allowed.
pub fn benchmark_spec(n0: u64) -> TrapSpec {
    TrapSpec {
        shells_e: 1,
        shells_g: 3,
        ground_mode_list: Some(vec![ModeIndex::GROUND, ModeIndex::new(0, 0, 2)]),
        eta_sq: 0.5,
        gamma: 1.0,
        n_atoms: n0 + BENCHMARK_SIDEBAND,
        n_condensed: n0,
        ..TrapSpec::default()
    }
}

pub fn benchmark_state(n0: u64) -> OccupationState {
    OccupationState { ground: vec![n0, BENCHMARK_SIDEBAND], condensate: 0, excited: 0 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRow {
    pub n0: u64,
    pub p_plus: f64,
    pub p_zero: f64,
    pub oracle_plus: f64,
    pub oracle_zero: f64,
}

impl BenchmarkRow {
    pub fn rel_plus(&self) -> f64 {
        (self.p_plus - self.oracle_plus).abs() / self.oracle_plus
    }

    pub fn rel_zero(&self) -> f64 {
        (self.p_zero - self.oracle_zero).abs() / self.oracle_zero
    }
}

pub fn run_benchmark(n0: u64, alpha_settings: &AlphaSettings) -> Result<BenchmarkRow> {
    let spec = benchmark_spec(n0);
    let alpha = build_alpha_tensor(&spec, alpha_settings)?;
    let m = DecayMachinery::new(&alpha, &spec, DecaySettings::default())?;
    let state = benchmark_state(n0);
    let p_plus = p_plus_s(&m, &state, 1)?;
    let (p_zero, _) = p_zero_s(&m, &state, 1)?;
    let r = integrate_cascade(&spec, &state, &alpha, &OracleOptions::default())?;
    Ok(BenchmarkRow {
        n0,
        p_plus,
        p_zero,
        oracle_plus: r.condensate_channel(0, n0 + 2),
        oracle_zero: r.condensate_channel(0, n0),
    })
}
