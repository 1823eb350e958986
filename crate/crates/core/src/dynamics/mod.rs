//! Zeroth- and first-order no-jump dynamics of the single excitation.

pub mod biortho;
pub mod generator;
pub mod series;

pub use biortho::{biortho_decompose, BiorthoDecomp};
pub use generator::{build_generator, EffectiveGenerator, FirstOrderCoupling, GeneratorOptions};
pub use series::{
    a1_time_kernel, cross_integral, gamma_moment, infinite_time_overlap, propagate_a0,
    AmplitudeSeries, TimeTerm, DEGENERACY_REL,
};
