//! Franck-Condon amplitudes and the α coupling tensor.

pub mod alpha;
pub mod cache;
pub mod fc;
pub mod pv;
pub mod sphere;

pub use alpha::{build_alpha_tensor, build_alpha_tensor_with, AlphaSettings, AlphaTensor, TensorKey};
pub use fc::{fc_1d, fc_3d};
pub use pv::{pv_integrate, pv_integrate_with, PvRule};
pub use sphere::{build_sphere_quadrature, EmissionPattern, SphereQuadrature};
