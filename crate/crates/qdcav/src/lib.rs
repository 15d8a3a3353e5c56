//! Two quantum dots in a single-mode cavity with a polaron-transformed
//! phonon bath: operator algebra, bath kernels, Liouvillian generators,
//! steady states and the photon-number rate reduction.

pub mod fock_algebra;
pub mod generator_builder;
pub mod phonon_kernel;
pub mod photon_rate_reduction;
pub mod quadrature;
pub mod sparse;
pub mod steady_state;
