//! Simulation core for H-Brownian Gibbsian line ensembles.
//!
//! The crate is organised bottom-up:
//!
//! * [`hamiltonian`] interaction energies and the λ-exponential checks,
//! * [`bridge`] Brownian-bridge analytics and samplers,
//! * [`lattice`] grids, discrete paths and exact discrete Boltzmann laws,
//! * [`mcmc`] the Metropolis jump chain, its monotone coupling and exact generator,
//! * [`observables`] parameter schedules and Monte Carlo estimators built on bridges.
//!
//! All randomness flows through [`rng::StreamRng`] streams derived by
//! [`rng::seed_policy`], so every sampler is replayable from a seed.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod error;
pub mod ext;
pub mod hamiltonian;
pub mod lattice;
pub mod mcmc;
pub mod numeric;
pub mod observables;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use hamiltonian::Hamiltonian;
