//! Split tamed unadjusted Langevin sampling for potentials with
//! superlinearly growing gradients, together with grid reference densities,
//! distance estimators and spectral-gap estimation of the Langevin generator.

pub mod error;
pub mod isoperimetry;
pub mod potentials;
pub mod reference;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use isoperimetry::{CriticalPoint, SpectrumResult};
pub use potentials::PotentialSpec;
pub use reference::{GridDensity, GridSpec, MetricReport};
pub use sampler::{ChainConfig, InitLaw, SampleBatch, Scheme};
