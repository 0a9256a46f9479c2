//! Numerical probes of the isoperimetric behavior of Gibbs measures:
//! discretized generators and their spectral gaps, critical points and the
//! Hessian-based assumption checks.

mod assumptions;
mod critical;
mod eigen;
mod generator;
mod spectrum;

pub use assumptions::{check_c_assumptions, CAssumptionReport};
pub use critical::{
    classify, find_critical_points, morse_report, Classification, CriticalPoint, CriticalPointSearch,
    MorseReport, SeedGrid, DEGENERACY_THRESHOLD,
};
pub use eigen::{lobpcg_smallest, tridiagonal_smallest, EigenResult, LobpcgOptions};
pub use generator::{discretize_generator, DiscreteGenerator, OperatorInfo, TRIM_NATS};
pub use spectrum::{linear_fit, spectral_gap, spectrum, SpectrumResult, REFINEMENT_TOLERANCE};
