//! Shared fixtures for the benchmarks.

use mrdist_core::generalized_functions::{Density, GeneralizedFunction};
use mrdist_core::kernel::ReproducingKernel;

/// Kernel for a built-in filter.
pub fn kernel(name: &str) -> ReproducingKernel {
    ReproducingKernel::builtin(name).expect("built-in filter")
}

/// Distributions with increasingly expensive pairings.
pub fn subjects() -> Vec<GeneralizedFunction> {
    vec![
        GeneralizedFunction::delta(0.0),
        GeneralizedFunction::density(Density::cos_plus(2.0)),
        GeneralizedFunction::density(Density::x_sin_inv()),
    ]
}
