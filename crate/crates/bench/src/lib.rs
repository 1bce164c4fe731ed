//! Shared fixtures for the benchmarks.

use vjcal_core::data::{filter_support_density, synthesize, DEFAULT_MIN_COUNT};
use vjcal_core::submodels::DEFAULT_D_SUPP;
use vjcal_core::{Dataset, ParameterVector, RobotDescription, SynthSpec};

pub struct Fixture {
    pub desc: RobotDescription,
    pub data: Dataset,
    pub truth: ParameterVector,
    /// Initial guess with joint-correction curves over the data's support.
    pub theta0: ParameterVector,
}

/// Noisy synthetic data on the bundled robot, density filtered.
pub fn fixture(seed: u64, n_samples: usize) -> Fixture {
    let desc = RobotDescription::kr30_like();
    let mut spec = SynthSpec::new(seed, n_samples);
    spec.noise_sigma_um = 5.0;
    let (raw, truth) = synthesize(&desc, &spec).expect("synthesis");
    let (data, ranges) = filter_support_density(&raw, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT).expect("density filter");
    let theta0 = ParameterVector::initial_with_support(&ranges, DEFAULT_D_SUPP).expect("support grid");
    Fixture {
        desc,
        data,
        truth,
        theta0,
    }
}
