//! Fixtures shared by the benchmarks.

use fdsec_core::path_following::{attach_eve_slacks, initialize, IterationTrace, SolverOptions};
use fdsec_core::{DesignPoint, Instance, Mode, Scenario, SystemConfig};

/// Normalized default scenario for `seed`.
pub fn scenario(seed: u64, mode: Mode) -> Scenario {
    let cfg = SystemConfig { rng_seed: seed, ..SystemConfig::default() };
    let inst = Instance::generate(&cfg).expect("default configuration is valid");
    Scenario::build(&inst, mode).expect("mode layout").normalized()
}

/// Initialized point with Eve slacks, ready for the main iterations.
pub fn initial_point(sc: &Scenario) -> DesignPoint {
    let opts = SolverOptions::default();
    let mut d = initialize(sc, &opts, &mut IterationTrace::default()).expect("initialization");
    attach_eve_slacks(sc, &mut d, opts.expansion.beta_min);
    d
}
