//! Workloads shared by the benchmarks.

use pilot_core::eval::{gen_additive, gen_linear, gen_piecewise};
use pilot_core::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workload {
    /// Ten predictors, linear signal.
    Linear,
    /// Four predictors: ramp, step, saturating curve, noise.
    Additive,
    /// Three predictors, step signal.
    Piecewise,
}

impl Workload {
    pub const ALL: [Workload; 3] = [Workload::Linear, Workload::Additive, Workload::Piecewise];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Linear => "linear",
            Workload::Additive => "additive",
            Workload::Piecewise => "piecewise",
        }
    }

    pub fn dataset(self, n: usize, seed: u64) -> Dataset {
        let ds = match self {
            Workload::Linear => gen_linear(n, 10, &[1.0, -0.5, 2.0, 0.0, 0.3, -1.2, 0.8, 0.0, 1.5, -0.7], 0.1, seed),
            Workload::Additive => gen_additive(n, seed),
            Workload::Piecewise => gen_piecewise(n, seed),
        };
        ds.expect("generator arguments are valid")
    }
}
