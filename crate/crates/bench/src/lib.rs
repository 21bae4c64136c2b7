//! Fixtures shared by the benchmarks.

use bsviel::{JumpDistribution, JumpLaw, LevySpec};

/// `λ = 2`, jumps `±1`, `σ = 0.5` on `T = 1`.
pub fn jump_diffusion() -> LevySpec {
    LevySpec::new(
        1.0,
        1,
        0.0,
        0.5,
        JumpLaw::CompoundPoisson {
            rate: 2.0,
            jumps: JumpDistribution::atoms(&[(1.0, 0.5), (-1.0, 0.5)]),
        },
    )
    .expect("valid spec")
}
