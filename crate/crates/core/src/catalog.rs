//! Named builtin Lévy specifications, generators, test problems and linear
//! coefficient sets.

use crate::forward::LinearCoefficients;
use crate::free_term::FreeTermSpec;
use crate::generators::{GeneratorSpec, RateFn};
use crate::levy::{JumpDistribution, JumpLaw, LevySpec};

fn pm_one(rate: f64, sigma: f64) -> LevySpec {
    LevySpec::new(
        1.0,
        1,
        0.0,
        sigma,
        JumpLaw::CompoundPoisson {
            rate,
            jumps: JumpDistribution::atoms(&[(1.0, 0.5), (-1.0, 0.5)]),
        },
    )
    .expect("valid builtin spec")
}

/// Builtin Lévy specifications on `T = 1`.
pub fn levy_specs() -> Vec<(&'static str, LevySpec)> {
    vec![
        ("brownian", LevySpec::brownian(1.0, 1).expect("valid")),
        ("gaussian_levy", LevySpec::new(1.0, 1, 0.0, 1.0, JumpLaw::None).expect("valid")),
        (
            "unit_poisson",
            LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(1.0, 1.0)])).expect("valid"),
        ),
        ("pm_one", pm_one(2.0, 0.0)),
        ("pm_one_gaussian", pm_one(2.0, 0.5)),
        (
            "three_atoms",
            LevySpec::new(
                1.0,
                1,
                0.1,
                0.3,
                JumpLaw::CompoundPoisson {
                    rate: 1.5,
                    jumps: JumpDistribution::atoms(&[(0.5, 0.3), (-0.4, 0.5), (1.2, 0.2)]),
                },
            )
            .expect("valid"),
        ),
        (
            "uniform_jumps",
            LevySpec::compound_poisson(1.0, 3.0, JumpDistribution::Uniform { low: -0.5, high: 1.0 }).expect("valid"),
        ),
        (
            "normal_jumps",
            LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::Normal { mean: 0.1, std: 0.4 }).expect("valid"),
        ),
    ]
}

/// The builtin risk driver `0.05·y + 0.5|η| + Σ_k 2^{1−k}(ζ_k)⁺`, `k ≤ 3`.
pub fn risk_driver() -> GeneratorSpec {
    GeneratorSpec::Risk {
        rate: RateFn::Constant(0.05),
        kappa: 0.5,
        weights: GeneratorSpec::halving_weights(1.0, 3),
    }
}

/// Builtin generators with representative parameters.
pub fn generators() -> Vec<(&'static str, GeneratorSpec)> {
    vec![
        ("zero", GeneratorSpec::Zero),
        ("constant", GeneratorSpec::Constant { value: 0.3 }),
        ("linear", GeneratorSpec::Linear { theta: -0.5 }),
        (
            "discount",
            GeneratorSpec::Discount {
                rate: RateFn::Piecewise {
                    breaks: vec![0.5],
                    values: vec![0.05, 0.1],
                },
            },
        ),
        ("risk", risk_driver()),
        ("z_abs", GeneratorSpec::ZAbs { kappa: 0.5 }),
        ("shifted_risk", GeneratorSpec::shifted(risk_driver(), 0.1)),
    ]
}

#[derive(Debug, Clone)]
pub struct BuiltinProblem {
    pub name: String,
    pub levy: LevySpec,
    pub psi: FreeTermSpec,
    pub generator: GeneratorSpec,
}

/// Every builtin generator on a Brownian and on a jump specification, each
/// with a terminal free term driven by the relevant noise.
pub fn problems() -> Vec<BuiltinProblem> {
    let mut out = Vec::new();
    let cases = [
        ("brownian", LevySpec::brownian(1.0, 1).expect("valid"), FreeTermSpec::BrownianTerminal { component: 0 }),
        (
            "pm_one_gaussian",
            pm_one(2.0, 0.5),
            FreeTermSpec::sum(vec![
                FreeTermSpec::BrownianTerminal { component: 0 },
                FreeTermSpec::TeugelsTerminal { index: 1 },
            ]),
        ),
    ];
    for (spec_name, levy, psi) in cases {
        for (gen_name, generator) in generators() {
            out.push(BuiltinProblem {
                name: format!("{gen_name}/{spec_name}"),
                levy: levy.clone(),
                psi: psi.clone(),
                generator,
            });
        }
    }
    out
}

/// Builtin constant coefficient sets for the linear adjoint pair.
pub fn linear_coefficients() -> Vec<(&'static str, LinearCoefficients)> {
    vec![
        ("zero", LinearCoefficients::default()),
        ("drift", LinearCoefficients::constant(0.3, &[], &[])),
        ("brownian", LinearCoefficients::constant(0.0, &[0.2], &[])),
        ("jump", LinearCoefficients::constant(0.0, &[], &[0.2])),
        ("mixed", LinearCoefficients::constant(0.1, &[0.2], &[0.15, -0.1])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::validate_contraction;

    #[test]
    fn catalogue_entries_are_valid() {
        for (_, s) in levy_specs() {
            s.validate().unwrap();
        }
        for (_, g) in generators() {
            g.validate().unwrap();
            validate_contraction(&g, 1.0).unwrap();
        }
        assert_eq!(problems().len(), 2 * generators().len());
        for (_, c) in linear_coefficients() {
            assert!(c.bound_integral(1.0) < 1.0);
        }
    }
}
