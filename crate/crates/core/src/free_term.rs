//! Free terms `ψ(t)` evaluated path-by-path at the grid nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::PathView;

/// A free term `ψ(t, ω)`, evaluated at node `i` of one path.
///
/// Implementations must be pure so the solver can evaluate them concurrently.
pub trait FreeTerm: Send + Sync {
    fn value(&self, node: usize, path: &PathView<'_>) -> f64;

    /// `ψ(t)` depends only on the path up to `t`.
    fn is_adapted(&self) -> bool {
        false
    }

    /// Checks component indices against the Brownian dimension and Teugels rank.
    fn check_dims(&self, _brownian_dim: usize, _rank: usize) -> Result<()> {
        Ok(())
    }

    fn describe(&self) -> String {
        "custom".into()
    }
}

/// Config-selectable free terms built from path functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FreeTermSpec {
    Constant {
        value: f64,
    },
    /// `ψ(t) = t`.
    Time,
    /// `W^{(c)}_t`.
    Brownian {
        #[serde(default)]
        component: usize,
    },
    /// `W^{(c)}_T` for every `t`.
    BrownianTerminal {
        #[serde(default)]
        component: usize,
    },
    Levy,
    LevyTerminal,
    /// `H^{(i)}_t`, 1-based index.
    Teugels {
        index: usize,
    },
    TeugelsTerminal {
        index: usize,
    },
    Sum {
        terms: Vec<FreeTermSpec>,
    },
    Scaled {
        factor: f64,
        term: Box<FreeTermSpec>,
    },
    Max {
        terms: Vec<FreeTermSpec>,
    },
    Min {
        terms: Vec<FreeTermSpec>,
    },
}

impl FreeTermSpec {
    pub fn constant(value: f64) -> Self {
        FreeTermSpec::Constant { value }
    }

    pub fn scaled(factor: f64, term: FreeTermSpec) -> Self {
        FreeTermSpec::Scaled {
            factor,
            term: Box::new(term),
        }
    }

    pub fn negated(term: FreeTermSpec) -> Self {
        Self::scaled(-1.0, term)
    }

    pub fn sum(terms: Vec<FreeTermSpec>) -> Self {
        FreeTermSpec::Sum { terms }
    }

    pub fn shifted(term: FreeTermSpec, c: f64) -> Self {
        Self::sum(vec![term, Self::constant(c)])
    }
}

fn terminal(path: &PathView<'_>) -> usize {
    path.n_steps()
}

impl FreeTerm for FreeTermSpec {
    fn value(&self, node: usize, path: &PathView<'_>) -> f64 {
        match self {
            FreeTermSpec::Constant { value } => *value,
            FreeTermSpec::Time => path.time(node),
            FreeTermSpec::Brownian { component } => path.w(node)[*component],
            FreeTermSpec::BrownianTerminal { component } => path.w(terminal(path))[*component],
            FreeTermSpec::Levy => path.l(node),
            FreeTermSpec::LevyTerminal => path.l(terminal(path)),
            FreeTermSpec::Teugels { index } => path.h(node)[index - 1],
            FreeTermSpec::TeugelsTerminal { index } => path.h(terminal(path))[index - 1],
            FreeTermSpec::Sum { terms } => terms.iter().map(|t| t.value(node, path)).sum(),
            FreeTermSpec::Scaled { factor, term } => factor * term.value(node, path),
            FreeTermSpec::Max { terms } => terms
                .iter()
                .map(|t| t.value(node, path))
                .fold(f64::NEG_INFINITY, f64::max),
            FreeTermSpec::Min { terms } => terms
                .iter()
                .map(|t| t.value(node, path))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn is_adapted(&self) -> bool {
        match self {
            FreeTermSpec::Constant { .. }
            | FreeTermSpec::Time
            | FreeTermSpec::Brownian { .. }
            | FreeTermSpec::Levy
            | FreeTermSpec::Teugels { .. } => true,
            FreeTermSpec::BrownianTerminal { .. } | FreeTermSpec::LevyTerminal | FreeTermSpec::TeugelsTerminal { .. } => {
                false
            }
            FreeTermSpec::Sum { terms } | FreeTermSpec::Max { terms } | FreeTermSpec::Min { terms } => {
                terms.iter().all(|t| t.is_adapted())
            }
            FreeTermSpec::Scaled { term, .. } => term.is_adapted(),
        }
    }

    fn check_dims(&self, brownian_dim: usize, rank: usize) -> Result<()> {
        match self {
            FreeTermSpec::Brownian { component } | FreeTermSpec::BrownianTerminal { component } => {
                if *component >= brownian_dim {
                    return Err(Error::invalid(
                        "free_term.component",
                        format!("component {component} out of range for dimension {brownian_dim}"),
                    ));
                }
            }
            FreeTermSpec::Teugels { index } | FreeTermSpec::TeugelsTerminal { index } => {
                if *index == 0 || *index > rank {
                    return Err(Error::invalid(
                        "free_term.index",
                        format!("Teugels index {index} out of range 1..={rank}"),
                    ));
                }
            }
            FreeTermSpec::Sum { terms } | FreeTermSpec::Max { terms } | FreeTermSpec::Min { terms } => {
                if terms.is_empty() && !matches!(self, FreeTermSpec::Sum { .. }) {
                    return Err(Error::invalid("free_term.terms", "needs at least one term"));
                }
                for t in terms {
                    t.check_dims(brownian_dim, rank)?;
                }
            }
            FreeTermSpec::Scaled { factor, term } => {
                if !factor.is_finite() {
                    return Err(Error::invalid("free_term.factor", "must be finite"));
                }
                term.check_dims(brownian_dim, rank)?;
            }
            FreeTermSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid("free_term.value", "must be finite"));
                }
            }
            FreeTermSpec::Time | FreeTermSpec::Levy | FreeTermSpec::LevyTerminal => {}
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// `−ψ`, borrowing the underlying term.
pub struct Negated<'a>(pub &'a dyn FreeTerm);

impl FreeTerm for Negated<'_> {
    fn value(&self, node: usize, path: &PathView<'_>) -> f64 {
        -self.0.value(node, path)
    }

    fn is_adapted(&self) -> bool {
        self.0.is_adapted()
    }

    fn check_dims(&self, brownian_dim: usize, rank: usize) -> Result<()> {
        self.0.check_dims(brownian_dim, rank)
    }

    fn describe(&self) -> String {
        format!("-({})", self.0.describe())
    }
}

/// `ψ + ε·ξ`.
pub struct Perturbed<'a> {
    pub base: &'a dyn FreeTerm,
    pub direction: &'a dyn FreeTerm,
    pub eps: f64,
}

impl FreeTerm for Perturbed<'_> {
    fn value(&self, node: usize, path: &PathView<'_>) -> f64 {
        let base = self.base.value(node, path);
        if self.eps == 0.0 {
            base
        } else {
            base + self.eps * self.direction.value(node, path)
        }
    }

    fn is_adapted(&self) -> bool {
        self.base.is_adapted() && self.direction.is_adapted()
    }

    fn check_dims(&self, brownian_dim: usize, rank: usize) -> Result<()> {
        self.base.check_dims(brownian_dim, rank)?;
        self.direction.check_dims(brownian_dim, rank)
    }
}

/// Adapter for closures `(node, path) -> value`.
pub struct FnFreeTerm<F> {
    f: F,
    adapted: bool,
}

impl<F> FnFreeTerm<F>
where
    F: Fn(usize, &PathView<'_>) -> f64 + Send + Sync,
{
    pub fn new(f: F, adapted: bool) -> Self {
        Self { f, adapted }
    }
}

impl<F> FreeTerm for FnFreeTerm<F>
where
    F: Fn(usize, &PathView<'_>) -> f64 + Send + Sync,
{
    fn value(&self, node: usize, path: &PathView<'_>) -> f64 {
        (self.f)(node, path)
    }

    fn is_adapted(&self) -> bool {
        self.adapted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{simulate_paths, JumpDistribution, LevySpec, TimeGrid};
    use crate::state::NodeStates;
    use crate::teugels::{assemble_h, basis_for};

    fn states() -> NodeStates {
        let spec = LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(1.0, 1.0)])).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let paths = simulate_paths(&spec, &grid, 8, 5, 1).unwrap();
        let incs = assemble_h(&basis_for(&spec, 1).unwrap(), &paths).unwrap();
        NodeStates::new(&paths, &incs).unwrap()
    }

    #[test]
    fn builtin_terms_read_path_states() {
        let st = states();
        let v = st.view(2);
        let w_t = FreeTermSpec::BrownianTerminal { component: 0 };
        assert_eq!(w_t.value(1, &v), v.w(4)[0]);
        assert!(!w_t.is_adapted());
        let h = FreeTermSpec::Teugels { index: 1 };
        assert_eq!(h.value(2, &v), v.h(2)[0]);
        assert!((h.value(4, &v) - (v.n(4) - 1.0)).abs() < 1e-12);
        let combo = FreeTermSpec::sum(vec![FreeTermSpec::scaled(2.0, FreeTermSpec::Time), FreeTermSpec::constant(1.0)]);
        assert_eq!(combo.value(2, &v), 2.0);
        assert!(combo.is_adapted());
        let m = FreeTermSpec::Max {
            terms: vec![FreeTermSpec::constant(-1.0), FreeTermSpec::constant(0.5)],
        };
        assert_eq!(m.value(0, &v), 0.5);
        assert_eq!(Negated(&m).value(0, &v), -0.5);
    }

    #[test]
    fn dimension_checks() {
        assert!(FreeTermSpec::Teugels { index: 2 }.check_dims(1, 1).is_err());
        assert!(FreeTermSpec::Teugels { index: 0 }.check_dims(1, 1).is_err());
        assert!(FreeTermSpec::Brownian { component: 1 }.check_dims(1, 1).is_err());
        assert!(FreeTermSpec::BrownianTerminal { component: 1 }.check_dims(2, 0).is_ok());
    }

    #[test]
    fn json_form() {
        let t: FreeTermSpec = serde_json::from_str(r#"{"type":"brownian_terminal"}"#).unwrap();
        assert_eq!(t, FreeTermSpec::BrownianTerminal { component: 0 });
        let s: FreeTermSpec =
            serde_json::from_str(r#"{"type":"scaled","factor":-1,"term":{"type":"teugels_terminal","index":1}}"#).unwrap();
        assert_eq!(s, FreeTermSpec::negated(FreeTermSpec::TeugelsTerminal { index: 1 }));
    }
}
