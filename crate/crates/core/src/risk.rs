//! Dynamic risk measures `ρ(t; φ) = Y(t)` and audits of the coherence axioms.

use serde::{Deserialize, Serialize};

use crate::analysis::{compare_solutions, max_m_residual, SharedPaths};
use crate::error::Result;
use crate::free_term::{FreeTermSpec, Negated};
use crate::generators::{Driver, Flag, FlagAudit, GeneratorSpec, RateFn};
use crate::solver::{solve, MSolutionGrid, SolverContext};

/// `f = r(s)·y + κ|Z(s,t)| + Σ_k w_k (U_k(s,t))⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RiskSpec {
    pub rate: RateFn,
    pub kappa: f64,
    pub weights: Vec<f64>,
}

impl RiskSpec {
    pub fn driver(&self) -> GeneratorSpec {
        GeneratorSpec::Risk {
            rate: self.rate.clone(),
            kappa: self.kappa,
            weights: self.weights.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.driver().validate()
    }
}

/// `ρ[path, node]` with the position stream that produced it.
pub struct RiskCurve {
    pub phi: FreeTermSpec,
    pub solution: MSolutionGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub t: f64,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl RiskCurve {
    pub fn rho(&self, path: usize, node: usize) -> f64 {
        self.solution.y(path, node)
    }

    pub fn summary(&self) -> Vec<RiskRow> {
        let sd = self.solution.sd_y();
        (0..=self.solution.n_steps())
            .map(|i| {
                let mut v = self.solution.y_node(i);
                v.sort_by(f64::total_cmp);
                RiskRow {
                    t: self.solution.grid().time(i),
                    mean: self.solution.ey()[i],
                    sd: sd[i],
                    q05: quantile(&v, 0.05),
                    q50: quantile(&v, 0.5),
                    q95: quantile(&v, 0.95),
                }
            })
            .collect()
    }
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Solves the risk equation with free term `−φ`.
pub fn rho(phi: &FreeTermSpec, spec: &RiskSpec, ctx: &SolverContext) -> Result<RiskCurve> {
    spec.validate()?;
    rho_with(phi, &spec.driver(), ctx)
}

pub fn rho_with(phi: &FreeTermSpec, driver: &dyn Driver, ctx: &SolverContext) -> Result<RiskCurve> {
    let solution = solve(&Negated(phi), driver, ctx)?;
    Ok(RiskCurve {
        phi: phi.clone(),
        solution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCheck {
    pub t: f64,
    pub violation_rate: f64,
    pub max_exceedance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubAudit {
    pub name: String,
    pub applicable: bool,
    pub reason: Option<String>,
    pub tolerance: f64,
    pub violation_rate: f64,
    pub max_exceedance: f64,
    pub per_node: Vec<NodeCheck>,
    /// `None` when not applicable.
    pub pass: Option<bool>,
}

impl SubAudit {
    fn not_applicable(name: &str, reason: String) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            reason: Some(reason),
            tolerance: 0.0,
            violation_rate: 0.0,
            max_exceedance: 0.0,
            per_node: Vec::new(),
            pass: None,
        }
    }

    /// Flags a violation at `(path, node)` when `excess(path, node) > tol`.
    fn from_excess(name: &str, n_paths: usize, times: &[f64], tol: f64, excess: impl Fn(usize, usize) -> f64) -> Self {
        let mut total = 0usize;
        let mut worst = 0.0_f64;
        let per_node: Vec<NodeCheck> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut count = 0usize;
                let mut node_worst = 0.0_f64;
                for p in 0..n_paths {
                    let e = excess(p, i);
                    if !(e <= tol) {
                        count += 1;
                        node_worst = node_worst.max(e - tol);
                    }
                }
                total += count;
                worst = worst.max(node_worst);
                let rate = count as f64 / n_paths as f64;
                NodeCheck {
                    t,
                    violation_rate: rate,
                    max_exceedance: node_worst,
                    pass: rate < AUDIT_RATE,
                }
            })
            .collect();
        let pass = per_node.iter().all(|n| n.pass);
        Self {
            name: name.into(),
            applicable: true,
            reason: None,
            tolerance: tol,
            violation_rate: total as f64 / (times.len() * n_paths) as f64,
            max_exceedance: worst,
            per_node,
            pass: Some(pass),
        }
    }
}

/// Largest tolerated per-node violation rate.
pub const AUDIT_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscountPoint {
    pub t: f64,
    /// `Π_{j ≥ i} (1 − r(t_j)Δt)^{-1}`, the factor of the discrete scheme.
    pub discrete: f64,
    /// `exp(∫_t^T r ds)`.
    pub exp_plus: f64,
    /// `exp(−∫_t^T r ds)`.
    pub exp_minus: f64,
    /// `(ρ(φ + c) − ρ(φ)) / (−c)`, averaged over paths.
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationAudit {
    pub audit: SubAudit,
    pub shift: f64,
    pub factors: Vec<DiscountPoint>,
    /// The measured factor is closer to `exp(+∫r)` than to `exp(−∫r)`
    /// wherever the two differ.
    pub matches_exp_plus: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub generator: String,
    pub flags: FlagAudit,
    pub monotonicity: SubAudit,
    pub translation: TranslationAudit,
    pub homogeneity: SubAudit,
    pub sub_additivity: SubAudit,
}

impl CoherenceReport {
    /// Every applicable sub-audit passed.
    pub fn pass(&self) -> bool {
        [&self.monotonicity, &self.translation.audit, &self.homogeneity, &self.sub_additivity]
            .iter()
            .all(|a| a.pass != Some(false))
    }
}

fn missing(audit: &FlagAudit, flags: &[Flag]) -> Option<String> {
    let bad: Vec<&str> = flags.iter().filter(|f| !audit.holds(**f)).map(|f| f.as_str()).collect();
    (!bad.is_empty()).then(|| format!("flag not declared or failed audit: {}", bad.join(", ")))
}

/// Discrete discount factors of the scheme `Δ_i = −c + Δt Σ_{j≥i} r(t_j) Δ_j`.
pub fn discrete_discount(rate: &RateFn, times: &[f64], dt: f64) -> Vec<f64> {
    let n = times.len() - 1;
    let mut out = vec![1.0; n + 1];
    for i in (0..n).rev() {
        out[i] = out[i + 1] / (1.0 - rate.eval(times[i]) * dt);
    }
    out
}

/// Audits monotonicity, translation, homogeneity and sub-additivity of
/// `ρ` on shared paths.
pub fn coherence_audit(
    spec: &RiskSpec,
    phi1: &FreeTermSpec,
    phi2: &FreeTermSpec,
    c: f64,
    lam: f64,
    shared: &SharedPaths,
) -> Result<CoherenceReport> {
    spec.validate()?;
    coherence_audit_with(&spec.driver(), phi1, phi2, c, lam, shared)
}

pub fn coherence_audit_with(
    driver: &dyn Driver,
    phi1: &FreeTermSpec,
    phi2: &FreeTermSpec,
    c: f64,
    lam: f64,
    shared: &SharedPaths,
) -> Result<CoherenceReport> {
    if !(lam.is_finite() && lam > 0.0) {
        return Err(crate::error::Error::invalid("lambda", "must be > 0"));
    }
    if !c.is_finite() {
        return Err(crate::error::Error::invalid("c", "must be finite"));
    }
    let ctx = shared.ctx();
    let flags = shared.audit(driver);
    let grid = shared.grid();
    let times = grid.nodes();
    let n_paths = shared.n_paths();
    let base = rho_with(phi1, driver, ctx)?;
    let y1 = &base.solution;

    let monotonicity = match missing(&flags, &[Flag::SimplifiedForm, Flag::MonotoneInU]) {
        Some(r) => SubAudit::not_applicable("monotonicity", r),
        None => {
            let hi = FreeTermSpec::Max {
                terms: vec![phi1.clone(), phi2.clone()],
            };
            let upper_pos = rho_with(&hi, driver, ctx)?;
            let cmp = compare_solutions(&upper_pos.solution, y1);
            let lower = &upper_pos.solution;
            SubAudit::from_excess("monotonicity", n_paths, &times, cmp.tolerance, |p, i| {
                lower.y(p, i) - y1.y(p, i)
            })
        }
    };

    let translation = {
        let rate = driver.y_rate().filter(|_| driver.flags().linear_y_rate);
        let shifted = rho_with(&FreeTermSpec::shifted(phi1.clone(), c), driver, ctx)?;
        let ys = &shifted.solution;
        let rate_fn = rate.clone().unwrap_or(RateFn::Constant(0.0));
        let discrete = discrete_discount(&rate_fn, &times, grid.dt());
        let factors: Vec<DiscountPoint> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let integral = rate_fn.integral(t, grid.horizon());
                let measured = if c != 0.0 {
                    (0..n_paths).map(|p| ys.y(p, i) - y1.y(p, i)).sum::<f64>() / (n_paths as f64 * -c)
                } else {
                    f64::NAN
                };
                DiscountPoint {
                    t,
                    discrete: discrete[i],
                    exp_plus: integral.exp(),
                    exp_minus: (-integral).exp(),
                    measured,
                }
            })
            .collect();
        let matches_exp_plus = factors
            .iter()
            .filter(|f| (f.exp_plus - f.exp_minus).abs() > 1e-9)
            .all(|f| (f.measured - f.exp_plus).abs() <= (f.measured - f.exp_minus).abs());
        let audit = match rate {
            None => SubAudit::not_applicable("translation", "driver is not of the form r(s)·y + f(t,s,z,u)".into()),
            Some(_) => {
                let scale = discrete.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
                let tol = 2.0 * max_m_residual(&[y1, ys]) + 1e-9 * (1.0 + c.abs() * scale);
                SubAudit::from_excess("translation", n_paths, &times, tol, |p, i| {
                    (ys.y(p, i) - y1.y(p, i) + c * discrete[i]).abs()
                })
            }
        };
        TranslationAudit {
            audit,
            shift: c,
            factors,
            matches_exp_plus,
            note: "difference is -c times the discount factor exp(+∫_t^T r ds); the reciprocal exp(-∫_t^T r ds) \
                   holds only when r is read as minus the discount rate"
                .into(),
        }
    };

    let homogeneity = match missing(&flags, &[Flag::PositivelyHomogeneous]) {
        Some(r) => SubAudit::not_applicable("homogeneity", r),
        None => {
            let scaled = rho_with(&FreeTermSpec::scaled(lam, phi1.clone()), driver, ctx)?;
            let ys = &scaled.solution;
            let tol = 2.0 * max_m_residual(&[ys, y1]) * lam.max(1.0) + 1e-12;
            SubAudit::from_excess("homogeneity", n_paths, &times, tol, |p, i| (ys.y(p, i) - lam * y1.y(p, i)).abs())
        }
    };

    let sub_additivity = match missing(&flags, &[Flag::SubAdditive]) {
        Some(r) => SubAudit::not_applicable("sub_additivity", r),
        None => {
            let second = rho_with(phi2, driver, ctx)?;
            let sum = rho_with(&FreeTermSpec::sum(vec![phi1.clone(), phi2.clone()]), driver, ctx)?;
            let (y2, ys) = (&second.solution, &sum.solution);
            let tol = 2.0 * max_m_residual(&[ys, y1, y2]) + 1e-12;
            SubAudit::from_excess("sub_additivity", n_paths, &times, tol, |p, i| {
                ys.y(p, i) - y1.y(p, i) - y2.y(p, i)
            })
        }
    };

    Ok(CoherenceReport {
        generator: driver.name(),
        flags,
        monotonicity,
        translation,
        homogeneity,
        sub_additivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpDistribution, LevySpec};
    use crate::solver::SolverConfig;

    fn brownian(n: usize, n_paths: usize) -> SharedPaths {
        SharedPaths::simulate(&LevySpec::brownian(1.0, 1).unwrap(), n, n_paths, 11, &SolverConfig::default()).unwrap()
    }

    fn jumps(n: usize, n_paths: usize) -> SharedPaths {
        let spec = LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(1.0, 0.5), (-1.0, 0.5)])).unwrap();
        SharedPaths::simulate(&spec, n, n_paths, 11, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn constant_position_is_cash() {
        let shared = brownian(16, 200);
        let curve = rho(&FreeTermSpec::constant(2.0), &RiskSpec::default(), shared.ctx()).unwrap();
        for i in 0..=16 {
            assert!((curve.rho(5, i) + 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn discounted_constant_follows_discrete_factor() {
        let shared = brownian(64, 100);
        let spec = RiskSpec {
            rate: RateFn::Constant(0.1),
            ..Default::default()
        };
        let curve = rho(&FreeTermSpec::constant(1.0), &spec, shared.ctx()).unwrap();
        let times = shared.grid().nodes();
        let d = discrete_discount(&spec.rate, &times, shared.grid().dt());
        for (i, t) in times.iter().enumerate() {
            assert!((curve.solution.ey()[i] + d[i]).abs() < 1e-4, "{i} {} {}", curve.solution.ey()[i], d[i]);
            assert!((curve.solution.ey()[i] + (0.1 * (1.0 - t)).exp()).abs() < 2e-3);
        }
    }

    #[test]
    fn terminal_brownian_position() {
        let shared = brownian(16, 4000);
        let curve = rho(&FreeTermSpec::BrownianTerminal { component: 0 }, &RiskSpec::default(), shared.ctx()).unwrap();
        let st = shared.ctx().states();
        let (mut err, mut size) = (0.0, 0.0);
        for p in 0..4000 {
            for i in 1..=16 {
                let w = st.view(p).w(i)[0];
                err += (curve.rho(p, i) + w).powi(2);
                size += w * w;
            }
        }
        assert!((err / size).sqrt() < 0.05);
        let rows = curve.summary();
        assert!(rows[16].q05 < rows[16].q50 && rows[16].q50 < rows[16].q95);
    }

    #[test]
    fn zero_driver_translation_is_exact() {
        let shared = brownian(16, 300);
        let zero = FreeTermSpec::constant(0.0);
        let rep = coherence_audit(&RiskSpec::default(), &zero, &zero, 1.0, 2.0, &shared).unwrap();
        assert_eq!(rep.translation.audit.pass, Some(true), "{:?}", rep.translation);
        for f in &rep.translation.factors {
            assert!((f.measured - 1.0).abs() < 1e-9, "{f:?}");
        }
        assert!(rep.pass());
    }

    #[test]
    fn risk_driver_is_coherent() {
        let shared = jumps(16, 4000);
        let spec = RiskSpec {
            rate: RateFn::Constant(0.05),
            kappa: 0.5,
            weights: GeneratorSpec::halving_weights(1.0, 3),
        };
        let phi1 = FreeTermSpec::TeugelsTerminal { index: 1 };
        let phi2 = FreeTermSpec::negated(phi1.clone());
        let rep = coherence_audit(&spec, &phi1, &phi2, 0.7, 2.0, &shared).unwrap();
        assert!(rep.pass(), "{:#?}", rep);
        assert!(rep.translation.matches_exp_plus);
        assert!(rep.monotonicity.applicable && rep.sub_additivity.applicable && rep.homogeneity.applicable);
    }

    #[test]
    fn homogeneity_with_brownian_penalty() {
        let shared = brownian(16, 2000);
        let spec = RiskSpec {
            kappa: 0.5,
            ..Default::default()
        };
        let phi = FreeTermSpec::BrownianTerminal { component: 0 };
        let rep = coherence_audit(&spec, &phi, &FreeTermSpec::constant(0.0), 0.0, 2.0, &shared).unwrap();
        assert_eq!(rep.homogeneity.pass, Some(true), "{:?}", rep.homogeneity);
    }

    #[test]
    fn failing_flags_mark_not_applicable() {
        let shared = brownian(8, 200);
        let spec = RiskSpec {
            kappa: -0.2,
            ..Default::default()
        };
        let zero = FreeTermSpec::constant(0.0);
        let rep = coherence_audit(&spec, &zero, &zero, 1.0, 2.0, &shared).unwrap();
        assert!(!rep.sub_additivity.applicable);
        assert!(rep.sub_additivity.pass.is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert!((quantile(&v, 0.05) - 0.2).abs() < 1e-12);
    }
}
