//! Monte Carlo verifiers for duality, comparison and stability, run on one
//! shared path bundle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{euler_solve, ForwardGrid, LinearCoefficients};
use crate::free_term::{FreeTerm, Negated, Perturbed};
use crate::generators::{audit_flags, contraction_report, Driver, Flag, FlagAudit, AUDIT_SAMPLES};
use crate::levy::{simulate_paths, LevySpec, PathBundle, TimeGrid};
use crate::solver::{solution_distance, solve, MSolutionGrid, SolverConfig, SolverContext};
use crate::teugels::{assemble_h, basis_for, TeugelsBasis, TeugelsIncrements};

/// Paths, Teugels increments and regression context reused by both sides of
/// every check.
pub struct SharedPaths {
    paths: PathBundle,
    incs: TeugelsIncrements,
    ctx: SolverContext,
}

impl SharedPaths {
    pub fn simulate(spec: &LevySpec, n_steps: usize, n_paths: usize, seed: u64, cfg: &SolverConfig) -> Result<Self> {
        let grid = TimeGrid::new(spec.horizon, n_steps)?;
        let basis = basis_for(spec, cfg.teugels_order)?;
        let paths = simulate_paths(spec, &grid, n_paths, seed, basis.effective_rank().max(1))?;
        let incs = assemble_h(&basis, &paths)?;
        Self::from_parts(paths, incs, cfg)
    }

    pub fn from_parts(paths: PathBundle, incs: TeugelsIncrements, cfg: &SolverConfig) -> Result<Self> {
        let ctx = SolverContext::new(&paths, &incs, cfg)?;
        Ok(Self { paths, incs, ctx })
    }

    pub fn paths(&self) -> &PathBundle {
        &self.paths
    }

    pub fn incs(&self) -> &TeugelsIncrements {
        &self.incs
    }

    pub fn basis(&self) -> &TeugelsBasis {
        self.incs.basis()
    }

    pub fn ctx(&self) -> &SolverContext {
        &self.ctx
    }

    pub fn ctx_mut(&mut self) -> &mut SolverContext {
        &mut self.ctx
    }

    pub fn grid(&self) -> &TimeGrid {
        self.paths.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.paths.n_paths()
    }

    /// Randomized flag audit of `driver` at this bundle's dimensions.
    pub fn audit(&self, driver: &dyn Driver) -> FlagAudit {
        audit_flags(
            driver,
            self.paths.brownian_dim(),
            self.incs.rank(),
            self.grid().horizon(),
            AUDIT_SAMPLES,
            self.paths.seed(),
        )
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    /// `Ê∫ Y ψ dt`.
    pub lhs: f64,
    /// `Ê∫ X φ dt`.
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    /// `sqrt(se_lhs² + se_rhs²)`.
    pub se_combined: f64,
    /// Standard error of the per-path difference.
    pub se_paired: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// First-order time-discretization allowance `Δt · Σ sup|kernel| · max(|lhs|, |rhs|)`.
    pub discretization_allowance: f64,
    pub deterministic: bool,
    pub pass: bool,
}

pub struct DualityOutcome {
    pub report: DualityReport,
    pub backward: MSolutionGrid,
    pub forward: ForwardGrid,
}

/// Solves the linear backward equation with free term `phi` and the forward
/// equation with free term `psi` on shared paths and compares the pairings.
pub fn duality_residual(
    coef: &LinearCoefficients,
    psi: &dyn FreeTerm,
    phi: &dyn FreeTerm,
    shared: &SharedPaths,
) -> Result<DualityOutcome> {
    let driver = coef.backward_driver();
    let horizon = shared.grid().horizon();
    let report = contraction_report(&driver, horizon);
    if !(report.sup_y_eta_zeta < 1.0) {
        return Err(Error::CoefficientsTooLarge {
            supremum: report.sup_y_eta_zeta,
        });
    }
    let backward = solve(phi, &driver, shared.ctx())?;
    let forward = euler_solve(coef, psi, shared.paths(), shared.incs())?;
    let psi_m = shared.ctx().free_term_matrix(psi)?;
    let phi_m = shared.ctx().free_term_matrix(phi)?;
    let grid = shared.grid();
    let n1 = grid.n_nodes();
    let w = grid.trapezoid_weights();
    let n_paths = shared.n_paths();
    let mut left = Vec::with_capacity(n_paths);
    let mut right = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let row = p * n1;
        left.push((0..n1).map(|i| w[i] * backward.y(p, i) * psi_m[row + i]).sum::<f64>());
        right.push((0..n1).map(|i| w[i] * forward.x(p, i) * phi_m[row + i]).sum::<f64>());
    }
    let diff: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a - b).collect();
    let (lhs, se_lhs) = mean_se(&left);
    let (rhs, se_rhs) = mean_se(&right);
    let (_, se_paired) = mean_se(&diff);
    let se_combined = se_lhs.hypot(se_rhs);
    let residual = lhs - rhs;
    let scale = lhs.abs().max(rhs.abs());
    let allowance = grid.dt() * coef.bound_sum() * scale;
    let deterministic = se_combined <= 1e-6 * (1.0 + scale);
    let pass = residual.abs() <= 3.0 * se_combined + allowance + 1e-10;
    Ok(DualityOutcome {
        report: DualityReport {
            lhs,
            rhs,
            se_lhs,
            se_rhs,
            se_combined,
            se_paired,
            residual,
            relative_residual: if scale > 0.0 { residual / scale } else { residual },
            discretization_allowance: allowance,
            deterministic,
            pass,
        },
        backward,
        forward,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeViolation {
    pub t: f64,
    pub violation_rate: f64,
    pub max_exceedance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub orientation: String,
    pub tolerance: f64,
    /// Fraction of `(path, node)` pairs with `Y − Ȳ > tolerance`.
    pub violation_rate: f64,
    pub max_exceedance: f64,
    pub per_node: Vec<NodeViolation>,
    pub pass: bool,
}

pub const COMPARISON_ORIENTATION: &str =
    "Y solves the equation with free term -phi; f <= f_bar and phi >= phi_bar imply Y <= Y_bar";

/// Largest per-node absolute M-condition residual over `solutions`.
pub fn max_m_residual(solutions: &[&MSolutionGrid]) -> f64 {
    solutions
        .iter()
        .flat_map(|s| s.m_condition_residual())
        .map(|r| r.abs_rms)
        .fold(0.0, f64::max)
}

/// Counts `lower − upper > tol` per node.
pub fn ordering_violations(lower: &MSolutionGrid, upper: &MSolutionGrid, tol: f64) -> (Vec<NodeViolation>, f64, f64) {
    let n1 = lower.n_steps() + 1;
    let n_paths = lower.n_paths();
    let mut total = 0usize;
    let mut worst = 0.0_f64;
    let per_node: Vec<NodeViolation> = (0..n1)
        .map(|i| {
            let mut count = 0usize;
            let mut node_worst = 0.0_f64;
            for p in 0..n_paths {
                let gap = lower.y(p, i) - upper.y(p, i);
                if gap > tol {
                    count += 1;
                    node_worst = node_worst.max(gap - tol);
                }
            }
            total += count;
            worst = worst.max(node_worst);
            NodeViolation {
                t: lower.grid().time(i),
                violation_rate: count as f64 / n_paths as f64,
                max_exceedance: node_worst,
            }
        })
        .collect();
    (per_node, total as f64 / (n1 * n_paths) as f64, worst)
}

pub(crate) fn require_comparison_flags(audit: &FlagAudit) -> Result<()> {
    audit.require(Flag::SimplifiedForm)?;
    audit.require(Flag::MonotoneInU)
}

/// Solves `(f, −φ)` and `(f̄, −φ̄)` on shared paths and checks `Y ≤ Ȳ`.
/// The hypotheses `f ≤ f̄`, `φ ≥ φ̄` are the caller's responsibility; both
/// drivers must pass the simplified-form and monotone-in-u audits.
pub fn comparison_check(
    gen_low: &dyn Driver,
    phi_low: &dyn FreeTerm,
    gen_high: &dyn Driver,
    phi_high: &dyn FreeTerm,
    shared: &SharedPaths,
) -> Result<ComparisonReport> {
    require_comparison_flags(&shared.audit(gen_low))?;
    require_comparison_flags(&shared.audit(gen_high))?;
    let lower = solve(&Negated(phi_low), gen_low, shared.ctx())?;
    let upper = solve(&Negated(phi_high), gen_high, shared.ctx())?;
    Ok(compare_solutions(&lower, &upper))
}

pub(crate) fn compare_solutions(lower: &MSolutionGrid, upper: &MSolutionGrid) -> ComparisonReport {
    let tolerance = 2.0 * max_m_residual(&[lower, upper]) + 1e-12;
    let (per_node, violation_rate, max_exceedance) = ordering_violations(lower, upper, tolerance);
    ComparisonReport {
        orientation: COMPARISON_ORIENTATION.into(),
        tolerance,
        violation_rate,
        max_exceedance,
        per_node,
        pass: violation_rate < 0.01,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eps: Vec<f64>,
    /// Solution-norm distance between the base and the perturbed solution.
    pub delta_norm: Vec<f64>,
    /// Least-squares slope of `ln(delta_norm)` on `ln(eps)` over `eps > 0`.
    pub slope: Option<f64>,
    pub monotone: bool,
}

/// Solves with `ψ` and `ψ + ε·ξ` for each `ε` on shared paths.
pub fn stability_probe(
    psi: &dyn FreeTerm,
    driver: &dyn Driver,
    xi: &dyn FreeTerm,
    eps_list: &[f64],
    shared: &SharedPaths,
) -> Result<StabilityReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::invalid("eps", "must be a non-empty list of finite values >= 0"));
    }
    let base = solve(psi, driver, shared.ctx())?;
    let mut delta_norm = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let perturbed = Perturbed {
            base: psi,
            direction: xi,
            eps,
        };
        let sol = solve(&perturbed, driver, shared.ctx())?;
        delta_norm.push(solution_distance(&sol, &base)?);
    }
    let pts: Vec<(f64, f64)> = eps_list
        .iter()
        .zip(&delta_norm)
        .filter(|(e, d)| **e > 0.0 && **d > 0.0)
        .map(|(e, d)| (e.ln(), d.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[a].total_cmp(&eps_list[b]));
    let monotone = order.windows(2).all(|w| delta_norm[w[0]] <= delta_norm[w[1]]);
    Ok(StabilityReport {
        eps: eps_list.to_vec(),
        delta_norm,
        slope,
        monotone,
    })
}
