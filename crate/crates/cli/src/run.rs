//! Experiment dispatch, artifact emission and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bsviel::analysis::SharedPaths;
use bsviel::{
    assemble_h, basis_for, coherence_audit, comparison_check, duality_residual, orthonormality_diagnostic, rho,
    simulate_paths, solve, stability_probe, TimeGrid,
};
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::output::ArtifactDir;
use crate::{CliError, EXIT_CHECKS_FAILED, EXIT_OK};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_root: PathBuf,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    pub override_contraction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            EXIT_OK
        } else {
            EXIT_CHECKS_FAILED
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    config_hash: String,
    seed: u64,
    threads: usize,
    override_contraction: bool,
    wall_clock_seconds: f64,
    checks: &'a [Check],
    files: Vec<String>,
    config: &'a RunConfig,
}

/// Reads, validates and runs the config at `path`; `expected` names the
/// subcommand, which must match the config's experiment.
pub fn run(path: &Path, expected: Option<&str>, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg = crate::config::parse(&text)?;
    if let Some(name) = expected {
        if cfg.experiment.name() != name {
            return Err(CliError::Config(format!(
                "experiment.type: subcommand `{name}` does not match configured experiment `{}`",
                cfg.experiment.name()
            )));
        }
    }
    run_config(&cfg, opts)
}

pub fn run_config(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let hash = cfg.content_hash();
    let dir = opts.out_root.join(format!("{}-{hash}", cfg.experiment.name()));
    let mut art = ArtifactDir::create(dir.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let checks = pool.install(|| execute(cfg, opts, &mut art))?;
    let manifest = Manifest {
        tool: "bsviel",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        config_hash: hash,
        seed: cfg.simulation.seed,
        threads: pool.current_num_threads(),
        override_contraction: opts.override_contraction,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        checks: &checks,
        files: art.files(),
        config: cfg,
    };
    art.json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        dir,
        checks,
        files: art.files(),
    })
}

fn shared_paths(cfg: &RunConfig, opts: &RunOptions) -> Result<SharedPaths, CliError> {
    Ok(SharedPaths::simulate(
        &cfg.levy,
        cfg.grid.n_steps,
        cfg.simulation.n_paths,
        cfg.simulation.seed,
        &cfg.solver_config(opts.override_contraction),
    )?)
}

#[derive(Serialize)]
struct BasisArtifact {
    requested_order: usize,
    effective_rank: usize,
    moments: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    diagnostics: &'a bsviel::SolverDiagnostics,
    max_relative_residual: f64,
    max_absolute_residual: f64,
}

fn execute(cfg: &RunConfig, opts: &RunOptions, art: &mut ArtifactDir) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    match &cfg.experiment {
        Experiment::Basis {
            diagnostic,
            diagonal_tolerance,
            off_diagonal_tolerance,
        } => {
            let basis = basis_for(&cfg.levy, cfg.basis.order)?;
            let k = basis.effective_rank();
            let gram = basis.gram();
            art.json(
                "basis.json",
                &BasisArtifact {
                    requested_order: basis.requested_order(),
                    effective_rank: k,
                    moments: basis.moments().as_slice().to_vec(),
                    coefficients: basis.coefficient_rows(),
                    gram: (0..gram.nrows()).map(|i| gram.row(i).iter().copied().collect()).collect(),
                },
            )?;
            if *diagnostic && k > 0 {
                let grid = TimeGrid::new(cfg.levy.horizon, cfg.grid.n_steps)?;
                let paths = simulate_paths(&cfg.levy, &grid, cfg.simulation.n_paths, cfg.simulation.seed, k)?;
                let incs = assemble_h(&basis, &paths)?;
                let report = orthonormality_diagnostic(&incs, &grid);
                art.json("covariation.json", &report)?;
                let dev = report.max_diagonal_deviation();
                let off = report.max_off_diagonal();
                checks.push(Check::new(
                    "covariation_diagonal",
                    dev <= *diagonal_tolerance,
                    format!("max |[H_i,H_i]_T/T - 1| = {dev:.4e} (tolerance {diagonal_tolerance})"),
                ));
                checks.push(Check::new(
                    "covariation_off_diagonal",
                    off < *off_diagonal_tolerance,
                    format!("max |[H_i,H_j]_T/T| = {off:.4e} (tolerance {off_diagonal_tolerance})"),
                ));
            }
        }
        Experiment::Solve {
            psi,
            generator,
            max_relative_residual,
        } => {
            let shared = shared_paths(cfg, opts)?;
            let sol = solve(psi, generator, shared.ctx())?;
            let res = sol.m_condition_residual();
            let sd = sol.sd_y();
            art.csv(
                "solution.csv",
                &["t", "mean_y", "sd_y", "m_residual_abs", "m_residual_rel"],
                res.iter().enumerate().map(|(i, r)| vec![r.t, sol.ey()[i], sd[i], r.abs_rms, r.relative]),
            )?;
            let max_rel = res.iter().map(|r| r.relative).fold(0.0, f64::max);
            let max_abs = res.iter().map(|r| r.abs_rms).fold(0.0, f64::max);
            art.json(
                "diagnostics.json",
                &SolveArtifact {
                    diagnostics: sol.diagnostics(),
                    max_relative_residual: max_rel,
                    max_absolute_residual: max_abs,
                },
            )?;
            checks.push(Check::new(
                "picard_converged",
                true,
                format!("{} iterations", sol.diagnostics().iterations),
            ));
            if let Some(bound) = max_relative_residual {
                checks.push(Check::new(
                    "m_condition_residual",
                    max_rel < *bound,
                    format!("max relative residual {max_rel:.4e} (bound {bound})"),
                ));
            }
        }
        Experiment::Duality { coefficients, psi, phi } => {
            let shared = shared_paths(cfg, opts)?;
            let out = duality_residual(&coefficients.coefficients(), psi, phi, &shared)?;
            art.json("duality.json", &out.report)?;
            art.csv(
                "forward.csv",
                &["t", "mean_x", "sd_x", "min_x"],
                out.forward.summary().into_iter().map(|r| vec![r.t, r.mean, r.sd, r.min]),
            )?;
            let sd = out.backward.sd_y();
            art.csv(
                "backward.csv",
                &["t", "mean_y", "sd_y"],
                (0..=out.backward.n_steps()).map(|i| vec![out.backward.grid().time(i), out.backward.ey()[i], sd[i]]),
            )?;
            let r = &out.report;
            checks.push(Check::new(
                "duality",
                r.pass,
                format!(
                    "lhs {:.6e}, rhs {:.6e}, residual {:.3e}, 3·SE {:.3e}, allowance {:.3e}",
                    r.lhs,
                    r.rhs,
                    r.residual,
                    3.0 * r.se_combined,
                    r.discretization_allowance
                ),
            ));
        }
        Experiment::Compare { lower, upper } => {
            let shared = shared_paths(cfg, opts)?;
            let rep = comparison_check(&lower.generator, &lower.phi, &upper.generator, &upper.phi, &shared)?;
            art.json("comparison.json", &rep)?;
            art.csv(
                "violations.csv",
                &["t", "violation_rate", "max_exceedance"],
                rep.per_node.iter().map(|n| vec![n.t, n.violation_rate, n.max_exceedance]),
            )?;
            checks.push(Check::new(
                "comparison",
                rep.pass,
                format!("violation rate {:.4e} at tolerance {:.4e}", rep.violation_rate, rep.tolerance),
            ));
        }
        Experiment::Stability {
            psi,
            generator,
            xi,
            eps,
            expected_slope,
            slope_tolerance,
        } => {
            let shared = shared_paths(cfg, opts)?;
            let rep = stability_probe(psi, generator, xi, eps, &shared)?;
            art.json("stability.json", &rep)?;
            art.csv(
                "stability.csv",
                &["eps", "delta_norm"],
                rep.eps.iter().zip(&rep.delta_norm).map(|(e, d)| vec![*e, *d]),
            )?;
            checks.push(Check::new(
                "stability_monotone",
                rep.monotone,
                "solution distance nondecreasing in eps".into(),
            ));
            if let Some(target) = expected_slope {
                let pass = rep.slope.is_some_and(|s| (s - target).abs() <= *slope_tolerance);
                checks.push(Check::new(
                    "stability_slope",
                    pass,
                    format!("slope {:?} (expected {target} ± {slope_tolerance})", rep.slope),
                ));
            }
        }
        Experiment::Risk { risk, phi, audit } => {
            let shared = shared_paths(cfg, opts)?;
            let curve = rho(phi, risk, shared.ctx())?;
            art.csv(
                "rho.csv",
                &["t", "mean", "sd", "q05", "q50", "q95"],
                curve.summary().into_iter().map(|r| vec![r.t, r.mean, r.sd, r.q05, r.q50, r.q95]),
            )?;
            art.json("risk.json", curve.solution.diagnostics())?;
            if let Some(a) = audit {
                let rep = coherence_audit(risk, phi, &a.phi2, a.shift, a.lambda, &shared)?;
                art.json("coherence.json", &rep)?;
                for sub in [&rep.monotonicity, &rep.translation.audit, &rep.homogeneity, &rep.sub_additivity] {
                    if let Some(pass) = sub.pass {
                        checks.push(Check::new(
                            &sub.name,
                            pass,
                            format!("violation rate {:.4e} at tolerance {:.4e}", sub.violation_rate, sub.tolerance),
                        ));
                    }
                }
            }
        }
    }
    Ok(checks)
}
