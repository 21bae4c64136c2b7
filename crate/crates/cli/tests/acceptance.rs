//! Acceptance criteria, one PASS/FAIL line each.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bsviel::analysis::SharedPaths;
use bsviel::free_term::FreeTermSpec;
use bsviel::risk::RiskSpec;
use bsviel::{
    assemble_h, basis_for, catalog, coherence_audit, comparison_check, dd_exponential, duality_residual,
    orthonormality_diagnostic, positivity_check, simulate_paths, solve, validate_contraction, GeneratorSpec, JumpLaw,
    LevySpec, LinearCoefficients, SolverConfig, TimeGrid,
};
use bsviel_cli::{parse, run_config, RunOptions};
use nalgebra::DMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn pm_one_gaussian() -> LevySpec {
    catalog::levy_specs()
        .into_iter()
        .find(|(n, _)| *n == "pm_one_gaussian")
        .map(|(_, s)| s)
        .unwrap()
}

fn unit_poisson() -> LevySpec {
    catalog::levy_specs()
        .into_iter()
        .find(|(n, _)| *n == "unit_poisson")
        .map(|(_, s)| s)
        .unwrap()
}

fn crit1() -> Outcome {
    let spec = pm_one_gaussian();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let report = pool.install(|| {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let basis = basis_for(&spec, 3).unwrap();
        let paths = simulate_paths(&spec, &grid, 100_000, 2024, 3).unwrap();
        let incs = assemble_h(&basis, &paths).unwrap();
        (basis.effective_rank(), orthonormality_diagnostic(&incs, &grid))
    });
    let secs = start.elapsed().as_secs_f64();
    let (k, rep) = report;
    let dev = rep.max_diagonal_deviation();
    let off = rep.max_off_diagonal();
    outcome(
        k == 3 && dev <= 0.05 && off < 0.05 && secs <= 120.0,
        format!("K_eff {k}, max diag dev {dev:.4}, max off-diag {off:.4}, {secs:.1}s single-threaded"),
    )
}

/// `∫ x^m μ(dx)` from the jump law directly, `μ = x²ν + σ²δ₀`.
fn mu_moment(spec: &LevySpec, m: usize) -> f64 {
    let mut v = if m == 0 { spec.gaussian_sigma.powi(2) } else { 0.0 };
    if let JumpLaw::CompoundPoisson { rate, jumps } = &spec.jump_law {
        v += rate * jumps.raw_moment(m + 2);
    }
    v
}

fn crit2() -> Outcome {
    let mut worst_c = 0.0_f64;
    let mut worst_gram = 0.0_f64;
    let mut checked = 0;
    for (_, spec) in catalog::levy_specs() {
        let basis = basis_for(&spec, 3).unwrap();
        let k = basis.effective_rank();
        if k == 0 {
            continue;
        }
        checked += 1;
        let hankel = DMatrix::from_fn(k, k, |a, b| mu_moment(&spec, a + b));
        let l = hankel.cholesky().expect("leading Hankel block is positive definite").l();
        let inv = l.try_inverse().unwrap();
        for i in 1..=k {
            for kk in 1..=i {
                worst_c = worst_c.max((basis.c(i, kk) - inv[(i - 1, kk - 1)]).abs());
            }
        }
        for i in 0..k {
            for j in 0..k {
                let mut ip = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        ip += basis.c(i + 1, a + 1) * basis.c(j + 1, b + 1) * mu_moment(&spec, a + b);
                    }
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst_gram = worst_gram.max((ip - target).abs());
            }
        }
    }
    outcome(
        worst_c < 1e-8 && worst_gram < 1e-10,
        format!("{checked} specs, max |c - oracle| {worst_c:.2e}, max |<q_i,q_j> - δ| {worst_gram:.2e}"),
    )
}

fn crit3() -> Outcome {
    let shared =
        SharedPaths::simulate(&LevySpec::brownian(1.0, 1).unwrap(), 32, 10_000, 31, &SolverConfig::default()).unwrap();
    let sol = solve(&FreeTermSpec::BrownianTerminal { component: 0 }, &GeneratorSpec::Zero, shared.ctx()).unwrap();
    let st = shared.ctx().states();
    let (mut err, mut size) = (0.0, 0.0);
    for p in 0..10_000 {
        let v = st.view(p);
        for i in 0..=32 {
            err += (sol.y(p, i) - v.w(i)[0]).powi(2);
            size += v.w(i)[0].powi(2);
        }
    }
    let rel = (err / size).sqrt();
    let worst = sol.m_condition_residual().iter().map(|r| r.relative).fold(0.0, f64::max);
    outcome(
        rel < 0.05 && worst < 0.05,
        format!("relative L2 error {rel:.4}, max node M-residual {worst:.4}"),
    )
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn crit4(out: &Path) -> Outcome {
    let cfg = parse(
        r#"{
        "levy": {"horizon": 1.0, "jump_law": {"type": "none"}, "drift": 0.0, "gaussian_sigma": 0.0},
        "grid": {"n_steps": 64},
        "simulation": {"n_paths": 2000, "seed": 4},
        "experiment": {"type": "solve", "psi": {"type": "constant", "value": 1.0},
                       "generator": {"type": "linear", "theta": -0.5}}
    }"#,
    )
    .unwrap();
    let opts = RunOptions {
        out_root: out.to_path_buf(),
        threads: 0,
        override_contraction: false,
    };
    let res = run_config(&cfg, &opts).unwrap();
    let rows = read_csv(&res.dir.join("solution.csv"));
    let err = rows.iter().map(|r| (r[1] - (-0.5 * (1.0 - r[0])).exp()).abs()).fold(0.0, f64::max);
    outcome(err < 1e-2, format!("max |EY - e^(-θ(T-t))| = {err:.3e} over {} nodes (CLI solve)", rows.len()))
}

fn crit5() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0_f64;
    let mut max_iters = 0;
    let mut count = 0;
    for prob in catalog::problems() {
        if validate_contraction(&prob.generator, prob.levy.horizon).is_err() {
            continue;
        }
        count += 1;
        let shared = SharedPaths::simulate(&prob.levy, 32, 5000, 55, &SolverConfig::default()).unwrap();
        match solve(&prob.psi, &prob.generator, shared.ctx()) {
            Ok(sol) => {
                let h = &sol.diagnostics().change_history;
                max_iters = max_iters.max(h.len());
                for w in h.windows(2) {
                    let r = if w[0] > 0.0 { w[1] / w[0] } else { 0.0 };
                    worst_ratio = worst_ratio.max(r);
                    if r >= 1.0 {
                        failures.push(prob.name.clone());
                    }
                }
            }
            Err(e) => failures.push(format!("{}: {e}", prob.name)),
        }
    }
    outcome(
        failures.is_empty() && max_iters <= 25,
        format!("{count} problems, worst change ratio {worst_ratio:.3}, max iterations {max_iters}, failures {failures:?}"),
    )
}

fn crit6() -> Outcome {
    let exact = (0.3f64.exp() - 1.0) / 0.3;
    let brownian = LevySpec::brownian(1.0, 1).unwrap();
    let shared = SharedPaths::simulate(&brownian, 64, 500, 6, &SolverConfig::default()).unwrap();
    let one = FreeTermSpec::constant(1.0);
    let det = duality_residual(&LinearCoefficients::constant(0.3, &[], &[]), &one, &one, &shared)
        .unwrap()
        .report;
    let det_ok = (det.lhs - exact).abs() < 1e-3 && (det.rhs - exact).abs() < 1e-3;
    let shared = SharedPaths::simulate(&brownian, 32, 10_000, 66, &SolverConfig::default()).unwrap();
    let sto = duality_residual(
        &LinearCoefficients::constant(0.0, &[0.2], &[]),
        &one,
        &FreeTermSpec::BrownianTerminal { component: 0 },
        &shared,
    )
    .unwrap()
    .report;
    let sto_ok = sto.residual.abs() <= 3.0 * sto.se_combined;
    outcome(
        det_ok && sto_ok,
        format!(
            "deterministic lhs {:.6} rhs {:.6} exact {exact:.6}; stochastic residual {:.3e} vs 3·SE {:.3e}",
            det.lhs,
            det.rhs,
            sto.residual,
            3.0 * sto.se_combined
        ),
    )
}

fn crit7() -> Outcome {
    let spec = unit_poisson();
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let basis = basis_for(&spec, 3).unwrap();
    let paths = simulate_paths(&spec, &grid, 100_000, 7, basis.effective_rank()).unwrap();
    let incs = assemble_h(&basis, &paths).unwrap();
    let fg = match dd_exponential(0.0, &[], &[-0.5], 1.0, &paths, &incs) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pos = positivity_check(&fg);
    let (m, se) = mean_se(&fg.node(32));
    outcome(
        pos.strictly_positive && (m - 1.0).abs() <= 3.0 * se,
        format!("min {:.4e}, E X(T) {m:.5} ± {se:.5}", pos.min),
    )
}

fn risk_paths(n_paths: usize, seed: u64) -> SharedPaths {
    SharedPaths::simulate(&pm_one_gaussian(), 16, n_paths, seed, &SolverConfig::default()).unwrap()
}

fn crit8() -> Outcome {
    let shared = risk_paths(10_000, 8);
    let f = catalog::risk_driver();
    let fbar = GeneratorSpec::shifted(f.clone(), 0.1);
    let phi = FreeTermSpec::sum(vec![
        FreeTermSpec::BrownianTerminal { component: 0 },
        FreeTermSpec::TeugelsTerminal { index: 1 },
    ]);
    let shift = comparison_check(&f, &phi, &fbar, &phi, &shared).unwrap();
    let same = comparison_check(&f, &phi, &f, &phi, &shared).unwrap();
    outcome(
        shift.violation_rate < 0.01 && same.violation_rate == 0.0,
        format!(
            "shift pair rate {:.2e} (tol {:.3e}); identical control rate {:.1}",
            shift.violation_rate, shift.tolerance, same.violation_rate
        ),
    )
}

fn crit9(out: &Path) -> Outcome {
    let cfg = parse(
        r#"{
        "levy": {"horizon": 1.0, "jump_law": {"type": "none"}, "drift": 0.0, "gaussian_sigma": 0.0},
        "grid": {"n_steps": 32},
        "simulation": {"n_paths": 5000, "seed": 9},
        "experiment": {"type": "stability",
                       "psi": {"type": "brownian_terminal"},
                       "generator": {"type": "linear", "theta": -0.5},
                       "xi": {"type": "constant", "value": 1.0},
                       "eps": [0.1, 0.01, 0.001],
                       "expected_slope": 1.0}
    }"#,
    )
    .unwrap();
    let opts = RunOptions {
        out_root: out.to_path_buf(),
        threads: 0,
        override_contraction: false,
    };
    let res = run_config(&cfg, &opts).unwrap();
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(res.dir.join("stability.json")).unwrap()).unwrap();
    let slope = rep["slope"].as_f64().unwrap_or(f64::NAN);
    outcome((slope - 1.0).abs() <= 0.1, format!("log-log slope {slope:.5} (CLI stability)"))
}

fn crit10() -> Outcome {
    let shared = risk_paths(10_000, 10);
    let w = FreeTermSpec::BrownianTerminal { component: 0 };
    let zero_rep = coherence_audit(&RiskSpec::default(), &w, &w, 1.0, 2.0, &shared).unwrap();
    let exact = zero_rep.translation.factors.iter().map(|f| (f.measured - 1.0).abs()).fold(0.0, f64::max);
    let translation_ok = zero_rep.translation.audit.pass == Some(true) && exact < 1e-9;

    let spec = RiskSpec {
        rate: bsviel::RateFn::Constant(0.05),
        kappa: 0.5,
        weights: GeneratorSpec::halving_weights(1.0, 3),
    };
    let phi1 = FreeTermSpec::TeugelsTerminal { index: 1 };
    let phi2 = FreeTermSpec::sum(vec![FreeTermSpec::negated(phi1.clone()), FreeTermSpec::scaled(0.5, w.clone())]);
    let rep = coherence_audit(&spec, &phi1, &phi2, 0.5, 2.0, &shared).unwrap();
    let hom = rep.homogeneity.pass == Some(true);
    let sub = rep.sub_additivity.pass == Some(true);
    let hi = FreeTermSpec::Max {
        terms: vec![phi1.clone(), phi2.clone()],
    };
    let cmp = comparison_check(&spec.driver(), &hi, &spec.driver(), &phi1, &shared).unwrap();
    let agree = rep.monotonicity.applicable
        && rep.monotonicity.violation_rate == cmp.violation_rate
        && rep.monotonicity.tolerance == cmp.tolerance
        && rep.monotonicity.pass == Some(cmp.pass);
    outcome(
        translation_ok && hom && sub && agree,
        format!(
            "translation max |factor - 1| {exact:.1e}; homogeneity rate {:.2e}; sub-additivity rate {:.2e}; \
             monotonicity {:.2e} vs comparison {:.2e}",
            rep.homogeneity.violation_rate,
            rep.sub_additivity.violation_rate,
            rep.monotonicity.violation_rate,
            cmp.violation_rate
        ),
    )
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn crit11(out: &Path) -> Outcome {
    let config = out.join("repro.json");
    std::fs::write(
        &config,
        r#"{
        "levy": {"horizon": 1.0, "brownian_dim": 1, "drift": 0.0, "gaussian_sigma": 0.5,
                 "jump_law": {"type": "compound_poisson", "rate": 2.0,
                              "jumps": {"type": "atoms", "atoms": [{"size": 1.0, "prob": 0.5}, {"size": -1.0, "prob": 0.5}]}}},
        "grid": {"n_steps": 16},
        "simulation": {"n_paths": 3000, "seed": 11},
        "experiment": {"type": "risk",
                       "risk": {"rate": 0.05, "kappa": 0.5, "weights": [1.0, 0.5, 0.25]},
                       "phi": {"type": "teugels_terminal", "index": 1},
                       "audit": {"phi2": {"type": "brownian_terminal"}, "shift": 0.5, "lambda": 2.0}}
    }"#,
    )
    .unwrap();
    let mut dirs = Vec::new();
    for threads in ["1", "8"] {
        let root = out.join(format!("threads-{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_bsviel"))
            .args(["risk", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&root)
            .args(["--threads", threads])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("bsviel exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
        }
        let run_dir = std::fs::read_dir(&root).unwrap().next().unwrap().unwrap().path();
        dirs.push(run_dir);
    }
    let a = artifacts(&dirs[0]);
    let b = artifacts(&dirs[1]);
    let csvs = a.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    outcome(
        a == b && csvs > 0 && dirs[0].file_name() == dirs[1].file_name(),
        format!("{} artifacts ({csvs} CSV) byte-identical across --threads 1 and 8", a.len()),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("Teugels orthonormality", Box::new(crit1)),
        ("Gram-Schmidt oracle", Box::new(crit2)),
        ("zero-generator solver", Box::new(crit3)),
        ("deterministic reduction", Box::new(move || crit4(out))),
        ("Picard contraction", Box::new(crit5)),
        ("duality", Box::new(crit6)),
        ("positivity", Box::new(crit7)),
        ("comparison", Box::new(crit8)),
        ("stability", Box::new(move || crit9(out))),
        ("risk coherence", Box::new(crit10)),
        ("reproducibility", Box::new(move || crit11(out))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
