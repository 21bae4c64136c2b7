//! Discrete adapted M-solutions by Picard iteration with regression-based
//! conditional expectations.
//!
//! For every node `t_i` the iteration forms
//! `ξ_i = ψ(t_i) + Δt Σ_{j≥i} f(t_i, t_j, Y_j, Z_{i,j}, Z_{j,i}, U_{i,j}, U_{j,i})`
//! and projects the whole family `V_{i,k} = E[ξ_i | F_{t_k}]` onto polynomial
//! features of the state at `t_k`. `Y_i = V_{i,i}`, and the integrands on
//! step `j` are the joint least-squares coefficients of the increment
//! `V_{i,j+1} − V_{i,j}` against `(ΔW_j, ΔH_j)`: for `j ≥ i` they are the
//! martingale-representation integrands of the equation, for `j < i` they
//! represent `Y_i − EY_i` (the M-condition).

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_term::FreeTerm;
use crate::generators::{contraction_report, ContractionReport, Driver, DriverArgs};
use crate::levy::{PathBundle, TimeGrid};
use crate::regression::{FeatureMap, LeastSquares};
use crate::state::NodeStates;
use crate::teugels::TeugelsIncrements;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_picard_iters: usize,
    pub picard_tol: f64,
    /// Total degree of the polynomial regression basis.
    pub regression_degree: usize,
    pub ridge_epsilon: f64,
    /// Requested Teugels order `K`; supplied by the basis section of a run.
    #[serde(skip)]
    pub teugels_order: usize,
    #[serde(skip)]
    pub override_contraction: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_picard_iters: 25,
            picard_tol: 1e-4,
            regression_degree: 2,
            ridge_epsilon: 1e-8,
            teugels_order: 3,
            override_contraction: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_picard_iters == 0 {
            return Err(Error::invalid("solver.max_picard_iters", "must be >= 1"));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return Err(Error::invalid("solver.picard_tol", "must be > 0"));
        }
        if !(self.ridge_epsilon.is_finite() && self.ridge_epsilon >= 0.0) {
            return Err(Error::invalid("solver.ridge_epsilon", "must be >= 0"));
        }
        if self.regression_degree > 6 {
            return Err(Error::invalid("solver.regression_degree", "must be <= 6"));
        }
        Ok(())
    }
}

struct NodeDesign {
    m: usize,
    /// `F_kᵀ F_{k+1} / N`, absent at the last regression node.
    forward: Option<DMatrix<f64>>,
    /// `N × m`, row-major.
    feats: Vec<f64>,
    gram: DMatrix<f64>,
    ls: LeastSquares,
}

struct StepDesign {
    width: usize,
    ls: LeastSquares,
    /// `X_jᵀ F_{j+1} / N`.
    cross_next: Option<DMatrix<f64>>,
    /// `X_jᵀ F_j / N`.
    cross_same: DMatrix<f64>,
}

/// Regression design shared by every solve on one path bundle.
pub struct Design {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    rank: usize,
    /// `[(p·n + j)·(d + K) + b]`: `ΔW` components then `ΔH` components.
    noise: Vec<f64>,
    nodes: Vec<NodeDesign>,
    steps: Vec<StepDesign>,
    warnings: Vec<String>,
    rank_deficient: usize,
}

impl Design {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn brownian_dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn blocks(&self) -> usize {
        self.dim + self.rank
    }

    fn feat(&self, node: usize, p: usize) -> &[f64] {
        let nd = &self.nodes[node];
        &nd.feats[p * nd.m..(p + 1) * nd.m]
    }

    fn noise_at(&self, p: usize, j: usize) -> &[f64] {
        let b = self.blocks();
        let at = (p * self.n_steps() + j) * b;
        &self.noise[at..at + b]
    }

    /// Row `X_j[p] = (F_j[p]·ΔW^{(c)}_j, F_j[p]·ΔH^{(k)}_j)`.
    fn xrow(&self, p: usize, j: usize, out: &mut [f64]) {
        let f = self.feat(j, p);
        let m = f.len();
        for (b, e) in self.noise_at(p, j).iter().enumerate() {
            for (a, fa) in f.iter().enumerate() {
                out[b * m + a] = fa * e;
            }
        }
    }

    /// `F_{n−1}ᵀ V / N` for a row-major `N × cols` matrix of terminal targets.
    fn project_last(&self, values: &[f64], cols: usize) -> DMatrix<f64> {
        let last = self.n_steps() - 1;
        let m = self.nodes[last].m;
        let mut acc = vec![0.0; m * cols];
        for p in 0..self.n_paths {
            accumulate_outer(&mut acc, self.feat(last, p), &values[p * cols..(p + 1) * cols]);
        }
        DMatrix::from_row_slice(m, cols, &acc) / self.n_paths as f64
    }

    /// Tower recursion `B_k = LS_k(F_kᵀ F_{k+1} B_{k+1} / N)` started from the
    /// terminal projection; returns coefficients for nodes `0..n`.
    fn backward_chain(&self, last_rhs: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let n = self.n_steps();
        let mut coefs = Vec::with_capacity(n);
        coefs.push(self.nodes[n - 1].ls.solve(&last_rhs));
        for k in (0..n - 1).rev() {
            let nd = &self.nodes[k];
            let rhs = nd.forward.as_ref().expect("interior node") * coefs.last().unwrap();
            coefs.push(nd.ls.solve(&rhs));
        }
        coefs.reverse();
        coefs
    }

    /// Number of regression features at a node.
    pub fn n_features(&self, node: usize) -> usize {
        self.nodes[node].m
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

fn accumulate_outer(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let nb = b.len();
    for (r, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        let row = &mut acc[r * nb..(r + 1) * nb];
        for (slot, y) in row.iter_mut().zip(b) {
            *slot += x * y;
        }
    }
}

fn build_design(paths: &PathBundle, incs: &TeugelsIncrements, cfg: &SolverConfig) -> Result<Design> {
    let states = NodeStates::new(paths, incs)?;
    let n = paths.n_steps();
    let n_paths = paths.n_paths();
    let d = paths.brownian_dim();
    let k = incs.rank();
    let spec = paths.spec();
    let use_l = !spec.levy_is_trivial();
    let use_n = spec.jump_law.has_jumps();
    let n_raw = d + usize::from(use_l) + usize::from(use_n);
    let inv_n = 1.0 / n_paths as f64;

    let blocks = d + k;
    let mut noise = vec![0.0; n_paths * n * blocks];
    noise.par_chunks_mut(n * blocks).enumerate().for_each(|(p, chunk)| {
        for j in 0..n {
            let row = &mut chunk[j * blocks..(j + 1) * blocks];
            row[..d].copy_from_slice(paths.brownian_increment(p, j));
            row[d..].copy_from_slice(incs.at(p, j));
        }
    });

    let raw_state = |p: usize, i: usize, out: &mut Vec<f64>| {
        let v = states.view(p);
        out.extend_from_slice(v.w(i));
        if use_l {
            out.push(v.l(i));
        }
        if use_n {
            out.push(v.n(i));
        }
    };

    let nodes: Vec<NodeDesign> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut raw = Vec::with_capacity(n_paths * n_raw);
            for p in 0..n_paths {
                raw_state(p, i, &mut raw);
            }
            let map = FeatureMap::fit(&raw, n_raw, cfg.regression_degree);
            let m = map.n_features();
            let mut feats = vec![0.0; n_paths * m];
            for p in 0..n_paths {
                map.eval_into(&raw[p * n_raw..(p + 1) * n_raw], &mut feats[p * m..(p + 1) * m]);
            }
            let mut g = vec![0.0; m * m];
            for p in 0..n_paths {
                let f = &feats[p * m..(p + 1) * m];
                accumulate_outer(&mut g, f, f);
            }
            let gram = DMatrix::from_row_slice(m, m, &g) * inv_n;
            let ls = LeastSquares::with_unpenalized(&gram, cfg.ridge_epsilon, &[0]);
            NodeDesign {
                m,
                forward: None,
                feats,
                gram,
                ls,
            }
        })
        .collect();

    let mut nodes = nodes;
    let forwards: Vec<Option<DMatrix<f64>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            (k + 1 < n).then(|| {
                let (a, b) = (&nodes[k], &nodes[k + 1]);
                let mut acc = vec![0.0; a.m * b.m];
                for p in 0..n_paths {
                    accumulate_outer(&mut acc, &a.feats[p * a.m..(p + 1) * a.m], &b.feats[p * b.m..(p + 1) * b.m]);
                }
                DMatrix::from_row_slice(a.m, b.m, &acc) * inv_n
            })
        })
        .collect();
    for (nd, f) in nodes.iter_mut().zip(forwards) {
        nd.forward = f;
    }

    let mut design = Design {
        grid: paths.grid().clone(),
        n_paths,
        dim: d,
        rank: k,
        noise,
        nodes,
        steps: Vec::new(),
        warnings: Vec::new(),
        rank_deficient: 0,
    };

    let steps: Vec<StepDesign> = (0..n)
        .into_par_iter()
        .map(|j| {
            let m = design.nodes[j].m;
            let width = m * blocks;
            let m_next = if j + 1 < n { design.nodes[j + 1].m } else { 0 };
            let mut gx = vec![0.0; width * width];
            let mut cn = vec![0.0; width * m_next];
            let mut cs = vec![0.0; width * m];
            let mut x = vec![0.0; width];
            for p in 0..n_paths {
                design.xrow(p, j, &mut x);
                accumulate_outer(&mut gx, &x, &x);
                accumulate_outer(&mut cs, &x, design.feat(j, p));
                if j + 1 < n {
                    accumulate_outer(&mut cn, &x, design.feat(j + 1, p));
                }
            }
            let gram = DMatrix::from_row_slice(width, width, &gx) * inv_n;
            StepDesign {
                width,
                ls: LeastSquares::new(&gram, cfg.ridge_epsilon),
                cross_next: (j + 1 < n).then(|| DMatrix::from_row_slice(width, m_next, &cn) * inv_n),
                cross_same: DMatrix::from_row_slice(width, m, &cs) * inv_n,
            }
        })
        .collect();
    design.steps = steps;

    for (i, nd) in design.nodes.iter().enumerate() {
        if nd.ls.is_rank_deficient() {
            design.rank_deficient += 1;
            design.warnings.push(format!(
                "node {i}: regression design rank {} of {}, ridge fallback on retained columns",
                nd.ls.retained().len(),
                nd.m
            ));
        }
    }
    for (j, st) in design.steps.iter().enumerate() {
        if st.ls.is_rank_deficient() {
            design.rank_deficient += 1;
            design.warnings.push(format!(
                "step {j}: representation design rank {} of {}, ridge fallback on retained columns",
                st.ls.retained().len(),
                st.width
            ));
        }
    }
    Ok(design)
}

/// Paths, node states and regression design, built once and reused by every
/// solve on the same bundle.
pub struct SolverContext {
    design: Arc<Design>,
    states: NodeStates,
    cfg: SolverConfig,
}

impl SolverContext {
    pub fn new(paths: &PathBundle, incs: &TeugelsIncrements, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let design = build_design(paths, incs, cfg)?;
        Ok(Self {
            design: Arc::new(design),
            states: NodeStates::new(paths, incs)?,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn set_override_contraction(&mut self, on: bool) {
        self.cfg.override_contraction = on;
    }

    pub fn design(&self) -> &Arc<Design> {
        &self.design
    }

    pub fn states(&self) -> &NodeStates {
        &self.states
    }

    pub fn grid(&self) -> &TimeGrid {
        self.design.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.design.n_paths
    }

    /// `ψ(t_i)` for every path and node, `N × (n+1)` row-major.
    pub fn free_term_matrix(&self, psi: &dyn FreeTerm) -> Result<Vec<f64>> {
        psi.check_dims(self.design.dim, self.design.rank)?;
        let n1 = self.design.n_steps() + 1;
        let mut out = vec![0.0; self.n_paths() * n1];
        out.par_chunks_mut(n1).enumerate().for_each(|(p, row)| {
            let v = self.states.view(p);
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = psi.value(i, &v);
            }
        });
        Ok(out)
    }

    /// Regression estimate of `E[values | F_{t_node}]` per path for an
    /// `F_T`-measurable target, using the same backward projection chain as
    /// the solver.
    pub fn conditional_expectation(&self, node: usize, values: &[f64]) -> Vec<f64> {
        let d = &self.design;
        if node == d.n_steps() {
            return values.to_vec();
        }
        let coefs = d.backward_chain(d.project_last(values, 1));
        let c = &coefs[node];
        (0..d.n_paths)
            .map(|p| d.feat(node, p).iter().zip(c.iter()).map(|(f, b)| f * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeResidual {
    pub t: f64,
    /// Root mean square of the discrete M-identity defect.
    pub abs_rms: f64,
    /// `abs_rms / sd(Y)`, or `abs_rms` when `sd(Y)` vanishes.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub final_change: f64,
    pub change_history: Vec<f64>,
    pub rank_deficient_designs: usize,
    pub warnings: Vec<String>,
    pub contraction: ContractionReport,
}

/// `(Y, Z, U)` on the grid. `Z` and `U` are stored as regression
/// coefficients and evaluated on demand.
pub struct MSolutionGrid {
    design: Arc<Design>,
    y: Vec<f64>,
    ey: Vec<f64>,
    beta: Vec<DMatrix<f64>>,
    diagnostics: SolverDiagnostics,
}

impl MSolutionGrid {
    pub fn grid(&self) -> &TimeGrid {
        self.design.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.design.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.design.n_steps()
    }

    pub fn brownian_dim(&self) -> usize {
        self.design.dim
    }

    pub fn rank(&self) -> usize {
        self.design.rank
    }

    pub fn diagnostics(&self) -> &SolverDiagnostics {
        &self.diagnostics
    }

    pub fn y(&self, path: usize, node: usize) -> f64 {
        self.y[path * (self.n_steps() + 1) + node]
    }

    /// `Y(t_i)` across paths.
    pub fn y_node(&self, node: usize) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.y(p, node)).collect()
    }

    pub fn ey(&self) -> &[f64] {
        &self.ey
    }

    pub fn sd_y(&self) -> Vec<f64> {
        (0..=self.n_steps())
            .map(|i| {
                let m = self.ey[i];
                let v = (0..self.n_paths()).map(|p| (self.y(p, i) - m).powi(2)).sum::<f64>()
                    / (self.n_paths().max(2) - 1) as f64;
                v.sqrt()
            })
            .collect()
    }

    fn integrand(&self, path: usize, node: usize, step: usize, block: usize) -> f64 {
        let f = self.design.feat(step, path);
        let m = f.len();
        let b = &self.beta[step];
        f.iter().enumerate().map(|(a, fa)| fa * b[(block * m + a, node)]).sum()
    }

    /// `Z(t_node, t_step)` for `node ∈ 0..=n`, `step ∈ 0..n`.
    pub fn z(&self, path: usize, node: usize, step: usize) -> Vec<f64> {
        (0..self.design.dim).map(|c| self.integrand(path, node, step, c)).collect()
    }

    /// `U(t_node, t_step)`, one entry per Teugels martingale.
    pub fn u(&self, path: usize, node: usize, step: usize) -> Vec<f64> {
        let d = self.design.dim;
        (0..self.design.rank).map(|k| self.integrand(path, node, step, d + k)).collect()
    }

    /// Per-node residual of `Y_i − EY_i = Σ_{j<i} (Z_{i,j}·ΔW_j + U_{i,j}·ΔH_j)`.
    pub fn m_condition_residual(&self) -> Vec<NodeResidual> {
        let n = self.n_steps();
        let design = &self.design;
        let per_path: Vec<Vec<f64>> = (0..self.n_paths())
            .into_par_iter()
            .map(|p| {
                let mut partial = vec![0.0; n + 1];
                let mut x = Vec::new();
                for j in 0..n {
                    x.resize(design.steps[j].width, 0.0);
                    design.xrow(p, j, &mut x);
                    let b = &self.beta[j];
                    for (i, slot) in partial.iter_mut().enumerate().skip(j + 1) {
                        *slot += x.iter().enumerate().map(|(r, xr)| xr * b[(r, i)]).sum::<f64>();
                    }
                }
                (0..=n).map(|i| self.y(p, i) - self.ey[i] - partial[i]).collect()
            })
            .collect();
        let sd = self.sd_y();
        (0..=n)
            .map(|i| {
                let ms = per_path.iter().map(|r| r[i] * r[i]).sum::<f64>() / self.n_paths() as f64;
                let abs_rms = ms.sqrt();
                let scale = sd[i];
                let relative = if scale > 1e-12 * (1.0 + self.ey[i].abs()) { abs_rms / scale } else { abs_rms };
                NodeResidual {
                    t: self.grid().time(i),
                    abs_rms,
                    relative,
                }
            })
            .collect()
    }

    fn zu_squared(&self) -> f64 {
        zu_quadratic(&self.design, &self.beta)
    }

    fn y_squared(&self) -> f64 {
        y_quadratic(&self.design, &self.y)
    }
}

/// `Σ_i w_i Ê[Y_i²]` with trapezoid weights.
fn y_quadratic(design: &Design, y: &[f64]) -> f64 {
    let n1 = design.n_steps() + 1;
    let w = design.grid.trapezoid_weights();
    let mut acc = vec![0.0; n1];
    for row in y.chunks(n1) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v * v;
        }
    }
    acc.iter().zip(&w).map(|(a, wi)| wi * a / design.n_paths as f64).sum()
}

/// `Σ_i w_i Σ_j Δt Ê[|Z_{i,j}|² + |U_{i,j}|²]` from coefficients.
fn zu_quadratic(design: &Design, beta: &[DMatrix<f64>]) -> f64 {
    let w = design.grid.trapezoid_weights();
    let dt = design.grid.dt();
    let mut total = 0.0;
    for (j, b) in beta.iter().enumerate() {
        let g = &design.nodes[j].gram;
        let m = design.nodes[j].m;
        for (i, wi) in w.iter().enumerate() {
            let mut s = 0.0;
            for blk in 0..design.blocks() {
                let v = b.view((blk * m, i), (m, 1));
                s += (v.transpose() * g * v)[(0, 0)];
            }
            total += wi * dt * s;
        }
    }
    total
}

/// `sqrt(Ê∫|Y|² dt + Ê∫∫(|Z|² + |U|²) ds dt)` on the grid.
pub fn solution_norm(sol: &MSolutionGrid) -> f64 {
    (sol.y_squared() + sol.zu_squared()).max(0.0).sqrt()
}

/// Norm of the difference of two solutions built on the same context.
pub fn solution_distance(a: &MSolutionGrid, b: &MSolutionGrid) -> Result<f64> {
    if !Arc::ptr_eq(&a.design, &b.design) {
        return Err(Error::DimensionMismatch(
            "solutions were computed on different path bundles".into(),
        ));
    }
    let dy: Vec<f64> = a.y.iter().zip(&b.y).map(|(x, y)| x - y).collect();
    let db: Vec<DMatrix<f64>> = a.beta.iter().zip(&b.beta).map(|(x, y)| x - y).collect();
    Ok((y_quadratic(&a.design, &dy) + zu_quadratic(&a.design, &db)).max(0.0).sqrt())
}

struct Iterate {
    y: Vec<f64>,
    beta: Vec<DMatrix<f64>>,
}

fn picard_step(ctx: &SolverContext, driver: &dyn Driver, psi: &[f64], prev: &Iterate) -> Iterate {
    let design = &*ctx.design;
    let n = design.n_steps();
    let n1 = n + 1;
    let n_paths = design.n_paths;
    let dt = design.grid.dt();
    let d = design.dim;
    let k = design.rank;
    let blocks = design.blocks();
    let usage = driver.usage();
    let needs_zu = usage.z || usage.eta || usage.u || usage.zeta;
    let times = design.grid.nodes();

    // ξ_i per path.
    let mut xi = vec![0.0; n_paths * n1];
    xi.par_chunks_mut(n1).enumerate().for_each(|(p, row)| {
        // table[(j·blocks + b)·n1 + i] = integrand block b on step j for target i
        let mut table = Vec::new();
        if needs_zu {
            table.resize(n * blocks * n1, 0.0);
            for j in 0..n {
                let f = design.feat(j, p);
                let m = f.len();
                let b = &prev.beta[j];
                for blk in 0..blocks {
                    let out = &mut table[(j * blocks + blk) * n1..(j * blocks + blk + 1) * n1];
                    for (i, slot) in out.iter_mut().enumerate() {
                        let col = b.column(i);
                        *slot = f.iter().enumerate().map(|(a, fa)| fa * col[blk * m + a]).sum();
                    }
                }
            }
        }
        let at = |j: usize, blk: usize, i: usize| table[(j * blocks + blk) * n1 + i];
        let mut z = vec![0.0; d];
        let mut eta = vec![0.0; d];
        let mut u = vec![0.0; k];
        let mut zeta = vec![0.0; k];
        let yrow = &prev.y[p * n1..(p + 1) * n1];
        for i in 0..n1 {
            let mut acc = 0.0;
            for j in i..n {
                if needs_zu {
                    for c in 0..d {
                        if usage.z {
                            z[c] = at(j, c, i);
                        }
                        if usage.eta {
                            eta[c] = at(i, c, j);
                        }
                    }
                    for c in 0..k {
                        if usage.u {
                            u[c] = at(j, d + c, i);
                        }
                        if usage.zeta {
                            zeta[c] = at(i, d + c, j);
                        }
                    }
                }
                let args = DriverArgs {
                    y: yrow[j],
                    z: &z,
                    eta: &eta,
                    u: &u,
                    zeta: &zeta,
                };
                acc += driver.eval(times[i], times[j], &args);
            }
            row[i] = psi[p * n1 + i] + dt * acc;
        }
    });

    // B_k: coefficients of V_{·,k} = E[ξ_· | F_{t_k}] for k < n.
    let inv_n = 1.0 / n_paths as f64;
    let coefs = design.backward_chain(design.project_last(&xi, n1));

    let mut y = vec![0.0; n_paths * n1];
    y.par_chunks_mut(n1).enumerate().for_each(|(p, row)| {
        for (node, slot) in row.iter_mut().enumerate().take(n) {
            let c = coefs[node].column(node);
            *slot = design.feat(node, p).iter().zip(c.iter()).map(|(f, b)| f * b).sum();
        }
        row[n] = xi[p * n1 + n];
    });

    // Representation coefficients per step.
    let last_rhs = {
        let st = &design.steps[n - 1];
        let mut acc = vec![0.0; st.width * n1];
        let mut x = vec![0.0; st.width];
        for p in 0..n_paths {
            design.xrow(p, n - 1, &mut x);
            accumulate_outer(&mut acc, &x, &xi[p * n1..(p + 1) * n1]);
        }
        DMatrix::from_row_slice(st.width, n1, &acc) * inv_n
    };
    let beta: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let st = &design.steps[j];
            let upper = match &st.cross_next {
                Some(c) => c * &coefs[j + 1],
                None => last_rhs.clone(),
            };
            st.ls.solve(&(upper - &st.cross_same * &coefs[j]))
        })
        .collect();

    Iterate { y, beta }
}

fn relative_change(design: &Design, prev: &Iterate, next: &Iterate) -> f64 {
    let dy: Vec<f64> = next.y.iter().zip(&prev.y).map(|(a, b)| a - b).collect();
    let db: Vec<DMatrix<f64>> = next.beta.iter().zip(&prev.beta).map(|(a, b)| a - b).collect();
    let diff = y_quadratic(design, &dy) + zu_quadratic(design, &db);
    let size = y_quadratic(design, &next.y) + zu_quadratic(design, &next.beta);
    if size > 0.0 {
        (diff / size).max(0.0).sqrt()
    } else {
        diff.max(0.0).sqrt()
    }
}

/// Solves the equation with free term `psi` and driver `driver` on the
/// context's paths.
pub fn solve(psi: &dyn FreeTerm, driver: &dyn Driver, ctx: &SolverContext) -> Result<MSolutionGrid> {
    let design = &ctx.design;
    let contraction = contraction_report(driver, design.grid.horizon());
    let mut warnings = design.warnings.clone();
    if !contraction.accepted {
        if ctx.cfg.override_contraction {
            warnings.push(format!(
                "contraction condition overridden: sup ∫(L_z² + L_u²) = {:.6}",
                contraction.sup_z_u
            ));
        } else {
            return Err(Error::ContractionRejected {
                supremum: contraction.sup_z_u,
            });
        }
    }
    let psi_values = ctx.free_term_matrix(psi)?;
    let n = design.n_steps();
    let mut current = Iterate {
        y: vec![0.0; design.n_paths * (n + 1)],
        beta: design
            .steps
            .iter()
            .map(|s| DMatrix::zeros(s.width, n + 1))
            .collect(),
    };
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..ctx.cfg.max_picard_iters {
        let next = picard_step(ctx, driver, &psi_values, &current);
        let change = relative_change(design, &current, &next);
        history.push(change);
        current = next;
        if change < ctx.cfg.picard_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: history.len(),
            last: *history.last().unwrap_or(&f64::NAN),
            history,
        });
    }
    let n1 = n + 1;
    let mut ey = vec![0.0; n1];
    for row in current.y.chunks(n1) {
        for (a, v) in ey.iter_mut().zip(row) {
            *a += v;
        }
    }
    ey.iter_mut().for_each(|v| *v /= design.n_paths as f64);
    Ok(MSolutionGrid {
        design: Arc::clone(design),
        y: current.y,
        ey,
        beta: current.beta,
        diagnostics: SolverDiagnostics {
            iterations: history.len(),
            final_change: *history.last().unwrap(),
            change_history: history,
            rank_deficient_designs: design.rank_deficient,
            warnings,
            contraction,
        },
    })
}

/// Builds a context and solves in one call.
pub fn solve_on_paths(
    psi: &dyn FreeTerm,
    driver: &dyn Driver,
    paths: &PathBundle,
    incs: &TeugelsIncrements,
    cfg: &SolverConfig,
) -> Result<MSolutionGrid> {
    let ctx = SolverContext::new(paths, incs, cfg)?;
    solve(psi, driver, &ctx)
}
