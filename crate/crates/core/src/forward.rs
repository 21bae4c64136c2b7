//! Linear forward Volterra equations and the Doléans-Dade exponential.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_term::FreeTerm;
use crate::generators::{
    ArgUsage, Coefficient, Driver, DriverArgs, GeneratorFlags, Lipschitz, RateFn,
};
use crate::levy::{PathBundle, TimeGrid};
use crate::state::NodeStates;
use crate::teugels::TeugelsIncrements;

/// Kernels `B0(s,t)`, `B(s,t) ∈ ℝ^d`, `C^{(k)}(s,t)` with `s ≤ t`
/// (first argument is the earlier time).
#[derive(Debug, Clone, Default)]
pub struct LinearCoefficients {
    pub b0: Coefficient,
    pub b: Vec<Coefficient>,
    pub c: Vec<Coefficient>,
}

impl LinearCoefficients {
    pub fn constant(b0: f64, b: &[f64], c: &[f64]) -> Self {
        Self {
            b0: Coefficient::Constant(b0),
            b: b.iter().map(|&x| Coefficient::Constant(x)).collect(),
            c: c.iter().map(|&x| Coefficient::Constant(x)).collect(),
        }
    }

    pub fn check_dims(&self, brownian_dim: usize, rank: usize) -> Result<()> {
        if self.b.len() > brownian_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} Brownian kernels for dimension {brownian_dim}",
                self.b.len()
            )));
        }
        if self.c.len() > rank {
            return Err(Error::DimensionMismatch(format!(
                "{} Teugels kernels for effective rank {rank}",
                self.c.len()
            )));
        }
        let all = std::iter::once(&self.b0).chain(&self.b).chain(&self.c);
        if all.into_iter().any(|k| !k.sup().is_finite()) {
            return Err(Error::invalid("coefficients", "kernel bounds must be finite"));
        }
        Ok(())
    }

    /// `sup_t ∫_t^T (|B0|² + |B|² + Σ|C|²) ds` from the declared bounds.
    pub fn bound_integral(&self, horizon: f64) -> f64 {
        let sq = |v: &[Coefficient]| v.iter().map(|k| k.sup().powi(2)).sum::<f64>();
        (self.b0.sup().powi(2) + sq(&self.b) + sq(&self.c)) * horizon
    }

    /// `sup|B0| + sup|B| + sup‖C‖`.
    pub fn bound_sum(&self) -> f64 {
        let l2 = |v: &[Coefficient]| v.iter().map(|k| k.sup().powi(2)).sum::<f64>().sqrt();
        self.b0.sup() + l2(&self.b) + l2(&self.c)
    }

    /// Backward driver `B0(t,s) y + B(t,s)·η + Σ C^{(k)}(t,s) ζ_k`.
    pub fn backward_driver(&self) -> LinearAdjointDriver {
        LinearAdjointDriver { coef: self.clone() }
    }
}

/// Linear driver of the adjoint backward equation, acting on `Y(s−)`,
/// `Z(s,t)` and `U(s,t)`.
#[derive(Debug, Clone)]
pub struct LinearAdjointDriver {
    coef: LinearCoefficients,
}

impl Driver for LinearAdjointDriver {
    fn name(&self) -> String {
        "linear_adjoint".into()
    }

    fn eval(&self, t: f64, s: f64, a: &DriverArgs<'_>) -> f64 {
        let mut v = self.coef.b0.eval(t, s) * a.y;
        for (k, x) in self.coef.b.iter().zip(a.eta) {
            v += k.eval(t, s) * x;
        }
        for (k, x) in self.coef.c.iter().zip(a.zeta) {
            v += k.eval(t, s) * x;
        }
        v
    }

    fn lipschitz(&self) -> Lipschitz {
        let norm = |v: &[Coefficient]| {
            let parts = v.to_vec();
            let bound = parts.iter().map(|k| k.sup().powi(2)).sum::<f64>().sqrt();
            if parts.iter().all(|k| matches!(k, Coefficient::Constant(_))) {
                Coefficient::Constant(bound)
            } else {
                Coefficient::function(
                    move |t, s| parts.iter().map(|k| k.eval(t, s).powi(2)).sum::<f64>().sqrt(),
                    bound,
                )
            }
        };
        let b0 = self.coef.b0.clone();
        Lipschitz {
            y: match b0 {
                Coefficient::Constant(c) => Coefficient::Constant(c.abs()),
                Coefficient::Function { f, bound } => Coefficient::function(move |t, s| f(t, s).abs(), bound),
            },
            eta: norm(&self.coef.b),
            zeta: norm(&self.coef.c),
            ..Default::default()
        }
    }

    fn flags(&self) -> GeneratorFlags {
        let monotone = self
            .coef
            .c
            .iter()
            .all(|k| matches!(k, Coefficient::Constant(c) if *c >= 0.0));
        GeneratorFlags {
            monotone_in_u: monotone,
            simplified_form: true,
            sub_additive: true,
            positively_homogeneous: true,
            linear_y_rate: matches!(self.coef.b0, Coefficient::Constant(_)),
        }
    }

    fn usage(&self) -> ArgUsage {
        ArgUsage {
            y: !self.coef.b0.is_zero(),
            eta: self.coef.b.iter().any(|k| !k.is_zero()),
            zeta: self.coef.c.iter().any(|k| !k.is_zero()),
            ..Default::default()
        }
    }

    fn y_rate(&self) -> Option<RateFn> {
        match self.coef.b0 {
            Coefficient::Constant(c) => Some(RateFn::Constant(c)),
            _ => None,
        }
    }
}

/// Forward solution `X[path, node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardGrid {
    grid: TimeGrid,
    n_paths: usize,
    x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardRow {
    pub t: f64,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
}

impl ForwardGrid {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn x(&self, path: usize, node: usize) -> f64 {
        self.x[path * (self.grid.n_steps() + 1) + node]
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.x(p, node)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Per-node mean, standard deviation and minimum.
    pub fn summary(&self) -> Vec<ForwardRow> {
        (0..=self.grid.n_steps())
            .map(|i| {
                let v = self.node(i);
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                ForwardRow {
                    t: self.grid.time(i),
                    mean,
                    sd: var.sqrt(),
                    min: v.iter().copied().fold(f64::INFINITY, f64::min),
                }
            })
            .collect()
    }
}

fn check_inputs(paths: &PathBundle, incs: &TeugelsIncrements) -> Result<()> {
    if paths.n_paths() != incs.n_paths() || paths.n_steps() != incs.n_steps() {
        return Err(Error::DimensionMismatch(
            "Teugels increments do not match the path bundle".into(),
        ));
    }
    Ok(())
}

/// Explicit Euler on the Volterra form:
/// `X_i = ψ(t_i) + Σ_{j<i} X_j (B0(t_j,t_i)Δt + B(t_j,t_i)·ΔW_j + Σ_k C^{(k)}(t_j,t_i) ΔH^{(k)}_j)`.
pub fn euler_solve(
    coef: &LinearCoefficients,
    free: &dyn FreeTerm,
    paths: &PathBundle,
    incs: &TeugelsIncrements,
) -> Result<ForwardGrid> {
    check_inputs(paths, incs)?;
    if !free.is_adapted() {
        return Err(Error::NotAdapted(free.describe()));
    }
    let d = paths.brownian_dim();
    let k = incs.rank();
    coef.check_dims(d, k)?;
    free.check_dims(d, k)?;
    let states = NodeStates::new(paths, incs)?;
    let grid = paths.grid().clone();
    let n = grid.n_steps();
    let n1 = n + 1;
    let dt = grid.dt();
    let times = grid.nodes();
    // kernel tables indexed [j·n1 + i] for j < i
    let table = |kern: &Coefficient| -> Vec<f64> {
        let mut out = vec![0.0; n1 * n1];
        for j in 0..n1 {
            for i in j + 1..n1 {
                out[j * n1 + i] = kern.eval(times[j], times[i]);
            }
        }
        out
    };
    let b0 = table(&coef.b0);
    let b: Vec<Vec<f64>> = coef.b.iter().map(table).collect();
    let c: Vec<Vec<f64>> = coef.c.iter().map(table).collect();

    let mut x = vec![0.0; paths.n_paths() * n1];
    x.par_chunks_mut(n1).enumerate().for_each(|(p, row)| {
        let view = states.view(p);
        for i in 0..n1 {
            let mut v = free.value(i, &view);
            for j in 0..i {
                let at = j * n1 + i;
                let mut w = b0[at] * dt;
                let dw = paths.brownian_increment(p, j);
                for (bc, e) in b.iter().zip(dw) {
                    w += bc[at] * e;
                }
                let dh = incs.at(p, j);
                for (ck, e) in c.iter().zip(dh) {
                    w += ck[at] * e;
                }
                v += row[j] * w;
            }
            row[i] = v;
        }
    });
    Ok(ForwardGrid {
        grid,
        n_paths: paths.n_paths(),
        x,
    })
}

/// Constant coefficients of `dX = X(a0 dt + b0·dW + Σ_k c0_k dH^{(k)})` on
/// one time interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialPiece {
    pub a0: f64,
    pub b0: Vec<f64>,
    pub c0: Vec<f64>,
}

/// Pathwise Doléans-Dade exponential with constant coefficients:
/// `X_t = g0 · exp(a0 t + M_t − ½[M^c]_t − Σ_{r≤t} ΔM_r) · Π_{r≤t} (1 + ΔM_r)`
/// with `M = b0·W + Σ_k c0_k H^{(k)}`.
pub fn dd_exponential(
    a0: f64,
    b0: &[f64],
    c0: &[f64],
    g0: f64,
    paths: &PathBundle,
    incs: &TeugelsIncrements,
) -> Result<ForwardGrid> {
    let piece = ExponentialPiece {
        a0,
        b0: b0.to_vec(),
        c0: c0.to_vec(),
    };
    dd_exponential_piecewise(&[], std::slice::from_ref(&piece), g0, paths, incs)
}

/// Doléans-Dade exponential whose coefficients are constant on the
/// deterministic intervals delimited by `breaks` (`pieces.len() ==
/// breaks.len() + 1`); a step uses the piece active at its left endpoint.
pub fn dd_exponential_piecewise(
    breaks: &[f64],
    pieces: &[ExponentialPiece],
    g0: f64,
    paths: &PathBundle,
    incs: &TeugelsIncrements,
) -> Result<ForwardGrid> {
    check_inputs(paths, incs)?;
    if pieces.len() != breaks.len() + 1 {
        return Err(Error::invalid("pieces", "needs exactly one more piece than breaks"));
    }
    if breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("breaks", "must be strictly increasing"));
    }
    let d = paths.brownian_dim();
    let basis = incs.basis();
    let k = incs.rank();
    for pc in pieces {
        if pc.b0.len() > d || pc.c0.len() > k {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vectors ({}, {}) exceed (d, K_eff) = ({d}, {k})",
                pc.b0.len(),
                pc.c0.len()
            )));
        }
        if !pc.a0.is_finite() || pc.b0.iter().chain(&pc.c0).any(|x| !x.is_finite()) {
            return Err(Error::invalid("coefficients", "must be finite"));
        }
    }
    if !g0.is_finite() {
        return Err(Error::invalid("g0", "must be finite"));
    }
    let grid = paths.grid().clone();
    let n = grid.n_steps();
    let n1 = n + 1;
    let dt = grid.dt();
    let sigma = paths.spec().gaussian_sigma;
    // ½[M^c] rate: |b0|² + σ²(Σ_k c0_k c_{k,1})²
    let half_qv: Vec<f64> = pieces
        .iter()
        .map(|pc| {
            let b2: f64 = pc.b0.iter().map(|x| x * x).sum();
            let gauss: f64 = pc.c0.iter().enumerate().map(|(i, c)| c * basis.c(i + 1, 1)).sum();
            0.5 * (b2 + sigma * sigma * gauss * gauss)
        })
        .collect();
    let piece_index: Vec<usize> = (0..n)
        .map(|j| breaks.partition_point(|&b| b <= grid.time(j)))
        .collect();

    let rows: Vec<std::result::Result<Vec<f64>, Error>> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut row = vec![0.0; n1];
            row[0] = g0;
            let mut log_part = 0.0;
            for j in 0..n {
                let pc = &pieces[piece_index[j]];
                let mut dm: f64 = pc.b0.iter().zip(paths.brownian_increment(p, j)).map(|(a, b)| a * b).sum();
                dm += pc.c0.iter().zip(incs.at(p, j)).map(|(a, b)| a * b).sum::<f64>();
                let mut incr = pc.a0 * dt + dm - half_qv[piece_index[j]] * dt;
                for &x in paths.jumps(p, j).1 {
                    let jump: f64 = pc.c0.iter().enumerate().map(|(i, c)| c * basis.p(i + 1, x)).sum();
                    let factor = 1.0 + jump;
                    if factor <= 0.0 {
                        return Err(Error::JumpConditionBreach { path: p, step: j, factor });
                    }
                    incr += factor.ln() - jump;
                }
                log_part += incr;
                row[j + 1] = g0 * log_part.exp();
            }
            Ok(row)
        })
        .collect();
    let mut x = Vec::with_capacity(paths.n_paths() * n1);
    for r in rows {
        x.extend(r?);
    }
    Ok(ForwardGrid {
        grid,
        n_paths: paths.n_paths(),
        x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min: f64,
    pub negative_fraction: f64,
    pub n_values: usize,
    pub nonnegative: bool,
    pub strictly_positive: bool,
}

pub fn positivity_check(fg: &ForwardGrid) -> PositivityReport {
    let v = fg.values();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let negatives = v.iter().filter(|x| **x < 0.0).count();
    PositivityReport {
        min,
        negative_fraction: negatives as f64 / v.len() as f64,
        n_values: v.len(),
        nonnegative: negatives == 0,
        strictly_positive: min > 0.0,
    }
}
