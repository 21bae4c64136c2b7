//! Orthonormal polynomial basis for `μ(dx) = x²ν(dx) + σ²δ₀(dx)` and the
//! Teugels martingales built from it.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::{LevySpec, PathBundle, TimeGrid};
use crate::regression::pivot_select;

/// Relative pivot tolerance used for rank detection on the Hankel matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Moments `m_k = ∫ x^k μ(dx)` for `k = 0..=2K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    moments: Vec<f64>,
}

impl MomentTable {
    pub fn from_moments(moments: Vec<f64>) -> Self {
        Self { moments }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.moments
    }

    pub fn get(&self, k: usize) -> f64 {
        self.moments[k]
    }

    /// Highest polynomial order whose Gram matrix is covered.
    pub fn max_order(&self) -> usize {
        self.moments.len().div_ceil(2)
    }

    /// Hankel Gram matrix `(m_{i+j})` of the monomials `1, …, x^{k-1}`.
    pub fn hankel(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k, k, |i, j| self.moments[i + j])
    }
}

pub fn compute_moments(spec: &LevySpec, order: usize) -> MomentTable {
    let sigma2 = spec.gaussian_sigma * spec.gaussian_sigma;
    let moments = (0..=2 * order)
        .map(|k| spec.jump_law.levy_moment(k + 2) + if k == 0 { sigma2 } else { 0.0 })
        .collect();
    MomentTable { moments }
}

/// Numerical rank of a symmetric positive semidefinite matrix by diagonally
/// pivoted Cholesky.
pub fn psd_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    pivot_select(a, tol).len()
}

/// Orthonormalized polynomials `q_0, …, q_{K_eff − 1}` in `L²(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeugelsBasis {
    requested_order: usize,
    moments: MomentTable,
    /// Row `i − 1` holds `c_{i,1..=i}`; strictly upper part is zero.
    coefficients: DMatrix<f64>,
}

/// Gram–Schmidt on `1, x, x², …` under the moment inner product.
pub fn orthonormalize(moments: &MomentTable, order: usize) -> Result<TeugelsBasis> {
    if order == 0 {
        return Err(Error::invalid("basis.order", "must be >= 1"));
    }
    if moments.as_slice().len() < 2 * order - 1 {
        return Err(Error::DimensionMismatch(format!(
            "moment table of length {} cannot support order {}",
            moments.as_slice().len(),
            order
        )));
    }
    let hankel = moments.hankel(order);
    let k_eff = psd_rank(&hankel, RANK_TOLERANCE).min(order);
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for (i, ai) in a.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                s += ai * bj * hankel[(i, j)];
            }
        }
        s
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_eff);
    for i in 0..k_eff {
        let mut v = vec![0.0; order];
        v[i] = 1.0;
        for _ in 0..2 {
            for q in &rows {
                let proj = inner(&v, q);
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= proj * qk;
                }
            }
        }
        let norm2 = inner(&v, &v);
        if !(norm2 > RANK_TOLERANCE * hankel[(i, i)]) {
            break;
        }
        let norm = norm2.sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        rows.push(v);
    }
    let k_eff = rows.len();
    let coefficients = DMatrix::from_fn(k_eff, k_eff, |i, k| rows[i][k]);
    Ok(TeugelsBasis {
        requested_order: order,
        moments: moments.clone(),
        coefficients,
    })
}

/// `compute_moments` followed by `orthonormalize`.
pub fn basis_for(spec: &LevySpec, order: usize) -> Result<TeugelsBasis> {
    orthonormalize(&compute_moments(spec, order), order)
}

impl TeugelsBasis {
    pub fn requested_order(&self) -> usize {
        self.requested_order
    }

    pub fn effective_rank(&self) -> usize {
        self.coefficients.nrows()
    }

    /// No Teugels martingales at all (trivial μ).
    pub fn is_empty(&self) -> bool {
        self.effective_rank() == 0
    }

    pub fn moments(&self) -> &MomentTable {
        &self.moments
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// `c_{i,k}` with 1-based indices, zero above the diagonal.
    pub fn c(&self, i: usize, k: usize) -> f64 {
        if k > i {
            0.0
        } else {
            self.coefficients[(i - 1, k - 1)]
        }
    }

    pub fn coefficient_rows(&self) -> Vec<Vec<f64>> {
        (0..self.effective_rank())
            .map(|i| (0..=i).map(|k| self.coefficients[(i, k)]).collect())
            .collect()
    }

    /// `q_{i−1}(x) = Σ_k c_{i,k} x^{k−1}` for `1 ≤ i ≤ K_eff`.
    pub fn q(&self, i: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut xp = 1.0;
        for k in 0..i {
            acc += self.coefficients[(i - 1, k)] * xp;
            xp *= x;
        }
        acc
    }

    /// `p_i(x) = x · q_{i−1}(x)`: contribution of a jump of size `x` to `ΔH^{(i)}`.
    pub fn p(&self, i: usize, x: f64) -> f64 {
        x * self.q(i, x)
    }

    /// `⟨q_{i−1}, q_{j−1}⟩_μ` evaluated from the moment table.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.effective_rank();
        let h = self.moments.hankel(k);
        &self.coefficients * h * self.coefficients.transpose()
    }
}

/// `ΔH^{(i)}` per path and step, laid out as `[(p·n + j)·K_eff + (i − 1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeugelsIncrements {
    basis: TeugelsBasis,
    n_paths: usize,
    n_steps: usize,
    data: Vec<f64>,
}

pub fn assemble_h(basis: &TeugelsBasis, paths: &PathBundle) -> Result<TeugelsIncrements> {
    let k = basis.effective_rank();
    if paths.max_power() < k {
        return Err(Error::OrderMismatch {
            required: k,
            available: paths.max_power(),
        });
    }
    let n = paths.n_steps();
    let mut data = vec![0.0; paths.n_paths() * n * k];
    if k > 0 {
        data.par_chunks_mut(n * k).enumerate().for_each(|(p, chunk)| {
            for j in 0..n {
                let row = &mut chunk[j * k..(j + 1) * k];
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = (0..=i)
                        .map(|m| basis.coefficients[(i, m)] * paths.centered_increment(p, j, m + 1))
                        .sum();
                }
            }
        });
    }
    Ok(TeugelsIncrements {
        basis: basis.clone(),
        n_paths: paths.n_paths(),
        n_steps: n,
        data,
    })
}

impl TeugelsIncrements {
    pub fn basis(&self) -> &TeugelsBasis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.effective_rank()
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    /// `(ΔH^{(1)}, …, ΔH^{(K_eff)})` on one step.
    pub fn at(&self, path: usize, step: usize) -> &[f64] {
        let k = self.rank();
        let at = (path * self.n_steps + step) * k;
        &self.data[at..at + k]
    }
}

/// Realized covariation `(1/T)·Ê[Σ_j ΔH^{(i)}_j ΔH^{(l)}_j]` with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariationReport {
    pub matrix: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub n_paths: usize,
}

impl CovariationReport {
    pub fn max_diagonal_deviation(&self) -> f64 {
        (0..self.matrix.len())
            .map(|i| (self.matrix[i][i] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let k = self.matrix.len();
        let mut m = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m = m.max(self.matrix[i][j].abs());
                }
            }
        }
        m
    }
}

pub fn orthonormality_diagnostic(incs: &TeugelsIncrements, grid: &TimeGrid) -> CovariationReport {
    let k = incs.rank();
    let n_paths = incs.n_paths();
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut acc = vec![0.0; k * k];
            for j in 0..incs.n_steps() {
                let h = incs.at(p, j);
                for a in 0..k {
                    for b in 0..k {
                        acc[a * k + b] += h[a] * h[b];
                    }
                }
            }
            acc
        })
        .collect();
    let t = grid.horizon();
    let mut mean = vec![0.0; k * k];
    for v in &per_path {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_paths as f64);
    let mut var = vec![0.0; k * k];
    for v in &per_path {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let denom = (n_paths.max(2) - 1) as f64;
    let shape = |v: &[f64], f: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
        (0..k).map(|a| (0..k).map(|b| f(v[a * k + b])).collect()).collect()
    };
    CovariationReport {
        matrix: shape(&mean, &|m| m / t),
        std_errors: shape(&var, &|s| (s / denom / n_paths as f64).sqrt() / t),
        n_paths,
    }
}
