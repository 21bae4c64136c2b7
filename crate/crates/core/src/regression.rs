//! Least-squares projections onto polynomial features of the path state.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Relative pivot tolerance below which a regression column is dropped.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Columns kept by diagonally pivoted Cholesky on a PSD matrix, in pivot
/// order. Stops once the largest remaining pivot is `≤ tol · max diag`.
pub fn pivot_select(a: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let mut kept = Vec::new();
    if !(scale > 0.0) {
        return kept;
    }
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (piv, val) = (k..n)
            .map(|i| (i, work[(perm[i], perm[i])]))
            .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(val > tol * scale) {
            break;
        }
        perm.swap(k, piv);
        let pk = perm[k];
        let d = val.sqrt();
        for &pi in &perm[k + 1..] {
            work[(pi, pk)] /= d;
        }
        for a_idx in k + 1..n {
            let pa = perm[a_idx];
            for &pb in &perm[k + 1..=a_idx] {
                let upd = work[(pa, pk)] * work[(pb, pk)];
                work[(pa, pb)] -= upd;
                if pa != pb {
                    work[(pb, pa)] = work[(pa, pb)];
                }
            }
        }
        kept.push(pk);
    }
    kept
}

/// Normal-equation solver for a fixed Gram matrix `G = XᵀX/N`, restricted to
/// a well-conditioned column subset and stabilized by a relative ridge.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    n_cols: usize,
    retained: Vec<usize>,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl LeastSquares {
    pub fn new(gram: &DMatrix<f64>, ridge: f64) -> Self {
        Self::with_unpenalized(gram, ridge, &[])
    }

    /// As [`LeastSquares::new`], leaving the columns in `free` out of the
    /// ridge so that targets in their span are fitted exactly.
    pub fn with_unpenalized(gram: &DMatrix<f64>, ridge: f64, free: &[usize]) -> Self {
        let n_cols = gram.nrows();
        let mut retained = pivot_select(gram, PIVOT_TOLERANCE);
        retained.sort_unstable();
        let m = retained.len();
        let factor = if m == 0 {
            None
        } else {
            let mut sub = DMatrix::from_fn(m, m, |a, b| gram[(retained[a], retained[b])]);
            let mean_diag = (0..m).map(|a| sub[(a, a)]).sum::<f64>() / m as f64;
            for a in 0..m {
                if !free.contains(&retained[a]) {
                    sub[(a, a)] += ridge * mean_diag;
                }
            }
            Cholesky::new(sub)
        };
        if factor.is_none() {
            retained.clear();
        }
        Self {
            n_cols,
            retained,
            factor,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.retained.len() < self.n_cols
    }

    /// Coefficients for right-hand sides `XᵀY/N` (one column per target);
    /// dropped columns get zero coefficients.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_cols, rhs.ncols());
        if let Some(f) = &self.factor {
            let m = self.retained.len();
            let sub = DMatrix::from_fn(m, rhs.ncols(), |a, c| rhs[(self.retained[a], c)]);
            let sol = f.solve(&sub);
            for (a, &r) in self.retained.iter().enumerate() {
                for c in 0..rhs.ncols() {
                    out[(r, c)] = sol[(a, c)];
                }
            }
        }
        out
    }
}

/// Exponent vectors of all monomials in `n_vars` variables with total
/// degree `≤ degree`, constant first, graded lexicographic within a degree.
pub fn monomial_exponents(n_vars: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; n_vars]];
    for total in 1..=degree {
        let mut current = vec![0u8; n_vars];
        fill_degree(&mut out, &mut current, 0, total);
    }
    out
}

fn fill_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        fill_degree(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// Polynomial features of standardized state variables at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    vars: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    exponents: Vec<Vec<u8>>,
}

impl FeatureMap {
    /// Fits standardization on `samples` (row-major, `n_raw` columns) and
    /// keeps only variables with non-negligible spread.
    pub fn fit(samples: &[f64], n_raw: usize, degree: usize) -> Self {
        let n = samples.len().checked_div(n_raw).unwrap_or(0);
        let mut vars = Vec::new();
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for v in 0..n_raw {
            let mean = (0..n).map(|p| samples[p * n_raw + v]).sum::<f64>() / n.max(1) as f64;
            let var = (0..n).map(|p| (samples[p * n_raw + v] - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + mean.abs()) {
                vars.push(v);
                means.push(mean);
                scales.push(1.0 / sd);
            }
        }
        let exponents = monomial_exponents(vars.len(), degree);
        Self {
            vars,
            means,
            scales,
            exponents,
        }
    }

    pub fn n_features(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval_into(&self, raw: &[f64], out: &mut [f64]) {
        let z: Vec<f64> = self
            .vars
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(&v, (m, s))| (raw[v] - m) * s)
            .collect();
        for (slot, e) in out.iter_mut().zip(&self.exponents) {
            *slot = e.iter().zip(&z).map(|(&k, x)| x.powi(k as i32)).product();
        }
    }
}
