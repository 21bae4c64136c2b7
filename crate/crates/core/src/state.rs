//! Cumulative path states `(W, L, N, H)` at the grid nodes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levy::{PathBundle, TimeGrid};
use crate::teugels::TeugelsIncrements;

/// Node values per path, laid out as `[(p·(n+1) + i)·stride + slot]` with
/// slots `W_1..W_d, L, N, H^{(1)}..H^{(K)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStates {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    rank: usize,
    stride: usize,
    data: Vec<f64>,
}

impl NodeStates {
    pub fn new(paths: &PathBundle, incs: &TeugelsIncrements) -> Result<Self> {
        if incs.n_paths() != paths.n_paths() || incs.n_steps() != paths.n_steps() {
            return Err(Error::DimensionMismatch(format!(
                "Teugels increments ({} paths, {} steps) do not match the path bundle ({} paths, {} steps)",
                incs.n_paths(),
                incs.n_steps(),
                paths.n_paths(),
                paths.n_steps()
            )));
        }
        let n = paths.n_steps();
        let d = paths.brownian_dim();
        let k = incs.rank();
        let stride = d + 2 + k;
        let mut data = vec![0.0; paths.n_paths() * (n + 1) * stride];
        data.par_chunks_mut((n + 1) * stride).enumerate().for_each(|(p, chunk)| {
            for j in 0..n {
                let (prev, next) = chunk.split_at_mut((j + 1) * stride);
                let prev = &prev[j * stride..];
                let next = &mut next[..stride];
                let dw = paths.brownian_increment(p, j);
                for c in 0..d {
                    next[c] = prev[c] + dw[c];
                }
                next[d] = prev[d] + paths.levy_increment(p, j);
                next[d + 1] = prev[d + 1] + paths.jump_count(p, j) as f64;
                let dh = incs.at(p, j);
                for i in 0..k {
                    next[d + 2 + i] = prev[d + 2 + i] + dh[i];
                }
            }
        });
        Ok(Self {
            grid: paths.grid().clone(),
            n_paths: paths.n_paths(),
            dim: d,
            rank: k,
            stride,
            data,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn brownian_dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn view(&self, path: usize) -> PathView<'_> {
        let len = (self.grid.n_steps() + 1) * self.stride;
        PathView {
            states: self,
            data: &self.data[path * len..(path + 1) * len],
        }
    }
}

/// Read-only access to one path's node states.
#[derive(Clone, Copy)]
pub struct PathView<'a> {
    states: &'a NodeStates,
    data: &'a [f64],
}

impl<'a> PathView<'a> {
    fn node(&self, i: usize) -> &'a [f64] {
        let s = self.states.stride;
        &self.data[i * s..(i + 1) * s]
    }

    pub fn n_steps(&self) -> usize {
        self.states.grid.n_steps()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.states.grid.time(i)
    }

    /// `W_{t_i}`.
    pub fn w(&self, i: usize) -> &'a [f64] {
        &self.node(i)[..self.states.dim]
    }

    /// `L_{t_i}`.
    pub fn l(&self, i: usize) -> f64 {
        self.node(i)[self.states.dim]
    }

    /// Number of jumps in `(0, t_i]`.
    pub fn n(&self, i: usize) -> f64 {
        self.node(i)[self.states.dim + 1]
    }

    /// `(H^{(1)}_{t_i}, …, H^{(K)}_{t_i})`.
    pub fn h(&self, i: usize) -> &'a [f64] {
        &self.node(i)[self.states.dim + 2..]
    }
}
