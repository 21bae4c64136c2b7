//! Driving noise: a `d`-dimensional Brownian motion and an independent
//! finite-activity Lévy process, simulated on a uniform grid together with
//! its power-jump processes.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;

/// Law of a single jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDistribution {
    /// Finitely many atoms `(size, prob)`.
    Atoms { atoms: Vec<Atom> },
    /// Uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Gaussian jump sizes (Merton type); all exponential moments are finite.
    Normal { mean: f64, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub size: f64,
    pub prob: f64,
}

impl JumpDistribution {
    pub fn atoms(pairs: &[(f64, f64)]) -> Self {
        JumpDistribution::Atoms {
            atoms: pairs.iter().map(|&(size, prob)| Atom { size, prob }).collect(),
        }
    }

    /// Raw moment `E[J^k]`.
    pub fn raw_moment(&self, k: usize) -> f64 {
        match self {
            JumpDistribution::Atoms { atoms } => atoms
                .iter()
                .map(|a| a.prob * a.size.powi(k as i32))
                .sum(),
            JumpDistribution::Uniform { low, high } => {
                let k1 = (k + 1) as i32;
                (high.powi(k1) - low.powi(k1)) / ((k + 1) as f64 * (high - low))
            }
            JumpDistribution::Normal { mean, std } => {
                let (mut prev, mut cur) = (1.0, *mean);
                if k == 0 {
                    return 1.0;
                }
                for j in 2..=k {
                    let next = mean * cur + (j - 1) as f64 * std * std * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpDistribution::Atoms { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.size;
                    }
                }
                atoms.last().map(|a| a.size).unwrap_or(0.0)
            }
            JumpDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            JumpDistribution::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JumpDistribution::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("jump_law.jumps.atoms", "at least one atom required"));
                }
                let mut total = 0.0;
                for (i, a) in atoms.iter().enumerate() {
                    if !a.size.is_finite() || a.size == 0.0 {
                        return Err(Error::invalid(
                            format!("jump_law.jumps.atoms[{i}].size"),
                            "jump sizes must be finite and nonzero",
                        ));
                    }
                    if !(a.prob.is_finite() && a.prob >= 0.0) {
                        return Err(Error::invalid(
                            format!("jump_law.jumps.atoms[{i}].prob"),
                            "probabilities must be nonnegative",
                        ));
                    }
                    total += a.prob;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(
                        "jump_law.jumps.atoms",
                        format!("probabilities sum to {total}, expected 1"),
                    ));
                }
            }
            JumpDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::invalid("jump_law.jumps", "uniform law needs finite low < high"));
                }
            }
            JumpDistribution::Normal { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && *std > 0.0) {
                    return Err(Error::invalid("jump_law.jumps", "normal law needs finite mean and std > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Lévy measure of the driving process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    #[default]
    None,
    /// `ν(dx) = rate · F(dx)`.
    CompoundPoisson { rate: f64, jumps: JumpDistribution },
}

impl JumpLaw {
    pub fn rate(&self) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::CompoundPoisson { rate, .. } => *rate,
        }
    }

    /// `∫ x^k ν(dx)` for `k ≥ 1`.
    pub fn levy_moment(&self, k: usize) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::CompoundPoisson { rate, jumps } => rate * jumps.raw_moment(k),
        }
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self, JumpLaw::None)
    }
}

fn default_dim() -> usize {
    1
}

/// Brownian motion `W` in `ℝ^d` plus a Lévy process `L` with drift,
/// Gaussian coefficient and jump law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySpec {
    pub horizon: f64,
    #[serde(default = "default_dim")]
    pub brownian_dim: usize,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub gaussian_sigma: f64,
    #[serde(default)]
    pub jump_law: JumpLaw,
}

impl LevySpec {
    pub fn new(horizon: f64, brownian_dim: usize, drift: f64, gaussian_sigma: f64, jump_law: JumpLaw) -> Result<Self> {
        let spec = Self {
            horizon,
            brownian_dim,
            drift,
            gaussian_sigma,
            jump_law,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Pure Brownian driver, trivial Lévy part.
    pub fn brownian(horizon: f64, brownian_dim: usize) -> Result<Self> {
        Self::new(horizon, brownian_dim, 0.0, 0.0, JumpLaw::None)
    }

    pub fn compound_poisson(horizon: f64, rate: f64, jumps: JumpDistribution) -> Result<Self> {
        Self::new(horizon, 1, 0.0, 0.0, JumpLaw::CompoundPoisson { rate, jumps })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be finite and > 0"));
        }
        if self.brownian_dim == 0 {
            return Err(Error::invalid("brownian_dim", "must be >= 1"));
        }
        if !self.drift.is_finite() {
            return Err(Error::invalid("drift", "must be finite"));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma >= 0.0) {
            return Err(Error::invalid("gaussian_sigma", "must be finite and >= 0"));
        }
        if let JumpLaw::CompoundPoisson { rate, jumps } = &self.jump_law {
            if !(rate.is_finite() && *rate > 0.0) {
                return Err(Error::invalid("jump_law.rate", "must be finite and > 0"));
            }
            jumps.validate()?;
        }
        Ok(())
    }

    /// True when `L` is identically zero.
    pub fn levy_is_trivial(&self) -> bool {
        self.drift == 0.0 && self.gaussian_sigma == 0.0 && !self.jump_law.has_jumps()
    }
}

/// Compensator rates `E[L_1^{(i)}]` for `i = 1..=max_i`.
///
/// `L^{(2)}` is read as the full quadratic variation `[L, L]`, so its rate
/// carries `σ²` while its increments carry the deterministic `σ²Δt`.
pub fn power_moments(spec: &LevySpec, max_i: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if max_i == 0 {
        return Err(Error::invalid("max_i", "must be >= 1"));
    }
    let sigma2 = spec.gaussian_sigma * spec.gaussian_sigma;
    Ok((1..=max_i)
        .map(|i| match i {
            1 => spec.drift + spec.jump_law.levy_moment(1),
            2 => sigma2 + spec.jump_law.levy_moment(2),
            _ => spec.jump_law.levy_moment(i),
        })
        .collect())
}

/// Uniform grid `0 = t_0 < … < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::invalid("grid.n_steps", "must be >= 2"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be finite and > 0"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Trapezoid weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps)
            .map(|i| if i == 0 || i == self.n_steps { 0.5 * dt } else { dt })
            .collect()
    }
}

/// Simulated increments of `(W, L, L^{(2)}, …)` on a grid.
///
/// Layouts are path-major: `brownian[(p·n + j)·d + c]`,
/// `power[(p·n + j)·i_max + (i − 1)]`; jumps are stored in CSR form indexed
/// by `p·n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    spec: LevySpec,
    grid: TimeGrid,
    n_paths: usize,
    max_power: usize,
    seed: u64,
    compensators: Vec<f64>,
    brownian: Vec<f64>,
    power: Vec<f64>,
    jump_offsets: Vec<usize>,
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
}

struct SimulatedPath {
    brownian: Vec<f64>,
    power: Vec<f64>,
    counts: Vec<usize>,
    times: Vec<f64>,
    sizes: Vec<f64>,
}

/// Simulates `n_paths` independent paths.
///
/// Each `(path, step)` draws from its own counter-based substream, so the
/// bundle is bit-identical for a given seed regardless of thread count.
pub fn simulate_paths(
    spec: &LevySpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    max_power: usize,
) -> Result<PathBundle> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("simulation.n_paths", "must be >= 1"));
    }
    if (grid.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::DimensionMismatch(format!(
            "grid horizon {} differs from spec horizon {}",
            grid.horizon(),
            spec.horizon
        )));
    }
    let max_power = max_power.max(1);
    let compensators = power_moments(spec, max_power)?;
    let n = grid.n_steps();
    let d = spec.brownian_dim;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let sigma = spec.gaussian_sigma;
    let factory = StreamFactory::new(seed);
    let poisson = match &spec.jump_law {
        JumpLaw::None => None,
        JumpLaw::CompoundPoisson { rate, jumps } => Some((
            Poisson::new(rate * dt).map_err(|e| Error::invalid("jump_law.rate", e.to_string()))?,
            jumps,
        )),
    };

    let simulated: Vec<SimulatedPath> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut out = SimulatedPath {
                brownian: Vec::with_capacity(n * d),
                power: vec![0.0; n * max_power],
                counts: Vec::with_capacity(n),
                times: Vec::new(),
                sizes: Vec::new(),
            };
            for j in 0..n {
                let mut rng = factory.substream(p, j);
                for _ in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    out.brownian.push(sqrt_dt * z);
                }
                let row = &mut out.power[j * max_power..(j + 1) * max_power];
                row[0] = spec.drift * dt;
                if sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    row[0] += sigma * sqrt_dt * z;
                    if max_power >= 2 {
                        row[1] += sigma * sigma * dt;
                    }
                }
                let mut count = 0;
                if let Some((poisson, jumps)) = &poisson {
                    count = poisson.sample(&mut rng) as usize;
                    let t0 = grid.time(j);
                    for _ in 0..count {
                        let tau = t0 + dt * rng.random::<f64>();
                        let x = jumps.sample(&mut rng);
                        out.times.push(tau);
                        out.sizes.push(x);
                        let mut xi = x;
                        for slot in row.iter_mut() {
                            *slot += xi;
                            xi *= x;
                        }
                    }
                }
                out.counts.push(count);
            }
            out
        })
        .collect();

    let total_jumps: usize = simulated.iter().map(|s| s.sizes.len()).sum();
    let mut bundle = PathBundle {
        spec: spec.clone(),
        grid: grid.clone(),
        n_paths,
        max_power,
        seed,
        compensators,
        brownian: Vec::with_capacity(n_paths * n * d),
        power: Vec::with_capacity(n_paths * n * max_power),
        jump_offsets: Vec::with_capacity(n_paths * n + 1),
        jump_times: Vec::with_capacity(total_jumps),
        jump_sizes: Vec::with_capacity(total_jumps),
    };
    bundle.jump_offsets.push(0);
    for s in simulated {
        bundle.brownian.extend_from_slice(&s.brownian);
        bundle.power.extend_from_slice(&s.power);
        for c in s.counts {
            let last = *bundle.jump_offsets.last().unwrap();
            bundle.jump_offsets.push(last + c);
        }
        bundle.jump_times.extend_from_slice(&s.times);
        bundle.jump_sizes.extend_from_slice(&s.sizes);
    }
    Ok(bundle)
}

impl PathBundle {
    pub fn spec(&self) -> &LevySpec {
        &self.spec
    }

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
        self.spec.brownian_dim
    }

    pub fn max_power(&self) -> usize {
        self.max_power
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `E[L_1^{(i)}]` for `i = 1..=max_power`.
    pub fn compensators(&self) -> &[f64] {
        &self.compensators
    }

    pub fn brownian_increment(&self, path: usize, step: usize) -> &[f64] {
        let d = self.spec.brownian_dim;
        let at = (path * self.n_steps() + step) * d;
        &self.brownian[at..at + d]
    }

    pub fn levy_increment(&self, path: usize, step: usize) -> f64 {
        self.power_jump_increment(path, step, 1)
    }

    /// `ΔL^{(i)}` on step `step`, `1 ≤ i ≤ max_power`.
    pub fn power_jump_increment(&self, path: usize, step: usize, i: usize) -> f64 {
        debug_assert!(i >= 1 && i <= self.max_power);
        self.power[(path * self.n_steps() + step) * self.max_power + i - 1]
    }

    /// `ΔY^{(i)} = ΔL^{(i)} − Δt·E[L_1^{(i)}]`.
    pub fn centered_increment(&self, path: usize, step: usize, i: usize) -> f64 {
        self.power_jump_increment(path, step, i) - self.grid.dt() * self.compensators[i - 1]
    }

    /// Jump times and sizes inside `(t_step, t_{step+1}]`.
    pub fn jumps(&self, path: usize, step: usize) -> (&[f64], &[f64]) {
        let k = path * self.n_steps() + step;
        let (a, b) = (self.jump_offsets[k], self.jump_offsets[k + 1]);
        (&self.jump_times[a..b], &self.jump_sizes[a..b])
    }

    pub fn jump_count(&self, path: usize, step: usize) -> usize {
        let k = path * self.n_steps() + step;
        self.jump_offsets[k + 1] - self.jump_offsets[k]
    }

    pub fn total_jumps(&self) -> usize {
        self.jump_sizes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_poisson() -> LevySpec {
        LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(1.0, 1.0)])).unwrap()
    }

    fn symmetric(sigma: f64) -> LevySpec {
        LevySpec::new(
            1.0,
            1,
            0.0,
            sigma,
            JumpLaw::CompoundPoisson {
                rate: 2.0,
                jumps: JumpDistribution::atoms(&[(1.0, 0.5), (-1.0, 0.5)]),
            },
        )
        .unwrap()
    }

    #[test]
    fn power_moments_unit_poisson() {
        assert_eq!(power_moments(&unit_poisson(), 5).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn power_moments_pure_gaussian() {
        let spec = LevySpec::new(1.0, 1, 0.0, 1.0, JumpLaw::None).unwrap();
        assert_eq!(power_moments(&spec, 4).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn power_moments_symmetric_atoms() {
        let m = power_moments(&symmetric(0.0), 6).unwrap();
        for (i, v) in m.iter().enumerate() {
            let expected = if (i + 1) % 2 == 0 { 2.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-15, "i={} got {}", i + 1, v);
        }
    }

    #[test]
    fn continuous_law_moments() {
        let u = JumpDistribution::Uniform { low: -1.0, high: 2.0 };
        assert!((u.raw_moment(1) - 0.5).abs() < 1e-15);
        assert!((u.raw_moment(2) - 1.0).abs() < 1e-15);
        let n = JumpDistribution::Normal { mean: 0.5, std: 2.0 };
        // E[X^4] = μ⁴ + 6μ²s² + 3s⁴
        assert!((n.raw_moment(4) - (0.0625 + 6.0 * 0.25 * 4.0 + 48.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(LevySpec::compound_poisson(1.0, 0.0, JumpDistribution::atoms(&[(1.0, 1.0)])).is_err());
        assert!(LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(1.0, 0.4)])).is_err());
        assert!(LevySpec::compound_poisson(1.0, 1.0, JumpDistribution::atoms(&[(0.0, 1.0)])).is_err());
        assert!(LevySpec::new(-1.0, 1, 0.0, 0.0, JumpLaw::None).is_err());
        assert!(LevySpec::new(1.0, 0, 0.0, 0.0, JumpLaw::None).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn grid_ends_exactly_at_horizon() {
        let g = TimeGrid::new(0.7, 3).unwrap();
        assert_eq!(g.time(3), 0.7);
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 0.7).abs() < 1e-15);
    }

    #[test]
    fn trivial_levy_has_no_power_jumps() {
        let spec = LevySpec::brownian(1.0, 2).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let b = simulate_paths(&spec, &grid, 50, 3, 3).unwrap();
        for p in 0..50 {
            for j in 0..8 {
                for i in 1..=3 {
                    assert_eq!(b.power_jump_increment(p, j, i), 0.0);
                    assert_eq!(b.centered_increment(p, j, i), 0.0);
                }
            }
        }
        assert!(b.brownian_increment(0, 0).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn same_seed_same_bundle() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let a = simulate_paths(&symmetric(0.5), &grid, 200, 11, 3).unwrap();
        let b = simulate_paths(&symmetric(0.5), &grid, 200, 11, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&symmetric(0.5), &grid, 200, 12, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jump_count_mean_matches_poisson() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let b = simulate_paths(&unit_poisson(), &grid, 10_000, 5, 2).unwrap();
        let mean = b.total_jumps() as f64 / 10_000.0;
        assert!((mean - 1.0).abs() < 3.0 / 100.0, "mean jump count {mean}");
    }

    #[test]
    fn pure_jump_second_power_is_sum_of_squares() {
        let spec = LevySpec::compound_poisson(1.0, 3.0, JumpDistribution::Uniform { low: -1.0, high: 2.0 }).unwrap();
        let grid = TimeGrid::new(1.0, 12).unwrap();
        let b = simulate_paths(&spec, &grid, 300, 9, 3).unwrap();
        for p in 0..300 {
            let mut from_incs = 0.0;
            let mut from_jumps = 0.0;
            for j in 0..12 {
                from_incs += b.power_jump_increment(p, j, 2);
                from_jumps += b.jumps(p, j).1.iter().map(|x| x * x).sum::<f64>();
            }
            assert!((from_incs - from_jumps).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_power_jumps_have_zero_mean() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let n_paths = 20_000;
        let b = simulate_paths(&symmetric(0.5), &grid, n_paths, 21, 4).unwrap();
        for i in 1..=4 {
            let totals: Vec<f64> = (0..n_paths)
                .map(|p| (0..16).map(|j| b.centered_increment(p, j, i)).sum())
                .collect();
            let mean = totals.iter().sum::<f64>() / n_paths as f64;
            let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
            let se = (var / n_paths as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "i={i} mean={mean} se={se}");
        }
    }

    #[test]
    fn brownian_variance_matches_horizon() {
        let spec = LevySpec::brownian(2.0, 2).unwrap();
        let grid = TimeGrid::new(2.0, 8).unwrap();
        let n_paths = 10_000;
        let b = simulate_paths(&spec, &grid, n_paths, 1, 1).unwrap();
        for c in 0..2 {
            let totals: Vec<f64> = (0..n_paths)
                .map(|p| (0..8).map(|j| b.brownian_increment(p, j)[c]).sum())
                .collect();
            let mean = totals.iter().sum::<f64>() / n_paths as f64;
            let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
            assert!((var / 2.0 - 1.0).abs() < 0.05, "component {c}: var {var}");
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = symmetric(0.5);
        let json = serde_json::to_string(&spec).unwrap();
        let back: LevySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let bad = r#"{"horizon":1.0,"jump_law":{"type":"stable","alpha":1.5}}"#;
        assert!(serde_json::from_str::<LevySpec>(bad).is_err());
    }
}
