//! Drivers `f(t, s, y, z, η, u, ζ)`, their Lipschitz data and structural flags.
//!
//! Slot convention: `z = Z(t,s)`, `η = Z(s,t)`, `u = U(t,s)`, `ζ = U(s,t)`,
//! and `y = Y(s−)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::TimeGrid;
use crate::rng::StreamFactory;

#[derive(Debug, Clone, Copy)]
pub struct DriverArgs<'a> {
    pub y: f64,
    pub z: &'a [f64],
    pub eta: &'a [f64],
    pub u: &'a [f64],
    pub zeta: &'a [f64],
}

/// Deterministic coefficient on `{t ≤ s}` with a declared supremum.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function {
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        bound: f64,
    },
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::Constant(0.0)
    }

    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, bound: f64) -> Self {
        Coefficient::Function { f: Arc::new(f), bound }
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function { f, .. } => f(t, s),
        }
    }

    /// Declared bound on `|·|`.
    pub fn sup(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Function { bound, .. } => *bound,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Function { bound, .. } => write!(f, "Function(|·| <= {bound})"),
        }
    }
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::zero()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lipschitz {
    pub y: Coefficient,
    pub z: Coefficient,
    pub eta: Coefficient,
    pub u: Coefficient,
    pub zeta: Coefficient,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorFlags {
    pub monotone_in_u: bool,
    pub simplified_form: bool,
    pub sub_additive: bool,
    pub positively_homogeneous: bool,
    /// `f = r(s)·y + f̃(t, s, z, u)` with a deterministic rate.
    pub linear_y_rate: bool,
}

/// Which argument slots a driver reads; unused slots are never materialized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArgUsage {
    pub y: bool,
    pub z: bool,
    pub eta: bool,
    pub u: bool,
    pub zeta: bool,
}

impl ArgUsage {
    pub fn all() -> Self {
        Self {
            y: true,
            z: true,
            eta: true,
            u: true,
            zeta: true,
        }
    }

    pub fn any(&self) -> bool {
        self.y || self.z || self.eta || self.u || self.zeta
    }
}

pub trait Driver: Send + Sync {
    fn name(&self) -> String;
    fn eval(&self, t: f64, s: f64, args: &DriverArgs<'_>) -> f64;
    fn lipschitz(&self) -> Lipschitz;
    fn flags(&self) -> GeneratorFlags;
    fn usage(&self) -> ArgUsage {
        ArgUsage::all()
    }
    /// `r(s)` when `linear_y_rate` is declared.
    fn y_rate(&self) -> Option<RateFn> {
        None
    }
}

/// Bounded deterministic rate `r(s)`: a constant or a right-continuous step
/// function with `values.len() == breaks.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateFn {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl Default for RateFn {
    fn default() -> Self {
        RateFn::Constant(0.0)
    }
}

impl RateFn {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            RateFn::Constant(r) => *r,
            RateFn::Piecewise { breaks, values } => {
                let idx = breaks.partition_point(|&b| b <= s);
                values[idx]
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            RateFn::Constant(r) => r.abs(),
            RateFn::Piecewise { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup() == 0.0
    }

    /// `∫_a^b r(s) ds`, exact for step functions.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            RateFn::Constant(r) => r * (b - a),
            RateFn::Piecewise { breaks, values } => {
                let mut acc = 0.0;
                let mut lo = a;
                for (k, v) in values.iter().enumerate() {
                    let hi = breaks.get(k).copied().unwrap_or(f64::INFINITY).min(b);
                    if hi > lo {
                        acc += v * (hi - lo);
                        lo = hi;
                    }
                    if lo >= b {
                        break;
                    }
                }
                acc
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RateFn::Constant(r) if !r.is_finite() => Err(Error::invalid("rate", "must be finite")),
            RateFn::Constant(_) => Ok(()),
            RateFn::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::invalid("rate.values", "needs exactly one more value than breaks"));
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("rate.breaks", "must be strictly increasing"));
                }
                if breaks.iter().chain(values).any(|x| !x.is_finite()) {
                    return Err(Error::invalid("rate", "must be finite"));
                }
                Ok(())
            }
        }
    }

    fn coefficient(&self) -> Coefficient {
        match self {
            RateFn::Constant(r) => Coefficient::Constant(r.abs()),
            other => {
                let r = other.clone();
                let bound = r.sup();
                Coefficient::function(move |_, s| r.eval(s).abs(), bound)
            }
        }
    }
}

/// Builtin drivers selectable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `θ·y`.
    Linear {
        theta: f64,
    },
    /// `r(s)·y`.
    Discount {
        rate: RateFn,
    },
    /// `r(s)·y + κ|η| + Σ_k w_k (ζ_k)⁺`.
    Risk {
        #[serde(default)]
        rate: RateFn,
        #[serde(default)]
        kappa: f64,
        #[serde(default)]
        weights: Vec<f64>,
    },
    /// `κ|z|` on the `Z(t,s)` slot.
    ZAbs {
        kappa: f64,
    },
    /// `f + δ`.
    Shifted {
        base: Box<GeneratorSpec>,
        delta: f64,
    },
}

impl GeneratorSpec {
    pub fn shifted(base: GeneratorSpec, delta: f64) -> Self {
        GeneratorSpec::Shifted {
            base: Box::new(base),
            delta,
        }
    }

    /// Geometric weights `w_k = w_1 · 2^{1−k}` for `k = 1..=n`.
    pub fn halving_weights(first: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| first * 0.5f64.powi(k as i32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, field: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, "must be finite"))
            }
        };
        match self {
            GeneratorSpec::Zero => Ok(()),
            GeneratorSpec::Constant { value } => finite(*value, "generator.value"),
            GeneratorSpec::Linear { theta } => finite(*theta, "generator.theta"),
            GeneratorSpec::Discount { rate } => rate.validate(),
            GeneratorSpec::Risk { rate, kappa, weights } => {
                rate.validate()?;
                finite(*kappa, "generator.kappa")?;
                weights.iter().try_for_each(|w| finite(*w, "generator.weights"))
            }
            GeneratorSpec::ZAbs { kappa } => finite(*kappa, "generator.kappa"),
            GeneratorSpec::Shifted { base, delta } => {
                finite(*delta, "generator.delta")?;
                base.validate()
            }
        }
    }
}

fn l2(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Driver for GeneratorSpec {
    fn name(&self) -> String {
        match self {
            GeneratorSpec::Zero => "zero".into(),
            GeneratorSpec::Constant { .. } => "constant".into(),
            GeneratorSpec::Linear { .. } => "linear".into(),
            GeneratorSpec::Discount { .. } => "discount".into(),
            GeneratorSpec::Risk { .. } => "risk".into(),
            GeneratorSpec::ZAbs { .. } => "z_abs".into(),
            GeneratorSpec::Shifted { base, .. } => format!("shifted({})", base.name()),
        }
    }

    fn eval(&self, t: f64, s: f64, a: &DriverArgs<'_>) -> f64 {
        match self {
            GeneratorSpec::Zero => 0.0,
            GeneratorSpec::Constant { value } => *value,
            GeneratorSpec::Linear { theta } => theta * a.y,
            GeneratorSpec::Discount { rate } => rate.eval(s) * a.y,
            GeneratorSpec::Risk { rate, kappa, weights } => {
                let mut v = rate.eval(s) * a.y;
                if *kappa != 0.0 {
                    v += kappa * a.eta.iter().map(|x| x * x).sum::<f64>().sqrt();
                }
                for (w, x) in weights.iter().zip(a.zeta) {
                    v += w * x.max(0.0);
                }
                v
            }
            GeneratorSpec::ZAbs { kappa } => kappa * a.z.iter().map(|x| x * x).sum::<f64>().sqrt(),
            GeneratorSpec::Shifted { base, delta } => base.eval(t, s, a) + delta,
        }
    }

    fn lipschitz(&self) -> Lipschitz {
        match self {
            GeneratorSpec::Zero | GeneratorSpec::Constant { .. } => Lipschitz::default(),
            GeneratorSpec::Linear { theta } => Lipschitz {
                y: Coefficient::Constant(theta.abs()),
                ..Default::default()
            },
            GeneratorSpec::Discount { rate } => Lipschitz {
                y: rate.coefficient(),
                ..Default::default()
            },
            GeneratorSpec::Risk { rate, kappa, weights } => Lipschitz {
                y: rate.coefficient(),
                eta: Coefficient::Constant(kappa.abs()),
                zeta: Coefficient::Constant(l2(weights)),
                ..Default::default()
            },
            GeneratorSpec::ZAbs { kappa } => Lipschitz {
                z: Coefficient::Constant(kappa.abs()),
                ..Default::default()
            },
            GeneratorSpec::Shifted { base, .. } => base.lipschitz(),
        }
    }

    fn flags(&self) -> GeneratorFlags {
        let all = GeneratorFlags {
            monotone_in_u: true,
            simplified_form: true,
            sub_additive: true,
            positively_homogeneous: true,
            linear_y_rate: true,
        };
        match self {
            GeneratorSpec::Zero | GeneratorSpec::Linear { .. } | GeneratorSpec::Discount { .. } => all,
            GeneratorSpec::Constant { value } => GeneratorFlags {
                sub_additive: *value >= 0.0,
                positively_homogeneous: *value == 0.0,
                ..all
            },
            GeneratorSpec::Risk { kappa, weights, .. } => {
                let w_pos = weights.iter().all(|w| *w >= 0.0);
                GeneratorFlags {
                    monotone_in_u: w_pos,
                    sub_additive: w_pos && *kappa >= 0.0,
                    ..all
                }
            }
            GeneratorSpec::ZAbs { kappa } => GeneratorFlags {
                simplified_form: *kappa == 0.0,
                sub_additive: *kappa >= 0.0,
                ..all
            },
            GeneratorSpec::Shifted { base, delta } => {
                let b = base.flags();
                GeneratorFlags {
                    sub_additive: b.sub_additive && *delta >= 0.0,
                    positively_homogeneous: b.positively_homogeneous && *delta == 0.0,
                    ..b
                }
            }
        }
    }

    fn usage(&self) -> ArgUsage {
        match self {
            GeneratorSpec::Zero | GeneratorSpec::Constant { .. } => ArgUsage::default(),
            GeneratorSpec::Linear { theta } => ArgUsage {
                y: *theta != 0.0,
                ..Default::default()
            },
            GeneratorSpec::Discount { rate } => ArgUsage {
                y: !rate.is_zero(),
                ..Default::default()
            },
            GeneratorSpec::Risk { rate, kappa, weights } => ArgUsage {
                y: !rate.is_zero(),
                eta: *kappa != 0.0,
                zeta: weights.iter().any(|w| *w != 0.0),
                ..Default::default()
            },
            GeneratorSpec::ZAbs { kappa } => ArgUsage {
                z: *kappa != 0.0,
                ..Default::default()
            },
            GeneratorSpec::Shifted { base, .. } => base.usage(),
        }
    }

    fn y_rate(&self) -> Option<RateFn> {
        match self {
            GeneratorSpec::Zero | GeneratorSpec::Constant { .. } | GeneratorSpec::ZAbs { .. } => {
                Some(RateFn::Constant(0.0))
            }
            GeneratorSpec::Linear { theta } => Some(RateFn::Constant(*theta)),
            GeneratorSpec::Discount { rate } | GeneratorSpec::Risk { rate, .. } => Some(rate.clone()),
            GeneratorSpec::Shifted { base, .. } => base.y_rate(),
        }
    }
}

/// Suprema of the integrated squared Lipschitz coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    /// `sup_t ∫_t^T (L_z² + L_u²) ds`; must be `< 1`.
    pub sup_z_u: f64,
    /// `sup_t ∫_t^T (L_y² + L_η² + L_ζ²) ds`; must be finite.
    pub sup_y_eta_zeta: f64,
    pub accepted: bool,
}

const CONTRACTION_T_POINTS: usize = 257;
const CONTRACTION_S_POINTS: usize = 513;

fn sup_integral(horizon: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
    let mut best = 0.0_f64;
    for a in 0..CONTRACTION_T_POINTS {
        let t = horizon * a as f64 / (CONTRACTION_T_POINTS - 1) as f64;
        let len = horizon - t;
        if len <= 0.0 {
            continue;
        }
        let h = len / (CONTRACTION_S_POINTS - 1) as f64;
        let mut acc = 0.0;
        for b in 0..CONTRACTION_S_POINTS {
            let s = if b + 1 == CONTRACTION_S_POINTS { horizon } else { t + b as f64 * h };
            let w = if b == 0 || b + 1 == CONTRACTION_S_POINTS { 0.5 } else { 1.0 };
            acc += w * g(t, s);
        }
        best = best.max(acc * h);
    }
    best
}

/// Evaluates both suprema without failing.
pub fn contraction_report(driver: &dyn Driver, horizon: f64) -> ContractionReport {
    let l = driver.lipschitz();
    let sq = |c: &Coefficient, t: f64, s: f64| c.eval(t, s).powi(2);
    let sup_z_u = sup_integral(horizon, |t, s| sq(&l.z, t, s) + sq(&l.u, t, s));
    let sup_y_eta_zeta = sup_integral(horizon, |t, s| sq(&l.y, t, s) + sq(&l.eta, t, s) + sq(&l.zeta, t, s));
    ContractionReport {
        sup_z_u,
        sup_y_eta_zeta,
        accepted: sup_z_u < 1.0 && sup_y_eta_zeta.is_finite(),
    }
}

/// Accepts iff `sup_t ∫_t^T (L_z² + L_u²) ds < 1` and the `(y, η, ζ)`
/// supremum is finite.
pub fn validate_contraction(driver: &dyn Driver, horizon: f64) -> Result<ContractionReport> {
    let report = contraction_report(driver, horizon);
    if report.accepted {
        Ok(report)
    } else {
        Err(Error::ContractionRejected {
            supremum: report.sup_z_u,
        })
    }
}

/// `∫_0^T (∫_t^T |f_0(t,s)| ds)² dt` by nested trapezoid rules on a refinement
/// of the grid (builtin drivers are deterministic, so no sampling is needed).
pub fn evaluate_f0_norm(driver: &dyn Driver, grid: &TimeGrid) -> f64 {
    const REFINE: usize = 16;
    let m = grid.n_steps() * REFINE;
    let h = grid.horizon() / m as f64;
    let time = |k: usize| if k == m { grid.horizon() } else { k as f64 * h };
    let zeros = DriverArgs {
        y: 0.0,
        z: &[],
        eta: &[],
        u: &[],
        zeta: &[],
    };
    let inner = |a: usize| -> f64 {
        let t = time(a);
        let mut acc = 0.0;
        for b in a..m {
            acc += 0.5 * h * (driver.eval(t, time(b), &zeros).abs() + driver.eval(t, time(b + 1), &zeros).abs());
        }
        acc
    };
    let vals: Vec<f64> = (0..=m).map(|a| inner(a).powi(2)).collect();
    vals.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlagCheck {
    pub declared: bool,
    pub passed: bool,
    pub max_violation: f64,
}

/// Randomized spot checks of the declared flags and Lipschitz bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagAudit {
    pub generator: String,
    pub samples: usize,
    pub monotone_in_u: FlagCheck,
    pub simplified_form: FlagCheck,
    pub sub_additive: FlagCheck,
    pub positively_homogeneous: FlagCheck,
    pub lipschitz: FlagCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    MonotoneInU,
    SimplifiedForm,
    SubAdditive,
    PositivelyHomogeneous,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::MonotoneInU => "monotone_in_u",
            Flag::SimplifiedForm => "simplified_form",
            Flag::SubAdditive => "sub_additive",
            Flag::PositivelyHomogeneous => "positively_homogeneous",
        }
    }
}

impl FlagAudit {
    pub fn check(&self, flag: Flag) -> FlagCheck {
        match flag {
            Flag::MonotoneInU => self.monotone_in_u,
            Flag::SimplifiedForm => self.simplified_form,
            Flag::SubAdditive => self.sub_additive,
            Flag::PositivelyHomogeneous => self.positively_homogeneous,
        }
    }

    /// Declared and confirmed by the audit.
    pub fn holds(&self, flag: Flag) -> bool {
        let c = self.check(flag);
        c.declared && c.passed
    }

    pub fn require(&self, flag: Flag) -> Result<()> {
        if self.holds(flag) {
            Ok(())
        } else {
            Err(Error::FlagAuditFailed {
                generator: self.generator.clone(),
                flag: flag.as_str().into(),
            })
        }
    }
}

struct Sample {
    t: f64,
    s: f64,
    y: f64,
    z: Vec<f64>,
    eta: Vec<f64>,
    u: Vec<f64>,
    zeta: Vec<f64>,
}

impl Sample {
    fn draw<R: Rng>(rng: &mut R, horizon: f64, dim: usize, rank: usize) -> Self {
        let mut normal = |scale: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        };
        let y = normal(3.0);
        let z = (0..dim).map(|_| normal(2.0)).collect();
        let eta = (0..dim).map(|_| normal(2.0)).collect();
        let u = (0..rank).map(|_| normal(2.0)).collect();
        let zeta = (0..rank).map(|_| normal(2.0)).collect();
        let a: f64 = rng.random::<f64>() * horizon;
        let b: f64 = rng.random::<f64>() * horizon;
        Self {
            t: a.min(b),
            s: a.max(b),
            y,
            z,
            eta,
            u,
            zeta,
        }
    }

    fn args(&self) -> DriverArgs<'_> {
        DriverArgs {
            y: self.y,
            z: &self.z,
            eta: &self.eta,
            u: &self.u,
            zeta: &self.zeta,
        }
    }

    fn map(&self, other: &Sample, f: impl Fn(f64, f64) -> f64) -> Sample {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect::<Vec<_>>();
        Sample {
            t: self.t,
            s: self.s,
            y: f(self.y, other.y),
            z: zip(&self.z, &other.z),
            eta: zip(&self.eta, &other.eta),
            u: zip(&self.u, &other.u),
            zeta: zip(&self.zeta, &other.zeta),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    l2(v)
}

pub fn audit_flags(
    driver: &dyn Driver,
    brownian_dim: usize,
    rank: usize,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> FlagAudit {
    let flags = driver.flags();
    let lip = driver.lipschitz();
    let factory = StreamFactory::with_domain(seed, 0xA0D17);
    let mut worst = [0.0_f64; 5];
    for k in 0..n_samples {
        let mut rng = factory.substream(k, 0);
        let a = Sample::draw(&mut rng, horizon, brownian_dim, rank);
        let b = Sample::draw(&mut rng, horizon, brownian_dim, rank);
        let (t, s) = (a.t, a.s);
        let f = |x: &Sample| driver.eval(t, s, &x.args());
        let fa = f(&a);
        let fb = f(&b);
        let tol = |v: f64| 1e-10 * (1.0 + v.abs());

        // sub-additivity
        let sum = a.map(&b, |x, y| x + y);
        let fs = f(&sum);
        worst[0] = worst[0].max((fs - fa - fb - tol(fa.abs() + fb.abs())).max(0.0));

        // positive homogeneity
        let lam: f64 = 0.1 + 4.0 * rng.random::<f64>();
        let scaled = a.map(&a, |x, _| lam * x);
        worst[1] = worst[1].max(((f(&scaled) - lam * fa).abs() - tol(lam * fa)).max(0.0));

        // monotonicity in u and ζ
        if rank > 0 {
            let idx = rng.random_range(0..rank);
            let delta: f64 = 3.0 * rng.random::<f64>();
            let mut up = a.map(&a, |x, _| x);
            up.u[idx] += delta;
            let mut up2 = a.map(&a, |x, _| x);
            up2.zeta[idx] += delta;
            let drop = (fa - f(&up)).max(fa - f(&up2));
            worst[2] = worst[2].max((drop - tol(fa)).max(0.0));
        }

        // simplified form: independent of z and u
        let mut moved = a.map(&a, |x, _| x);
        moved.z.clone_from(&b.z);
        moved.u.clone_from(&b.u);
        worst[3] = worst[3].max(((f(&moved) - fa).abs() - tol(fa)).max(0.0));

        // Lipschitz bound
        let bound = lip.y.eval(t, s) * (a.y - b.y).abs()
            + lip.z.eval(t, s) * norm(&a.map(&b, |x, y| x - y).z)
            + lip.eta.eval(t, s) * norm(&a.map(&b, |x, y| x - y).eta)
            + lip.u.eval(t, s) * norm(&a.map(&b, |x, y| x - y).u)
            + lip.zeta.eval(t, s) * norm(&a.map(&b, |x, y| x - y).zeta);
        worst[4] = worst[4].max(((fa - fb).abs() - bound - tol(bound)).max(0.0));
    }
    let check = |declared: bool, w: f64| FlagCheck {
        declared,
        passed: w == 0.0,
        max_violation: w,
    };
    FlagAudit {
        generator: driver.name(),
        samples: n_samples,
        sub_additive: check(flags.sub_additive, worst[0]),
        positively_homogeneous: check(flags.positively_homogeneous, worst[1]),
        monotone_in_u: check(flags.monotone_in_u, worst[2]),
        simplified_form: check(flags.simplified_form, worst[3]),
        lipschitz: check(true, worst[4]),
    }
}

/// Default number of random argument pairs used by flag audits.
pub const AUDIT_SAMPLES: usize = 2000;
