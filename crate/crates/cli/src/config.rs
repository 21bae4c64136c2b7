//! Run configuration: parsing, validation and content hashing.

use bsviel::{FreeTermSpec, GeneratorSpec, LevySpec, LinearCoefficients, RiskSpec, SolverConfig, TimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levy: LevySpec,
    pub grid: GridConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    /// Requested Teugels order `K`.
    pub order: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { order: 3 }
    }
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_slope_tolerance() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    #[serde(default)]
    pub b0: f64,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
}

impl LinearConfig {
    pub fn coefficients(&self) -> LinearCoefficients {
        LinearCoefficients::constant(self.b0, &self.b, &self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSide {
    pub generator: GeneratorSpec,
    pub phi: FreeTermSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub phi2: FreeTermSpec,
    pub shift: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Basis {
        /// Run the realized-covariation diagnostic on simulated paths.
        #[serde(default = "default_true")]
        diagnostic: bool,
        #[serde(default = "default_tolerance")]
        diagonal_tolerance: f64,
        #[serde(default = "default_tolerance")]
        off_diagonal_tolerance: f64,
    },
    Solve {
        psi: FreeTermSpec,
        generator: GeneratorSpec,
        /// Upper bound on the per-node relative M-condition residual.
        #[serde(default)]
        max_relative_residual: Option<f64>,
    },
    Duality {
        coefficients: LinearConfig,
        psi: FreeTermSpec,
        phi: FreeTermSpec,
    },
    Compare {
        lower: ProblemSide,
        upper: ProblemSide,
    },
    Stability {
        psi: FreeTermSpec,
        generator: GeneratorSpec,
        xi: FreeTermSpec,
        eps: Vec<f64>,
        #[serde(default)]
        expected_slope: Option<f64>,
        #[serde(default = "default_slope_tolerance")]
        slope_tolerance: f64,
    },
    Risk {
        risk: RiskSpec,
        phi: FreeTermSpec,
        #[serde(default)]
        audit: Option<AuditConfig>,
    },
}

fn default_true() -> bool {
    true
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Basis { .. } => "basis",
            Experiment::Solve { .. } => "solve",
            Experiment::Duality { .. } => "duality",
            Experiment::Compare { .. } => "compare",
            Experiment::Stability { .. } => "stability",
            Experiment::Risk { .. } => "risk",
        }
    }
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

/// Parses a JSON document, naming the offending path on failure.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        // name the missing key itself, not just its parent
        let full = match inner.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        CliError::Config(format!("{full}: {inner}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.levy.validate().map_err(|e| config_error("levy", e))?;
        TimeGrid::new(self.levy.horizon, self.grid.n_steps).map_err(|e| config_error("grid.n_steps", e))?;
        if self.simulation.n_paths < 2 {
            return Err(config_error("simulation.n_paths", "must be >= 2"));
        }
        if self.basis.order > 8 {
            return Err(config_error("basis.order", "must be <= 8"));
        }
        self.solver.validate().map_err(|e| config_error("solver", e))?;
        let gen = |g: &GeneratorSpec, field: &str| g.validate().map_err(|e| config_error(field, e));
        match &self.experiment {
            Experiment::Basis {
                diagonal_tolerance,
                off_diagonal_tolerance,
                ..
            } => {
                if !(*diagonal_tolerance > 0.0 && *off_diagonal_tolerance > 0.0) {
                    return Err(config_error("experiment", "tolerances must be > 0"));
                }
            }
            Experiment::Solve { generator, .. } => gen(generator, "experiment.generator")?,
            Experiment::Duality { .. } => {}
            Experiment::Compare { lower, upper } => {
                gen(&lower.generator, "experiment.lower.generator")?;
                gen(&upper.generator, "experiment.upper.generator")?;
            }
            Experiment::Stability { generator, eps, .. } => {
                gen(generator, "experiment.generator")?;
                if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                    return Err(config_error("experiment.eps", "must be a non-empty list of values >= 0"));
                }
            }
            Experiment::Risk { risk, audit, .. } => {
                risk.validate().map_err(|e| config_error("experiment.risk", e))?;
                if let Some(a) = audit {
                    if !(a.lambda.is_finite() && a.lambda > 0.0) {
                        return Err(config_error("experiment.audit.lambda", "must be > 0"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Solver settings with the Teugels order taken from the basis section.
    pub fn solver_config(&self, override_contraction: bool) -> SolverConfig {
        SolverConfig {
            teugels_order: self.basis.order,
            override_contraction,
            ..self.solver.clone()
        }
    }

    /// Canonical JSON with every default filled in.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.resolved_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
