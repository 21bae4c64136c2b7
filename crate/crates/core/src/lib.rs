//! Backward stochastic Volterra integral equations driven by a Brownian
//! motion and the Teugels martingales of a Lévy process: path simulation,
//! orthonormal jump bases, a regression Picard solver, linear forward
//! equations, duality/comparison/stability checks and dynamic risk measures.

pub mod analysis;
pub mod catalog;
pub mod error;
pub mod forward;
pub mod free_term;
pub mod generators;
pub mod levy;
pub mod regression;
pub mod risk;
pub mod rng;
pub mod solver;
pub mod state;
pub mod teugels;

pub use analysis::{
    comparison_check, duality_residual, stability_probe, ComparisonReport, DualityOutcome, DualityReport, SharedPaths,
    StabilityReport,
};
pub use error::{Error, Result};
pub use forward::{
    dd_exponential, dd_exponential_piecewise, euler_solve, positivity_check, ExponentialPiece, ForwardGrid,
    LinearCoefficients, PositivityReport,
};
pub use free_term::{FreeTerm, FreeTermSpec};
pub use generators::{
    audit_flags, contraction_report, evaluate_f0_norm, validate_contraction, Coefficient, ContractionReport, Driver,
    DriverArgs, Flag, FlagAudit, GeneratorFlags, GeneratorSpec, Lipschitz, RateFn,
};
pub use levy::{simulate_paths, JumpDistribution, JumpLaw, LevySpec, PathBundle, TimeGrid};
pub use risk::{coherence_audit, rho, CoherenceReport, RiskCurve, RiskSpec};
pub use rng::StreamFactory;
pub use solver::{
    solution_distance, solution_norm, solve, solve_on_paths, MSolutionGrid, SolverConfig, SolverContext,
    SolverDiagnostics,
};
pub use state::NodeStates;
pub use teugels::{
    assemble_h, basis_for, compute_moments, orthonormality_diagnostic, orthonormalize, CovariationReport,
    MomentTable, TeugelsBasis, TeugelsIncrements,
};
