//! Privacy-preserving additive noise with minimal Fisher information.
//!
//! Given a support for the noise, an even distortion function `g` and a
//! budget `rho` on `E[g(w)]`, the density minimizing the Fisher information
//! of the noise is `psi^2`, where `psi` is the ground state of a
//! Schrödinger operator `-psi'' + (beta g / 4) psi` with walls at the support
//! ends. [`designer::design`] solves this on a uniform grid, tuning `beta` so
//! the budget binds; [`mechanism`] samples the designed noise and measures an
//! estimating adversary against the Cramér-Rao floor `1/J`.
//!
//! ```no_run
//! use fisher_noise::{design, validate, DesignProblem};
//!
//! let problem = DesignProblem::from_json(
//!     r#"{"support": {"real_line": {"auto": 1e-6}}, "g": "quadratic", "rho": 1.0}"#,
//! ).unwrap();
//! let result = design(&validate(&problem).unwrap()).unwrap();
//! assert!((result.fisher * result.quality - 1.0).abs() < 1e-3);
//! ```

pub mod density;
pub mod designer;
pub mod error;
pub mod mechanism;
pub mod problem;
pub mod schrodinger;
pub mod verify;

pub use density::{
    amplitude_fisher_information, analytic_gaussian, analytic_square_well,
    density_from_wavefunction, fisher_information, format_real, quality, Grid, NoiseDensity,
    WaveFunction,
};
pub use designer::{
    check_density_principle, check_principle, design, design_traced, frontier, write_frontier_csv,
    DesignResult, Diagnostics, FrontierPoint, MultiplierProbe, PrincipleCheck,
};
pub use error::{Error, Result};
pub use mechanism::{
    attack, mle_estimate, monte_carlo_attack, respond, sample, AttackReport, QuerySpec,
};
pub use problem::{
    effective_domain, eval_quality_fn, validate, DesignProblem, GridConfig, QualityFn, SupportSpec,
    TruncationPolicy, ValidatedProblem,
};
pub use schrodinger::{
    assemble, ground_state, nth_state, EigenPair, PotentialGrid, TridiagonalOperator,
};
pub use verify::{oracle_suite, OracleCheck};
