//! Inputs to the noise design problem: support, quality function, budget and
//! discretization.
//!
//! The JSON form of a [`DesignProblem`] is
//!
//! ```json
//! {"support": {"real_line": {"auto": 1e-6}}, "g": "quadratic", "rho": 1.0, "grid": {"n_points": 4000}}
//! ```
//!
//! with `support` one of `{"bounded": [lo, hi]}`, `{"real_line": {"fixed": L}}`,
//! `{"real_line": {"auto": tol}}` and `g` one of `"zero"`, `"quadratic"`,
//! `{"even_power": k}`, `{"even_polynomial": [c2, c4, ...]}`.

use serde::{Deserialize, Serialize};

use crate::designer;
use crate::error::{Error, Result};

/// Smallest accepted number of interior grid nodes.
pub const MIN_GRID_POINTS: usize = 64;

/// Grid size used when a problem document omits `grid`.
pub const DEFAULT_GRID_POINTS: usize = 4000;

/// Half-width multiplier (in units of `sqrt(rho)`) for automatic truncation of
/// quadratic-quality problems.
pub const GAUSSIAN_TRUNCATION_SIGMAS: f64 = 10.0;

/// Cap on half-width doublings for automatic truncation of non-quadratic problems.
pub const MAX_TRUNCATION_DOUBLINGS: usize = 20;

/// How an unbounded support is cut down to a finite box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    Fixed(f64),
    Auto(f64),
}

/// Support set of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "SupportWire", into = "SupportWire")]
pub enum SupportSpec {
    Bounded { lo: f64, hi: f64 },
    RealLine { truncation: TruncationPolicy },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SupportWire {
    Bounded(f64, f64),
    RealLine(TruncationPolicy),
}

impl From<SupportWire> for SupportSpec {
    fn from(wire: SupportWire) -> Self {
        match wire {
            SupportWire::Bounded(lo, hi) => SupportSpec::Bounded { lo, hi },
            SupportWire::RealLine(truncation) => SupportSpec::RealLine { truncation },
        }
    }
}

impl From<SupportSpec> for SupportWire {
    fn from(spec: SupportSpec) -> Self {
        match spec {
            SupportSpec::Bounded { lo, hi } => SupportWire::Bounded(lo, hi),
            SupportSpec::RealLine { truncation } => SupportWire::RealLine(truncation),
        }
    }
}

/// Distortion function `g` whose expectation is the quality functional.
///
/// All variants are even, nonnegative and nondecreasing in `|w|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFn {
    Zero,
    Quadratic,
    /// `w^k` for a positive even `k`.
    EvenPower(u32),
    /// `c2 w^2 + c4 w^4 + ...` with nonnegative coefficients.
    EvenPolynomial(Vec<f64>),
}

impl QualityFn {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            QualityFn::Zero => 0.0,
            QualityFn::Quadratic => w * w,
            QualityFn::EvenPower(k) => w.abs().powi(*k as i32),
            QualityFn::EvenPolynomial(coeffs) => {
                let w2 = w * w;
                // Horner in w^2, then one extra factor of w^2 for the lowest power.
                coeffs.iter().rev().fold(0.0, |acc, c| acc * w2 + c) * w2
            }
        }
    }

    /// Polynomial degree of `g`.
    pub fn degree(&self) -> usize {
        match self {
            QualityFn::Zero => 0,
            QualityFn::Quadratic => 2,
            QualityFn::EvenPower(k) => *k as usize,
            QualityFn::EvenPolynomial(coeffs) => 2 * coeffs.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, QualityFn::Zero)
    }

    fn check(&self) -> Result<()> {
        match self {
            QualityFn::EvenPower(k) if *k == 0 || k % 2 != 0 => Err(Error::InvalidQualityFn(
                format!("even_power exponent must be a positive even integer, got {k}"),
            )),
            QualityFn::EvenPolynomial(coeffs) => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidQualityFn(
                        "even_polynomial needs at least one coefficient".into(),
                    ));
                }
                match coeffs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                    Some(c) => Err(Error::InvalidQualityFn(format!(
                        "even_polynomial coefficients must be finite and nonnegative, got {c}"
                    ))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

/// Evaluate the quality function at `w`.
pub fn eval_quality_fn(g: &QualityFn, w: f64) -> f64 {
    g.eval(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of interior grid nodes.
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Minimize Fisher information subject to `E[g(w)] <= rho` over densities on `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub support: SupportSpec,
    pub g: QualityFn,
    /// Ignored when `g` is [`QualityFn::Zero`].
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub grid: GridConfig,
}

impl DesignProblem {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialization is infallible")
    }

    fn check_invariants(&self) -> Result<()> {
        match self.support {
            SupportSpec::Bounded { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidSupport(format!(
                        "bounds must be finite, got [{lo}, {hi}]"
                    )));
                }
                if lo >= hi {
                    return Err(Error::InvalidSupport(format!(
                        "lower bound {lo} is not below upper bound {hi}"
                    )));
                }
            }
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Fixed(half_width),
            } => {
                if !(half_width.is_finite() && half_width > 0.0) {
                    return Err(Error::InvalidTruncation(format!(
                        "fixed half-width must be positive and finite, got {half_width}"
                    )));
                }
            }
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(tol),
            } => {
                if !(tol > 0.0 && tol < 1e-3) {
                    return Err(Error::InvalidTruncation(format!(
                        "boundary mass tolerance must lie in (0, 1e-3), got {tol}"
                    )));
                }
            }
        }
        self.g.check()?;
        if !self.g.is_zero() && !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "rho must be positive and finite, got {}",
                self.rho
            )));
        }
        if self.grid.n_points < MIN_GRID_POINTS {
            return Err(Error::GridTooCoarse {
                n_points: self.grid.n_points,
                min: MIN_GRID_POINTS,
            });
        }
        Ok(())
    }
}

/// A problem whose invariants hold and whose finite computational domain is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    problem: DesignProblem,
    lo: f64,
    hi: f64,
}

impl ValidatedProblem {
    pub fn problem(&self) -> &DesignProblem {
        &self.problem
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn g(&self) -> &QualityFn {
        &self.problem.g
    }

    pub fn rho(&self) -> f64 {
        self.problem.rho
    }

    pub fn n_points(&self) -> usize {
        self.problem.grid.n_points
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.problem.support, SupportSpec::Bounded { .. })
    }

    /// Same problem with a different budget, revalidated (automatic truncation
    /// depends on `rho`).
    pub fn with_rho(&self, rho: f64) -> Result<ValidatedProblem> {
        validate(&DesignProblem {
            rho,
            ..self.problem.clone()
        })
    }
}

/// Finite interval on which the problem is discretized.
pub fn effective_domain(problem: &DesignProblem) -> Result<(f64, f64)> {
    match (problem.support, &problem.g) {
        (SupportSpec::Bounded { lo, hi }, _) => Ok((lo, hi)),
        (
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Fixed(l),
            },
            _,
        ) => Ok((-l, l)),
        (
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(_),
            },
            QualityFn::Quadratic,
        ) => {
            let l = GAUSSIAN_TRUNCATION_SIGMAS * problem.rho.sqrt();
            Ok((-l, l))
        }
        (
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(tol),
            },
            _,
        ) => {
            let l = designer::settle_truncation(problem, tol)?;
            Ok((-l, l))
        }
    }
}

pub fn validate(problem: &DesignProblem) -> Result<ValidatedProblem> {
    problem.check_invariants()?;
    let (lo, hi) = effective_domain(problem)?;
    Ok(ValidatedProblem {
        problem: problem.clone(),
        lo,
        hi,
    })
}
