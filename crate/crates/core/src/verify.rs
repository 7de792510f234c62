//! Closed-form oracle checks for designed densities.

use std::f64::consts::PI;
use std::fmt;

use crate::density::analytic_gaussian;
use crate::designer::{design, PRINCIPLE_SLACK};
use crate::error::Result;
use crate::problem::{
    validate, DesignProblem, GridConfig, QualityFn, SupportSpec, TruncationPolicy,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Comparison {
    Within {
        expected: f64,
        label: String,
        tol: f64,
        relative: bool,
    },
    AtLeast {
        bound: f64,
    },
    /// Observed must differ from `reference` by more than `min_rel` (relative).
    Rejects {
        reference: f64,
        label: String,
        min_rel: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub observed: f64,
    pub comparison: Comparison,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        match &self.comparison {
            Comparison::Within {
                expected,
                tol,
                relative,
                ..
            } => {
                let err = (self.observed - expected).abs();
                let scale = if *relative { expected.abs() } else { 1.0 };
                err <= tol * scale
            }
            Comparison::AtLeast { bound } => self.observed >= *bound,
            Comparison::Rejects {
                reference, min_rel, ..
            } => (self.observed - reference).abs() > min_rel * reference.abs(),
        }
    }

    fn within(
        name: String,
        observed: f64,
        expected: f64,
        label: &str,
        tol: f64,
        relative: bool,
    ) -> Self {
        OracleCheck {
            name,
            observed,
            comparison: Comparison::Within {
                expected,
                label: label.to_string(),
                tol,
                relative,
            },
        }
    }
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} {:.6}", self.name, self.observed)?;
        match &self.comparison {
            Comparison::Within {
                expected,
                label,
                tol,
                relative,
            } => {
                write!(f, " expected {label} tol {tol:e}")?;
                if *relative {
                    write!(f, " rel")?;
                }
                let err = (self.observed - expected).abs();
                let err = if *relative { err / expected.abs() } else { err };
                write!(f, " (error {err:.3e})")
            }
            Comparison::AtLeast { bound } => write!(f, " expected >= {bound}"),
            Comparison::Rejects {
                reference,
                label,
                min_rel,
            } => write!(
                f,
                " differs from {label} = {reference:.6} by more than {min_rel:e} rel"
            ),
        }
    }
}

/// Square wells of half-width 1 and 2 and Gaussian budgets 0.5, 1, 4 on an
/// `n_points` grid.
pub fn oracle_suite(n_points: usize) -> Result<Vec<OracleCheck>> {
    let grid = GridConfig { n_points };
    let mut checks = Vec::new();

    for a in [1.0f64, 2.0] {
        let problem = validate(&DesignProblem {
            support: SupportSpec::Bounded { lo: -a, hi: a },
            g: QualityFn::Zero,
            rho: 0.0,
            grid,
        })?;
        let result = design(&problem)?;
        let (expected, label) = if a == 1.0 {
            (PI * PI, "pi^2")
        } else {
            (PI * PI / (a * a), "pi^2/a^2")
        };
        checks.push(OracleCheck::within(
            format!("well a={a} fisher"),
            result.fisher,
            expected,
            label,
            1e-2,
            true,
        ));
        if a != 1.0 {
            checks.push(OracleCheck {
                name: format!("well a={a} fisher"),
                observed: result.fisher,
                comparison: Comparison::Rejects {
                    reference: PI * PI / a,
                    label: "pi^2/a".into(),
                    min_rel: 1e-2,
                },
            });
        }
        let k = PI / (2.0 * a);
        let max_err = result
            .density
            .grid()
            .nodes()
            .zip(result.density.values())
            .map(|(w, p)| (p - (k * w).cos().powi(2) / a).abs())
            .fold(0.0, f64::max);
        checks.push(OracleCheck::within(
            format!("well a={a} density-max-error"),
            max_err,
            0.0,
            "0",
            1e-4,
            false,
        ));
    }

    for rho in [0.5f64, 1.0, 4.0] {
        let problem = validate(&DesignProblem {
            support: SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(1e-6),
            },
            g: QualityFn::Quadratic,
            rho,
            grid,
        })?;
        let result = design(&problem)?;
        let tag = format!("gaussian rho={rho}");
        checks.push(OracleCheck::within(
            format!("{tag} fisher"),
            result.fisher,
            1.0 / rho,
            &format!("{:?}", 1.0 / rho),
            1e-3,
            true,
        ));
        checks.push(OracleCheck::within(
            format!("{tag} quality"),
            result.quality,
            rho,
            &format!("{rho:?}"),
            1e-6,
            true,
        ));
        checks.push(OracleCheck {
            name: format!("{tag} product"),
            observed: result.fisher * result.quality,
            comparison: Comparison::AtLeast {
                bound: 1.0 - PRINCIPLE_SLACK,
            },
        });
        let normal = analytic_gaussian(rho, result.density.grid())?;
        let max_err = result
            .density
            .values()
            .iter()
            .zip(normal.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        checks.push(OracleCheck::within(
            format!("{tag} density-max-error"),
            max_err,
            0.0,
            "0",
            1e-4,
            false,
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_passes_everything() {
        let checks = oracle_suite(4000).unwrap();
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
        let text: Vec<String> = checks.iter().map(|c| c.to_string()).collect();
        assert!(text
            .iter()
            .any(|l| l.starts_with("PASS well a=1 fisher 9.869")
                && l.contains("expected pi^2 tol 1e-2 rel")));
        assert!(text
            .iter()
            .any(|l| l.starts_with("PASS gaussian rho=1 fisher 1.000")
                && l.contains("expected 1.0 tol 1e-3")));
        assert!(text
            .iter()
            .any(|l| l.starts_with("PASS well a=2 fisher 2.467") && l.contains("pi^2/a^2")));
        assert!(text
            .iter()
            .any(|l| l.contains("differs from pi^2/a = 4.934802")));
    }

    #[test]
    fn coarse_grid_reports_failures() {
        let checks = oracle_suite(64).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|c| c.to_string().starts_with("FAIL")));
        assert!(failed.iter().any(|c| c.name.starts_with("gaussian")));
    }
}
