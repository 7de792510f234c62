//! Minimum-Fisher-information noise under a quality budget.
//!
//! Stationary densities satisfy `-psi'' + (beta g / 4) psi = E psi` with
//! `psi = sqrt(p)` and walls at the domain ends; the optimum is the ground
//! state. The quality `Q(beta)` of that ground state strictly decreases in the
//! penalty `beta`, so the active budget `Q = rho` is met by bisection on `beta`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{
    density_from_wavefunction, fisher_information, format_real, quality, Grid, NoiseDensity,
};
use crate::error::{Error, Result};
use crate::problem::{DesignProblem, QualityFn, ValidatedProblem, MAX_TRUNCATION_DOUBLINGS};
use crate::schrodinger::{assemble, ground_state, PotentialGrid};

/// Internal target for `|Q - rho| / max(1, rho)`.
pub const BUDGET_TARGET: f64 = 1e-10;

/// Guaranteed bound on `|Q - rho| / max(1, rho)` for an active constraint.
pub const BUDGET_TOL: f64 = 1e-6;

pub const MAX_BISECTIONS: usize = 200;
pub const MAX_DOUBLINGS: usize = 60;

/// Slack allowed below one when checking `J * Q >= 1`.
pub const PRINCIPLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub bisection_iters: usize,
    pub eig_residual: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub fisher: f64,
    pub quality: f64,
    /// Coefficient of `g / 4` in the potential.
    pub beta: f64,
    /// `-4 E0`, the normalization multiplier.
    pub mu: f64,
    pub constraint_active: bool,
    pub diagnostics: Diagnostics,
    pub density: NoiseDensity,
    #[serde(skip)]
    pub g: QualityFn,
}

impl DesignResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("design serialization is infallible")
    }
}

/// One evaluation of `Q(beta)` during the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierProbe {
    pub beta: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub rho: f64,
    pub fisher: f64,
    pub quality: f64,
    pub product: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipleCheck {
    pub product: f64,
    pub satisfied: bool,
}

struct GroundDensity {
    beta: f64,
    eigenvalue: f64,
    residual: f64,
    density: NoiseDensity,
    quality: f64,
}

fn solve_at(grid: &Grid, g: &QualityFn, beta: f64) -> Result<GroundDensity> {
    let potential = if beta == 0.0 {
        PotentialGrid::zero(*grid)
    } else {
        PotentialGrid::from_fn(*grid, |w| 0.25 * beta * g.eval(w))?
    };
    let pair = ground_state(&assemble(grid, &potential)?)?;
    let density = density_from_wavefunction(&pair.eigenvector);
    let quality = quality(&density, g);
    Ok(GroundDensity {
        beta,
        eigenvalue: pair.eigenvalue,
        residual: pair.residual_norm,
        density,
        quality,
    })
}

fn finish(state: GroundDensity, g: &QualityFn, active: bool, iters: usize) -> DesignResult {
    DesignResult {
        fisher: fisher_information(&state.density),
        quality: state.quality,
        beta: state.beta,
        mu: -4.0 * state.eigenvalue,
        constraint_active: active,
        diagnostics: Diagnostics {
            bisection_iters: iters,
            eig_residual: state.residual,
            boundary_mass: state.density.boundary_mass(),
        },
        density: state.density,
        g: g.clone(),
    }
}

pub fn design(problem: &ValidatedProblem) -> Result<DesignResult> {
    design_traced(problem).map(|(result, _)| result)
}

/// [`design`] plus every `(beta, Q)` pair evaluated along the way.
pub fn design_traced(problem: &ValidatedProblem) -> Result<(DesignResult, Vec<MultiplierProbe>)> {
    let (lo, hi) = problem.domain();
    let grid = Grid::new(lo, hi, problem.n_points())?;
    design_on_grid(&grid, problem.g(), problem.rho())
}

fn design_on_grid(
    grid: &Grid,
    g: &QualityFn,
    rho: f64,
) -> Result<(DesignResult, Vec<MultiplierProbe>)> {
    let mut trace = Vec::new();
    let probe = |beta: f64, trace: &mut Vec<MultiplierProbe>| -> Result<GroundDensity> {
        let state = solve_at(grid, g, beta)?;
        trace.push(MultiplierProbe {
            beta,
            quality: state.quality,
        });
        Ok(state)
    };

    let free = probe(0.0, &mut trace)?;
    if g.is_zero() || free.quality <= rho {
        return Ok((finish(free, g, false, 0), trace));
    }

    let target = BUDGET_TARGET * rho.max(1.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = probe(hi, &mut trace)?;
    let mut doublings = 0;
    while best.quality >= rho {
        if (best.quality - rho).abs() <= target {
            return Ok((finish(best, g, true, 0), trace));
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BudgetUnreachable {
                rho,
                reachable: best.quality,
            });
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        // A potential too stiff for the eigensolver marks the end of the
        // reachable range, like running out of doublings.
        best = match probe(hi, &mut trace) {
            Err(Error::NoConvergence { .. }) => {
                return Err(Error::BudgetUnreachable {
                    rho,
                    reachable: best.quality,
                })
            }
            other => other?,
        };
    }

    let mut iters = 0;
    while (best.quality - rho).abs() > target && iters < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iters += 1;
        let state = probe(mid, &mut trace)?;
        if state.quality > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if (state.quality - rho).abs() < (best.quality - rho).abs() {
            best = state;
        }
    }
    if (best.quality - rho).abs() > BUDGET_TOL * rho.max(1.0) {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual: (best.quality - rho).abs(),
        });
    }
    Ok((finish(best, g, true, iters), trace))
}

/// Half-width for automatic truncation of a non-quadratic problem: doubled
/// from `sqrt(rho)` until the budget binds and the designed density leaves
/// less than `tol` of its mass near the walls.
pub(crate) fn settle_truncation(problem: &DesignProblem, tol: f64) -> Result<f64> {
    let mut half_width = if problem.rho > 0.0 {
        problem.rho.sqrt()
    } else {
        1.0
    };
    for _ in 0..MAX_TRUNCATION_DOUBLINGS {
        let grid = Grid::symmetric(half_width, problem.grid.n_points)?;
        let (result, _) = design_on_grid(&grid, &problem.g, problem.rho)?;
        if result.constraint_active && result.diagnostics.boundary_mass < tol {
            return Ok(half_width);
        }
        half_width *= 2.0;
    }
    Err(Error::NonConvergentTruncation {
        doublings: MAX_TRUNCATION_DOUBLINGS,
        half_width,
    })
}

/// Designs for each budget in `rhos` (strictly increasing), in input order.
pub fn frontier(template: &ValidatedProblem, rhos: &[f64]) -> Result<Vec<FrontierPoint>> {
    if template.g().is_zero() {
        return Err(Error::NotApplicable(
            "a frontier needs a nonzero quality function".into(),
        ));
    }
    if let Some(bad) = rhos.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidBudget(format!(
            "frontier budgets must be positive, got {bad}"
        )));
    }
    if rhos.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidBudget(
            "frontier budgets must be strictly increasing".into(),
        ));
    }
    rhos.par_iter()
        .map(|&rho| {
            let annotate = |source| Error::AtBudget {
                rho,
                source: Box::new(source),
            };
            let problem = template.with_rho(rho).map_err(annotate)?;
            let result = design(&problem).map_err(annotate)?;
            Ok(FrontierPoint {
                rho,
                fisher: result.fisher,
                quality: result.quality,
                product: result.fisher * result.quality,
            })
        })
        .collect()
}

pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "rho,fisher,quality,product")?;
    for p in points {
        let row = [p.rho, p.fisher, p.quality, p.product].map(format_real);
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `J * Q >= 1`; only defined for quadratic quality.
pub fn check_principle(result: &DesignResult) -> Result<PrincipleCheck> {
    if result.g != QualityFn::Quadratic {
        return Err(Error::NotApplicable(
            "the privacy principle is stated for quadratic quality only".into(),
        ));
    }
    Ok(principle_for(result.fisher, result.quality))
}

/// [`check_principle`] for an arbitrary density, measured with quadratic quality.
pub fn check_density_principle(d: &NoiseDensity) -> PrincipleCheck {
    principle_for(fisher_information(d), quality(d, &QualityFn::Quadratic))
}

fn principle_for(fisher: f64, quality: f64) -> PrincipleCheck {
    let product = fisher * quality;
    PrincipleCheck {
        product,
        satisfied: product >= 1.0 - PRINCIPLE_SLACK,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{analytic_gaussian, analytic_square_well};
    use crate::problem::{validate, GridConfig, SupportSpec, TruncationPolicy};
    use crate::schrodinger::nth_state;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn problem(support: SupportSpec, g: QualityFn, rho: f64, n: usize) -> ValidatedProblem {
        validate(&DesignProblem {
            support,
            g,
            rho,
            grid: GridConfig { n_points: n },
        })
        .unwrap()
    }

    fn gaussian_problem(half_width: f64, rho: f64, n: usize) -> ValidatedProblem {
        problem(
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Fixed(half_width),
            },
            QualityFn::Quadratic,
            rho,
            n,
        )
    }

    fn auto_quadratic(rho: f64, n: usize) -> ValidatedProblem {
        problem(
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(1e-6),
            },
            QualityFn::Quadratic,
            rho,
            n,
        )
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn square_well_design() {
        let p = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Zero,
            0.0,
            4000,
        );
        let r = design(&p).unwrap();
        assert_eq!(r.beta, 0.0);
        assert!(!r.constraint_active);
        assert!(rel(r.fisher, PI * PI) < 1e-3);
        assert!((r.mu + PI * PI).abs() < 1e-3);
        for (w, v) in r.density.grid().nodes().zip(r.density.values()) {
            assert!((v - (PI * w / 2.0).cos().powi(2)).abs() < 1e-4);
        }
    }

    #[test]
    fn gaussian_design_unit_budget() {
        let r = design(&gaussian_problem(10.0, 1.0, 4000)).unwrap();
        assert!(r.constraint_active);
        assert!((r.fisher - 1.0).abs() < 1e-3);
        assert!((r.beta - 1.0).abs() < 1e-2);
        assert!((r.quality - 1.0).abs() <= BUDGET_TOL);
        let normal = analytic_gaussian(1.0, r.density.grid()).unwrap();
        for (a, b) in r.density.values().iter().zip(normal.values()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn gaussian_design_wide_budget() {
        // Oracle: -psi'' + (beta w^2 / 4) psi has ground energy sqrt(beta)/2 and
        // variance 1/sqrt(beta); variance rho gives beta = 1/rho^2, mu = -2/rho.
        let r = design(&gaussian_problem(20.0, 4.0, 4000)).unwrap();
        assert!((r.fisher - 0.25).abs() < 1e-3);
        assert!((r.beta - 1.0 / 16.0).abs() < 1e-3);
        assert!((r.mu + 0.5).abs() < 1e-2);
    }

    #[test]
    fn bounded_support_with_slack_budget_is_inactive() {
        let p = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Quadratic,
            0.2,
            1000,
        );
        let r = design(&p).unwrap();
        assert!(!r.constraint_active);
        assert_eq!(r.beta, 0.0);
        assert!(r.quality <= 0.2);
    }

    #[test]
    fn bounded_support_with_tight_budget_is_active() {
        let p = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Quadratic,
            0.05,
            1000,
        );
        let r = design(&p).unwrap();
        assert!(r.constraint_active && r.beta > 0.0);
        assert!((r.quality - 0.05).abs() <= BUDGET_TOL);
        assert!(r.fisher * r.quality >= 1.0 - PRINCIPLE_SLACK);
    }

    #[test]
    fn unreachable_budget() {
        let p = gaussian_problem(10.0, 1e-12, 100);
        assert!(matches!(design(&p), Err(Error::BudgetUnreachable { .. })));
        let fine = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Quadratic,
            1e-12,
            4000,
        );
        match design(&fine) {
            Err(Error::BudgetUnreachable { rho, reachable }) => {
                assert!(rho == 1e-12 && reachable > rho)
            }
            other => panic!("expected an unreachable budget, got {other:?}"),
        }
    }

    #[test]
    fn quality_decreases_along_trace() {
        let (_, mut trace) = design_traced(&auto_quadratic(0.7, 1000)).unwrap();
        trace.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        for w in trace.windows(2) {
            assert!(w[1].quality < w[0].quality, "{w:?}");
        }
    }

    #[test]
    fn frontier_matches_inverse_budget() {
        let points = frontier(&auto_quadratic(1.0, 4000), &[0.5, 1.0, 2.0]).unwrap();
        for (p, j) in points.iter().zip([2.0, 1.0, 0.5]) {
            assert!(rel(p.fisher, j) < 1e-3);
            assert!(p.product >= 1.0 - PRINCIPLE_SLACK && p.product <= 1.0 + 1e-3);
        }
        let single = frontier(&auto_quadratic(1.0, 1000), &[1.5]).unwrap();
        let direct = design(&auto_quadratic(1.5, 1000)).unwrap();
        assert_eq!(single[0].fisher, direct.fisher);
        assert_eq!(single[0].quality, direct.quality);
    }

    #[test]
    fn frontier_rejects_bad_budgets() {
        let t = auto_quadratic(1.0, 200);
        assert!(matches!(
            frontier(&t, &[1.0, 0.5]),
            Err(Error::InvalidBudget(_))
        ));
        assert!(matches!(
            frontier(&t, &[-1.0]),
            Err(Error::InvalidBudget(_))
        ));
        let zero = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Zero,
            0.0,
            100,
        );
        assert!(matches!(
            frontier(&zero, &[1.0]),
            Err(Error::NotApplicable(_))
        ));
        let tiny = gaussian_problem(10.0, 1.0, 100);
        match frontier(&tiny, &[1e-12, 1.0]) {
            Err(Error::AtBudget { rho, source }) => {
                assert_eq!(rho, 1e-12);
                assert!(matches!(*source, Error::BudgetUnreachable { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn principle_checks() {
        let r = design(&auto_quadratic(1.0, 4000)).unwrap();
        let c = check_principle(&r).unwrap();
        assert!(c.satisfied && (c.product - 1.0).abs() < 1e-3);

        let well = analytic_square_well(1.0, 1, GridConfig { n_points: 4000 }).unwrap();
        let c = check_density_principle(&well);
        assert!((c.product - (PI * PI / 3.0 - 2.0)).abs() < 1e-4);
        assert!(c.satisfied);

        let quartic = problem(
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Fixed(6.0),
            },
            QualityFn::EvenPower(4),
            1.0,
            500,
        );
        let r = design(&quartic).unwrap();
        assert!(matches!(check_principle(&r), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn quartic_auto_truncation_settles() {
        let p = problem(
            SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(1e-6),
            },
            QualityFn::EvenPower(4),
            1.0,
            1000,
        );
        let (lo, hi) = p.domain();
        assert_eq!(lo, -hi);
        let r = design(&p).unwrap();
        assert!(r.constraint_active);
        assert!(r.diagnostics.boundary_mass < 1e-6);
        assert!((r.quality - 1.0).abs() <= BUDGET_TOL);
    }

    #[test]
    fn zero_quality_on_real_line_never_settles() {
        let p = DesignProblem {
            support: SupportSpec::RealLine {
                truncation: TruncationPolicy::Auto(1e-6),
            },
            g: QualityFn::Zero,
            rho: 1.0,
            grid: GridConfig { n_points: 64 },
        };
        assert!(matches!(
            validate(&p),
            Err(Error::NonConvergentTruncation { .. })
        ));
    }

    #[test]
    fn design_is_deterministic() {
        let a = design(&auto_quadratic(2.0, 800)).unwrap().to_json();
        let b = design(&auto_quadratic(2.0, 800)).unwrap().to_json();
        assert_eq!(a, b);
        let json: serde_json::Value = serde_json::from_str(&a).unwrap();
        for key in [
            "fisher",
            "quality",
            "beta",
            "mu",
            "constraint_active",
            "diagnostics",
            "density",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        for key in ["bisection_iters", "eig_residual", "boundary_mass"] {
            assert!(json["diagnostics"].get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn designed_density_beats_feasible_alternatives() {
        let rho = 1.0;
        let r = design(&auto_quadratic(rho, 2000)).unwrap();
        let grid = *r.density.grid();

        // Laplace with E[w^2] = 2 b^2 = rho; truncation only lowers its quality.
        let b = (rho / 2.0).sqrt();
        let laplace = NoiseDensity::from_fn(grid, |w| (-w.abs() / b).exp()).unwrap();
        assert!(quality(&laplace, &QualityFn::Quadratic) <= rho + 1e-6);
        assert!(r.fisher <= fisher_information(&laplace) + 1e-6);

        // Excited states of the same operator, where they fit the budget.
        let potential = PotentialGrid::from_fn(grid, |w| 0.25 * r.beta * w * w).unwrap();
        let op = assemble(&grid, &potential).unwrap();
        for n in 2..=4 {
            let d = density_from_wavefunction(&nth_state(&op, n).unwrap().eigenvector);
            assert!(r.fisher <= fisher_information(&d) + 1e-6);
        }

        // Uniform on [-1, 1] meets a budget of 1/2 on the bounded support.
        let bounded = problem(
            SupportSpec::Bounded { lo: -1.0, hi: 1.0 },
            QualityFn::Quadratic,
            0.5,
            1000,
        );
        let r = design(&bounded).unwrap();
        let uniform = NoiseDensity::from_fn(*r.density.grid(), |_| 0.5).unwrap();
        assert!(quality(&uniform, &QualityFn::Quadratic) <= 0.5);
        assert!(r.fisher <= fisher_information(&uniform) + 1e-6);
    }

    #[test]
    fn frontier_csv_header() {
        let mut buf = Vec::new();
        let pts = [FrontierPoint {
            rho: 1.0,
            fisher: 1.0,
            quality: 1.0,
            product: 1.0,
        }];
        write_frontier_csv(&pts, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rho,fisher,quality,product\n1,1,1,1\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn larger_budget_never_costs_privacy(a in 0.2f64..3.0, b in 0.2f64..3.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-3);
            let t = gaussian_problem(12.0, 1.0, 600);
            let pts = frontier(&t, &[lo, hi]).unwrap();
            prop_assert!(pts[0].fisher >= pts[1].fisher - 1e-9);
        }

        #[test]
        fn quadratic_designs_obey_principle(rho in 0.1f64..5.0) {
            let r = design(&auto_quadratic(rho, 500)).unwrap();
            prop_assert!(check_principle(&r).unwrap().satisfied);
        }
    }
}
