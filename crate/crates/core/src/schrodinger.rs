//! Finite-difference Schrödinger operator `-psi'' + V psi` with infinite walls
//! at the ends of the grid, and its low-lying eigenpairs.
//!
//! Eigenvalues are located by bisection on the Sturm count of the symmetric
//! tridiagonal matrix; eigenvectors by inverse iteration at the bisected
//! shift. The reported eigenvalue is the Rayleigh quotient of the final
//! vector, evaluated in difference form so that the large `2/h^2` diagonal
//! never cancels against the off-diagonals.

use crate::density::{Grid, WaveFunction};
use crate::error::{Error, Result};

/// Iteration cap for both bisection and inverse iteration.
pub const MAX_ITERATIONS: usize = 500;

/// Relative residual target, `max |H psi - E psi| <= RESIDUAL_TOL * max(1, |E|)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Multiple of `eps * ||H||` (unit Euclidean vector) below which residuals are
/// rounding noise.
pub const ROUNDING_FLOOR_FACTOR: f64 = 16.0;

/// Potential sampled at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    grid: Grid,
    v: Vec<f64>,
}

impl PotentialGrid {
    pub fn new(grid: Grid, v: Vec<f64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} potential values for {} nodes",
                v.len(),
                grid.len()
            )));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidSupport(format!(
                "non-finite potential value {bad}"
            )));
        }
        Ok(PotentialGrid { grid, v })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        PotentialGrid::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zero(grid: Grid) -> Self {
        PotentialGrid {
            grid,
            v: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }
}

/// `diag_i = 2/h^2 + v_i`, `offdiag_i = -1/h^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    grid: Grid,
    potential: Vec<f64>,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn inv_h2(&self) -> f64 {
        -self.offdiag[0]
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let guard = f64::MIN_POSITIVE.sqrt() * self.inv_h2();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for (d, e) in self.diag[1..].iter().zip(&self.offdiag) {
            let q_safe = if q.abs() < guard {
                guard.copysign(q)
            } else {
                q
            };
            q = (d - x) - e * e / q_safe;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 {
                self.offdiag[i - 1].abs()
            } else {
                0.0
            };
            let right = if i + 1 < n {
                self.offdiag[i].abs()
            } else {
                0.0
            };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    fn inf_norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// `(H x)_i - e x_i` with the Laplacian written as differences.
    fn residual(&self, x: &[f64], e: f64) -> Vec<f64> {
        let n = x.len();
        let inv_h2 = self.inv_h2();
        (0..n)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                ((x[i] - left) + (x[i] - right)) * inv_h2 + (self.potential[i] - e) * x[i]
            })
            .collect()
    }

    /// Rayleigh quotient `x^T H x / x^T x` in difference form.
    fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut kinetic = x[0] * x[0] + x[n - 1] * x[n - 1];
        kinetic += x
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum::<f64>();
        let potential: f64 = x.iter().zip(&self.potential).map(|(x, v)| v * x * x).sum();
        let norm: f64 = x.iter().map(|x| x * x).sum();
        (kinetic * self.inv_h2() + potential) / norm
    }

    /// The `index`-th smallest eigenvalue (zero-based) by Sturm bisection.
    fn bisect_eigenvalue(&self, index: usize) -> Result<f64> {
        let (mut lo, mut hi) = self.gershgorin();
        // Sturm counts resolve eigenvalues to about eps * ||H|| in absolute
        // terms; the Rayleigh quotient of the inverse-iteration vector supplies
        // the remaining digits.
        let resolution = f64::EPSILON * self.inf_norm();
        for _ in 0..MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= resolution {
                return Ok(mid);
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: hi - lo,
        })
    }

    /// Solve `(H - shift) x = b` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * self.inf_norm();
        // Row i of the factor holds up to three entries: u0 (diagonal), u1, u2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();

        // The row still being eliminated only ever has entries in columns i and i+1.
        let mut diag = self.diag[0] - shift;
        let mut upper = if n > 1 { self.offdiag[0] } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if diag.abs() < tiny { tiny } else { diag };
                break;
            }
            let sub = self.offdiag[i];
            let next_diag = self.diag[i + 1] - shift;
            let next_upper = if i + 2 < n { self.offdiag[i + 1] } else { 0.0 };
            if diag.abs() >= sub.abs() {
                let pivot = if diag.abs() < tiny { tiny } else { diag };
                let m = sub / pivot;
                u0[i] = pivot;
                u1[i] = upper;
                rhs[i + 1] -= m * rhs[i];
                diag = next_diag - m * upper;
                upper = next_upper;
            } else {
                // Swap rows i and i+1.
                let m = diag / sub;
                u0[i] = sub;
                u1[i] = next_diag;
                u2[i] = next_upper;
                rhs.swap(i, i + 1);
                rhs[i + 1] -= m * rhs[i];
                diag = upper - m * next_diag;
                upper = -m * next_upper;
            }
        }

        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }

    fn eigenpair(&self, index: usize) -> Result<EigenPair> {
        let n = self.len();
        let shift = self.bisect_eigenvalue(index)?;

        let mut x: Vec<f64> = if index == 0 {
            vec![1.0; n]
        } else {
            start_vector(n)
        };
        normalize(&mut x);

        // Inverse iteration is normwise backward stable: with |x|_2 = 1 the
        // residual cannot be pushed much below eps * ||H||.
        let floor = ROUNDING_FLOOR_FACTOR * f64::EPSILON * self.inf_norm();
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        let mut stalled = 0;
        let mut iterations = 0;
        for iteration in 1..=MAX_ITERATIONS {
            iterations = iteration;
            x = self.shifted_solve(shift, &x);
            normalize(&mut x);
            let e = self.rayleigh_quotient(&x);
            let r = max_abs(&self.residual(&x, e));
            let tol = (RESIDUAL_TOL * e.abs().max(1.0)).max(floor);
            if r <= tol {
                return self.finish(index, e, (r, tol), x, iteration);
            }
            match &best {
                Some((best_r, _, _)) if r >= *best_r => {
                    stalled += 1;
                    if stalled >= 5 {
                        break;
                    }
                }
                _ => {
                    stalled = 0;
                    best = Some((r, e, x.clone()));
                }
            }
        }
        let residual = best.map_or(f64::INFINITY, |(r, _, _)| r);
        Err(Error::NoConvergence {
            iterations,
            residual,
        })
    }

    fn finish(
        &self,
        index: usize,
        eigenvalue: f64,
        (residual_norm, residual_tolerance): (f64, f64),
        mut x: Vec<f64>,
        iterations: usize,
    ) -> Result<EigenPair> {
        let pivot = x[self.grid.center_index()];
        let sign = if pivot != 0.0 {
            pivot.signum()
        } else {
            x.iter().find(|v| **v != 0.0).map_or(1.0, |v| v.signum())
        };
        x.iter_mut().for_each(|v| *v *= sign);
        if index == 0 {
            // Nodeless in exact arithmetic. Entries within the perturbation
            // bound |r|_2 / gap of zero are sign noise and are cleared.
            let r2 = self
                .residual(&x, eigenvalue)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            let gap = self.bisect_eigenvalue(1)? - eigenvalue;
            let noise = (2.0 * r2 / gap).max(1e-12 * max_abs(&x));
            if let Some(neg) = x.iter().find(|v| **v < -noise) {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: neg.abs(),
                });
            }
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(EigenPair {
            eigenvalue,
            eigenvector: WaveFunction::new(self.grid, x)?,
            residual_norm,
            residual_tolerance,
            iterations,
        })
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

/// Fixed pseudo-random start vector (splitmix64) so excited states have a
/// component along every eigenvector, including odd ones.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    /// Normalized to unit trapezoid mass, `h * sum psi_i^2 = 1`.
    pub eigenvector: WaveFunction,
    /// `max_i |(H x)_i - E x_i|` for the eigenvector scaled to unit Euclidean norm.
    pub residual_norm: f64,
    /// Bound met by `residual_norm`: `RESIDUAL_TOL * max(1, |E|)`, or the
    /// rounding floor of the operator when that is larger.
    pub residual_tolerance: f64,
    /// Inverse-iteration steps taken.
    pub iterations: usize,
}

pub fn assemble(grid: &Grid, potential: &PotentialGrid) -> Result<TridiagonalOperator> {
    if !grid.same_nodes(potential.grid()) || potential.values().len() != grid.len() {
        return Err(Error::GridMismatch(
            "potential is sampled on a different grid".into(),
        ));
    }
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    Ok(TridiagonalOperator {
        grid: *grid,
        potential: potential.values().to_vec(),
        diag: potential
            .values()
            .iter()
            .map(|v| 2.0 * inv_h2 + v)
            .collect(),
        offdiag: vec![-inv_h2; grid.len() - 1],
    })
}

/// Lowest eigenpair; the eigenvector is nonnegative.
pub fn ground_state(op: &TridiagonalOperator) -> Result<EigenPair> {
    op.eigenpair(0)
}

/// The `n`-th smallest eigenpair, `n >= 1`.
pub fn nth_state(op: &TridiagonalOperator, n: usize) -> Result<EigenPair> {
    if n == 0 || n > op.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: op.len(),
        });
    }
    op.eigenpair(n - 1)
}
