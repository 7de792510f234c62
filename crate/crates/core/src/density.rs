//! Grid densities, wave functions and the two functionals (Fisher information
//! and expected distortion) evaluated on them.
//!
//! A grid function is read as the continuous piecewise-linear interpolant of
//! its nodal wave-function values `psi_i = sqrt(p_i)`, pinned to zero at both
//! walls. Fisher information `4 int psi'^2 / int psi^2` and the quality
//! functional `int g psi^2 / int psi^2` are integrated exactly for that
//! interpolant, so every inequality that holds for continuous densities
//! (in particular `J * E[w^2] >= 1`) also holds for the discrete values.
//! Nodal normalization and the cached CDF use the trapezoid rule.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{GridConfig, QualityFn, GAUSSIAN_TRUNCATION_SIGMAS};

/// Uniform grid on `[lo, hi]` with `n` interior nodes `lo + i*h`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridWire")]
pub struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

#[derive(Deserialize)]
struct GridWire {
    lo: f64,
    hi: f64,
    n: usize,
}

impl TryFrom<GridWire> for Grid {
    type Error = Error;

    fn try_from(wire: GridWire) -> Result<Self> {
        Grid::new(wire.lo, wire.hi, wire.n)
    }
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSupport(format!("grid bounds [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::GridTooCoarse {
                n_points: n,
                min: 2,
            });
        }
        Ok(Grid { lo, hi, n })
    }

    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Grid::new(-half_width, half_width, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n + 1) as f64
    }

    /// Position of interior node `i` (zero-based).
    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i + 1) as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (1..=self.n).map(move |i| self.lo + i as f64 * h)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Index of the interior node nearest the domain center (lower one on ties).
    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }

    pub(crate) fn same_nodes(&self, other: &Grid) -> bool {
        self.n == other.n && self.lo == other.lo && self.hi == other.hi
    }
}

/// Nodal wave function normalized so that `h * sum psi_i^2 = 1`.
///
/// Ground states are nonnegative; excited states (used for comparisons) carry
/// sign changes.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateDensity(
                "non-finite wave function value".into(),
            ));
        }
        let norm = (grid.spacing() * values.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateDensity(
                "wave function is identically zero".into(),
            ));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(WaveFunction { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Sign changes among entries whose magnitude exceeds `rel_floor * max|psi|`.
    pub fn sign_changes(&self, rel_floor: f64) -> usize {
        let floor = rel_floor * self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut last = 0.0f64;
        let mut changes = 0;
        for &v in self.values.iter().filter(|v| v.abs() > floor) {
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                changes += 1;
            }
            last = v;
        }
        changes
    }
}

/// Probability density sampled at the interior nodes of a grid, with its
/// cumulative distribution cached at the same nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityWire", into = "DensityWire")]
pub struct NoiseDensity {
    grid: Grid,
    p: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DensityWire {
    grid: Grid,
    p: Vec<f64>,
}

impl TryFrom<DensityWire> for NoiseDensity {
    type Error = Error;

    fn try_from(wire: DensityWire) -> Result<Self> {
        NoiseDensity::from_values(wire.grid, wire.p)
    }
}

impl From<NoiseDensity> for DensityWire {
    fn from(d: NoiseDensity) -> Self {
        DensityWire {
            grid: d.grid,
            p: d.p,
        }
    }
}

impl NoiseDensity {
    /// Build a density from nonnegative nodal values; rescaled to unit trapezoid mass.
    pub fn from_values(grid: Grid, mut p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} density values for {} nodes",
                p.len(),
                grid.len()
            )));
        }
        if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::DegenerateDensity(format!(
                "density values must be finite and nonnegative, got {bad}"
            )));
        }
        let h = grid.spacing();
        let mass = h * p.iter().sum::<f64>();
        if mass <= 0.0 {
            return Err(Error::DegenerateDensity("density has zero mass".into()));
        }
        p.iter_mut().for_each(|v| *v /= mass);

        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &v in &p {
            acc += 0.5 * h * (prev + v);
            cdf.push(acc);
            prev = v;
        }
        let total = acc + 0.5 * h * prev;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(NoiseDensity { grid, p, cdf })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let p = grid.nodes().map(f).collect();
        NoiseDensity::from_values(grid, p)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn support(&self) -> (f64, f64) {
        (self.grid.lo, self.grid.hi)
    }

    /// Trapezoid-rule mass.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.p.iter().sum::<f64>()
    }

    pub fn wave_function(&self) -> WaveFunction {
        let values = self.p.iter().map(|v| v.sqrt()).collect();
        WaveFunction::new(self.grid, values).expect("a valid density has a valid root")
    }

    /// Piecewise-linear CDF through `(lo, 0)`, the cached nodes, and `(hi, 1)`.
    pub fn cdf(&self, w: f64) -> f64 {
        let g = &self.grid;
        if w <= g.lo {
            return 0.0;
        }
        if w >= g.hi {
            return 1.0;
        }
        let h = g.spacing();
        let cell = (((w - g.lo) / h).floor() as usize).min(g.n);
        let left = if cell == 0 { 0.0 } else { self.cdf[cell - 1] };
        let right = if cell == g.n { 1.0 } else { self.cdf[cell] };
        let t = ((w - g.lo) / h - cell as f64).clamp(0.0, 1.0);
        left + t * (right - left)
    }

    /// Inverse of [`NoiseDensity::cdf`]: the smallest `w` with `cdf(w) = u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutOfRange(u));
        }
        let g = &self.grid;
        if u == 0.0 {
            return Ok(g.lo);
        }
        if u == 1.0 {
            return Ok(g.hi);
        }
        let h = g.spacing();
        // Extended knots: index 0 is lo, 1..=n are nodes, n+1 is hi.
        let knot = |k: usize| -> f64 {
            match k {
                0 => 0.0,
                k if k > g.n => 1.0,
                k => self.cdf[k - 1],
            }
        };
        let k = 1 + self.cdf.partition_point(|&c| c < u);
        let (c0, c1) = (knot(k - 1), knot(k));
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 1.0 };
        let w = g.lo + ((k - 1) as f64 + t) * h;
        Ok(w.clamp(g.lo, g.hi))
    }

    /// The density of `s * W` where `W` has this density, on the scaled grid.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidSupport(format!("scale factor {s}")));
        }
        let grid = Grid::new(s * self.grid.lo, s * self.grid.hi, self.grid.n)?;
        NoiseDensity::from_values(grid, self.p.iter().map(|v| v / s).collect())
    }

    /// Probability mass within the outer tenth of the domain on either side.
    pub fn boundary_mass(&self) -> f64 {
        let g = &self.grid;
        let band = 0.1 * (g.hi - g.lo);
        self.cdf(g.lo + band) + (1.0 - self.cdf(g.hi - band))
    }

    /// CSV with header `w,p,cdf`, one row per interior node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "w,p,cdf")?;
        for ((w, p), c) in self.grid.nodes().zip(&self.p).zip(&self.cdf) {
            writeln!(
                out,
                "{},{},{}",
                format_real(w),
                format_real(*p),
                format_real(*c)
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("density serialization is infallible")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Shortest round-trip text for `x`, in exponent form outside `[1e-5, 1e16)`.
pub fn format_real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn density_from_wavefunction(psi: &WaveFunction) -> NoiseDensity {
    let p = psi.values.iter().map(|v| v * v).collect();
    NoiseDensity::from_values(psi.grid, p).expect("a normalized wave function squares to a density")
}

/// Per-cell view of the piecewise-linear interpolant with zero walls through
/// nodal amplitudes `amp(i)`: `(x_left, psi_left, psi_right)`.
fn cells_of(g: Grid, amp: impl Fn(usize) -> f64) -> impl Iterator<Item = (f64, f64, f64)> {
    let h = g.spacing();
    let psi = move |k: usize| -> f64 {
        if k == 0 || k > g.n {
            0.0
        } else {
            amp(k - 1)
        }
    };
    (0..=g.n).map(move |k| (g.lo + k as f64 * h, psi(k), psi(k + 1)))
}

fn cells(d: &NoiseDensity) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    cells_of(d.grid, |i| d.p[i].sqrt())
}

/// `int psi^2` of the interpolant.
fn interpolant_mass(h: f64, cells: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    h / 3.0 * cells.map(|(_, a, b)| a * a + a * b + b * b).sum::<f64>()
}

/// `4 int psi'^2 / int psi^2` of the interpolant.
fn interpolant_fisher<I: Iterator<Item = (f64, f64, f64)>>(h: f64, cells: impl Fn() -> I) -> f64 {
    let gradient_energy = cells().map(|(_, a, b)| (b - a) * (b - a)).sum::<f64>() / h;
    4.0 * gradient_energy / interpolant_mass(h, cells())
}

/// Fisher information `E[(d/dw log p)^2] = 4 int psi'^2 / int psi^2` with `psi = sqrt(p)`.
pub fn fisher_information(d: &NoiseDensity) -> f64 {
    interpolant_fisher(d.grid.spacing(), || cells(d))
}

/// Fisher information of `psi^2` evaluated on the signed amplitude. Unlike
/// [`fisher_information`] of the squared density, the interpolant does not
/// cut the kink of `|psi|` at a sign change.
pub fn amplitude_fisher_information(psi: &WaveFunction) -> f64 {
    interpolant_fisher(psi.grid.spacing(), || cells_of(psi.grid, |i| psi.values[i]))
}

/// Expected distortion `E[g(w)]`.
pub fn quality(d: &NoiseDensity, g: &QualityFn) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    // Exact for polynomial g: the integrand g * psi^2 has degree deg(g) + 2 per cell.
    let (abscissae, weights) = gauss_legendre_unit(g.degree() / 2 + 2);
    let h = d.grid.spacing();
    let integral: f64 = cells(d)
        .map(|(x, a, b)| {
            abscissae
                .iter()
                .zip(&weights)
                .map(|(t, wt)| {
                    let psi = a + (b - a) * t;
                    wt * psi * psi * g.eval(x + h * t)
                })
                .sum::<f64>()
        })
        .sum();
    h * integral / interpolant_mass(h, cells(d))
}

/// Gauss-Legendre rule with `m` points mapped to `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[m - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[m - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

/// The `n`-th infinite-well state density `sin^2(n pi (w - a) / (2a)) / a` on `[-a, a]`.
pub fn analytic_square_well(a: f64, n: u32, grid: GridConfig) -> Result<NoiseDensity> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidSupport(format!("half-width {a}")));
    }
    if n == 0 {
        return Err(Error::IndexOutOfRange {
            index: 0,
            len: grid.n_points,
        });
    }
    let k = n as f64 * PI / (2.0 * a);
    NoiseDensity::from_fn(Grid::symmetric(a, grid.n_points)?, |w| {
        (k * (w - a)).sin().powi(2) / a
    })
}

/// Zero-mean Gaussian density with variance `rho`, truncated to `grid` and renormalized.
pub fn analytic_gaussian(rho: f64, grid: &Grid) -> Result<NoiseDensity> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidBudget(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let required = GAUSSIAN_TRUNCATION_SIGMAS * rho.sqrt();
    let half_width = (-grid.lo()).min(grid.hi());
    if half_width < required * (1.0 - 1e-12) {
        return Err(Error::DomainTooSmall {
            half_width,
            required,
        });
    }
    let norm = (2.0 * PI * rho).sqrt();
    NoiseDensity::from_fn(*grid, |w| (-w * w / (2.0 * rho)).exp() / norm)
}
