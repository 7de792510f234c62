//! Noisy responses `y = f(x) + w` and a maximum-likelihood adversary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{fisher_information, NoiseDensity};
use crate::error::{Error, Result};

/// Fewest trials accepted by [`monte_carlo_attack`].
pub const MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuerySpec {
    IdentityScalar,
    AffineScalar { slope: f64, intercept: f64 },
}

impl QuerySpec {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            QuerySpec::IdentityScalar => x,
            QuerySpec::AffineScalar { slope, intercept } => slope * x + intercept,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            QuerySpec::AffineScalar { slope, intercept }
                if slope == 0.0 || !slope.is_finite() || !intercept.is_finite() =>
            {
                Err(Error::InvalidQuery(format!(
                    "affine query needs a finite nonzero slope, got {slope}x + {intercept}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub trials: usize,
    pub empirical_mse: f64,
    pub cramer_rao_floor: f64,
    pub empirical_bias: f64,
    pub seed: u64,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// `count` inverse-CDF draws from `d`, reproducible from `seed`.
pub fn sample(d: &NoiseDensity, seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            d.quantile(u).expect("uniform draws lie in [0, 1)")
        })
        .collect()
}

pub fn respond(query: &QuerySpec, x: f64, d: &NoiseDensity, seed: u64) -> Result<f64> {
    query.check()?;
    Ok(query.apply(x) + sample(d, seed, 1)[0])
}

/// Mode of the noise density, refined by a parabola through the log-density
/// at the peak node and its neighbours. Ties go to the rightmost node.
pub fn noise_mode(d: &NoiseDensity) -> f64 {
    let p = d.values();
    let grid = d.grid();
    let mut peak = 0;
    for (i, &v) in p.iter().enumerate() {
        if v >= p[peak] {
            peak = i;
        }
    }
    let node = grid.node(peak);
    if peak == 0 || peak + 1 == p.len() {
        return node;
    }
    let (left, mid, right) = (p[peak - 1], p[peak], p[peak + 1]);
    if left <= 0.0 || right <= 0.0 {
        return node;
    }
    let (fl, fm, fr) = (left.ln(), mid.ln(), right.ln());
    let curvature = fl - 2.0 * fm + fr;
    if curvature >= 0.0 {
        return node;
    }
    let h = grid.spacing();
    let offset = (0.5 * h * (fl - fr) / curvature).clamp(-h, h);
    node + offset
}

/// Location-model maximum-likelihood estimate `argmax_x log p(y - x)`.
pub fn mle_estimate(d: &NoiseDensity, y: f64) -> f64 {
    y - noise_mode(d)
}

/// Repeated identity-query responses attacked by [`mle_estimate`].
pub fn monte_carlo_attack(
    d: &NoiseDensity,
    x_true: f64,
    trials: usize,
    seed: u64,
) -> Result<AttackReport> {
    attack(&QuerySpec::IdentityScalar, d, x_true, trials, seed)
}

/// Like [`monte_carlo_attack`] for any scalar query; affine queries are
/// inverted after estimating `f(x)`, which scales the floor by `1/slope^2`.
pub fn attack(
    query: &QuerySpec,
    d: &NoiseDensity,
    x_true: f64,
    trials: usize,
    seed: u64,
) -> Result<AttackReport> {
    query.check()?;
    if trials < MIN_TRIALS {
        return Err(Error::InvalidQuery(format!(
            "an attack needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let (slope, intercept) = match *query {
        QuerySpec::IdentityScalar => (1.0, 0.0),
        QuerySpec::AffineScalar { slope, intercept } => (slope, intercept),
    };
    let fx = query.apply(x_true);
    let mode = noise_mode(d);
    let (mut sum_err, mut sum_sq) = (0.0, 0.0);
    for w in sample(d, seed, trials) {
        let estimate = ((fx + w - mode) - intercept) / slope;
        let err = estimate - x_true;
        sum_err += err;
        sum_sq += err * err;
    }
    let n = trials as f64;
    Ok(AttackReport {
        trials,
        empirical_mse: sum_sq / n,
        cramer_rao_floor: 1.0 / (slope * slope * fisher_information(d)),
        empirical_bias: sum_err / n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{analytic_gaussian, analytic_square_well, Grid};
    use crate::problem::GridConfig;
    use std::f64::consts::PI;

    fn normal() -> NoiseDensity {
        analytic_gaussian(1.0, &Grid::symmetric(10.0, 4000).unwrap()).unwrap()
    }

    fn well() -> NoiseDensity {
        analytic_square_well(1.0, 1, GridConfig { n_points: 4000 }).unwrap()
    }

    #[test]
    fn gaussian_sample_moments() {
        let count = 100_000;
        let xs = sample(&normal(), 42, count);
        let mean = xs.iter().sum::<f64>() / count as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        // 4 sigma / sqrt(count): sigma_mean = 1, sigma_var = sqrt(2).
        let n = count as f64;
        assert!(mean.abs() < 4.0 / n.sqrt() && mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 4.0 * 2f64.sqrt() / n.sqrt() && (var - 1.0).abs() < 0.03);
    }

    #[test]
    fn samples_stay_in_support_and_repeat() {
        let d = well();
        let a = sample(&d, 7, 10_000);
        assert!(a.iter().all(|w| (-1.0..=1.0).contains(w)));
        assert_eq!(a, sample(&d, 7, 10_000));
        assert_ne!(a, sample(&d, 8, 10_000));
    }

    #[test]
    fn respond_adds_noise_to_query() {
        let d = normal();
        let w = sample(&d, 3, 1)[0];
        assert_eq!(
            respond(&QuerySpec::IdentityScalar, 3.0, &d, 3).unwrap(),
            3.0 + w
        );
        let affine = QuerySpec::AffineScalar {
            slope: 2.0,
            intercept: 1.0,
        };
        assert_eq!(respond(&affine, 3.0, &d, 3).unwrap(), 7.0 + w);
        let flat = QuerySpec::AffineScalar {
            slope: 0.0,
            intercept: 1.0,
        };
        assert!(matches!(
            respond(&flat, 3.0, &d, 3),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn point_mass_response_lands_on_its_node() {
        let grid = Grid::symmetric(1.0, 101).unwrap();
        let mut p = vec![0.0; 101];
        p[70] = 1.0;
        let d = NoiseDensity::from_values(grid, p).unwrap();
        let y = respond(&QuerySpec::IdentityScalar, 3.0, &d, 11).unwrap();
        assert!((y - (3.0 + grid.node(70))).abs() <= grid.spacing());
    }

    #[test]
    fn mle_examples() {
        assert!((mle_estimate(&normal(), 2.7) - 2.7).abs() < 1e-6);
        // Grid-search oracle: the square-well density peaks at w = 0.
        let d = well();
        let (argmax, _) =
            d.grid()
                .nodes()
                .zip(d.values())
                .fold(
                    (0.0, f64::MIN),
                    |best, (w, &p)| if p > best.1 { (w, p) } else { best },
                );
        assert!(argmax.abs() <= d.grid().spacing());
        assert!((mle_estimate(&d, 5.0) - 5.0).abs() < 1e-3);
        let delta = 0.37;
        let shift = mle_estimate(&d, 5.0 + delta) - mle_estimate(&d, 5.0);
        assert!((shift - delta).abs() < 1e-12);
    }

    #[test]
    fn mle_on_asymmetric_density() {
        let grid = Grid::symmetric(10.0, 4001).unwrap();
        let d = NoiseDensity::from_fn(grid, |w| (-(w - 1.3).powi(2) / 2.0).exp()).unwrap();
        assert!((mle_estimate(&d, 0.0) + 1.3).abs() < 1e-9);
    }

    #[test]
    fn gaussian_attack_meets_floor() {
        let d = normal();
        let report = monte_carlo_attack(&d, 0.0, 100_000, 42).unwrap();
        assert!((report.cramer_rao_floor - 1.0).abs() < 1e-4);
        // Relative Monte-Carlo error of a mean of squared normals: sqrt(2/trials).
        let tol = 4.0 * (2.0f64 / 1e5).sqrt();
        assert!((report.empirical_mse / report.cramer_rao_floor - 1.0).abs() < tol.min(0.05));
        assert_eq!(report, monte_carlo_attack(&d, 0.0, 100_000, 42).unwrap());
    }

    #[test]
    fn square_well_attack_stays_above_floor() {
        let report = monte_carlo_attack(&well(), 1.5, 100_000, 42).unwrap();
        assert!((report.cramer_rao_floor - 1.0 / (PI * PI)).abs() < 1e-6);
        assert!(report.empirical_bias.abs() < 0.01);
        assert!(report.empirical_mse >= 0.95 * report.cramer_rao_floor);
    }

    #[test]
    fn affine_attack_scales_floor() {
        let d = normal();
        let q = QuerySpec::AffineScalar {
            slope: 2.0,
            intercept: -1.0,
        };
        let report = attack(&q, &d, 0.5, 50_000, 1).unwrap();
        assert!((report.cramer_rao_floor - 0.25).abs() < 1e-4);
        assert!((report.empirical_mse / 0.25 - 1.0).abs() < 0.05);
    }

    #[test]
    fn attack_needs_enough_trials() {
        assert!(matches!(
            monte_carlo_attack(&normal(), 0.0, 10, 1),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn report_json_fields() {
        let r = AttackReport {
            trials: 1000,
            empirical_mse: 1.0,
            cramer_rao_floor: 1.0,
            empirical_bias: 0.0,
            seed: 42,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "trials",
            "empirical_mse",
            "cramer_rao_floor",
            "empirical_bias",
            "seed",
        ] {
            assert!(v.get(key).is_some());
        }
    }
}
