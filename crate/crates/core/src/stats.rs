//! Small statistics kit: geometric laws on `{1, 2, ...}`, Kolmogorov-Smirnov
//! distances on integer samples, DKW bands and least squares.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `P(X ≤ k)` for `X ~ Geom(q)` on `{1, 2, ...}`.
pub fn geometric_cdf(q: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    -(k as f64 * (-q).ln_1p()).exp_m1()
}

/// Draws from `Geom(q)` on `{1, 2, ...}`.
pub fn sample_geometric<R: Rng + ?Sized>(q: f64, rng: &mut R) -> Result<u64> {
    if q >= 1.0 {
        return Ok(1);
    }
    let dist =
        Geometric::new(q).map_err(|e| Error::domain(format!("geometric parameter {q}: {e}")))?;
    Ok(dist.sample(rng) + 1)
}

/// Sorted copy plus empirical CDF lookups.
#[derive(Clone, Debug)]
pub struct Empirical {
    sorted: Vec<u64>,
}

impl Empirical {
    pub fn new(samples: &[u64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        Empirical { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn max(&self) -> u64 {
        self.sorted.last().copied().unwrap_or(0)
    }

    /// Fraction of samples `≤ k`.
    pub fn cdf(&self, k: u64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&x| x <= k) as f64 / self.sorted.len() as f64
    }

    /// The distinct sample values, ascending.
    pub fn support(&self) -> Vec<u64> {
        let mut v = self.sorted.clone();
        v.dedup();
        v
    }
}

/// `sup_k |F_n(k) − F(k)|` against an integer-valued law.
///
/// Both CDFs are step functions jumping only at integers, so it is enough
/// to look at the sample values and at the jumps of `F` below the maximum.
pub fn ks_distance_discrete(samples: &[u64], cdf: impl Fn(u64) -> f64) -> f64 {
    let e = Empirical::new(samples);
    let top = e.max();
    let mut d: f64 = 0.0;
    let mut k = 0u64;
    // Dense scan while cheap, then only at sample values.
    let dense = top.min(1 << 20);
    while k <= dense {
        d = d.max((e.cdf(k) - cdf(k)).abs());
        k += 1;
    }
    for k in e.support().into_iter().filter(|&k| k > dense) {
        d = d.max((e.cdf(k) - cdf(k)).abs());
        if k > 0 {
            d = d.max((e.cdf(k - 1) - cdf(k - 1)).abs());
        }
    }
    // Past the largest sample the empirical CDF is 1.
    d.max(1.0 - cdf(top).min(1.0))
}

/// Two-sample KS distance.
pub fn ks_distance_two_sample(xs: &[u64], ys: &[u64]) -> f64 {
    let (ex, ey) = (Empirical::new(xs), Empirical::new(ys));
    let mut points = ex.support();
    points.extend(ey.support());
    points.sort_unstable();
    points.dedup();
    points
        .into_iter()
        .map(|k| (ex.cdf(k) - ey.cdf(k)).abs())
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail `P(K > t)`.
pub fn kolmogorov_tail(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100i32 {
        let term = 2.0 * (-2.0 * (k as f64).powi(2) * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// p-value of a KS distance `d` with effective sample size `n_eff`, with
/// Stephens' finite-sample correction.
///
/// For discrete laws the test is conservative.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub samples: usize,
    pub distance: f64,
    pub p_value: f64,
}

pub fn ks_one_sample(samples: &[u64], cdf: impl Fn(u64) -> f64) -> KsReport {
    let distance = ks_distance_discrete(samples, cdf);
    KsReport {
        samples: samples.len(),
        distance,
        p_value: ks_p_value(distance, samples.len() as f64),
    }
}

pub fn ks_two_sample(xs: &[u64], ys: &[u64]) -> KsReport {
    let distance = ks_distance_two_sample(xs, ys);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    KsReport {
        samples: xs.len() + ys.len(),
        distance,
        p_value: ks_p_value(distance, n * m / (n + m)),
    }
}

/// One-sided DKW half-width: `P(sup (F_n − F) > ε) ≤ alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((1.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
}

pub fn mean_se(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate {
            n,
            mean: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate {
        n,
        mean,
        std_error: (var / n as f64).sqrt(),
    }
}

/// A proportion with its binomial standard error.
pub fn proportion(hits: u64, n: u64) -> MeanEstimate {
    let p = hits as f64 / n as f64;
    MeanEstimate {
        n: n as usize,
        mean: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`. A constant `y` gives `R² = 1`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain("regression needs two or more paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("regression needs two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn geometric_cdf_values() {
        assert_eq!(geometric_cdf(0.5, 0), 0.0);
        assert!((geometric_cdf(0.5, 1) - 0.5).abs() < 1e-15);
        assert!((geometric_cdf(0.5, 3) - 0.875).abs() < 1e-15);
        assert_eq!(geometric_cdf(1.0, 1), 1.0);
    }

    #[test]
    fn geometric_sampler_matches_cdf() {
        let mut rng = StreamKey::new(3).rng();
        let xs: Vec<u64> = (0..200_000)
            .map(|_| sample_geometric(0.3, &mut rng).unwrap())
            .collect();
        let r = ks_one_sample(&xs, |k| geometric_cdf(0.3, k));
        assert!(r.distance < 0.006, "{r:?}");
        assert!(xs.iter().all(|&x| x >= 1));
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Critical values of the Kolmogorov law.
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let xs = [1, 2, 3, 3, 4];
        assert_eq!(ks_distance_two_sample(&xs, &xs), 0.0);
        assert!((ks_distance_two_sample(&[1, 1], &[2, 2]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regression_on_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_regression(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat = linear_regression(&x, &[2.0; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
    }

    #[test]
    fn dkw_width() {
        assert!((dkw_epsilon(1000, 0.01) - (100f64.ln() / 2000.0).sqrt()).abs() < 1e-15);
    }
}
