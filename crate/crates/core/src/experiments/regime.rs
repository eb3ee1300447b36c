//! Closed-form parameter choices for the four sleep-rate regimes, the
//! induction condition along a hierarchy, and the supermartingale
//! condition behind metastability.
//!
//! The Harnack-type constant `K` is never known exactly; every number here
//! is relative to the supplied estimate `k_hat`.

use serde::{Deserialize, Serialize};

use super::psi;
use crate::error::{Error, Result};

/// `a = 2^{9/4} / (2^{1/4} − 1)`, the exponent of `|ln λ|` in the low sleep
/// rate density in dimension 2.
pub const LOW_LAMBDA_EXPONENT: f64 = 25.140_854_031_532_985;

fn low_lambda_exponent() -> f64 {
    2f64.powf(2.25) / (2f64.powf(0.25) - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LowLambda2d,
    HighLambda2d,
    LowLambdaHighDim,
    HighLambdaHighDim,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low-lambda-2d" => Ok(Regime::LowLambda2d),
            "high-lambda-2d" => Ok(Regime::HighLambda2d),
            "low-lambda-high-dim" => Ok(Regime::LowLambdaHighDim),
            "high-lambda-high-dim" => Ok(Regime::HighLambdaHighDim),
            _ => Err(Error::domain(format!("unknown regime {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub regime: Regime,
    pub lambda: f64,
    pub k_hat: f64,
    /// Only in the low sleep rate planar regime.
    pub a: Option<f64>,
    pub mu: f64,
    /// Density left after discarding sites while building the hierarchy.
    pub mu_prime: Option<f64>,
    /// Cluster size parameter. In dimension 3 and more it is `⌈μ n^d⌉`,
    /// known only once `n` is given.
    pub v: Option<u64>,
    pub r: Option<u64>,
    /// `D_0, D_1, ...` up to the requested depth.
    pub d_seq: Vec<u64>,
    /// `α_0, α_1, ...`; a single value in dimension 3 and more.
    pub alpha: Vec<f64>,
    pub alpha_inf: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: f64,
    pub psi_mu: f64,
    /// `κ − ψ(μ)`: positive when the energy beats the entropy.
    pub margin: f64,
    pub mu_in_range: bool,
    pub alphas_positive: bool,
    pub valid: bool,
}

/// Derives every parameter of `regime` at sleep rate `lambda`.
///
/// `depth` is the number of hierarchy levels for which `α_j`, `D_j` are
/// listed (the planar regimes list `depth + 1` values). `n` and `d` are
/// only used by the higher-dimensional regimes to evaluate `v = ⌈μ n^d⌉`.
pub fn regime_params(
    regime: Regime,
    lambda: f64,
    k_hat: f64,
    depth: usize,
    n_d: Option<(u32, u32)>,
) -> Result<RegimeParams> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "sleep rate must be positive, got {lambda}"
        )));
    }
    if !(k_hat > 0.0 && k_hat.is_finite()) {
        return Err(Error::domain(format!(
            "K estimate must be positive, got {k_hat}"
        )));
    }
    let ln_l = lambda.ln();
    let k = k_hat;
    let mut p = RegimeParams {
        regime,
        lambda,
        k_hat,
        a: None,
        mu: f64::NAN,
        mu_prime: None,
        v: None,
        r: None,
        d_seq: Vec::new(),
        alpha: Vec::new(),
        alpha_inf: None,
        beta: None,
        kappa: f64::NAN,
        psi_mu: f64::NAN,
        margin: f64::NAN,
        mu_in_range: false,
        alphas_positive: false,
        valid: false,
    };
    let six = |d0: u64| {
        (0..=depth)
            .map(|j| crate::hierarchy::scale_d(d0, j))
            .collect::<Vec<_>>()
    };
    match regime {
        Regime::LowLambda2d => {
            let a = low_lambda_exponent();
            let lnln = ln_l.abs().ln();
            let base = ((1.0 + 2.0 * lambda) / (2.0 * lambda)).ln();
            let d0 = (1.0 / lambda).ceil() as u64;
            p.a = Some(a);
            p.mu = lambda * ln_l.abs().powf(a);
            p.mu_prime = Some(p.mu - 144.0 / (d0 as f64).powi(2));
            p.v = Some(1);
            p.d_seq = six(d0);
            p.alpha = (0..=depth)
                .map(|j| base - a / 2.0 * (1.0 - 2f64.powf(-(j as f64) / 4.0)) * lnln)
                .collect();
            let inf = base - a / 2.0 * lnln;
            p.alpha_inf = Some(inf);
            p.kappa = inf * p.mu_prime.unwrap();
        }
        Regime::HighLambda2d => {
            let r = (8.0 * ln_l * lambda.sqrt() / k.sqrt()).ceil().max(1.0) as u64;
            let a0 = k / (lambda * ln_l);
            p.r = Some(r);
            p.v = Some(r * r);
            p.mu = 1.0 - k / (8.0 * lambda * ln_l * ln_l);
            p.mu_prime = Some(p.mu - 0.5);
            p.d_seq = six(96 * r * r * r);
            p.alpha = (0..=depth)
                .map(|j| (1.0 + 2f64.powf(-(j as f64) / 4.0)) / 2.0 * a0)
                .collect();
            p.alpha_inf = Some(a0 / 2.0);
            p.kappa = a0 / 2.0 * (p.mu - 0.5);
        }
        Regime::LowLambdaHighDim => {
            let e = std::f64::consts::E;
            let lnk = k.ln().abs();
            p.mu = e / k.powi(8) * lambda;
            p.alpha = vec![ln_l.abs() - 2.0 * lnk];
            p.beta = Some(1.0 - 2.0 * lnk / ln_l.abs());
            p.kappa = e / k.powi(8) * lambda * ln_l.abs() - 6.0 * e * lnk / k.powi(8) * lambda;
        }
        Regime::HighLambdaHighDim => {
            p.mu = 1.0 - k / (16.0 * lambda * ln_l);
            p.alpha = vec![k / (2.0 * lambda)];
            p.beta = Some(0.5);
            p.kappa = k / (8.0 * lambda);
        }
    }
    if matches!(regime, Regime::LowLambdaHighDim | Regime::HighLambdaHighDim) {
        if let Some((n, d)) = n_d {
            p.v = Some((p.mu * (n as f64).powi(d as i32)).ceil() as u64);
        }
    }
    p.mu_in_range = p.mu > 0.0 && p.mu < 1.0;
    p.alphas_positive = p.alpha.iter().all(|&a| a > 0.0) && p.alpha_inf.is_none_or(|a| a > 0.0);
    if p.mu_in_range {
        p.psi_mu = psi(p.mu)?;
        p.margin = p.kappa - p.psi_mu;
    }
    p.valid = p.mu_in_range && p.alphas_positive && p.margin > 0.0;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionRow {
    pub j: usize,
    pub d_j: u64,
    pub upsilon: f64,
    /// `4v(1+λ)2^{3j/2} / ((1 − e^{−α_j v}) Υ(D_j))`.
    pub lhs: f64,
    /// `exp((α_j − α_{j+1}) 2^{j/2} v)`.
    pub rhs: f64,
    /// `ln lhs / ((α_j − α_{j+1}) 2^{j/2} v)`; the condition holds iff it
    /// is at most 1. Their supremum over `j` is the statistic `g(λ)`.
    pub g: f64,
    pub holds: bool,
}

/// Evaluates the induction condition for `j = 0..alpha.len() − 1`.
///
/// `upsilon(j)` returns the hitting probability at distance `D_j`.
pub fn check_induction_condition(
    lambda: f64,
    v: u64,
    alpha: &[f64],
    d_seq: &[u64],
    mut upsilon: impl FnMut(usize) -> Result<f64>,
) -> Result<Vec<InductionRow>> {
    if alpha.len() < 2 || d_seq.len() + 1 < alpha.len() {
        return Err(Error::domain("need α_0..α_{J+1} and D_0..D_J"));
    }
    let vf = v as f64;
    let mut rows = Vec::with_capacity(alpha.len() - 1);
    for j in 0..alpha.len() - 1 {
        let u = upsilon(j)?;
        let jf = j as f64;
        let lhs =
            4.0 * vf * (1.0 + lambda) * 2f64.powf(1.5 * jf) / ((-(-alpha[j] * vf).exp_m1()) * u);
        let gap = (alpha[j] - alpha[j + 1]) * 2f64.powf(jf / 2.0) * vf;
        let g = if gap > 0.0 {
            lhs.ln() / gap
        } else {
            f64::INFINITY
        };
        rows.push(InductionRow {
            j,
            d_j: d_seq[j],
            upsilon: u,
            lhs,
            rhs: gap.exp(),
            g,
            holds: lhs <= gap.exp(),
        });
    }
    Ok(rows)
}

/// `Υ(16r)(1 − e^{α(1 − (1−β)v)}) − λ(e^α − 1)`: non-negative iff the
/// supermartingale condition holds at `α`.
pub fn metastability_condition(lambda: f64, alpha: f64, beta: f64, v: f64, upsilon: f64) -> f64 {
    upsilon * (-(alpha * (1.0 - (1.0 - beta) * v)).exp_m1()) - lambda * alpha.exp_m1()
}

/// Largest `α > 0` satisfying the supermartingale condition, or 0 when none
/// does (the slope of the right side at 0 does not beat `λ`).
pub fn metastability_alpha(lambda: f64, beta: f64, v: f64, upsilon: f64) -> f64 {
    let m = (1.0 - beta) * v - 1.0;
    if m <= 0.0 || upsilon * m <= lambda {
        return 0.0;
    }
    let f = |a: f64| metastability_condition(lambda, a, beta, v, upsilon);
    // f > 0 just right of 0, and f → −∞.
    let mut hi = 1.0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while f(lo) < 0.0 && lo > 1e-300 {
        lo /= 2.0;
    }
    if f(lo) < 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_constant() {
        assert!((low_lambda_exponent() - LOW_LAMBDA_EXPONENT).abs() < 1e-12);
    }

    #[test]
    fn high_lambda_planar_density() {
        let l = std::f64::consts::E.powi(2);
        let p = regime_params(Regime::HighLambda2d, l, 0.3, 4, None).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((p.mu - (1.0 - 0.3 / (32.0 * e2))).abs() < 1e-12);
        assert!((p.alpha[0] - 0.3 / (l * 2.0)).abs() < 1e-12);
        assert_eq!(p.d_seq[1], 6 * 96 * p.r.unwrap().pow(3));
    }

    #[test]
    fn low_lambda_alphas_decrease_to_limit() {
        let p = regime_params(Regime::LowLambda2d, 1e-3, 1.0, 12, None).unwrap();
        assert_eq!(p.d_seq[0], 1000);
        assert_eq!(p.d_seq[3], 216_000);
        for w in p.alpha.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert!(p.alpha.iter().all(|&a| a > p.alpha_inf.unwrap()));
        assert!((p.alpha[0] - (1.002f64 / 0.002).ln()).abs() < 1e-12);
    }

    #[test]
    fn equal_alphas_fail_induction() {
        let rows = check_induction_condition(1.0, 1, &[1.0, 1.0], &[10], |_| Ok(0.5)).unwrap();
        assert!(!rows[0].holds);
        assert_eq!(rows[0].rhs, 1.0);
    }

    #[test]
    fn metastability_alpha_root() {
        let a = metastability_alpha(0.1, 0.5, 20.0, 0.4);
        assert!(a > 0.0);
        assert!(metastability_condition(0.1, a, 0.5, 20.0, 0.4).abs() < 1e-9);
        assert!(metastability_condition(0.1, a * 1.01, 0.5, 20.0, 0.4) < 0.0);
        assert_eq!(metastability_alpha(5.0, 5.0 / 6.0, 16.0, 0.3), 0.0);
    }
}
