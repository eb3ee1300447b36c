//! Monte Carlo checks of the probabilistic lemmas: compound geometric sums,
//! exponential moments of dependent Bernoulli sums, and the law of the
//! number of loops of the next colour.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulation::ProcedureChoice;
use crate::error::{Error, Result};
use crate::hierarchy::DormitoryHierarchy;
use crate::loop_model::{stabilize_recursive, IndependentStacks, LoopModelState, NoObserver};
use crate::rng::{tag, KeyedRng, StreamKey};
use crate::stats::{
    geometric_cdf, ks_one_sample, ks_two_sample, mean_se, sample_geometric, KsReport, MeanEstimate,
};

/// Parameter of `1 + Σ_{n ≤ N}(X_n − 1)` for `N ~ Geom(a)`, `X ~ Geom(b)`.
pub fn sum_geometrics_parameter(a: f64, b: f64) -> f64 {
    a * b / (1.0 - b + a * b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumGeometricsReport {
    pub a: f64,
    pub b: f64,
    pub parameter: f64,
    pub ks: KsReport,
}

pub fn verify_sum_geometrics(
    a: f64,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<SumGeometricsReport> {
    for (name, x) in [("a", a), ("b", b)] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0, 1], got {x}")));
        }
    }
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let mut rng = StreamKey::new(seed).child(tag::SAMPLE).rng();
    let mut xs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let n = sample_geometric(a, &mut rng)?;
        let mut s = 1u64;
        for _ in 0..n {
            s += sample_geometric(b, &mut rng)? - 1;
        }
        xs.push(s);
    }
    let q = sum_geometrics_parameter(a, b);
    Ok(SumGeometricsReport {
        a,
        b,
        parameter: q,
        ks: ks_one_sample(&xs, |k| geometric_cdf(q, k)),
    })
}

/// A coupling of `n` Bernoulli(`p`) variables.
pub trait JointSampler {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sample(&mut self, rng: &mut KeyedRng, out: &mut [bool]);
}

/// All variables equal.
#[derive(Clone, Copy, Debug)]
pub struct Comonotone {
    pub p: f64,
    pub n: usize,
}

impl JointSampler for Comonotone {
    fn len(&self) -> usize {
        self.n
    }
    fn sample(&mut self, rng: &mut KeyedRng, out: &mut [bool]) {
        let x = rng.random_bool(self.p);
        out.fill(x);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Independent {
    pub p: f64,
    pub n: usize,
}

impl JointSampler for Independent {
    fn len(&self) -> usize {
        self.n
    }
    fn sample(&mut self, rng: &mut KeyedRng, out: &mut [bool]) {
        for x in out {
            *x = rng.random_bool(self.p);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBoundReport {
    pub p: f64,
    pub c: f64,
    pub n: usize,
    /// Estimate of `E[exp(−c Σ X_i)]`.
    pub estimate: MeanEstimate,
    /// `1 − p + p e^{−cn}`.
    pub bound: f64,
    pub marginals: Vec<f64>,
    /// `estimate ≤ bound + 3σ`.
    pub holds: bool,
    /// `(estimate − bound) / σ`.
    pub z_score: f64,
}

/// Estimates `E[exp(−c Σ X_i)]` under `sampler` and compares it with
/// `1 − p + p e^{−cn}`. Fails if some marginal frequency is more than 4σ
/// away from `p`.
pub fn verify_bernoulli_bound(
    sampler: &mut dyn JointSampler,
    p: f64,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<BernoulliBoundReport> {
    let n = sampler.len();
    if n == 0 || samples < 2 {
        return Err(Error::domain("need at least one variable and two samples"));
    }
    let mut rng = StreamKey::new(seed).child(tag::SAMPLE).rng();
    let mut hits = vec![0u64; n];
    let mut out = vec![false; n];
    // exp(−c k) for k = 0..=n.
    let table: Vec<f64> = (0..=n).map(|k| (-c * k as f64).exp()).collect();
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        sampler.sample(&mut rng, &mut out);
        let mut k = 0;
        for (h, &x) in hits.iter_mut().zip(&out) {
            *h += x as u64;
            k += x as usize;
        }
        values.push(table[k]);
    }
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    let marginals: Vec<f64> = hits.iter().map(|&h| h as f64 / samples as f64).collect();
    if let Some((i, m)) = marginals
        .iter()
        .enumerate()
        .find(|(_, &m)| (m - p).abs() > 4.0 * sigma)
    {
        return Err(Error::InvalidSampler(format!(
            "marginal {i} has frequency {m:.5}, expected {p} within {:.2e}",
            4.0 * sigma
        )));
    }
    let estimate = mean_se(&values);
    let bound = 1.0 - p + p * (-c * n as f64).exp();
    let z_score = (estimate.mean - bound) / estimate.std_error;
    Ok(BernoulliBoundReport {
        p,
        c,
        n,
        estimate,
        bound,
        marginals,
        holds: estimate.mean <= bound + 3.0 * estimate.std_error,
        z_score,
    })
}

/// `(λ + 1 − 2^{−j}) / (λ + 1 − 2^{−(j+1)})`.
pub fn next_colour_parameter(lambda: f64, j: u32) -> f64 {
    (lambda + 1.0 - 0.5f64.powi(j as i32)) / (lambda + 1.0 - 0.5f64.powi(j as i32 + 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextColourReport {
    pub lambda: f64,
    pub level: usize,
    pub runs: usize,
    pub parameter: f64,
    /// Mean of the simulated `L(C, j)`.
    pub simulated: MeanEstimate,
    /// Mean of `Σ_{i ≤ T}(X_i − 1)` with `T` taken from the same runs.
    pub resampled: MeanEstimate,
    pub ks: KsReport,
}

/// Stabilizes cluster `c` of level `j` from the fully active configuration
/// `runs` times, recording `L(C, j)` and `T = S + L(C,0) + … + L(C,j−1)`,
/// then compares `L(C, j)` with `Σ_{i ≤ T}(X_i − 1)` built from fresh
/// geometric variables by a two-sample KS test.
#[allow(clippy::too_many_arguments)]
pub fn verify_next_colour(
    hier: &DormitoryHierarchy,
    j: usize,
    c: usize,
    procedure: ProcedureChoice,
    lambda: f64,
    runs: usize,
    seed: u64,
    budget: u64,
) -> Result<NextColourReport> {
    let root = StreamKey::new(seed);
    let pairs: Vec<(u64, u64)> = (0..runs)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64)> {
            let mut source = IndependentStacks::new(
                hier.geometry().clone(),
                lambda,
                root.child(tag::CELL).at(i as u64),
            );
            let mut state = LoopModelState::fully_active(hier);
            let mut proc = procedure;
            let rec = stabilize_recursive(
                &mut state,
                hier,
                &mut source,
                &mut proc,
                &mut NoObserver,
                j,
                c,
                budget,
            )?;
            let t = rec.sleeps + (0..j).map(|k| rec.loops_of_colour(k)).sum::<u64>();
            Ok((rec.loops_of_colour(j), t))
        })
        .collect::<Result<_>>()?;
    let q = next_colour_parameter(lambda, j as u32);
    let mut rng = root.child(tag::SAMPLE).rng();
    let mut simulated = Vec::with_capacity(runs);
    let mut resampled = Vec::with_capacity(runs);
    for &(l, t) in &pairs {
        simulated.push(l);
        let mut s = 0;
        for _ in 0..t {
            s += sample_geometric(q, &mut rng)? - 1;
        }
        resampled.push(s);
    }
    let as_f = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    Ok(NextColourReport {
        lambda,
        level: j,
        runs,
        parameter: q,
        simulated: mean_se(&as_f(&simulated)),
        resampled: mean_se(&as_f(&resampled)),
        ks: ks_two_sample(&simulated, &resampled),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_arithmetic() {
        assert!((sum_geometrics_parameter(0.3, 0.6) - 0.18 / 0.58).abs() < 1e-15);
        assert_eq!(sum_geometrics_parameter(1.0, 0.4), 0.4);
        assert_eq!(sum_geometrics_parameter(0.4, 1.0), 1.0);
        assert!((next_colour_parameter(1.0, 1) - 6.0 / 7.0).abs() < 1e-15);
        assert!((next_colour_parameter(1.0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_sum_cases() {
        let r = verify_sum_geometrics(0.5, 1.0, 1000, 1).unwrap();
        assert_eq!(r.ks.distance, 0.0);
        let r = verify_sum_geometrics(1.0, 0.5, 20_000, 2).unwrap();
        assert!(r.ks.distance < 0.02);
    }

    #[test]
    fn single_variable_bound_is_exact() {
        let mut s = Independent { p: 0.4, n: 1 };
        let r = verify_bernoulli_bound(&mut s, 0.4, 1.0, 100_000, 5).unwrap();
        assert!(r.z_score.abs() < 4.0, "{r:?}");
    }

    struct Broken;
    impl JointSampler for Broken {
        fn len(&self) -> usize {
            2
        }
        fn sample(&mut self, _: &mut KeyedRng, out: &mut [bool]) {
            out.fill(true);
        }
    }

    #[test]
    fn wrong_marginals_are_rejected() {
        assert!(matches!(
            verify_bernoulli_bound(&mut Broken, 0.3, 1.0, 1000, 0),
            Err(Error::InvalidSampler(_))
        ));
    }
}
