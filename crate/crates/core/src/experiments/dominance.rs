use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{dkw_epsilon, geometric_cdf, Empirical};

/// One-sided test of `X ≽ Geom(q)` from a sample of `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub samples: usize,
    pub geom_param: f64,
    pub confidence: f64,
    /// DKW half-width at `confidence`.
    pub band: f64,
    /// `max_k (F_n(k) − F_q(k))`, at least 0.
    pub max_excess: f64,
    /// Where the maximum excess is reached.
    pub at: u64,
    /// Empirical CDF at each distinct sample value.
    pub sample_cdf: Vec<(u64, f64)>,
    pub pass: bool,
}

/// Passes iff the empirical CDF stays below the geometric CDF plus the DKW
/// band everywhere. `X ≽ Geom(q)` means `P(X ≤ k) ≤ 1 − (1−q)^k` for all
/// `k`, so a true domination passes with probability at least `confidence`.
pub fn dominance_test(
    samples: &[u64],
    geom_param: f64,
    confidence: f64,
) -> Result<DominanceReport> {
    if samples.is_empty() {
        return Err(Error::domain("dominance test needs samples"));
    }
    if !(geom_param > 0.0 && geom_param <= 1.0) {
        return Err(Error::domain(format!(
            "geometric parameter must lie in (0, 1], got {geom_param}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let e = Empirical::new(samples);
    let band = dkw_epsilon(samples.len(), 1.0 - confidence);
    let mut max_excess = 0.0;
    let mut at = 0;
    // Between sample values the empirical CDF is flat and the geometric one
    // grows, so the excess peaks at sample values.
    let sample_cdf: Vec<(u64, f64)> = e.support().into_iter().map(|k| (k, e.cdf(k))).collect();
    let mut check = |k: u64, f: f64| {
        let ex = f - geometric_cdf(geom_param, k);
        if ex > max_excess {
            max_excess = ex;
            at = k;
        }
    };
    for &(k, f) in &sample_cdf {
        check(k, f);
    }
    Ok(DominanceReport {
        samples: samples.len(),
        geom_param,
        confidence,
        band,
        max_excess,
        at,
        sample_cdf,
        pass: max_excess <= band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::stats::sample_geometric;

    fn geom(q: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = StreamKey::new(seed).rng();
        (0..n)
            .map(|_| sample_geometric(q, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn all_ones_against_one() {
        let r = dominance_test(&[1; 50], 1.0, 0.99).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_excess, 0.0);
    }

    #[test]
    fn direction_is_right() {
        assert!(
            dominance_test(&geom(0.5, 10_000, 1), 0.9, 0.99)
                .unwrap()
                .pass
        );
        assert!(
            !dominance_test(&geom(0.9, 100_000, 2), 0.5, 0.99)
                .unwrap()
                .pass
        );
    }
}
