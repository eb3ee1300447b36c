//! Numerical checks of the lemmas behind the construction, regime
//! parameterizations, stochastic-dominance tests and Monte Carlo sweeps.

mod dominance;
mod lemmas;
mod regime;
mod simulation;

pub use dominance::{dominance_test, DominanceReport};
pub use lemmas::{
    next_colour_parameter, sum_geometrics_parameter, verify_bernoulli_bound, verify_next_colour,
    verify_sum_geometrics, BernoulliBoundReport, Comonotone, Independent, JointSampler,
    NextColourReport, SumGeometricsReport,
};
pub use regime::{
    check_induction_condition, metastability_alpha, metastability_condition, regime_params,
    InductionRow, Regime, RegimeParams, LOW_LAMBDA_EXPONENT,
};
pub use simulation::{
    activity_sweep, metastability_trace, scaling_fit, singleton_loop_counts, square_cluster,
    ProcedureChoice, ScalingPoint, ScalingReport, SweepCell, SweepResult, SweepRun, TraceSummary,
};

use crate::error::{Error, Result};

/// Binary entropy `ψ(μ) = −μ ln μ − (1−μ) ln(1−μ)`, with `ψ(0) = ψ(1) = 0`.
pub fn psi(mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("ψ is defined on [0, 1], got {mu}")));
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.ln() };
    Ok(term(mu) + term(1.0 - mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_values() {
        assert!((psi(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((psi(0.1).unwrap() - 0.325_082_973_391_448_2).abs() < 1e-12);
        assert_eq!(psi(0.0).unwrap(), 0.0);
        assert_eq!(psi(1.0).unwrap(), 0.0);
        assert!(psi(1.5).is_err());
        assert!(psi(-0.1).is_err());
        for k in 1..100 {
            let m = k as f64 / 100.0;
            assert!((psi(m).unwrap() - psi(1.0 - m).unwrap()).abs() < 1e-12);
            assert!(psi(m).unwrap() <= std::f64::consts::LN_2 + 1e-12);
        }
    }
}
