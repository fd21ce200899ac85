//! Two-state Markov chain on `{0, 1}` with switching probability `theta`:
//! `P(Y_j = 1 | y) = (1 - y) theta + y (1 - theta)`.
//!
//! The conditional law has two atoms, so any single non-degenerate kernel
//! point already spans the zero-mean subspace and recovers the exact score.

use rand::{Rng, RngCore};

use super::{Capabilities, ParamBound, ProcessModel, TimeSeries};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinaryMarkov;

impl BinaryMarkov {
    pub fn new() -> Self {
        BinaryMarkov
    }

    pub fn prob_one(theta: f64, y_prev: f64) -> f64 {
        (1.0 - y_prev) * theta + y_prev * (1.0 - theta)
    }

    /// Conditional Fisher information `sum_j E[s_j^2 | y_{j-1}]`.
    pub fn fisher_information(&self, theta: f64, series: &TimeSeries) -> f64 {
        series
            .steps()
            .map(|(y_prev, _)| {
                let p = Self::prob_one(theta, y_prev);
                let dp = 1.0 - 2.0 * y_prev;
                dp * dp / (p * (1.0 - p))
            })
            .sum()
    }

    /// `g_t(a)` at the atom `a`, without rejecting degenerate indices.
    fn kernel_at(family: KernelFamily, t: f64, a: f64) -> KernelValue {
        match family {
            KernelFamily::CfReal => {
                let (s, c) = (t * a).sin_cos();
                KernelValue::Pair(c, s)
            }
            KernelFamily::Mgf => KernelValue::Scalar((t * a).exp()),
            KernelFamily::Laplace => KernelValue::Scalar((-t * a).exp()),
            KernelFamily::Pgf => KernelValue::Scalar(t.powf(a)),
            KernelFamily::Moment => KernelValue::Scalar(a.powi(t as i32)),
        }
    }

    fn check_index(family: KernelFamily, t: f64) -> Result<()> {
        let ok = t.is_finite()
            && match family {
                KernelFamily::Pgf => t >= 0.0,
                KernelFamily::Moment => t >= 0.0 && t.fract() == 0.0,
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfDomain { family, t })
        }
    }
}

impl ProcessModel for BinaryMarkov {
    fn name(&self) -> String {
        "binary-markov".into()
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn param_bounds(&self) -> Vec<ParamBound> {
        vec![ParamBound::open(0.0, 1.0)]
    }

    fn supported_kernels(&self) -> Vec<KernelFamily> {
        KernelFamily::ALL.to_vec()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            analytic_transform_gradient: true,
            max_moment_order: Some(u32::MAX),
            analytic_score: true,
            closed_form_quasiscore: false,
        }
    }

    fn check_observation(&self, y: f64) -> Result<()> {
        if y == 0.0 || y == 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("binary observations must be 0 or 1, got {y}")))
        }
    }

    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue> {
        Self::check_index(family, t)?;
        let p = Self::prob_one(theta[0], y_prev);
        let g0 = Self::kernel_at(family, t, 0.0);
        let g1 = Self::kernel_at(family, t, 1.0);
        Ok(g0.zip(g1, |a, b| (1.0 - p) * a + p * b))
    }

    fn transform_grad(&self, family: KernelFamily, t: f64, _theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        Self::check_index(family, t)?;
        let dp = 1.0 - 2.0 * y_prev;
        let g0 = Self::kernel_at(family, t, 0.0);
        let g1 = Self::kernel_at(family, t, 1.0);
        Ok(vec![g0.zip(g1, |a, b| dp * (b - a))])
    }

    fn moment(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<f64> {
        Ok(if r == 0 { 1.0 } else { Self::prob_one(theta[0], y_prev) })
    }

    fn moment_grad(&self, r: u32, _theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        Ok(vec![if r == 0 { 0.0 } else { 1.0 - 2.0 * y_prev }])
    }

    fn score_step(&self, theta: &[f64], y_prev: f64, y: f64) -> Result<Vec<f64>> {
        let p = Self::prob_one(theta[0], y_prev);
        let dp = 1.0 - 2.0 * y_prev;
        Ok(vec![dp * (y / p - (1.0 - y) / (1.0 - p))])
    }

    /// Fraction of switches, kept inside the open unit interval.
    fn preliminary_estimate(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let steps = series.steps();
        let n = steps.len() as f64;
        let switches = series.steps().filter(|(a, b)| a != b).count() as f64;
        Ok(vec![((switches + 0.5) / (n + 1.0)).clamp(0.01, 0.99)])
    }

    fn stationary_start(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        let p = Self::prob_one(theta[0], y_prev);
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{analytic_score, simulate, SimSpec};

    fn log_lik(theta: f64, s: &TimeSeries) -> f64 {
        s.steps()
            .map(|(yp, y)| {
                let p = BinaryMarkov::prob_one(theta, yp);
                if y == 1.0 { p.ln() } else { (1.0 - p).ln() }
            })
            .sum()
    }

    #[test]
    fn score_matches_finite_difference_of_log_likelihood() {
        let m = BinaryMarkov::new();
        let s = simulate(&m, &SimSpec::new(vec![0.3], 200, 4)).unwrap();
        for theta in [0.5, 0.2, 0.77] {
            let h = 1e-6;
            let fd = (log_lik(theta + h, &s) - log_lik(theta - h, &s)) / (2.0 * h);
            let exact = analytic_score(&m, &[theta], &s).unwrap()[0];
            assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn steps_contribute_plus_minus_two_at_half() {
        let m = BinaryMarkov::new();
        for (yp, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let s = m.score_step(&[0.5], yp, y).unwrap()[0];
            assert_eq!(s.abs(), 2.0);
        }
    }

    #[test]
    fn observations_must_be_binary() {
        let m = BinaryMarkov::new();
        assert!(m.check_observation(0.5).is_err());
        assert!(m.check_observation(1.0).is_ok());
    }
}
