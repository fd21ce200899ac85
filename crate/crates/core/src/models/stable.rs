//! AR(1) with symmetric alpha-stable innovations, `c(t) = exp(i t phi y - |t|^alpha)`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use serde::Serialize;

use super::{Capabilities, ParamBound, ProcessModel, TimeSeries};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};
use crate::selection::maximize_scalar;

/// `Y_j = phi Y_{j-1} + e_j` with `E exp(i t e) = exp(-|t|^alpha)`; the
/// stability index is fixed, `phi` is the only free parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableAr1 {
    alpha: f64,
}

impl StableAr1 {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 2.0 {
            Ok(StableAr1 { alpha })
        } else {
            Err(Error::InvalidParams(format!("stability index {alpha} must lie in (0, 2]")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Chambers–Mallows–Stuck draw from the symmetric stable law with
    /// characteristic function `exp(-|t|^alpha)`.
    pub fn sample_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        let v = FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
        if a == 1.0 {
            return v.tan();
        }
        let w: f64 = Exp1.sample(rng);
        (a * v).sin() / v.cos().powf(1.0 / a) * (((1.0 - a) * v).cos() / w).powf((1.0 - a) / a)
    }
}

impl ProcessModel for StableAr1 {
    fn name(&self) -> String {
        "stable-ar1".into()
    }

    fn param_names(&self) -> Vec<String> {
        vec!["phi".into()]
    }

    fn param_bounds(&self) -> Vec<ParamBound> {
        vec![ParamBound::UNBOUNDED]
    }

    fn supported_kernels(&self) -> Vec<KernelFamily> {
        vec![KernelFamily::CfReal]
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            analytic_transform_gradient: true,
            max_moment_order: None,
            analytic_score: false,
            closed_form_quasiscore: true,
        }
    }

    fn check_simulation_params(&self, theta: &[f64]) -> Result<()> {
        self.check_params(theta)?;
        if theta[0].abs() < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("|phi| = {} must be < 1", theta[0].abs())))
        }
    }

    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue> {
        if family != KernelFamily::CfReal {
            return Err(Error::UnsupportedKernel { model: self.name(), family });
        }
        let damp = (-t.abs().powf(self.alpha)).exp();
        let (s, c) = (t * theta[0] * y_prev).sin_cos();
        Ok(KernelValue::Pair(damp * c, damp * s))
    }

    fn transform_grad(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        if family != KernelFamily::CfReal {
            return Err(Error::UnsupportedKernel { model: self.name(), family });
        }
        let damp = (-t.abs().powf(self.alpha)).exp();
        let (s, c) = (t * theta[0] * y_prev).sin_cos();
        let k = t * y_prev * damp;
        Ok(vec![KernelValue::Pair(-k * s, k * c)])
    }

    /// Root of the one-point CF quasi-score at `t = 1`, started from the lag-1
    /// autocorrelation.
    /// Least absolute deviations through the origin, i.e. the median of
    /// `y_j / y_{j-1}` weighted by `|y_{j-1}|`. The quasi-score oscillates in
    /// `phi` with period about `2 pi / (t |y_{j-1}|)`, so the start must be
    /// accurate on the scale of the largest lagged values; least squares is
    /// thrown off by innovation spikes that follow them.
    fn preliminary_estimate(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let mut ratios: Vec<(f64, f64)> =
            series.steps().filter(|(x, _)| *x != 0.0).map(|(x, y)| (y / x, x.abs())).collect();
        if ratios.is_empty() {
            return Err(Error::InvalidParams("all lagged values are zero".into()));
        }
        ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = 0.5 * ratios.iter().map(|r| r.1).sum::<f64>();
        let mut acc = 0.0;
        let mut median = ratios[ratios.len() - 1].0;
        for &(q, w) in &ratios {
            acc += w;
            if acc >= half {
                median = q;
                break;
            }
        }
        Ok(vec![median.clamp(-0.99, 0.99)])
    }

    fn stationary_start(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        theta[0] * y_prev + self.sample_innovation(rng)
    }
}

/// Information per unit of `sum y_{j-1}^2` carried by the one-point CF
/// quasi-score, `2t^2 exp(2^a|t|^a) / (exp(2|t|^a) (exp(2^a|t|^a) - 1))`.
/// Even in `t`; at `t = 0` returns the limit (`1/2` for `alpha = 2`, else 0).
pub fn stable_information_factor(t: f64, alpha: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return if alpha == 2.0 { 0.5 } else { 0.0 };
    }
    let u = t.powf(alpha);
    let x = (2.0 * t).powf(alpha);
    2.0 * t * t * (-2.0 * u).exp() / -(-x).exp_m1()
}

/// Closed form of the one-point CF quasi-score of the stable AR(1) model,
/// written with the projection sign convention used throughout the crate:
/// `coef(t) * sum y_{j-1} sin(t (y_j - phi y_{j-1}))`.
pub fn stable_closed_form_quasiscore(phi: f64, alpha: f64, t: f64, series: &TimeSeries) -> f64 {
    let ta = t.abs();
    let u = ta.powf(alpha);
    let x = (2.0 * ta).powf(alpha);
    let coef = 2.0 * t * (-u).exp() / -(-x).exp_m1();
    let sum: f64 = series
        .steps()
        .map(|(y_prev, y)| y_prev * (t * (y - phi * y_prev)).sin())
        .sum();
    coef * sum
}

/// Fisher information per observation for the location of an i.i.d.
/// symmetric stable law with unit scale, at selected indices.
pub const STABLE_IID_FISHER: [(f64, f64); 8] = [
    (2.0, 0.500),
    (1.9, 0.473),
    (1.7, 0.442),
    (1.5, 0.428),
    (1.3, 0.431),
    (1.1, 0.463),
    (1.0, 0.500),
    (0.8, 0.678),
];

pub fn stable_iid_fisher(alpha: f64) -> Option<f64> {
    STABLE_IID_FISHER.iter().find(|(a, _)| (a - alpha).abs() < 1e-12).map(|&(_, f)| f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub alpha: f64,
    /// Optimal point; `0` when the supremum is the `t -> 0` limit.
    pub t_star: f64,
    pub factor: f64,
    pub fisher: f64,
    pub efficiency: f64,
    pub limit: bool,
}

/// Maximizes the one-point information factor over `(1e-3, 5)` and compares
/// it with the i.i.d. Fisher information.
pub fn stable_efficiency_row(alpha: f64, fisher: f64) -> EfficiencyRow {
    let (t_star, factor, limit) =
        match maximize_scalar(|t| stable_information_factor(t, alpha), KernelFamily::CfReal.default_window(), 200) {
            Ok(m) => (m.t, m.info, false),
            Err(Error::NoInteriorMaximum { .. }) => (0.0, stable_information_factor(0.0, alpha), true),
            Err(e) => unreachable!("factor is finite on the window: {e}"),
        };
    EfficiencyRow { alpha, t_star, factor, fisher, efficiency: factor / fisher, limit }
}

pub fn stable_efficiency_table() -> Vec<EfficiencyRow> {
    STABLE_IID_FISHER.iter().map(|&(a, f)| stable_efficiency_row(a, f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, stream_rng, SimSpec};
    use approx::assert_relative_eq;

    fn literal_factor(t: f64, a: f64) -> f64 {
        let e = (2f64.powf(a) * t.powf(a)).exp();
        2.0 * t * t * e / ((2.0 * t.powf(a)).exp() * (e - 1.0))
    }

    #[test]
    fn cauchy_transform_at_phi_zero() {
        let m = StableAr1::new(1.0).unwrap();
        for y in [-3.0, 0.0, 2.5] {
            let (c, s) = m.transform(KernelFamily::CfReal, 1.0, &[0.0], y).unwrap().pair();
            assert_relative_eq!(c, (-1.0f64).exp(), epsilon = 1e-15);
            assert_eq!(s, 0.0);
            let g = m.transform_grad(KernelFamily::CfReal, 1.0, &[0.0], y).unwrap();
            assert_eq!(g[0].get(0), 0.0);
        }
    }

    #[test]
    fn only_cf_is_supported() {
        let m = StableAr1::new(1.5).unwrap();
        assert!(m.transform(KernelFamily::Mgf, 0.5, &[0.1], 1.0).is_err());
        assert!(matches!(
            m.moment(1, &[0.1], 1.0),
            Err(Error::MomentsUndefined { .. })
        ));
        assert!(StableAr1::new(2.5).is_err());
        assert!(StableAr1::new(0.0).is_err());
    }

    #[test]
    fn factor_matches_literal_expression() {
        for (t, a) in [(0.5384, 1.5), (0.7968, 1.0), (0.3, 0.8), (1.7, 1.9)] {
            assert_relative_eq!(stable_information_factor(t, a), literal_factor(t, a), max_relative = 1e-13);
        }
    }

    #[test]
    fn factor_table_values() {
        assert!((stable_information_factor(0.5384, 1.5) - 0.391).abs() < 1e-3);
        assert!((stable_information_factor(0.7968, 1.0) - 0.324).abs() < 1e-3);
        assert!((stable_information_factor(1e-6, 2.0) - 0.5).abs() < 1e-9);
        assert_eq!(stable_information_factor(0.0, 2.0), 0.5);
        assert_eq!(stable_information_factor(0.0, 1.3), 0.0);
    }

    #[test]
    fn factor_small_t_expansion() {
        let a: f64 = 1.3;
        for t in [1e-2f64, 1e-3] {
            let lead = 2f64.powf(1.0 - a) * t.powf(2.0 - a)
                + 2f64.powf(1.0 - a) * (2f64.powf(a - 1.0) - 2.0) * t * t;
            let rem = (stable_information_factor(t, a) - lead).abs();
            assert!(rem / (t * t) < 0.05, "t = {t}: remainder {rem}");
        }
    }

    #[test]
    fn gaussian_limit_has_variance_two() {
        let m = StableAr1::new(2.0).unwrap();
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample_innovation(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of the sample variance of N(0, 2) is 2 * 4 / n.
        let se = (8.0 / n as f64).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "var = {var}");
    }

    #[test]
    fn marginal_variance_at_alpha_two() {
        let m = StableAr1::new(2.0).unwrap();
        let phi = 0.5;
        let s = simulate(&m, &SimSpec::new(vec![phi], 100_000, 3)).unwrap();
        let v = s.values();
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let target = 2.0 / (1.0 - phi * phi);
        assert!((var / target - 1.0).abs() < 0.05, "var = {var}, target = {target}");
    }

    #[test]
    fn empirical_cf_matches_transform() {
        // Lag-conditioned check: residuals y_j - phi y_{j-1} are the innovations,
        // so the empirical CF of cos/sin(t y_j) given y_{j-1} in a narrow bin.
        let m = StableAr1::new(1.2).unwrap();
        let phi = 0.4;
        let s = simulate(&m, &SimSpec::new(vec![phi], 400_000, 5)).unwrap();
        let t = 0.8;
        let (lo, hi) = (0.9, 1.1);
        let mut cos_dev = Vec::new();
        let mut sin_dev = Vec::new();
        for (yp, y) in s.steps().filter(|(yp, _)| *yp > lo && *yp < hi) {
            let (c, sn) = m.transform(KernelFamily::CfReal, t, &[phi], yp).unwrap().pair();
            cos_dev.push((t * y).cos() - c);
            sin_dev.push((t * y).sin() - sn);
        }
        for dev in [cos_dev, sin_dev] {
            let n = dev.len() as f64;
            let mean = dev.iter().sum::<f64>() / n;
            let sd = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean deviation {mean}");
        }
    }

    #[test]
    fn closed_form_score_brackets_true_phi() {
        let m = StableAr1::new(1.5).unwrap();
        let s = simulate(&m, &SimSpec::new(vec![0.6], 5_000, 21)).unwrap();
        let t = 0.5384;
        let below = stable_closed_form_quasiscore(0.5, 1.5, t, &s);
        let above = stable_closed_form_quasiscore(0.7, 1.5, t, &s);
        assert!(below > 0.0 && above < 0.0, "{below} {above}");
    }

    #[test]
    fn efficiency_table_rows() {
        let expected = [
            (2.0, 0.500, 0.0, 1.0),
            (1.9, 0.469, 0.3852, 0.991),
            (1.7, 0.428, 0.4767, 0.968),
            (1.5, 0.391, 0.5384, 0.913),
            (1.3, 0.358, 0.6087, 0.831),
            (1.1, 0.332, 0.7148, 0.717),
            (1.0, 0.324, 0.7968, 0.648),
            (0.8, 0.330, 1.1022, 0.487),
        ];
        for (row, (a, f, t, e)) in stable_efficiency_table().iter().zip(expected) {
            assert_eq!(row.alpha, a);
            assert!((row.factor - f).abs() < 1e-3, "{row:?}");
            assert!((row.t_star - t).abs() < 1e-3, "{row:?}");
            assert!((row.efficiency - e).abs() < 3e-3, "{row:?}");
            assert_eq!(row.limit, a == 2.0);
        }
    }
}
