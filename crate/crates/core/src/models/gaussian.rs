//! Gaussian AR(1), `Y_j = phi Y_{j-1} + sigma Z_j`, with `sigma` known.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{
    moment_derivs_from_cumulants, moments_from_cumulants, Capabilities, ParamBound, ProcessModel, TimeSeries,
};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};

const MAX_MOMENT_ORDER: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAr1 {
    sigma: f64,
}

impl GaussianAr1 {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(GaussianAr1 { sigma })
        } else {
            Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn cumulants(&self, r: u32, mean: f64) -> Vec<f64> {
        let mut k = vec![0.0; r as usize + 1];
        k[1] = mean;
        if r >= 2 {
            k[2] = self.sigma * self.sigma;
        }
        k
    }

    fn moment_index(t: f64) -> Result<u32> {
        if t >= 0.0 && t.fract() == 0.0 && t <= MAX_MOMENT_ORDER as f64 {
            Ok(t as u32)
        } else {
            Err(Error::IndexOutOfDomain { family: KernelFamily::Moment, t })
        }
    }
}

impl ProcessModel for GaussianAr1 {
    fn name(&self) -> String {
        "gaussian-ar1".into()
    }

    fn param_names(&self) -> Vec<String> {
        vec!["phi".into()]
    }

    fn param_bounds(&self) -> Vec<ParamBound> {
        vec![ParamBound::UNBOUNDED]
    }

    fn supported_kernels(&self) -> Vec<KernelFamily> {
        vec![
            KernelFamily::CfReal,
            KernelFamily::Mgf,
            KernelFamily::Laplace,
            KernelFamily::Moment,
        ]
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            analytic_transform_gradient: true,
            max_moment_order: Some(MAX_MOMENT_ORDER),
            analytic_score: true,
            closed_form_quasiscore: false,
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
        let mean = theta[0] * y_prev;
        let s2 = self.sigma * self.sigma;
        let value = match family {
            KernelFamily::Mgf => KernelValue::Scalar((mean * t + 0.5 * s2 * t * t).exp()),
            KernelFamily::Laplace => KernelValue::Scalar((-mean * t + 0.5 * s2 * t * t).exp()),
            KernelFamily::CfReal => {
                let damp = (-0.5 * s2 * t * t).exp();
                let (s, c) = (t * mean).sin_cos();
                KernelValue::Pair(damp * c, damp * s)
            }
            KernelFamily::Moment => {
                KernelValue::Scalar(self.moment(Self::moment_index(t)?, theta, y_prev)?)
            }
            KernelFamily::Pgf => {
                return Err(Error::UnsupportedKernel { model: self.name(), family })
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::TransformDiverges { t })
        }
    }

    fn transform_grad(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        let c = self.transform(family, t, theta, y_prev)?;
        let g = match (family, c) {
            (KernelFamily::Mgf, KernelValue::Scalar(v)) => KernelValue::Scalar(y_prev * t * v),
            (KernelFamily::Laplace, KernelValue::Scalar(v)) => KernelValue::Scalar(-y_prev * t * v),
            (KernelFamily::CfReal, KernelValue::Pair(re, im)) => {
                KernelValue::Pair(-t * y_prev * im, t * y_prev * re)
            }
            (KernelFamily::Moment, _) => {
                KernelValue::Scalar(self.moment_grad(Self::moment_index(t)?, theta, y_prev)?[0])
            }
            _ => unreachable!("transform validated the family"),
        };
        Ok(vec![g])
    }

    fn moment(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<f64> {
        if r > MAX_MOMENT_ORDER {
            return Err(Error::MomentsUndefined { model: self.name(), order: r });
        }
        if r == 0 {
            return Ok(1.0);
        }
        Ok(moments_from_cumulants(&self.cumulants(r, theta[0] * y_prev))[r as usize])
    }

    fn moment_grad(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        if r > MAX_MOMENT_ORDER {
            return Err(Error::MomentsUndefined { model: self.name(), order: r });
        }
        if r == 0 {
            return Ok(vec![0.0]);
        }
        let kappa = self.cumulants(r, theta[0] * y_prev);
        let mut dk = vec![0.0; r as usize + 1];
        dk[1] = y_prev;
        Ok(vec![moment_derivs_from_cumulants(&kappa, &dk)[r as usize]])
    }

    fn score_step(&self, theta: &[f64], y_prev: f64, y: f64) -> Result<Vec<f64>> {
        Ok(vec![y_prev * (y - theta[0] * y_prev) / (self.sigma * self.sigma)])
    }

    fn preliminary_estimate(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let (num, den) = series
            .steps()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x * y, b + x * x));
        if den > 0.0 {
            Ok(vec![num / den])
        } else {
            Err(Error::InvalidParams("all lagged values are zero".into()))
        }
    }

    fn stationary_start(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] * y_prev + self.sigma * z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{analytic_score, fd_transform_grad};
    use approx::assert_relative_eq;

    #[test]
    fn mgf_gradient_example() {
        let m = GaussianAr1::new(1.0).unwrap();
        let g = m.transform_grad(KernelFamily::Mgf, 1.0, &[0.0], 2.0).unwrap()[0].scalar();
        assert_relative_eq!(g, 2.0 * 0.5f64.exp(), epsilon = 1e-14);
        let fd = fd_transform_grad(&m, KernelFamily::Mgf, 1.0, &[0.0], 2.0).unwrap()[0].scalar();
        assert!((fd - 3.2974425414).abs() < 1e-6);
    }

    #[test]
    fn moment_examples() {
        let m = GaussianAr1::new(1.0).unwrap();
        assert_relative_eq!(m.moment(1, &[0.5], 2.0).unwrap(), 1.0);
        assert_relative_eq!(m.moment(2, &[0.5], 2.0).unwrap(), 2.0);
    }

    #[test]
    fn score_examples() {
        let m = GaussianAr1::new(1.0).unwrap();
        let s = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(analytic_score(&m, &[2.0], &s).unwrap()[0], 0.0);
        let s = TimeSeries::new(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(analytic_score(&m, &[0.8], &s).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let m = GaussianAr1::new(0.8).unwrap();
        for family in [KernelFamily::Mgf, KernelFamily::Laplace, KernelFamily::CfReal, KernelFamily::Moment] {
            for (t, phi, y) in [(1.0, 0.3, -1.2), (2.0, -0.4, 0.7), (3.0, 0.9, 2.0)] {
                let a = m.transform_grad(family, t, &[phi], y).unwrap();
                let f = fd_transform_grad(&m, family, t, &[phi], y).unwrap();
                for i in 0..a[0].len() {
                    assert!((a[0].get(i) - f[0].get(i)).abs() < 1e-6 * a[0].get(i).abs().max(1.0), "{family} t={t}");
                }
            }
        }
    }
}
