//! First-order gamma autoregression.
//!
//! `Y_j = sum_{i <= N} E_i + e_j` with `N ~ Poisson(lambda y_{j-1})`,
//! `E_i ~ Exp(rate alpha)` and `e_j ~ Gamma(shape nu, rate alpha)`, which gives
//! the conditional Laplace transform
//! `(alpha / (alpha + s))^nu exp(-lambda s y_{j-1} / (alpha + s))`, `s > -alpha`.
//!
//! Parameters are ordered `(lambda, alpha, nu)`.

use rand::RngCore;
use rand_distr::{Distribution, Gamma, Poisson};

use super::{
    moment_derivs_from_cumulants, moments_from_cumulants, Capabilities, ParamBound, ProcessModel,
    TimeSeries,
};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};

pub const MAX_MOMENT_ORDER: u32 = 16;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GammaAr1;

impl GammaAr1 {
    pub fn new() -> Self {
        GammaAr1
    }

    /// Conditional cumulants `kappa_1..=kappa_r` (index 0 unused):
    /// `kappa_r = (r-1)! (nu + r lambda y) / alpha^r`.
    pub fn cumulants(&self, r: u32, theta: &[f64], y_prev: f64) -> Vec<f64> {
        let (lambda, alpha, nu) = (theta[0], theta[1], theta[2]);
        let mut kappa = vec![0.0; r as usize + 1];
        let mut fact = 1.0;
        for k in 1..=r as usize {
            kappa[k] = fact * (nu + k as f64 * lambda * y_prev) / alpha.powi(k as i32);
            fact *= k as f64;
        }
        kappa
    }

    fn cumulant_grads(&self, r: u32, theta: &[f64], y_prev: f64) -> [Vec<f64>; 3] {
        let alpha = theta[1];
        let kappa = self.cumulants(r, theta, y_prev);
        let mut d_lambda = vec![0.0; r as usize + 1];
        let mut d_alpha = vec![0.0; r as usize + 1];
        let mut d_nu = vec![0.0; r as usize + 1];
        let mut fact = 1.0;
        for k in 1..=r as usize {
            let scale = fact / alpha.powi(k as i32);
            d_lambda[k] = scale * k as f64 * y_prev;
            d_nu[k] = scale;
            d_alpha[k] = -(k as f64) * kappa[k] / alpha;
            fact *= k as f64;
        }
        [d_lambda, d_alpha, d_nu]
    }

    /// Laplace transform at `s` and its gradient in `(lambda, alpha, nu)`.
    fn laplace(&self, s: f64, theta: &[f64], y_prev: f64) -> Result<(f64, [f64; 3])> {
        let (lambda, alpha, nu) = (theta[0], theta[1], theta[2]);
        let a_s = alpha + s;
        if a_s <= 0.0 || !a_s.is_finite() {
            return Err(Error::TransformDiverges { t: s });
        }
        let log_ratio = (alpha / a_s).ln();
        let value = (nu * log_ratio - lambda * s * y_prev / a_s).exp();
        let grad = [
            -s * y_prev / a_s * value,
            (nu * (1.0 / alpha - 1.0 / a_s) + lambda * s * y_prev / (a_s * a_s)) * value,
            log_ratio * value,
        ];
        Ok((value, grad))
    }

    fn moment_index(family: KernelFamily, t: f64) -> Result<u32> {
        if t >= 0.0 && t.fract() == 0.0 && t <= MAX_MOMENT_ORDER as f64 {
            Ok(t as u32)
        } else {
            Err(Error::IndexOutOfDomain { family, t })
        }
    }
}

impl ProcessModel for GammaAr1 {
    fn name(&self) -> String {
        "gar1".into()
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into(), "alpha".into(), "nu".into()]
    }

    fn param_bounds(&self) -> Vec<ParamBound> {
        vec![
            ParamBound::at_least(0.0),
            ParamBound::open(0.0, f64::INFINITY),
            ParamBound::open(0.0, f64::INFINITY),
        ]
    }

    fn supported_kernels(&self) -> Vec<KernelFamily> {
        vec![KernelFamily::Laplace, KernelFamily::Mgf, KernelFamily::Moment]
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            analytic_transform_gradient: true,
            max_moment_order: Some(MAX_MOMENT_ORDER),
            analytic_score: false,
            closed_form_quasiscore: false,
        }
    }

    fn check_simulation_params(&self, theta: &[f64]) -> Result<()> {
        self.check_params(theta)?;
        if theta[0] < theta[1] {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "stationarity requires lambda < alpha (lambda = {}, alpha = {})",
                theta[0], theta[1]
            )))
        }
    }

    fn check_observation(&self, y: f64) -> Result<()> {
        if y.is_finite() && y >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("gamma AR(1) observations must be >= 0, got {y}")))
        }
    }

    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue> {
        match family {
            KernelFamily::Laplace => Ok(KernelValue::Scalar(self.laplace(t, theta, y_prev)?.0)),
            KernelFamily::Mgf => Ok(KernelValue::Scalar(self.laplace(-t, theta, y_prev)?.0)),
            KernelFamily::Moment => {
                let r = Self::moment_index(family, t)?;
                Ok(KernelValue::Scalar(self.moment(r, theta, y_prev)?))
            }
            _ => Err(Error::UnsupportedKernel { model: self.name(), family }),
        }
    }

    fn transform_grad(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        let grad = match family {
            KernelFamily::Laplace => self.laplace(t, theta, y_prev)?.1.to_vec(),
            KernelFamily::Mgf => self.laplace(-t, theta, y_prev)?.1.to_vec(),
            KernelFamily::Moment => {
                let r = Self::moment_index(family, t)?;
                self.moment_grad(r, theta, y_prev)?
            }
            _ => return Err(Error::UnsupportedKernel { model: self.name(), family }),
        };
        Ok(grad.into_iter().map(KernelValue::Scalar).collect())
    }

    fn moment(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<f64> {
        if r > MAX_MOMENT_ORDER {
            return Err(Error::MomentsUndefined { model: self.name(), order: r });
        }
        if r == 0 {
            return Ok(1.0);
        }
        Ok(moments_from_cumulants(&self.cumulants(r, theta, y_prev))[r as usize])
    }

    fn moment_grad(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        if r > MAX_MOMENT_ORDER {
            return Err(Error::MomentsUndefined { model: self.name(), order: r });
        }
        if r == 0 {
            return Ok(vec![0.0; 3]);
        }
        let kappa = self.cumulants(r, theta, y_prev);
        Ok(self
            .cumulant_grads(r, theta, y_prev)
            .iter()
            .map(|dk| moment_derivs_from_cumulants(&kappa, dk)[r as usize])
            .collect())
    }

    /// Method of moments on the stationary law `Gamma(nu, rate alpha - lambda)`
    /// with lag-1 autocorrelation `lambda / alpha`.
    fn preliminary_estimate(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let (rho, mean, var) = super::lag1_summary(series);
        if !(mean > 0.0 && var > 0.0) {
            return Err(Error::InvalidParams("series has no positive spread".into()));
        }
        let rho = rho.clamp(0.0, 0.99);
        let alpha = mean / (var * (1.0 - rho));
        Ok(vec![rho * alpha, alpha, mean * alpha * (1.0 - rho)])
    }

    fn stationary_start(&self, theta: &[f64]) -> f64 {
        theta[2] / (theta[1] - theta[0])
    }

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        let (lambda, alpha, nu) = (theta[0], theta[1], theta[2]);
        let scale = 1.0 / alpha;
        let mean_count = lambda * y_prev;
        let count = if mean_count > 0.0 {
            Poisson::new(mean_count).expect("positive Poisson mean").sample(rng)
        } else {
            0.0
        };
        let thinned = if count > 0.0 {
            Gamma::new(count, scale).expect("valid gamma").sample(rng)
        } else {
            0.0
        };
        thinned + Gamma::new(nu, scale).expect("valid gamma").sample(rng)
    }
}
