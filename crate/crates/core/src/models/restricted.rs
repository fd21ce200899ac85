use rand::RngCore;

use super::{Capabilities, ParamBound, ProcessModel};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};

/// A model with some parameters held fixed; the remaining ones, in their
/// original order, form the free parameter vector.
#[derive(Debug, Clone)]
pub struct Restricted<M> {
    inner: M,
    template: Vec<f64>,
    free: Vec<usize>,
}

impl<M: ProcessModel> Restricted<M> {
    /// `fixed` lists `(parameter index, value)` pairs.
    pub fn new(inner: M, fixed: &[(usize, f64)]) -> Result<Self> {
        let p = inner.param_dim();
        let mut template = vec![f64::NAN; p];
        for &(i, v) in fixed {
            if i >= p {
                return Err(Error::InvalidParams(format!("parameter index {i} out of range")));
            }
            template[i] = v;
        }
        let free: Vec<usize> = (0..p).filter(|&i| template[i].is_nan()).collect();
        if free.is_empty() {
            return Err(Error::InvalidParams("at least one parameter must remain free".into()));
        }
        Ok(Restricted { inner, template, free })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    /// Embeds free parameters into the full parameter vector.
    pub fn expand(&self, theta: &[f64]) -> Vec<f64> {
        let mut full = self.template.clone();
        for (&i, &v) in self.free.iter().zip(theta) {
            full[i] = v;
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() == self.free.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.free.len(), got: theta.len() })
        }
    }
}

impl<M: ProcessModel> ProcessModel for Restricted<M> {
    fn name(&self) -> String {
        let names = self.inner.param_names();
        let fixed: Vec<String> = (0..names.len())
            .filter(|i| !self.free.contains(i))
            .map(|i| format!("{}={}", names[i], self.template[i]))
            .collect();
        format!("{}[{}]", self.inner.name(), fixed.join(","))
    }

    fn param_names(&self) -> Vec<String> {
        let names = self.inner.param_names();
        self.free.iter().map(|&i| names[i].clone()).collect()
    }

    fn param_bounds(&self) -> Vec<ParamBound> {
        let bounds = self.inner.param_bounds();
        self.free.iter().map(|&i| bounds[i]).collect()
    }

    fn supported_kernels(&self) -> Vec<KernelFamily> {
        self.inner.supported_kernels()
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        self.inner.check_params(&self.expand(theta))
    }

    fn check_simulation_params(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        self.inner.check_simulation_params(&self.expand(theta))
    }

    fn check_observation(&self, y: f64) -> Result<()> {
        self.inner.check_observation(y)
    }

    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue> {
        self.inner.transform(family, t, &self.expand(theta), y_prev)
    }

    fn transform_grad(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        let full = self.inner.transform_grad(family, t, &self.expand(theta), y_prev)?;
        Ok(self.free.iter().map(|&i| full[i]).collect())
    }

    fn moment(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<f64> {
        self.inner.moment(r, &self.expand(theta), y_prev)
    }

    fn moment_grad(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        let full = self.inner.moment_grad(r, &self.expand(theta), y_prev)?;
        Ok(self.restrict(&full))
    }

    fn score_step(&self, theta: &[f64], y_prev: f64, y: f64) -> Result<Vec<f64>> {
        let full = self.inner.score_step(&self.expand(theta), y_prev, y)?;
        Ok(self.restrict(&full))
    }

    fn preliminary_estimate(&self, series: &super::TimeSeries) -> Result<Vec<f64>> {
        let full = self.inner.preliminary_estimate(series)?;
        Ok(self.restrict(&full))
    }

    fn stationary_start(&self, theta: &[f64]) -> f64 {
        self.inner.stationary_start(&self.expand(theta))
    }

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        self.inner.sample_next(&self.expand(theta), y_prev, rng)
    }
}
