//! Process models specified through conditional integral transforms.
//!
//! A model supplies `c(t) = E[g_t(Y_j) | Y_{j-1}]` for the kernel families it
//! supports, the parameter gradient of that transform, conditional moments when
//! they exist, and a one-step simulator. Everything is Markov of order one.

mod binary;
mod gamma;
mod gaussian;
mod restricted;
mod stable;

pub use binary::BinaryMarkov;
pub use gamma::GammaAr1;
pub use gaussian::GaussianAr1;
pub use restricted::Restricted;
pub use stable::{
    stable_closed_form_quasiscore, stable_efficiency_row, stable_efficiency_table, stable_iid_fisher,
    stable_information_factor, EfficiencyRow, StableAr1, STABLE_IID_FISHER,
};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelValue};

/// Box constraint on a single parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBound {
    pub lower: f64,
    pub upper: f64,
    /// Whether `lower` itself is admissible.
    pub closed_lower: bool,
}

impl ParamBound {
    pub const UNBOUNDED: ParamBound = ParamBound {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        closed_lower: false,
    };

    pub fn open(lower: f64, upper: f64) -> Self {
        ParamBound { lower, upper, closed_lower: false }
    }

    pub fn at_least(lower: f64) -> Self {
        ParamBound { lower, upper: f64::INFINITY, closed_lower: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite()
            && x < self.upper
            && (x > self.lower || (self.closed_lower && x == self.lower))
    }

    /// Nearest admissible point, pulled slightly inside open ends.
    pub fn project(&self, x: f64) -> f64 {
        let margin = |b: f64| 1e-8 * b.abs().max(1.0);
        let lo = if self.closed_lower { self.lower } else { self.lower + margin(self.lower) };
        let hi = self.upper - margin(self.upper);
        if x < lo {
            lo
        } else if x > hi {
            hi
        } else {
            x
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub analytic_transform_gradient: bool,
    /// Highest conditional moment order available, if any.
    pub max_moment_order: Option<u32>,
    pub analytic_score: bool,
    pub closed_form_quasiscore: bool,
}

pub trait ProcessModel: Send + Sync {
    fn name(&self) -> String;

    fn param_names(&self) -> Vec<String>;

    fn param_bounds(&self) -> Vec<ParamBound>;

    fn param_dim(&self) -> usize {
        self.param_bounds().len()
    }

    fn supported_kernels(&self) -> Vec<KernelFamily>;

    fn capabilities(&self) -> Capabilities;

    fn supports(&self, family: KernelFamily) -> bool {
        self.supported_kernels().contains(&family)
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        let bounds = self.param_bounds();
        if theta.len() != bounds.len() {
            return Err(Error::DimensionMismatch { expected: bounds.len(), got: theta.len() });
        }
        for ((name, b), &x) in self.param_names().iter().zip(&bounds).zip(theta) {
            if !b.contains(x) {
                return Err(Error::InvalidParams(format!("{name} = {x} is outside its domain")));
            }
        }
        Ok(())
    }

    /// Extra constraints needed to simulate (stationarity).
    fn check_simulation_params(&self, theta: &[f64]) -> Result<()> {
        self.check_params(theta)
    }

    fn check_observation(&self, y: f64) -> Result<()> {
        if y.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("non-finite observation {y}")))
        }
    }

    /// `E[g_t(Y_j) | Y_{j-1} = y_prev]`. Accepts any index in the
    /// transform-existence region, including the family's degenerate index.
    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue>;

    /// `d c(t) / d theta`, one entry per parameter.
    fn transform_grad(
        &self,
        family: KernelFamily,
        t: f64,
        theta: &[f64],
        y_prev: f64,
    ) -> Result<Vec<KernelValue>> {
        fd_transform_grad(self, family, t, theta, y_prev)
    }

    /// `E[Y_j^r | Y_{j-1} = y_prev]`.
    fn moment(&self, r: u32, _theta: &[f64], _y_prev: f64) -> Result<f64> {
        Err(Error::MomentsUndefined { model: self.name(), order: r })
    }

    fn moment_grad(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        fd_moment_grad(self, r, theta, y_prev)
    }

    /// One term `d/dtheta log f(y | y_prev)` of the exact score.
    fn score_step(&self, _theta: &[f64], _y_prev: f64, _y: f64) -> Result<Vec<f64>> {
        Err(Error::NotAvailable("analytic score"))
    }

    /// Cheap consistent starting value for iterative estimation.
    fn preliminary_estimate(&self, _series: &TimeSeries) -> Result<Vec<f64>> {
        Err(Error::NotAvailable("preliminary estimate"))
    }

    fn stationary_start(&self, theta: &[f64]) -> f64;

    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64;
}

impl<M: ProcessModel + ?Sized> ProcessModel for Box<M> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn param_names(&self) -> Vec<String> {
        (**self).param_names()
    }
    fn param_bounds(&self) -> Vec<ParamBound> {
        (**self).param_bounds()
    }
    fn supported_kernels(&self) -> Vec<KernelFamily> {
        (**self).supported_kernels()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn check_params(&self, theta: &[f64]) -> Result<()> {
        (**self).check_params(theta)
    }
    fn check_simulation_params(&self, theta: &[f64]) -> Result<()> {
        (**self).check_simulation_params(theta)
    }
    fn check_observation(&self, y: f64) -> Result<()> {
        (**self).check_observation(y)
    }
    fn transform(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<KernelValue> {
        (**self).transform(family, t, theta, y_prev)
    }
    fn transform_grad(&self, family: KernelFamily, t: f64, theta: &[f64], y_prev: f64)
        -> Result<Vec<KernelValue>> {
        (**self).transform_grad(family, t, theta, y_prev)
    }
    fn moment(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<f64> {
        (**self).moment(r, theta, y_prev)
    }
    fn moment_grad(&self, r: u32, theta: &[f64], y_prev: f64) -> Result<Vec<f64>> {
        (**self).moment_grad(r, theta, y_prev)
    }
    fn score_step(&self, theta: &[f64], y_prev: f64, y: f64) -> Result<Vec<f64>> {
        (**self).score_step(theta, y_prev, y)
    }
    fn preliminary_estimate(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        (**self).preliminary_estimate(series)
    }
    fn stationary_start(&self, theta: &[f64]) -> f64 {
        (**self).stationary_start(theta)
    }
    fn sample_next(&self, theta: &[f64], y_prev: f64, rng: &mut dyn RngCore) -> f64 {
        (**self).sample_next(theta, y_prev, rng)
    }
}

/// Lag-1 sample autocorrelation, sample mean and variance.
pub fn lag1_summary(series: &TimeSeries) -> (f64, f64, f64) {
    let y = series.values();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let cov = y.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n;
    let rho = if var > 0.0 { cov / var } else { 0.0 };
    (rho, mean, var)
}

/// Central-difference step `cbrt(eps) * max(1, |x|)`.
pub(crate) fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central finite differences of the conditional transform.
pub fn fd_transform_grad<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    t: f64,
    theta: &[f64],
    y_prev: f64,
) -> Result<Vec<KernelValue>> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = fd_step(theta[i]);
            work[i] = theta[i] + h;
            let up = model.transform(family, t, &work, y_prev)?;
            work[i] = theta[i] - h;
            let down = model.transform(family, t, &work, y_prev)?;
            work[i] = theta[i];
            Ok(up.zip(down, |a, b| (a - b) / (2.0 * h)))
        })
        .collect()
}

pub fn fd_moment_grad<M: ProcessModel + ?Sized>(
    model: &M,
    r: u32,
    theta: &[f64],
    y_prev: f64,
) -> Result<Vec<f64>> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = fd_step(theta[i]);
            work[i] = theta[i] + h;
            let up = model.moment(r, &work, y_prev)?;
            work[i] = theta[i] - h;
            let down = model.moment(r, &work, y_prev)?;
            work[i] = theta[i];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Raw moments `m_0..=m_r` from cumulants `kappa[1..=r]` (`kappa[0]` unused).
pub(crate) fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let r = kappa.len() - 1;
    let mut m = vec![0.0; r + 1];
    m[0] = 1.0;
    for n in 1..=r {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 1..=n {
            // binom = C(n-1, i-1)
            acc += binom * kappa[i] * m[n - i];
            binom = binom * (n - i) as f64 / i as f64;
        }
        m[n] = acc;
    }
    m
}

/// Parameter derivative of the raw moments, given cumulants and their derivative
/// along one parameter direction.
pub(crate) fn moment_derivs_from_cumulants(kappa: &[f64], dkappa: &[f64]) -> Vec<f64> {
    let r = kappa.len() - 1;
    let m = moments_from_cumulants(kappa);
    let mut dm = vec![0.0; r + 1];
    for n in 1..=r {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 1..=n {
            acc += binom * (dkappa[i] * m[n - i] + kappa[i] * dm[n - i]);
            binom = binom * (n - i) as f64 / i as f64;
        }
        dm[n] = acc;
    }
    dm
}

/// Checks that `family` is supported and `theta` is admissible, then returns `c(t)`.
pub fn conditional_transform<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    t: f64,
    theta: &[f64],
    y_prev: f64,
) -> Result<KernelValue> {
    check_kernel(model, family)?;
    model.check_params(theta)?;
    model.transform(family, t, theta, y_prev)
}

pub fn conditional_transform_grad<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    t: f64,
    theta: &[f64],
    y_prev: f64,
) -> Result<Vec<KernelValue>> {
    check_kernel(model, family)?;
    model.check_params(theta)?;
    model.transform_grad(family, t, theta, y_prev)
}

pub fn conditional_moment<M: ProcessModel + ?Sized>(
    model: &M,
    r: u32,
    theta: &[f64],
    y_prev: f64,
) -> Result<f64> {
    model.check_params(theta)?;
    match model.capabilities().max_moment_order {
        Some(max) if r >= 1 && r <= max => model.moment(r, theta, y_prev),
        _ => Err(Error::MomentsUndefined { model: model.name(), order: r }),
    }
}

pub(crate) fn check_kernel<M: ProcessModel + ?Sized>(model: &M, family: KernelFamily) -> Result<()> {
    if model.supports(family) {
        Ok(())
    } else {
        Err(Error::UnsupportedKernel { model: model.name(), family })
    }
}

/// Exact score `S_n(theta) = sum_j s_j`, summed over steps `j = 2..n`.
pub fn analytic_score<M: ProcessModel + ?Sized>(
    model: &M,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<Vec<f64>> {
    if !model.capabilities().analytic_score {
        return Err(Error::NotAvailable("analytic score"));
    }
    model.check_params(theta)?;
    let mut total = vec![0.0; theta.len()];
    for (y_prev, y) in series.steps() {
        for (acc, s) in total.iter_mut().zip(model.score_step(theta, y_prev, y)?) {
            *acc += s;
        }
    }
    Ok(total)
}

/// Observed series `y_1..y_n`; estimation conditions on `y_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SeriesTooShort);
        }
        Ok(TimeSeries(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(y_{j-1}, y_j)` for `j = 2..n`.
    pub fn steps(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// The model's stationary mean (or zero for the stable model).
    Stationary,
    Value(f64),
}

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub theta: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    /// Independent stream under the same seed, e.g. a replicate index.
    pub stream: u64,
    pub burn_in: usize,
    pub initial: InitialState,
}

impl SimSpec {
    pub fn new(theta: Vec<f64>, n: usize, seed: u64) -> Self {
        SimSpec {
            theta,
            n,
            seed,
            stream: 0,
            burn_in: DEFAULT_BURN_IN,
            initial: InitialState::Stationary,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Counter-based generator keyed by `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate<M: ProcessModel + ?Sized>(model: &M, spec: &SimSpec) -> Result<TimeSeries> {
    if spec.n < 2 {
        return Err(Error::SeriesTooShort);
    }
    model.check_simulation_params(&spec.theta)?;
    let mut rng = stream_rng(spec.seed, spec.stream);
    let mut y = match spec.initial {
        InitialState::Stationary => model.stationary_start(&spec.theta),
        InitialState::Value(v) => v,
    };
    for _ in 0..spec.burn_in {
        y = model.sample_next(&spec.theta, y, &mut rng);
    }
    let mut values = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        y = model.sample_next(&spec.theta, y, &mut rng);
        values.push(y);
    }
    TimeSeries::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulant_recursion_normal_moments() {
        // N(mu, s2): m2 = mu^2 + s2, m3 = mu^3 + 3 mu s2, m4 = mu^4 + 6 mu^2 s2 + 3 s2^2
        let (mu, s2) = (0.7, 1.3);
        let m = moments_from_cumulants(&[0.0, mu, s2, 0.0, 0.0]);
        assert!((m[2] - (mu * mu + s2)).abs() < 1e-14);
        assert!((m[3] - (mu.powi(3) + 3.0 * mu * s2)).abs() < 1e-14);
        assert!((m[4] - (mu.powi(4) + 6.0 * mu * mu * s2 + 3.0 * s2 * s2)).abs() < 1e-13);
    }

    #[test]
    fn param_bound_projection() {
        let b = ParamBound::open(0.0, 1.0);
        assert!(b.contains(0.5));
        assert!(!b.contains(0.0));
        assert!(b.contains(b.project(-3.0)));
        assert!(b.contains(b.project(7.0)));
        let c = ParamBound::at_least(0.0);
        assert!(c.contains(0.0));
        assert_eq!(c.project(-1.0), 0.0);
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.steps().collect::<Vec<_>>(), vec![(1.0, 2.0), (2.0, 3.0)]);
    }

    #[test]
    fn streams_differ_under_one_seed() {
        let mut a = stream_rng(9, 0);
        let mut b = stream_rng(9, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
