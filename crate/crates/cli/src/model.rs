//! Model construction from flags, and the reference information used for
//! reporting efficiency.

use clap::{Args, ValueEnum};
use tmef::models::{stable_iid_fisher, BinaryMarkov, GammaAr1, GaussianAr1, Restricted, StableAr1};
use tmef::{Error, InfoMatrix, KernelFamily, ProcessModel, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    StableAr1,
    Gar1,
    GaussianAr1,
    BinaryMarkov,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Stability index (stable-ar1) or shape rate (gar1).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Innovation standard deviation (gaussian-ar1).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Switching probability (binary-markov).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Hold a parameter fixed, e.g. `--fix nu=3`.
    #[arg(long, value_name = "NAME=VALUE")]
    pub fix: Vec<String>,
}

pub struct BuiltModel {
    pub model: Box<dyn ProcessModel>,
    pub kind: ModelKind,
    /// Parameter values given on the command line, in free-parameter order;
    /// `None` where a flag was omitted.
    pub given: Vec<Option<f64>>,
    restricted: bool,
    stable_alpha: Option<f64>,
    sigma: f64,
}

fn required(v: Option<f64>, name: &str, model: &str) -> Result<f64, Error> {
    v.ok_or_else(|| Error::InvalidParams(format!("{model} needs --{name}")))
}

impl ModelArgs {
    pub fn build(&self) -> Result<BuiltModel, Error> {
        let (inner, full, stable_alpha): (Box<dyn ProcessModel>, Vec<Option<f64>>, Option<f64>) = match self.model {
            ModelKind::StableAr1 => {
                let a = required(self.alpha, "alpha", "stable-ar1")?;
                (Box::new(StableAr1::new(a)?), vec![self.phi], Some(a))
            }
            ModelKind::Gar1 => (Box::new(GammaAr1::new()), vec![self.lambda, self.alpha, self.nu], None),
            ModelKind::GaussianAr1 => (Box::new(GaussianAr1::new(self.sigma)?), vec![self.phi], None),
            ModelKind::BinaryMarkov => (Box::new(BinaryMarkov::new()), vec![self.theta], None),
        };
        let names = inner.param_names();
        let mut fixed = Vec::new();
        for spec in &self.fix {
            let (name, value) = spec
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("--fix expects NAME=VALUE, got '{spec}'")))?;
            let idx = names
                .iter()
                .position(|n| n == name.trim())
                .ok_or_else(|| Error::InvalidParams(format!("unknown parameter '{name}' (have {})", names.join(", "))))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("--fix {name}: '{value}' is not a number")))?;
            fixed.push((idx, v));
        }
        let kind = self.model;
        let sigma = self.sigma;
        if fixed.is_empty() {
            return Ok(BuiltModel { model: inner, kind, given: full, restricted: false, stable_alpha, sigma });
        }
        let given = (0..full.len()).filter(|i| !fixed.iter().any(|(j, _)| j == i)).map(|i| full[i]).collect();
        let model = Box::new(Restricted::new(inner, &fixed)?);
        Ok(BuiltModel { model, kind, given, restricted: true, stable_alpha, sigma })
    }
}

impl BuiltModel {
    /// All free parameters, or a validation error naming the missing flags.
    pub fn params(&self) -> Result<Vec<f64>, Error> {
        let names = self.model.param_names();
        let missing: Vec<String> =
            names.iter().zip(&self.given).filter(|(_, v)| v.is_none()).map(|(n, _)| format!("--{n}")).collect();
        if !missing.is_empty() {
            return Err(Error::InvalidParams(format!("missing {}", missing.join(", "))));
        }
        let theta: Vec<f64> = self.given.iter().map(|v| v.unwrap()).collect();
        self.model.check_simulation_params(&theta)?;
        Ok(theta)
    }

    pub fn default_kernel(&self) -> KernelFamily {
        match self.kind {
            ModelKind::StableAr1 | ModelKind::GaussianAr1 => KernelFamily::CfReal,
            ModelKind::Gar1 => KernelFamily::Laplace,
            ModelKind::BinaryMarkov => KernelFamily::Pgf,
        }
    }

    /// Known conditional Fisher information at `theta`, when available.
    pub fn reference_information(&self, theta: &[f64], series: &TimeSeries) -> Option<InfoMatrix> {
        if self.restricted {
            return None;
        }
        let lagged_sq = || series.values()[..series.len() - 1].iter().map(|y| y * y).sum::<f64>();
        let value = match self.kind {
            ModelKind::StableAr1 => stable_iid_fisher(self.stable_alpha?)? * lagged_sq(),
            ModelKind::GaussianAr1 => lagged_sq() / (self.sigma * self.sigma),
            ModelKind::BinaryMarkov => BinaryMarkov::new().fisher_information(theta[0], series),
            ModelKind::Gar1 => return None,
        };
        Some(InfoMatrix::from_scalar(value))
    }
}
