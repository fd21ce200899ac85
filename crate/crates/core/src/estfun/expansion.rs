//! Small-`t` comparison of transform quasi-scores with the moment quasi-score.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ProcessModel, TimeSeries};

struct LocalMoments {
    mean: f64,
    second: f64,
    var: f64,
    /// `Cov(Y, Y^2)`
    cov12: f64,
    third_central: f64,
    d_mean: Vec<f64>,
    d_second: Vec<f64>,
}

fn local_moments<M: ProcessModel + ?Sized>(model: &M, theta: &[f64], y_prev: f64) -> Result<LocalMoments> {
    let m1 = model.moment(1, theta, y_prev)?;
    let m2 = model.moment(2, theta, y_prev)?;
    let m3 = model.moment(3, theta, y_prev)?;
    let var = m2 - m1 * m1;
    Ok(LocalMoments {
        mean: m1,
        second: m2,
        var,
        cov12: m3 - m1 * m2,
        third_central: m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3),
        d_mean: model.moment_grad(1, theta, y_prev)?,
        d_second: model.moment_grad(2, theta, y_prev)?,
    })
}

/// `(sum K_j, sum L_j)`: first-order coefficients of `G*(t)` and of its
/// information around the moment quasi-score `G*(1)`, for an MGF kernel as
/// `t -> 0`. Scalar parameters only.
pub fn expansion_terms<M: ProcessModel + ?Sized>(
    model: &M,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<(f64, f64)> {
    if theta.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: theta.len() });
    }
    model.check_params(theta)?;
    let (mut k_sum, mut l_sum) = (0.0, 0.0);
    for (y_prev, y) in series.steps() {
        let m = local_moments(model, theta, y_prev)?;
        let (dm, dm2, v) = (m.d_mean[0], m.d_second[0], m.var);
        k_sum += (dm * v * (y * y - m.second) + (dm2 * v - 2.0 * dm * m.cov12) * (y - m.mean))
            / (2.0 * v * v);
        l_sum += dm / (v * v) * (dm2 * v - dm * m.cov12);
    }
    Ok((k_sum, l_sum))
}

/// One step of the moment-optimality comparison, per parameter component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentOptimality {
    /// `dE(Y^2)/dtheta Var - dE(Y)/dtheta Cov(Y, Y^2)`
    pub lhs: Vec<f64>,
    /// Conditional skewness index.
    pub skewness: f64,
    /// `dVar/dtheta - skewness dE(Y)/dtheta sqrt(Var)`; equals `lhs / Var`.
    pub variance_form: Vec<f64>,
}

impl MomentOptimality {
    pub fn max_abs(&self) -> f64 {
        self.lhs.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn moment_optimality_condition<M: ProcessModel + ?Sized>(
    model: &M,
    theta: &[f64],
    y_prev: f64,
) -> Result<MomentOptimality> {
    model.check_params(theta)?;
    let m = local_moments(model, theta, y_prev)?;
    let sd = m.var.sqrt();
    let skewness = if m.var > 0.0 { m.third_central / (m.var * sd) } else { 0.0 };
    let lhs = m
        .d_mean
        .iter()
        .zip(&m.d_second)
        .map(|(dm, dm2)| dm2 * m.var - dm * m.cov12)
        .collect();
    let variance_form = m
        .d_mean
        .iter()
        .zip(&m.d_second)
        .map(|(dm, dm2)| (dm2 - 2.0 * m.mean * dm) - skewness * dm * sd)
        .collect();
    Ok(MomentOptimality { lhs, skewness, variance_form })
}
