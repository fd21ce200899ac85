//! Hand-expanded polynomial equations for the gamma AR(1) model.

use crate::models::TimeSeries;

/// One step of the three printed polynomial equations for the composite
/// moment quasi-score on points `{1, 2}`, `theta = (lambda, alpha, nu)`.
pub fn gar1_paper_step(theta: &[f64], y_prev: f64, y: f64) -> [f64; 3] {
    let (l, a, nu) = (theta[0], theta[1], theta[2]);
    let x = y_prev;
    let e0 = 5.0 * l.powi(3) * x.powi(4)
        + (-6.0 * a * y + 10.0 * nu + 4.0) * l * l * x.powi(3)
        + (a * a * y * y - 6.0 * ((1.0 + nu) * a * y - nu - nu * nu)) * l * x * x
        + ((-nu - nu * nu) * a * y + nu * nu + nu.powi(3)) * x;
    let e1 = -3.0 * l.powi(4) * x.powi(4)
        + (2.0 * a * y - 10.0 * nu - 2.0) * l.powi(3) * x.powi(3)
        + (a * a * y * y + 6.0 * nu * a * y - 6.0 * nu - 12.0 * nu * nu) * l * l * x * x
        - (6.0 * nu - 5.0 * a * y) * nu * (1.0 + nu) * l * x
        + (nu * nu + nu.powi(3)) * a * y
        - nu.powi(3)
        - nu.powi(4);
    let e2 = 6.0 * l.powi(3) * x.powi(3)
        + (12.5 * nu + 5.0 - 8.0 * a * y) * l * l * x * x
        + (2.0 * a * a * y * y - 9.0 * (1.0 + nu) * a * y + 8.0 * nu + 8.0 * nu * nu) * l * x
        + 0.5 * nu * y * y * a * a
        - 2.0 * nu * (1.0 + nu) * a * y
        + 1.5 * nu * nu * (1.0 + nu);
    [e0, e1, e2]
}

/// The printed system summed over steps `j = 2..n`.
pub fn gar1_paper_system(theta: &[f64], series: &TimeSeries) -> [f64; 3] {
    sum3(series.steps().map(|(x, y)| gar1_paper_step(theta, x, y)))
}

/// Conditional least squares equations with `e_j = alpha Y_j - lambda Y_{j-1} - nu`:
/// `sum Y_{j-1} e_j`, `sum (lambda Y_{j-1} + nu) e_j`, `sum e_j`.
pub fn gar1_cls_system(theta: &[f64], series: &TimeSeries) -> [f64; 3] {
    let (l, a, nu) = (theta[0], theta[1], theta[2]);
    sum3(series.steps().map(|(x, y)| {
        let e = a * y - l * x - nu;
        [x * e, (l * x + nu) * e, e]
    }))
}

fn sum3(it: impl Iterator<Item = [f64; 3]>) -> [f64; 3] {
    it.fold([0.0; 3], |acc, v| [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]])
}
