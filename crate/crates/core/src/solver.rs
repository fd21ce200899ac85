//! Root finding for estimating equations, conditional least squares and
//! preliminary estimators.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{ParamBound, ProcessModel, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub theta: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub jacobian_condition: f64,
    /// The scalar bracket scan saw more than one sign change.
    pub multiple_roots: bool,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Converged when `|G|_inf < rel_tol * (1 + |G(theta0)|_inf)`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub max_condition: f64,
    /// Parameter domain used for projection; empty means unbounded.
    pub bounds: Vec<ParamBound>,
    /// Scalar case: only accept sign changes from positive to negative.
    /// Quasi-scores have expected slope `-I`, so this skips half of the
    /// spurious roots of oscillating ones.
    pub decreasing_root: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { rel_tol: 1e-8, max_iter: 200, max_condition: 1e12, bounds: Vec::new(), decreasing_root: false }
    }
}

impl SolveOptions {
    pub fn with_bounds(bounds: Vec<ParamBound>) -> Self {
        SolveOptions { bounds, ..Default::default() }
    }

    fn project(&self, theta: &mut [f64]) {
        for (x, b) in theta.iter_mut().zip(&self.bounds) {
            *x = b.project(*x);
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `f(theta) = 0` starting from `theta0`.
///
/// Errors from `f` at trial points are treated as infeasible steps; an error
/// at `theta0` itself is returned.
pub fn solve<F>(f: F, theta0: &[f64], options: &SolveOptions) -> Result<SolveReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if theta0.len() == 1 {
        solve_scalar(&|x| f(&[x]).map(|v| v[0]), theta0[0], options)
    } else {
        solve_vector(&f, theta0, options)
    }
}

fn scalar_report(x: f64, r: f64, iterations: usize, converged: bool, multiple: bool) -> SolveReport {
    SolveReport {
        theta: vec![x],
        residual_norm: r.abs(),
        iterations,
        converged,
        jacobian_condition: 1.0,
        multiple_roots: multiple,
    }
}

fn solve_scalar(f: &dyn Fn(f64) -> Result<f64>, x0: f64, options: &SolveOptions) -> Result<SolveReport> {
    let bound = options.bounds.first().copied().unwrap_or(ParamBound::UNBOUNDED);
    let x0 = bound.project(x0);
    let r0 = f(x0)?;
    let tol = options.rel_tol * (1.0 + r0.abs());
    if r0.abs() < tol {
        return Ok(scalar_report(x0, r0, 0, true, false));
    }

    // Bracket scan outward from x0 with geometrically growing steps, so the
    // first sign change is close to the one nearest x0 even when `f`
    // oscillates.
    let mut step = 1e-6 * x0.abs().max(1.0);
    let (mut lo_x, mut lo_r) = (x0, r0);
    let (mut hi_x, mut hi_r) = (x0, r0);
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    let mut changes = 0;
    let mut evals = 1;
    for _ in 0..80 {
        let mut moved = false;
        for side in [1.0, -1.0] {
            let (px, pr) = if side > 0.0 { (hi_x, hi_r) } else { (lo_x, lo_r) };
            let x = bound.project(px + side * step);
            if x == px {
                continue;
            }
            let Ok(r) = f(x) else { continue };
            evals += 1;
            moved = true;
            let (left, right) = if side > 0.0 { (pr, r) } else { (r, pr) };
            let crossing = if options.decreasing_root {
                left >= 0.0 && right <= 0.0 && left != right
            } else {
                r.signum() != pr.signum() || r == 0.0
            };
            if crossing {
                changes += 1;
                if bracket.is_none() {
                    bracket = Some(if side > 0.0 { (px, pr, x, r) } else { (x, r, px, pr) });
                }
            }
            if side > 0.0 {
                (hi_x, hi_r) = (x, r);
            } else {
                (lo_x, lo_r) = (x, r);
            }
        }
        if bracket.is_some() || !moved {
            break;
        }
        step *= 1.6;
    }
    let multiple = changes > 1;

    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        return damped_scalar_newton(f, x0, r0, tol, options, evals, multiple);
    };
    if fa == 0.0 {
        return Ok(scalar_report(a, fa, evals, true, multiple));
    }
    if fb == 0.0 {
        return Ok(scalar_report(b, fb, evals, true, multiple));
    }
    // Newton steps that leave the bracket become bisections.
    let (mut x, mut fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for it in 0..options.max_iter {
        if fx.abs() < tol {
            return Ok(scalar_report(x, fx, it + evals, true, multiple));
        }
        let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
        let slope = f(x + h).map(|v| (v - fx) / h).unwrap_or(f64::NAN);
        let mut next = x - fx / slope;
        let width = b - a;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let fnext = f(next)?;
        if fnext.signum() == fa.signum() {
            a = next;
            fa = fnext;
        } else {
            b = next;
            fb = fnext;
        }
        // Force bisection when the bracket is not shrinking.
        if b - a > 0.5 * width {
            let mid = 0.5 * (a + b);
            let fm = f(mid)?;
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
        }
        (x, fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
        if b - a <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            let converged = fx.abs() < tol;
            let report = scalar_report(x, fx, it + evals, converged, multiple);
            return if converged { Ok(report) } else { Err(Error::NonConvergence(Box::new(report))) };
        }
    }
    Err(Error::NonConvergence(Box::new(scalar_report(x, fx, options.max_iter + evals, false, multiple))))
}

fn damped_scalar_newton(
    f: &dyn Fn(f64) -> Result<f64>,
    x0: f64,
    r0: f64,
    tol: f64,
    options: &SolveOptions,
    evals: usize,
    multiple: bool,
) -> Result<SolveReport> {
    let bound = options.bounds.first().copied().unwrap_or(ParamBound::UNBOUNDED);
    let (mut x, mut r) = (x0, r0);
    for it in 0..options.max_iter {
        if r.abs() < tol {
            return Ok(scalar_report(x, r, it + evals, true, multiple));
        }
        let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
        let slope = (f(x + h)? - r) / h;
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let full = -r / slope;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = bound.project(x + lambda * full);
            if let Ok(rt) = f(trial) {
                if rt.abs() < r.abs() {
                    (x, r) = (trial, rt);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = r.abs() < tol;
    let report = scalar_report(x, r, options.max_iter + evals, converged, multiple);
    if converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence(Box::new(report)))
    }
}

/// Forward-difference Jacobian with step `cbrt(eps) max(1, |theta_i|)`,
/// stepping backwards where the forward point leaves the domain.
pub fn fd_jacobian<F>(f: &F, theta: &[f64], r: &[f64], bounds: &[ParamBound]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = theta.len();
    let mut jac = DMatrix::zeros(r.len(), p);
    for i in 0..p {
        let mut h = f64::EPSILON.cbrt() * theta[i].abs().max(1.0);
        if let Some(b) = bounds.get(i) {
            if !b.contains(theta[i] + h) {
                h = -h;
            }
        }
        let mut shifted = theta.to_vec();
        shifted[i] += h;
        let rs = f(&shifted)?;
        for k in 0..r.len() {
            jac[(k, i)] = (rs[k] - r[k]) / h;
        }
    }
    Ok(jac)
}

fn solve_vector<F>(f: &F, theta0: &[f64], options: &SolveOptions) -> Result<SolveReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut theta = theta0.to_vec();
    options.project(&mut theta);
    let mut r = f(&theta)?;
    if r.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: r.len() });
    }
    let tol = options.rel_tol * (1.0 + inf_norm(&r));
    let mut condition = f64::NAN;
    let report = |theta: &[f64], r: &[f64], it, converged, condition| SolveReport {
        theta: theta.to_vec(),
        residual_norm: inf_norm(r),
        iterations: it,
        converged,
        jacobian_condition: condition,
        multiple_roots: false,
    };
    for it in 0..options.max_iter {
        if inf_norm(&r) < tol {
            return Ok(report(&theta, &r, it, true, condition));
        }
        let jac = fd_jacobian(f, &theta, &r, &options.bounds)?;
        condition = linalg::condition_number(&jac);
        if !(condition <= options.max_condition) {
            return Err(Error::SingularJacobian(Box::new(report(&theta, &r, it, false, condition))));
        }
        let Some(step) = jac.lu().solve(&(-DVector::from_column_slice(&r))) else {
            return Err(Error::SingularJacobian(Box::new(report(&theta, &r, it, false, condition))));
        };
        let norm = DVector::from_column_slice(&r).norm();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
            options.project(&mut trial);
            if let Ok(rt) = f(&trial) {
                if rt.iter().all(|v| v.is_finite()) && DVector::from_column_slice(&rt).norm() < norm {
                    theta = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            let converged = inf_norm(&r) < tol;
            let rep = report(&theta, &r, it + 1, converged, condition);
            return if converged { Ok(rep) } else { Err(Error::NonConvergence(Box::new(rep))) };
        }
    }
    let converged = inf_norm(&r) < tol;
    let rep = report(&theta, &r, options.max_iter, converged, condition);
    if converged {
        Ok(rep)
    } else {
        Err(Error::NonConvergence(Box::new(rep)))
    }
}

/// Best available iterate from a solve, converged or not.
pub fn best_report(result: &Result<SolveReport>) -> Option<&SolveReport> {
    match result {
        Ok(r) => Some(r),
        Err(Error::NonConvergence(r)) | Err(Error::SingularJacobian(r)) => Some(r),
        Err(_) => None,
    }
}

/// Relative singular-value cutoff for degeneracy of the least-squares system.
pub const CLS_RANK_CUTOFF: f64 = 1e-10;

/// Conditional least squares: minimizes `sum_j (y_j - E[Y_j | y_{j-1}])^2`
/// by damped Gauss-Newton from the model's preliminary estimate.
pub fn cls_estimate<M: ProcessModel + ?Sized>(model: &M, series: &TimeSeries) -> Result<Vec<f64>> {
    let start = model.preliminary_estimate(series).or_else(|_| default_start(model))?;
    cls_estimate_from(model, series, &start)
}

fn default_start<M: ProcessModel + ?Sized>(model: &M) -> Result<Vec<f64>> {
    Ok(model
        .param_bounds()
        .iter()
        .map(|b| match (b.lower.is_finite(), b.upper.is_finite()) {
            (true, true) => 0.5 * (b.lower + b.upper),
            (true, false) => b.lower + 1.0,
            (false, true) => b.upper - 1.0,
            (false, false) => 0.0,
        })
        .collect())
}

fn cls_parts<M: ProcessModel + ?Sized>(
    model: &M,
    series: &TimeSeries,
    theta: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = series.len() - 1;
    let p = theta.len();
    let mut resid = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, p);
    for (j, (x, y)) in series.steps().enumerate() {
        resid[j] = y - model.moment(1, theta, x)?;
        for (i, d) in model.moment_grad(1, theta, x)?.into_iter().enumerate() {
            jac[(j, i)] = d;
        }
    }
    Ok((resid, jac))
}

pub fn cls_estimate_from<M: ProcessModel + ?Sized>(
    model: &M,
    series: &TimeSeries,
    theta0: &[f64],
) -> Result<Vec<f64>> {
    let options = SolveOptions::with_bounds(model.param_bounds());
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    options.project(&mut theta);
    let (mut resid, mut jac) = cls_parts(model, series, &theta)?;
    let rank = linalg::numerical_rank(&(jac.transpose() * &jac), CLS_RANK_CUTOFF);
    if rank < p {
        return Err(Error::DegenerateSystem { rank, dim: p });
    }
    let mut sse = resid.norm_squared();
    for _ in 0..options.max_iter {
        let normal = jac.transpose() * &jac;
        let grad = jac.transpose() * &resid;
        let Some(step) = normal.clone().cholesky().map(|c| c.solve(&grad)) else {
            let rank = linalg::numerical_rank(&normal, CLS_RANK_CUTOFF);
            return Err(Error::DegenerateSystem { rank, dim: p });
        };
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
            options.project(&mut trial);
            if let Ok((r, j)) = cls_parts(model, series, &trial) {
                let s = r.norm_squared();
                if s <= sse {
                    let done = (sse - s) <= 1e-15 * sse.max(1e-300)
                        || trial.iter().zip(&theta).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
                    theta = trial;
                    resid = r;
                    jac = j;
                    sse = s;
                    moved = !done;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let rank = linalg::numerical_rank(&(jac.transpose() * &jac), CLS_RANK_CUTOFF);
    if rank < p {
        return Err(Error::DegenerateSystem { rank, dim: p });
    }
    Ok(theta)
}

/// Preliminary estimate from the model, falling back to least squares.
pub fn preliminary_estimate<M: ProcessModel + ?Sized>(model: &M, series: &TimeSeries) -> Result<Vec<f64>> {
    match model.preliminary_estimate(series) {
        Err(Error::NotAvailable(_)) => cls_estimate(model, series),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, GammaAr1, GaussianAr1, Restricted, SimSpec};
    use proptest::prelude::*;

    #[test]
    fn oscillating_scalar_takes_nearest_root() {
        let f = |t: &[f64]| Ok(vec![(50.0 * t[0]).sin()]);
        let any = solve(f, &[0.02], &SolveOptions::default()).unwrap();
        assert!(any.theta[0].abs() < 1e-8, "{:?}", any.theta);
        let down = SolveOptions { decreasing_root: true, ..Default::default() };
        let r = solve(f, &[0.02], &down).unwrap();
        assert!((r.theta[0] - std::f64::consts::PI / 50.0).abs() < 1e-8, "{:?}", r.theta);
    }

    #[test]
    fn linear_scalar() {
        let r = solve(|t: &[f64]| Ok(vec![t[0] - 0.8]), &[0.0], &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta[0] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn linear_vector_and_jacobian() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
        let b = DVector::from_column_slice(&[1.0, 4.0]);
        let f = |t: &[f64]| Ok((&a * DVector::from_column_slice(t) - &b).iter().cloned().collect());
        let jac = fd_jacobian(&f, &[0.3, -0.2], &f(&[0.3, -0.2]).unwrap(), &[]).unwrap();
        assert!((jac - &a).abs().max() < 1e-8);
        let r = solve(f, &[0.0, 0.0], &SolveOptions::default()).unwrap();
        let exact = a.lu().solve(&b).unwrap();
        assert!(r.converged);
        assert!((r.theta[0] - exact[0]).abs() < 1e-8 && (r.theta[1] - exact[1]).abs() < 1e-8);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let f = |t: &[f64]| Ok(vec![t[0] + t[1] - 1.0, 2.0 * (t[0] + t[1]) - 2.0 + 1e-3]);
        assert!(matches!(solve(f, &[0.0, 0.0], &SolveOptions::default()), Err(Error::SingularJacobian(_))));
    }

    #[test]
    fn oscillating_scalar_reports_nearest_root_and_multiplicity() {
        let f = |t: &[f64]| Ok(vec![(3.0 * t[0]).sin()]);
        let r = solve(f, &[0.9], &SolveOptions::default()).unwrap();
        assert!((r.theta[0] - std::f64::consts::PI / 3.0).abs() < 1e-8);
        let r = solve(f, &[0.1], &SolveOptions::default()).unwrap();
        assert!(r.theta[0].abs() < 1e-8);
    }

    #[test]
    fn gaussian_cls_closed_form() {
        let m = GaussianAr1::new(1.0).unwrap();
        let s = TimeSeries::new(vec![1.0, 2.0, 1.0]).unwrap();
        let phi = cls_estimate_from(&m, &s, &[0.0]).unwrap();
        assert!((phi[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn gamma_cls_degenerate_when_all_free() {
        let m = GammaAr1::new();
        let s = simulate(&m, &SimSpec::new(vec![1.0, 2.0, 3.0], 500, 11)).unwrap();
        assert!(matches!(cls_estimate(&m, &s), Err(Error::DegenerateSystem { rank: 2, dim: 3 })));
    }

    #[test]
    fn gamma_cls_with_nu_fixed() {
        let full = GammaAr1::new();
        let s = simulate(&full, &SimSpec::new(vec![1.0, 2.0, 3.0], 4000, 12)).unwrap();
        let m = Restricted::new(full, &[(2, 3.0)]).unwrap();
        let est = cls_estimate(&m, &s).unwrap();
        assert!((est[0] - 1.0).abs() < 0.25, "{est:?}");
        assert!((est[1] - 2.0).abs() < 0.4, "{est:?}");
    }

    #[test]
    fn gamma_moment_estimator_is_close() {
        let m = GammaAr1::new();
        let s = simulate(&m, &SimSpec::new(vec![1.0, 2.0, 3.0], 20_000, 13)).unwrap();
        let est = m.preliminary_estimate(&s).unwrap();
        for (e, t) in est.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e - t).abs() < 0.2 * t, "{est:?}");
        }
    }

    proptest! {
        #[test]
        fn sign_flip_gives_same_root(c in 0.2f64..3.0, shift in -2.0f64..2.0, x0 in -3.0f64..3.0) {
            let f = move |t: &[f64]| Ok(vec![(t[0] - shift).powi(3) + c * (t[0] - shift)]);
            let g = move |t: &[f64]| Ok(vec![-((t[0] - shift).powi(3) + c * (t[0] - shift))]);
            let a = solve(f, &[x0], &SolveOptions::default()).unwrap();
            let b = solve(g, &[x0], &SolveOptions::default()).unwrap();
            prop_assert!(a.converged && b.converged);
            prop_assert!((a.theta[0] - b.theta[0]).abs() < 1e-8);
            // residual tolerance scales with the starting residual
            prop_assert!((a.theta[0] - shift).abs() < 1e-5);
        }
    }
}
