//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue cutoff for the spectral pseudo-inverse.
pub const PINV_REL_CUTOFF: f64 = 1e-12;

/// Pseudo-inverse of a symmetric PSD matrix and its effective rank.
///
/// Eigenvalues at or below `rel_cutoff * max_eigenvalue` are discarded, so
/// dependent directions get zero weight. Returns `None` when nothing survives.
pub fn symmetric_pinv(a: &DMatrix<f64>, rel_cutoff: f64) -> Option<(DMatrix<f64>, usize)> {
    match a.nrows() {
        1 => return pinv_1(a[(0, 0)]),
        2 => return pinv_2(a[(0, 0)], 0.5 * (a[(0, 1)] + a[(1, 0)]), a[(1, 1)], rel_cutoff),
        _ => {}
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return None;
    }
    let cutoff = rel_cutoff * max;
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lambda;
            rank += 1;
        }
    }
    Some((symmetrize(&out), rank))
}

fn pinv_1(a: f64) -> Option<(DMatrix<f64>, usize)> {
    (a > 0.0 && a.is_finite()).then(|| (DMatrix::from_element(1, 1, 1.0 / a), 1))
}

/// Closed-form spectral pseudo-inverse of `[[a, b], [b, d]]`.
fn pinv_2(a: f64, b: f64, d: f64, rel_cutoff: f64) -> Option<(DMatrix<f64>, usize)> {
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    let hi = mean + radius;
    if !(hi > 0.0) || !hi.is_finite() {
        return None;
    }
    // smaller root without cancellation: hi * lo = det
    let lo = (a * d - b * b) / hi;
    if lo > rel_cutoff * hi {
        let det = a * d - b * b;
        return Some((DMatrix::from_row_slice(2, 2, &[d / det, -b / det, -b / det, a / det]), 2));
    }
    // rank one: top eigenvector from whichever row of A - hi I is better conditioned
    let (v1, v2) = ((b, hi - a), (hi - d, b));
    let n1 = v1.0 * v1.0 + v1.1 * v1.1;
    let n2 = v2.0 * v2.0 + v2.1 * v2.1;
    let ((vx, vy), norm2) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    let k = 1.0 / (hi * norm2);
    Some((DMatrix::from_row_slice(2, 2, &[k * vx * vx, k * vx * vy, k * vx * vy, k * vy * vy]), 1))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical rank from singular values with a relative cutoff.
pub fn numerical_rank(a: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * max).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Sums with pairwise reduction in index order.
pub fn pairwise_sum<T: Clone>(items: &[T], add: &impl Fn(&T, &T) -> T) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        n => {
            let (a, b) = items.split_at(n / 2);
            Some(add(&pairwise_sum(a, add)?, &pairwise_sum(b, add)?))
        }
    }
}
