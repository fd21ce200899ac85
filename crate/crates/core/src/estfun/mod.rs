//! Martingale differences, optimal weights, composite quasi-scores and their
//! conditional (martingale) information.
//!
//! For a point set `t_1..t_k` the step-`j` martingale difference vector is
//! `h_j = g(Y_j) - E[g(Y_j) | Y_{j-1}]`. The optimal weight is
//! `w_j = (dc/dtheta)' pinv(Cov(h_j | Y_{j-1}))`, which makes `sum_j w_j h_j`
//! the projection of the score onto the span of the `h_j` components, and the
//! information is `sum_j (dc/dtheta)' pinv(Cov) (dc/dtheta)`.

mod expansion;
mod gar1;

pub use expansion::{expansion_terms, moment_optimality_condition, MomentOptimality};
pub use gar1::{gar1_cls_system, gar1_paper_step, gar1_paper_system};

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernels::{self, cf_product_indices, CfProducts, KernelFamily, KernelValue, TrigTerm};
use crate::linalg::{self, pairwise_sum, symmetric_pinv, PINV_REL_CUTOFF};
use crate::models::{check_kernel, ProcessModel, TimeSeries};

/// Minimum separation between points of one set.
pub const MIN_POINT_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSet {
    family: KernelFamily,
    points: Vec<f64>,
}

impl PointSet {
    pub fn new(family: KernelFamily, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPointSet("at least one point is required".into()));
        }
        for &t in &points {
            family.check_index(t)?;
        }
        for (i, &a) in points.iter().enumerate() {
            for &b in &points[..i] {
                if (a - b).abs() <= MIN_POINT_SEPARATION {
                    return Err(Error::InvalidPointSet(format!("points {b} and {a} are not distinct")));
                }
            }
        }
        Ok(PointSet { family, points })
    }

    pub fn single(family: KernelFamily, t: f64) -> Result<Self> {
        PointSet::new(family, vec![t])
    }

    /// `1, 2, .., k` for the moment kernel.
    pub fn first_moments(k: usize) -> Result<Self> {
        PointSet::new(KernelFamily::Moment, (1..=k).map(|i| i as f64).collect())
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of real martingale components.
    pub fn components(&self) -> usize {
        self.points.len() * self.family.components_per_point()
    }

    pub fn contains_near(&self, t: f64) -> bool {
        self.points.iter().any(|&p| (p - t).abs() <= MIN_POINT_SEPARATION)
    }

    pub fn with_point(&self, t: f64) -> Result<Self> {
        let mut points = self.points.clone();
        points.push(t);
        PointSet::new(self.family, points)
    }
}

/// Per-step ingredients of the optimal estimating function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepQuantities {
    /// Martingale differences, `k'` components.
    pub h: DVector<f64>,
    /// `E[dh/dtheta | F_{j-1}] = -dc/dtheta`, `k' x p`.
    pub grad: DMatrix<f64>,
    /// `E[h h' | F_{j-1}]`, `k' x k'`.
    pub cov: DMatrix<f64>,
}

/// `g_t(y_j) - E[g_t(Y_j) | y_prev]`.
pub fn martingale_difference<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    t: f64,
    theta: &[f64],
    y_prev: f64,
    y: f64,
) -> Result<KernelValue> {
    check_kernel(model, family)?;
    let g = kernels::eval(family, t, y)?;
    let c = model.transform(family, t, theta, y_prev)?;
    Ok(g.zip(c, |a, b| a - b))
}

fn closure_transform<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    t: f64,
    s: f64,
    v: f64,
    theta: &[f64],
    y_prev: f64,
) -> Result<KernelValue> {
    model.transform(family, v, theta, y_prev).map_err(|e| match e {
        Error::TransformDiverges { .. } => Error::NotClosed { t, s, v },
        other => other,
    })
}

pub fn step_quantities<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta: &[f64],
    y_prev: f64,
    y: f64,
) -> Result<StepQuantities> {
    let family = points.family();
    let ts = points.points();
    let k = ts.len();
    let p = theta.len();
    let kk = points.components();
    let mut h = DVector::zeros(kk);
    let mut grad = DMatrix::zeros(kk, p);
    let mut cov = DMatrix::zeros(kk, kk);

    if family == KernelFamily::CfReal {
        // each distinct index t_i, t_i - t_l, t_i + t_l is transformed once
        let products: Vec<Vec<CfProducts>> = (0..k)
            .map(|i| (0..k).map(|l| cf_product_indices(ts[i], ts[l])).collect())
            .collect();
        let mut cache: Vec<(f64, (f64, f64))> = Vec::with_capacity(k * (k + 1) + k);
        for u in ts.iter().cloned().chain(products.iter().flatten().flat_map(|p| p.indices())) {
            if !cache.iter().any(|(v, _)| *v == u) {
                cache.push((u, model.transform(family, u, theta, y_prev)?.pair()));
            }
        }
        let cf = |u: f64| cache.iter().find(|(v, _)| *v == u).expect("cached index").1;
        let expect = |terms: &[TrigTerm; 2]| -> f64 { terms.iter().map(|term| term.expect(cf(term.index))).sum() };
        let mut base = Vec::with_capacity(k);
        for (i, &t) in ts.iter().enumerate() {
            let (ec, es) = cf(t);
            let (gc, gs) = kernels::eval(family, t, y)?.pair();
            h[i] = gc - ec;
            h[k + i] = gs - es;
            for (r, d) in model.transform_grad(family, t, theta, y_prev)?.iter().enumerate() {
                let (dc, ds) = d.pair();
                grad[(i, r)] = -dc;
                grad[(k + i, r)] = -ds;
            }
            base.push((ec, es));
        }
        for i in 0..k {
            for l in i..k {
                let prod = &products[i][l];
                let (ci, si) = base[i];
                let (cl, sl) = base[l];
                let cc = expect(&prod.cos_cos) - ci * cl;
                let ss = expect(&prod.sin_sin) - si * sl;
                let cs = expect(&prod.cos_sin) - ci * sl;
                let sc = expect(&prod.sin_cos) - si * cl;
                cov[(i, l)] = cc;
                cov[(l, i)] = cc;
                cov[(k + i, k + l)] = ss;
                cov[(k + l, k + i)] = ss;
                // rows: cos_i / sin_i, cols: sin_l / cos_l
                cov[(i, k + l)] = cs;
                cov[(k + l, i)] = cs;
                cov[(k + i, l)] = sc;
                cov[(l, k + i)] = sc;
            }
        }
    } else {
        let mut base = Vec::with_capacity(k);
        for (i, &t) in ts.iter().enumerate() {
            let c = model.transform(family, t, theta, y_prev)?.scalar();
            h[i] = kernels::eval(family, t, y)?.scalar() - c;
            for (r, d) in model.transform_grad(family, t, theta, y_prev)?.iter().enumerate() {
                grad[(i, r)] = -d.scalar();
            }
            base.push(c);
        }
        for i in 0..k {
            for l in i..k {
                let v = kernels::mult_rule(family, ts[i], ts[l])?;
                let joint = closure_transform(model, family, ts[i], ts[l], v, theta, y_prev)?.scalar();
                let c = joint - base[i] * base[l];
                cov[(i, l)] = c;
                cov[(l, i)] = c;
            }
        }
    }
    Ok(StepQuantities { h, grad, cov })
}

/// `w* = (-grad)' pinv(cov)`, a `p x k'` matrix.
pub fn optimal_weights(sq: &StepQuantities) -> Result<DMatrix<f64>> {
    let (pinv, _) = symmetric_pinv(&sq.cov, PINV_REL_CUTOFF).ok_or(Error::DegenerateCovariance)?;
    Ok(-sq.grad.transpose() * pinv)
}

/// Conditional martingale information matrix, `p x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    matrix: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        InfoMatrix { matrix: linalg::symmetrize(&matrix) }
    }

    pub fn from_scalar(v: f64) -> Self {
        InfoMatrix { matrix: DMatrix::from_element(1, 1, v) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    /// The scalar information for one parameter, the determinant otherwise.
    pub fn size(&self) -> f64 {
        if self.dim() == 1 {
            self.matrix[(0, 0)]
        } else {
            self.det()
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn effective_rank(&self) -> usize {
        let max = linalg::max_eigenvalue(&self.matrix);
        if max <= 0.0 {
            return 0;
        }
        nalgebra::SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .filter(|&&e| e > PINV_REL_CUTOFF * max)
            .count()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().cloned().collect()).collect()
    }
}

impl Serialize for InfoMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Quasi-score and information evaluated together.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub score: DVector<f64>,
    pub info: InfoMatrix,
}

fn validate<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<()> {
    check_kernel(model, points.family())?;
    model.check_params(theta)?;
    series.values().iter().try_for_each(|&y| model.check_observation(y))
}

/// Quasi-score and information summed over steps `j = 2..n` with pairwise reduction.
pub fn evaluate<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<Evaluation> {
    validate(model, points, theta, series)?;
    let terms = series
        .steps()
        .map(|(y_prev, y)| {
            let sq = step_quantities(model, points, theta, y_prev, y)?;
            let (pinv, _) =
                symmetric_pinv(&sq.cov, PINV_REL_CUTOFF).ok_or(Error::DegenerateCovariance)?;
            let dc = -&sq.grad;
            let weights = dc.transpose() * &pinv;
            Ok((&weights * &sq.h, &weights * &dc))
        })
        .collect::<Result<Vec<(DVector<f64>, DMatrix<f64>)>>>()?;
    let (score, info) = pairwise_sum(&terms, &|a, b| (&a.0 + &b.0, &a.1 + &b.1))
        .expect("series has at least one step");
    Ok(Evaluation { score, info: InfoMatrix::new(info) })
}

/// `G*(t_1..t_k) = sum_j w_j* h_j`.
pub fn quasi_score<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<Vec<f64>> {
    validate(model, points, theta, series)?;
    let terms = series
        .steps()
        .map(|(y_prev, y)| {
            let sq = step_quantities(model, points, theta, y_prev, y)?;
            Ok(optimal_weights(&sq)? * &sq.h)
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    let total = pairwise_sum(&terms, &|a, b| a + b).expect("series has at least one step");
    Ok(total.iter().cloned().collect())
}

/// `I = sum_j grad' pinv(cov) grad`.
pub fn information_matrix<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta: &[f64],
    series: &TimeSeries,
) -> Result<InfoMatrix> {
    validate(model, points, theta, series)?;
    let terms = series
        .steps()
        .map(|(y_prev, y)| {
            let sq = step_quantities(model, points, theta, y_prev, y)?;
            let (pinv, _) =
                symmetric_pinv(&sq.cov, PINV_REL_CUTOFF).ok_or(Error::DegenerateCovariance)?;
            Ok(sq.grad.transpose() * pinv * &sq.grad)
        })
        .collect::<Result<Vec<DMatrix<f64>>>>()?;
    let total = pairwise_sum(&terms, &|a, b| a + b).expect("series has at least one step");
    Ok(InfoMatrix::new(total))
}

/// Conditional efficiency `I_a / I_b`, or the determinant ratio for matrices.
pub fn efficiency(a: &InfoMatrix, b: &InfoMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: a.dim() });
    }
    let reference = b.size();
    let max = linalg::max_eigenvalue(b.matrix());
    if reference == 0.0
        || !reference.is_finite()
        || !(max > 0.0)
        || b.min_eigenvalue() <= PINV_REL_CUTOFF * max
    {
        return Err(Error::SingularReference);
    }
    Ok(a.size() / reference)
}
