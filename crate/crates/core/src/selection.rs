//! Choice of transform points by maximizing martingale information, and the
//! two-step scheme alternating point selection with estimation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estfun::{information_matrix, quasi_score, InfoMatrix, PointSet, MIN_POINT_SEPARATION};
use crate::kernels::KernelFamily;
use crate::linalg::PINV_REL_CUTOFF;
use crate::models::{ProcessModel, TimeSeries};
use crate::solver::{best_report, solve, SolveOptions, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    GreedyOptimal,
    UniformSpacing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub k_max: usize,
    /// Overrides the family's default window.
    pub search_window: Option<(f64, f64)>,
    pub grid_resolution: usize,
    pub rel_gain_tol: f64,
    pub mode: SelectionMode,
    /// Select points only at the first iteration of the two-step scheme.
    pub refresh_once: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k_max: 1,
            search_window: None,
            grid_resolution: 200,
            rel_gain_tol: 1e-3,
            mode: SelectionMode::GreedyOptimal,
            refresh_once: false,
        }
    }
}

impl SelectionConfig {
    pub fn with_k(k_max: usize) -> Self {
        SelectionConfig { k_max, ..Default::default() }
    }

    pub fn window(&self, family: KernelFamily) -> (f64, f64) {
        self.search_window.unwrap_or_else(|| family.default_window())
    }

    pub fn validate(&self, family: KernelFamily) -> Result<()> {
        let (lo, hi) = self.window(family);
        if self.k_max == 0 {
            return Err(Error::InvalidPointSet("k_max must be at least 1".into()));
        }
        if self.grid_resolution < 3 {
            return Err(Error::InvalidPointSet("grid resolution must be at least 3".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidPointSet(format!("empty search window ({lo}, {hi})")));
        }
        // the interior may legitimately contain the degenerate index (MGF)
        if family != KernelFamily::Moment {
            family.check_index(lo)?;
            family.check_index(hi)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub k: usize,
    pub t: f64,
    /// Scalar information, or the determinant for vector parameters.
    pub info: f64,
    /// The maximum was found at the edge of the search window.
    pub boundary: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InfoTrace {
    pub entries: Vec<TraceEntry>,
}

impl InfoTrace {
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].info >= w[0].info - rel_tol * w[0].info.abs())
    }

    pub fn last_info(&self) -> Option<f64> {
        self.entries.last().map(|e| e.info)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub t: f64,
    pub info: f64,
}

/// Objective ordered first by rank, then by size. Rank-deficient information
/// matrices (fewer points than parameters) are compared through their
/// pseudo-determinant so that the search still discriminates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    rank: usize,
    key: f64,
    info: f64,
}

impl Score {
    const INFEASIBLE: Score = Score { rank: 0, key: f64::NEG_INFINITY, info: f64::NEG_INFINITY };

    fn of(info: &InfoMatrix) -> Score {
        let size = info.size();
        if info.dim() == 1 {
            return Score { rank: 1, key: size, info: size };
        }
        let eig = nalgebra::SymmetricEigen::new(info.matrix().clone()).eigenvalues;
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        let kept: Vec<f64> = eig.iter().cloned().filter(|&e| e > PINV_REL_CUTOFF * max).collect();
        let key = if kept.len() == info.dim() { size } else { kept.iter().product() };
        Score { rank: kept.len(), key, info: size }
    }

    fn beats(&self, other: &Score) -> bool {
        self.rank > other.rank || (self.rank == other.rank && self.key > other.key)
    }
}

fn infeasible(e: &Error) -> bool {
    matches!(
        e,
        Error::IndexOutOfDomain { .. }
            | Error::NotClosed { .. }
            | Error::TransformDiverges { .. }
            | Error::MomentsUndefined { .. }
            | Error::Overflow { .. }
            | Error::DegenerateCovariance
            | Error::InvalidPointSet(_)
    )
}

struct Objective<'a, M: ?Sized> {
    model: &'a M,
    family: KernelFamily,
    fixed: &'a [f64],
    theta: &'a [f64],
    series: &'a TimeSeries,
}

impl<M: ProcessModel + ?Sized> Objective<'_, M> {
    fn eval(&self, t: f64) -> Result<Score> {
        if self.fixed.iter().any(|&p| (p - t).abs() <= MIN_POINT_SEPARATION) {
            return Ok(Score::INFEASIBLE);
        }
        let mut points = self.fixed.to_vec();
        points.push(t);
        let result = PointSet::new(self.family, points)
            .and_then(|ps| information_matrix(self.model, &ps, self.theta, self.series));
        match result {
            Ok(info) if info.size().is_finite() => Ok(Score::of(&info)),
            Ok(_) => Ok(Score::INFEASIBLE),
            Err(e) if infeasible(&e) => Ok(Score::INFEASIBLE),
            Err(e) => Err(e),
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_section(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-10 * (a.abs() + b.abs()).max(1e-3) {
            break;
        }
        // ties move toward smaller t
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

/// Grid scan (ties toward smaller `t`) refined by golden-section search inside
/// the best grid bracket. Returns the maximizer, its score and whether the
/// best grid point sat on the edge of the grid with no interior improvement.
fn scan_and_refine(grid: &[f64], refine: bool, eval: &dyn Fn(f64) -> Result<Score>) -> Result<(f64, Score, bool)> {
    let scores = grid.iter().map(|&t| eval(t)).collect::<Result<Vec<Score>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.beats(&scores[best]) {
            best = i;
        }
    }
    if scores[best].key == f64::NEG_INFINITY {
        return Err(Error::InvalidPointSet("no admissible point in the search window".into()));
    }
    let (mut t_best, mut s_best) = (grid[best], scores[best]);
    if refine && grid.len() > 2 {
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(grid.len() - 1)];
        let rank = s_best.rank;
        let f = |t: f64| eval(t).map(|s| if s.rank == rank { s.key } else { f64::NEG_INFINITY });
        let (t, key) = golden_section(&f, a, b)?;
        if key > s_best.key {
            t_best = t;
            s_best = eval(t)?;
        }
    }
    let span = grid[grid.len() - 1] - grid[0];
    let at_edge = (best == 0 || best == grid.len() - 1) && (t_best - grid[best]).abs() <= 1e-6 * span;
    Ok((t_best, s_best, at_edge))
}

/// Maximizes a scalar function over `window` with the same scan-and-refine
/// rule used for point selection.
pub fn maximize_scalar(f: impl Fn(f64) -> f64, window: (f64, f64), resolution: usize) -> Result<Maximum> {
    let grid = linspace(window.0, window.1, resolution.max(3));
    let eval = |t: f64| {
        let v = f(t);
        Ok(if v.is_finite() { Score { rank: 1, key: v, info: v } } else { Score::INFEASIBLE })
    };
    let (t, score, at_edge) = scan_and_refine(&grid, true, &eval)?;
    if at_edge {
        Err(Error::NoInteriorMaximum { t, info: score.info })
    } else {
        Ok(Maximum { t, info: score.info })
    }
}

/// Maximizes the information of `fixed ∪ {t}` over the search window.
/// Moment kernels scan the integers in the window without refinement.
pub fn maximize_information_1d<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    fixed: &[f64],
    theta: &[f64],
    series: &TimeSeries,
    config: &SelectionConfig,
) -> Result<Maximum> {
    config.validate(family)?;
    let obj = Objective { model, family, fixed, theta, series };
    let (lo, hi) = config.window(family);
    let grid = linspace(lo, hi, config.grid_resolution);
    let moment = family == KernelFamily::Moment;
    let grid = if moment {
        let mut ints: Vec<f64> = grid.iter().map(|t| t.round()).filter(|&t| t >= 1.0).collect();
        ints.dedup();
        ints
    } else {
        grid
    };
    let (t, score, at_edge) = scan_and_refine(&grid, !moment, &|t| obj.eval(t))?;
    if at_edge && !moment {
        Err(Error::NoInteriorMaximum { t, info: score.info })
    } else {
        Ok(Maximum { t, info: score.info })
    }
}

/// Points of a uniform grid over the window; `k = 1` gives the left end.
pub fn uniform_points(window: (f64, f64), k: usize) -> Vec<f64> {
    let (lo, hi) = window;
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Greedy one-point-at-a-time augmentation. Boundary maxima are accepted and
/// flagged in the trace; selection stops at `k_max` or when the relative
/// information gain drops below `rel_gain_tol`.
pub fn greedy_select<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    theta: &[f64],
    series: &TimeSeries,
    config: &SelectionConfig,
) -> Result<(PointSet, InfoTrace)> {
    config.validate(family)?;
    if config.mode == SelectionMode::UniformSpacing || family == KernelFamily::Moment {
        let points = if family == KernelFamily::Moment {
            (1..=config.k_max).map(|i| i as f64).collect()
        } else {
            uniform_points(config.window(family), config.k_max)
        };
        let mut trace = InfoTrace::default();
        for k in 1..=points.len() {
            let ps = PointSet::new(family, points[..k].to_vec())?;
            let info = information_matrix(model, &ps, theta, series)?.size();
            trace.entries.push(TraceEntry { k, t: points[k - 1], info, boundary: false });
        }
        return Ok((PointSet::new(family, points)?, trace));
    }

    let mut points: Vec<f64> = Vec::new();
    let mut trace = InfoTrace::default();
    for k in 1..=config.k_max {
        let (t, info, boundary) =
            match maximize_information_1d(model, family, &points, theta, series, config) {
                Ok(m) => (m.t, m.info, false),
                Err(Error::NoInteriorMaximum { t, info }) => (t, info, true),
                Err(e) if k > 1 && matches!(e, Error::InvalidPointSet(_)) => break,
                Err(e) => return Err(e),
            };
        if let Some(prev) = trace.last_info() {
            if prev > 0.0 && info - prev < config.rel_gain_tol * prev {
                break;
            }
        }
        points.push(t);
        trace.entries.push(TraceEntry { k, t, info, boundary });
    }
    Ok((PointSet::new(family, points)?, trace))
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStepResult {
    pub theta: Vec<f64>,
    pub points: PointSet,
    pub trace: InfoTrace,
    pub iterations: usize,
    pub converged: bool,
    pub report: SolveReport,
}

pub const TWO_STEP_TOL: f64 = 1e-6;
pub const TWO_STEP_MAX_ITER: usize = 50;

/// Root of `G*(points) = 0` from `theta0`.
pub fn solve_quasi_score<M: ProcessModel + ?Sized>(
    model: &M,
    points: &PointSet,
    theta0: &[f64],
    series: &TimeSeries,
    options: &SolveOptions,
) -> Result<SolveReport> {
    let f = |theta: &[f64]| quasi_score(model, points, theta, series);
    let options = SolveOptions { decreasing_root: true, ..options.clone() };
    solve(f, theta0, &options)
}

/// Alternates point selection at the current estimate with solving the
/// quasi-score equations, until the estimate moves by less than `1e-6` or
/// after 50 rounds. With `fixed_points` the points are never reselected.
pub fn two_step_iterate<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    theta0: &[f64],
    series: &TimeSeries,
    config: &SelectionConfig,
    fixed_points: Option<&PointSet>,
) -> Result<TwoStepResult> {
    let options = SolveOptions::with_bounds(model.param_bounds());
    two_step_iterate_with(model, family, theta0, series, config, fixed_points, &options)
}

/// [`two_step_iterate`] with explicit solver options. Empty bounds default
/// to the model's parameter domain.
pub fn two_step_iterate_with<M: ProcessModel + ?Sized>(
    model: &M,
    family: KernelFamily,
    theta0: &[f64],
    series: &TimeSeries,
    config: &SelectionConfig,
    fixed_points: Option<&PointSet>,
    options: &SolveOptions,
) -> Result<TwoStepResult> {
    model.check_params(theta0)?;
    let mut options = options.clone();
    if options.bounds.is_empty() {
        options.bounds = model.param_bounds();
    }
    let mut theta = theta0.to_vec();
    let mut current: Option<(PointSet, InfoTrace)> = None;
    let mut last_report: Option<SolveReport> = None;
    for iteration in 1..=TWO_STEP_MAX_ITER {
        let reselect = match (&current, fixed_points) {
            (_, Some(_)) => false,
            (None, None) => true,
            (Some(_), None) => !config.refresh_once,
        };
        if reselect {
            current = Some(greedy_select(model, family, &theta, series, config)?);
        } else if current.is_none() {
            let ps = fixed_points.expect("fixed points").clone();
            if ps.family() != family {
                return Err(Error::InvalidPointSet("fixed points use a different kernel family".into()));
            }
            let info = information_matrix(model, &ps, &theta, series)?.size();
            let trace = InfoTrace {
                entries: vec![TraceEntry { k: ps.len(), t: *ps.points().last().unwrap(), info, boundary: false }],
            };
            current = Some((ps, trace));
        }
        let (points, trace) = current.clone().expect("points selected");
        let outcome = solve_quasi_score(model, &points, &theta, series, &options);
        let report = match best_report(&outcome) {
            Some(r) => r.clone(),
            None => return Err(outcome.unwrap_err()),
        };
        let step = report
            .theta
            .iter()
            .zip(&theta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        theta = report.theta.clone();
        let solved = report.converged;
        last_report = Some(report.clone());
        let fixed = fixed_points.is_some() || (config.refresh_once && iteration > 1);
        if (solved && (step < TWO_STEP_TOL || fixed_points.is_some())) || (fixed && !solved) {
            return Ok(TwoStepResult { theta, points, trace, iterations: iteration, converged: solved, report });
        }
    }
    let (points, trace) = current.expect("points selected");
    Ok(TwoStepResult {
        theta,
        points,
        trace,
        iterations: TWO_STEP_MAX_ITER,
        converged: false,
        report: last_report.expect("at least one solve"),
    })
}
