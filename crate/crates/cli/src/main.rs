mod config;
mod model;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tmef::models::{simulate, stable_efficiency_table, stable_information_factor};
use tmef::selection::{two_step_iterate_with, SelectionMode, TwoStepResult};
use tmef::solver::SolveOptions;
use tmef::{
    efficiency, greedy_select, information_matrix, Error, KernelFamily, PointSet,
    SelectionConfig, SimSpec, TimeSeries,
};

use model::{BuiltModel, ModelArgs, ModelKind};

/// Transform martingale estimating functions for Markov time series.
#[derive(Parser)]
#[command(name = "tmef", version, about)]
struct Cli {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series and write it as CSV with header `y`.
    Simulate(SimulateArgs),
    /// Two-step estimation: select points, solve, repeat.
    Estimate(EstimateArgs),
    /// Greedy point selection at a fixed parameter value.
    SelectPoints(SelectArgs),
    /// Information of a single transform point over a grid, as CSV.
    InfoCurve(CurveArgs),
    /// Optimal one-point efficiency for stable AR(1) innovations.
    Table1,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct SelectionArgs {
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelFamily>,
    /// Maximum number of points.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Search window `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Stop adding points when the relative gain falls below this.
    #[arg(long, default_value_t = 1e-3)]
    gain_tol: f64,
    /// Evenly spaced points over the window instead of optimized ones.
    #[arg(long)]
    uniform: bool,
    /// Comma-separated starting value; a preliminary estimate when omitted.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Explicit comma-separated points; selection is skipped.
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    /// Select points only once, at the preliminary estimate.
    #[arg(long)]
    refresh_once: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulate and estimate this many independent series instead of reading `--input`.
    #[arg(long)]
    replicates: Option<usize>,
    /// Series length for `--replicates`.
    #[arg(long)]
    n: Option<usize>,
    /// Newton iterations per solve.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Residual tolerance relative to the starting residual.
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
}

#[derive(Args, Serialize)]
struct SelectArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Serialize)]
struct CurveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelFamily>,
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Points already in the set; the curve is the information of these plus `t`.
    #[arg(long, allow_hyphen_values = true)]
    with_points: Option<String>,
    /// Required unless the model is stable-ar1 with the cf kernel.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
}

fn parse_kernel(s: &str) -> Result<KernelFamily, String> {
    s.parse()
}

enum Failure {
    Io(String),
    Invalid(String),
    Unconverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence(_) | Error::SingularJacobian(_) => {
                eprintln!("error: {e}");
                Failure::Unconverged
            }
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let args = match config::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(config::ConfigError::Io(m)) => return report(Failure::Io(m)),
        Err(config::ConfigError::Invalid(m)) => return report(Failure::Invalid(m)),
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::SelectPoints(a) => cmd_select(a),
        Command::InfoCurve(a) => cmd_info_curve(a),
        Command::Table1 => {
            emit(&table1_text())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Io(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Failure::Invalid(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Failure::Unconverged => ExitCode::from(3),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Invalid(format!("--{what}: '{x}' is not a number"))))
        .collect()
}

fn read_series(path: &Path) -> Result<TimeSeries, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == "y") {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|_| Failure::Invalid(format!("{}:{}: '{line}' is not a number", path.display(), i + 1)))?;
        values.push(v);
    }
    Ok(TimeSeries::new(values)?)
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => emit(text),
    }
}

fn emit(text: &str) -> CmdResult {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| Failure::Io(format!("standard output: {e}")))
}

fn emit_json(v: &Value) -> CmdResult {
    emit(&(serde_json::to_string_pretty(v).expect("json") + "\n"))
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let built = a.model.build()?;
    let theta = built.params()?;
    let series = simulate(&built.model, &SimSpec::new(theta, a.n, a.seed))?;
    let mut csv = String::with_capacity(24 * a.n + 2);
    csv.push_str("y\n");
    for y in series.values() {
        writeln!(csv, "{y:?}").unwrap();
    }
    write_output(a.out.as_deref(), &csv)
}

impl SelectionArgs {
    fn family(&self, built: &BuiltModel) -> KernelFamily {
        self.kernel.unwrap_or_else(|| built.default_kernel())
    }

    fn config(&self, refresh_once: bool) -> Result<SelectionConfig, Failure> {
        let search_window = match &self.window {
            Some(w) => match parse_list(w, "window")?.as_slice() {
                &[lo, hi] => Some((lo, hi)),
                _ => return Err(Failure::Invalid("--window expects lo,hi".into())),
            },
            None => None,
        };
        Ok(SelectionConfig {
            k_max: self.k,
            search_window,
            grid_resolution: self.grid,
            rel_gain_tol: self.gain_tol,
            mode: if self.uniform { SelectionMode::UniformSpacing } else { SelectionMode::GreedyOptimal },
            refresh_once,
        })
    }

    fn theta0(&self, built: &BuiltModel, series: &TimeSeries) -> Result<Vec<f64>, Failure> {
        match &self.theta0 {
            Some(s) => Ok(parse_list(s, "theta0")?),
            None => Ok(tmef::solver::preliminary_estimate(&built.model, series)?),
        }
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    param_names: Vec<String>,
    theta_hat: Vec<f64>,
    kernel: KernelFamily,
    points: Vec<f64>,
    info_matrix: tmef::InfoMatrix,
    info_det: f64,
    efficiency_vs_reference: Option<f64>,
    iterations: usize,
    converged: bool,
    residual_norm: f64,
    multiple_roots: bool,
    trace: tmef::selection::InfoTrace,
}

fn estimate_series(
    a: &EstimateArgs,
    built: &BuiltModel,
    series: &TimeSeries,
    fixed: Option<&PointSet>,
) -> Result<EstimateOutput, Failure> {
    let family = a.selection.family(built);
    let cfg = a.selection.config(a.refresh_once)?;
    let theta0 = a.selection.theta0(built, series)?;
    let options = SolveOptions { max_iter: a.max_iter, rel_tol: a.rel_tol, ..Default::default() };
    let r: TwoStepResult = two_step_iterate_with(&built.model, family, &theta0, series, &cfg, fixed, &options)?;
    let info = information_matrix(&built.model, &r.points, &r.theta, series)?;
    let efficiency_vs_reference =
        built.reference_information(&r.theta, series).and_then(|reference| efficiency(&info, &reference).ok());
    Ok(EstimateOutput {
        param_names: built.model.param_names(),
        theta_hat: r.theta,
        kernel: family,
        points: r.points.points().to_vec(),
        info_det: info.det(),
        info_matrix: info,
        efficiency_vs_reference,
        iterations: r.iterations,
        converged: r.converged,
        residual_norm: r.report.residual_norm,
        multiple_roots: r.report.multiple_roots,
        trace: r.trace,
    })
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

fn cmd_estimate(a: EstimateArgs) -> CmdResult {
    let built = a.model.build()?;
    let family = a.selection.family(&built);
    let fixed = match &a.points {
        Some(s) => Some(PointSet::new(family, parse_list(s, "points")?)?),
        None => None,
    };
    let (body, all_converged) = match a.replicates {
        None => {
            let path = a.input.as_deref().ok_or_else(|| Failure::Invalid("estimate needs --input or --replicates".into()))?;
            let series = read_series(path)?;
            let out = estimate_series(&a, &built, &series, fixed.as_ref())?;
            let converged = out.converged;
            (to_json(&out), converged)
        }
        Some(reps) => {
            let n = a.n.ok_or_else(|| Failure::Invalid("--replicates needs --n".into()))?;
            let truth = built.params()?;
            let seed = a.seed.unwrap_or(0);
            let runs: Vec<Result<EstimateOutput, Failure>> = (0..reps as u64)
                .into_par_iter()
                .map(|stream| {
                    let series = simulate(&built.model, &SimSpec::new(truth.clone(), n, seed).with_stream(stream))?;
                    estimate_series(&a, &built, &series, fixed.as_ref())
                })
                .collect();
            let mut outputs = Vec::with_capacity(reps);
            for r in runs {
                match r {
                    Ok(o) => outputs.push(Some(o)),
                    Err(Failure::Unconverged) => outputs.push(None),
                    Err(f) => return Err(f),
                }
            }
            let converged = outputs.iter().all(|o| o.as_ref().is_some_and(|o| o.converged));
            (json!({ "truth": truth, "summary": summarize(&outputs), "replicates": outputs }), converged)
        }
    };
    let mut body = body;
    body["seed"] = json!(a.seed);
    body["config"] = to_json(&a);
    emit_json(&body)?;
    if all_converged {
        Ok(())
    } else {
        Err(Failure::Unconverged)
    }
}

/// Per-component mean and sample variance of the converged estimates, and
/// the mean of the diagonal of the inverse information.
fn summarize(outputs: &[Option<EstimateOutput>]) -> Value {
    let ok: Vec<&EstimateOutput> = outputs.iter().flatten().filter(|o| o.converged).collect();
    let p = ok.first().map_or(0, |o| o.theta_hat.len());
    let m = ok.len() as f64;
    let mut mean = vec![0.0; p];
    let mut var = vec![0.0; p];
    let mut inv_info = vec![0.0; p];
    for i in 0..p {
        mean[i] = ok.iter().map(|o| o.theta_hat[i]).sum::<f64>() / m;
        var[i] = ok.iter().map(|o| (o.theta_hat[i] - mean[i]).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        inv_info[i] = ok
            .iter()
            .map(|o| o.info_matrix.matrix().clone().try_inverse().map_or(f64::NAN, |inv| inv[(i, i)]))
            .sum::<f64>()
            / m;
    }
    json!({ "converged": ok.len(), "mean": mean, "variance": var, "mean_inverse_information": inv_info })
}

fn cmd_select(a: SelectArgs) -> CmdResult {
    let built = a.model.build()?;
    let series = read_series(&a.input)?;
    let family = a.selection.family(&built);
    let theta = a.selection.theta0(&built, &series)?;
    let (points, trace) = greedy_select(&built.model, family, &theta, &series, &a.selection.config(false)?)?;
    let body = json!({
        "kernel": family,
        "theta": theta,
        "points": points.points(),
        "trace": trace,
        "config": to_json(&a),
    });
    emit_json(&body)
}

fn grid(window: (f64, f64), m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![window.0],
        _ => (0..m).map(|i| window.0 + (window.1 - window.0) * i as f64 / (m - 1) as f64).collect(),
    }
}

fn cmd_info_curve(a: CurveArgs) -> CmdResult {
    let built = a.model.build()?;
    let family = a.kernel.unwrap_or_else(|| built.default_kernel());
    let window = match &a.window {
        Some(w) => match parse_list(w, "window")?.as_slice() {
            &[lo, hi] if lo <= hi => (lo, hi),
            _ => return Err(Failure::Invalid("--window expects lo,hi with lo <= hi".into())),
        },
        None => family.default_window(),
    };
    let with = match &a.with_points {
        Some(s) => parse_list(s, "with-points")?,
        None => vec![],
    };
    let mut csv = String::from("t,information\n");
    if built.kind == ModelKind::StableAr1 && family == KernelFamily::CfReal && with.is_empty() && a.input.is_none() {
        let alpha = a.model.alpha.expect("checked by build");
        for t in grid(window, a.grid) {
            writeln!(csv, "{t:?},{:?}", stable_information_factor(t, alpha)).unwrap();
        }
        return emit(&csv);
    }
    let path = a.input.as_deref().ok_or_else(|| Failure::Invalid("info-curve needs --input for this model".into()))?;
    let series = read_series(path)?;
    let theta = match &a.theta0 {
        Some(s) => parse_list(s, "theta0")?,
        None => tmef::solver::preliminary_estimate(&built.model, &series)?,
    };
    for t in grid(window, a.grid) {
        let mut pts = with.clone();
        pts.push(t);
        let value = PointSet::new(family, pts)
            .and_then(|ps| information_matrix(&built.model, &ps, &theta, &series))
            .map_or(f64::NAN, |i| i.size());
        writeln!(csv, "{t:?},{value:?}").unwrap();
    }
    emit(&csv)
}

fn table1_text() -> String {
    let mut s = String::new();
    writeln!(s, "{:>5}  {:>7}  {:>7}  {:>7}  {:>10}", "alpha", "t*", "factor", "fisher", "efficiency").unwrap();
    for row in stable_efficiency_table() {
        let note = if row.limit { "  (t -> 0 limit)" } else { "" };
        writeln!(
            s,
            "{:>5.1}  {:>7.4}  {:>7.4}  {:>7.3}  {:>10.4}{note}",
            row.alpha, row.t_star, row.factor, row.fisher, row.efficiency
        )
        .unwrap();
    }
    s
}
