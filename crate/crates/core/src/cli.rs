//! The `pinchlab` command line.
//!
//! Every subcommand produces a report (CSV or JSON) and an exit status:
//! `0` when every check passes, `1` when a mathematical check fails (a
//! counterexample file is written next to the report), `2` for usage or input
//! errors. Reports depend only on the configuration and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ghk;
use crate::inequality::{
    fuzz_inequality, gap_report, FuzzConfig, Generator, InequalityGapReport, Method, Resolution,
    DEFAULT_TOL_GAP,
};
use crate::matrix::{self, CurvatureField, FieldSpec, LyapunovReport, MatrixOptions};
use crate::pinching::{self, BumpFunction, BumpKind, ConformalPerturbation, PinchingMethod};
use crate::quadrature::log_space;
use crate::riccati::{self, ScalarForcing, SolverOptions};
use crate::signals::{PeriodicProfile, ProfileSpec, StepProfile};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = concat!("pinchlab ", env!("CARGO_PKG_VERSION"));

const GRAMMAR_HELP: &str = "\
Inline profiles (--profile, --forcing):
  constant            the constant 1
  constant:c          the constant c
  step:C1,e1;C2,e2    piecewise constant, value C_j on a piece of length e_j
  trig:c0,s1,c1,...   c0 + s1 sin(2πt) + c1 cos(2πt) + s2 sin(4πt) + ...
  grid:v1,v2,...      uniform samples at j/M, linear interpolation
  {...} or file.json  JSON profile, e.g. {\"kind\":\"step\",\"values\":[..],\"lengths\":[..]}
Grids (--h-grid, --a-grid):
  log:lo:hi:n         n log-spaced points
  lin:lo:hi:n         n evenly spaced points
  x1,x2,...           explicit list";

#[derive(Parser, Debug, Serialize)]
#[command(name = "pinchlab", version, about = "Periodic Riccati, bunching and pinching checks", after_help = GRAMMAR_HELP)]
pub struct Cli {
    /// Seed for every randomized component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override the command's default check tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Re-run the instance stored in a counterexample file.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub replay: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// The integral inequality for positive periodic profiles of average one.
    #[command(subcommand)]
    Inequality(InequalityCmd),
    /// Scalar periodic Riccati solutions and the functional Λ.
    #[command(subcommand)]
    Riccati(RiccatiCmd),
    /// Matrix Riccati solutions, eigenvalue tracks and bunching.
    #[command(subcommand)]
    Matrix(MatrixCmd),
    /// Pointwise versus averaged ratios for the two-level step forcing.
    Ghk(GhkArgs),
    /// Pinching constants of the conformally perturbed hyperbolic metric.
    Pinching(PinchingArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityCmd {
    /// Evaluate both sides for one profile over a grid of h.
    Check(CheckArgs),
    /// Seeded random profiles over a grid of h.
    Fuzz(FuzzArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Closed form for well-distributed step profiles (cross-checked by
    /// quadrature), quadrature otherwise.
    Auto,
    Quadrature,
    ClosedForm,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    /// Profile; renormalized to average one if needed.
    #[arg(long, default_value = "constant")]
    pub profile: String,
    #[arg(long = "h-grid", alias = "h", default_value = "1")]
    pub h_grid: String,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    pub method: MethodChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    Constant,
    WellDistributedStep,
    GeneralStep,
    Trig,
    Mixed,
}

impl From<GeneratorChoice> for Generator {
    fn from(g: GeneratorChoice) -> Self {
        match g {
            GeneratorChoice::Constant => Generator::Constant,
            GeneratorChoice::WellDistributedStep => Generator::WellDistributedStep,
            GeneratorChoice::GeneralStep => Generator::GeneralStep,
            GeneratorChoice::Trig => Generator::Trig,
            GeneratorChoice::Mixed => Generator::Mixed,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = GeneratorChoice::Mixed)]
    pub generator: GeneratorChoice,
    #[arg(long = "h-grid", alias = "h", default_value = "log:0.01:100:17")]
    pub h_grid: String,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiccatiCmd {
    /// Λ(a) and Λ(a)/a over a grid of a, with both monotonicity checks.
    LambdaCurve(LambdaArgs),
    /// ∫ν from the closed formula against a centered finite difference.
    Dnu(HArgs),
    /// The inequality instance built from the normalized solution.
    Reduction(HArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct LambdaArgs {
    #[arg(long, default_value = "trig:1,0.5")]
    pub forcing: String,
    #[arg(long = "a-grid", default_value = "log:0.05:20:32")]
    pub a_grid: String,
    /// Integration steps per period.
    #[arg(long, default_value_t = 8192)]
    pub steps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct HArgs {
    #[arg(long, default_value = "trig:1,0.5")]
    pub forcing: String,
    #[arg(long = "h-grid", alias = "h", default_value = "1")]
    pub h_grid: String,
    #[arg(long, default_value_t = 8192)]
    pub steps: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixCmd {
    /// Full bunching pipeline on one field.
    Demo(DemoArgs),
    /// Bunching pipeline on seeded random fields.
    Fuzz(MatrixFuzzArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DemoArgs {
    /// Expected dimension; checked against the field.
    #[arg(long)]
    pub dim: Option<usize>,
    /// `K = -diag(d1, d2, ...)`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["rotating", "spec", "crossing"])]
    pub constant_diag: Option<Vec<f64>>,
    /// `K = -R diag(d1, d2) Rᵀ` with `R` the rotation by 2πt.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with_all = ["spec", "crossing"])]
    pub rotating: Option<Vec<f64>>,
    /// `-K = I + (c/2) cos(2πt) diag(1, -1)`, whose curvatures cross.
    #[arg(long, conflicts_with = "spec")]
    pub crossing: Option<f64>,
    /// JSON field specification.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub periods: usize,
    #[arg(long, default_value_t = 8192)]
    pub steps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct MatrixFuzzArgs {
    /// Field dimension; alternates 2 and 3 when omitted.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub periods: usize,
    #[arg(long, default_value_t = 8192)]
    pub steps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GhkArgs {
    #[arg(long, default_value_t = 50.0)]
    pub a1: f64,
    /// One or more values of ε; `a2 = a1/ε`.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Leading,
    Exact,
}

impl From<MethodArg> for PinchingMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Leading => PinchingMethod::Leading,
            MethodArg::Exact => PinchingMethod::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpArg {
    Odd,
    Even,
}

#[derive(Args, Debug, Serialize)]
pub struct PinchingArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
    /// Sweep these ε values and fit the exact-vs-leading deviation slope.
    #[arg(long, value_delimiter = ',')]
    pub sweep_eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4096)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = BumpArg::Odd)]
    pub bump: BumpArg,
    /// Also write `(r, w, exact, leading)` curvature samples as CSV here.
    #[arg(long)]
    #[serde(skip)]
    pub dump_grid: Option<PathBuf>,
}

/// A failing instance, enough to re-run the check with `--replay`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterexample {
    Inequality {
        profile: ProfileSpec,
        h: Vec<f64>,
        method: MethodChoice,
        tol: f64,
    },
    LambdaCurve {
        forcing: ProfileSpec,
        a_grid: Vec<f64>,
        steps: usize,
        tol: f64,
    },
    Dnu {
        forcing: ProfileSpec,
        h: Vec<f64>,
        steps: usize,
        tol: f64,
    },
    Reduction {
        forcing: ProfileSpec,
        h: Vec<f64>,
        steps: usize,
        tol: f64,
    },
    Matrix {
        field: FieldSpec,
        periods: usize,
        steps: usize,
    },
    Ghk {
        a1: f64,
        eps: Vec<f64>,
        tol: f64,
    },
    Pinching {
        eps: Vec<f64>,
        alpha: f64,
        r0: f64,
        method: MethodArg,
        bump: BumpArg,
        grid_points: usize,
        sweep: bool,
        tol: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct CounterexampleFile {
    schema_version: u32,
    counterexample: Counterexample,
}

/// Result of one command before formatting.
pub struct Outcome {
    pub command: String,
    pub header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
    pub json_rows: Vec<Value>,
    pub pass: bool,
    pub summary: Value,
    pub worst: Option<Value>,
    pub counterexample: Option<Counterexample>,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else {
        format!("{x}")
    }
}

fn parse_err(field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(field, format!("`{s}`: {e}")))
}

fn parse_floats(field: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_f64(field, x)).collect()
}

/// Parses the inline profile grammar, inline JSON, or a JSON file path.
pub fn parse_profile(field: &str, s: &str) -> Result<PeriodicProfile> {
    let s = s.trim();
    let json_spec = |text: &str| -> Result<PeriodicProfile> {
        let spec: ProfileSpec = serde_json::from_str(text).map_err(|e| {
            parse_err(
                field,
                format!("line {}, column {}: {e}", e.line(), e.column()),
            )
        })?;
        PeriodicProfile::from_spec(&spec)
    };
    if s.starts_with('{') {
        return json_spec(s);
    }
    if s.ends_with(".json") {
        let text = fs::read_to_string(s).map_err(|e| parse_err(field, format!("{s}: {e}")))?;
        return json_spec(&text);
    }
    let (kind, body) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "constant" if body.is_empty() => PeriodicProfile::constant(1.0),
        "constant" => PeriodicProfile::constant(parse_f64(field, body)?),
        "step" => {
            let mut values = Vec::new();
            let mut lengths = Vec::new();
            for (i, piece) in body.split(';').enumerate() {
                let parts = parse_floats(field, piece)?;
                if parts.len() != 2 {
                    return Err(parse_err(
                        field,
                        format!("step piece {} must be `C,e`, got `{piece}`", i + 1),
                    ));
                }
                values.push(parts[0]);
                lengths.push(parts[1]);
            }
            PeriodicProfile::step(values, lengths)
        }
        "trig" => {
            let c = parse_floats(field, body)?;
            let mut sin = Vec::new();
            let mut cos = Vec::new();
            for (i, x) in c.iter().enumerate().skip(1) {
                if i % 2 == 1 {
                    sin.push(*x);
                } else {
                    cos.push(*x);
                }
            }
            cos.resize(sin.len(), 0.0);
            PeriodicProfile::trig(c[0], cos, sin)
        }
        "grid" => PeriodicProfile::grid(parse_floats(field, body)?),
        other => Err(parse_err(
            field,
            format!("unknown profile kind `{other}` (constant, step, trig, grid, JSON)"),
        )),
    }
}

/// Parses `log:lo:hi:n`, `lin:lo:hi:n` or a comma-separated list.
pub fn parse_grid(field: &str, s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("log" | "lin"), lo, hi, n] => {
            let lo = parse_f64(field, lo)?;
            let hi = parse_f64(field, hi)?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|e| parse_err(field, format!("point count `{n}`: {e}")))?;
            if n == 0 || !(lo < hi || n == 1) {
                return Err(parse_err(field, "need n ≥ 1 and lo < hi"));
            }
            if *kind == "log" {
                if lo <= 0.0 {
                    return Err(parse_err(field, "log grid needs lo > 0"));
                }
                log_space(lo, hi, n)
            } else if n == 1 {
                vec![lo]
            } else {
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
        [_] => parse_floats(field, s)?,
        _ => return Err(parse_err(field, format!("unrecognized grid `{s}`"))),
    };
    if grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(parse_err(field, "grid values must be positive and finite"));
    }
    Ok(grid)
}

fn gap_row(r: &InequalityGapReport) -> Vec<String> {
    vec![
        r.profile_id.clone(),
        r.n.to_string(),
        num(r.h),
        num(r.lhs),
        num(r.rhs),
        num(r.gap),
        num(r.ratio),
        r.method.as_str().to_string(),
        r.resolution.to_string(),
    ]
}

const GAP_HEADER: [&str; 9] = [
    "profile_id",
    "N",
    "h",
    "lhs",
    "rhs",
    "gap",
    "ratio",
    "method",
    "resolution",
];

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

pub fn run_inequality_check(
    profile_id: &str,
    profile: &PeriodicProfile,
    h_grid: &[f64],
    method: MethodChoice,
    tol: f64,
) -> Result<Outcome> {
    let res = Resolution::default();
    let profile = if (profile.mean() - 1.0).abs() > 1e-12 {
        profile.normalized()
    } else {
        profile.clone()
    };
    let well_distributed = StepProfile::from_profile(&profile)
        .map(|s| s.is_well_distributed())
        .unwrap_or(false);
    let mut rows = Vec::new();
    let mut cross_check = 0.0f64;
    for &h in h_grid {
        let mut r = match method {
            MethodChoice::Quadrature => gap_report(&profile, h, Method::Quadrature, &res)?,
            MethodChoice::ClosedForm => gap_report(&profile, h, Method::ClosedForm, &res)?,
            MethodChoice::Auto if well_distributed => {
                let cf = gap_report(&profile, h, Method::ClosedForm, &res)?;
                let quad = gap_report(&profile, h, Method::Quadrature, &res)?;
                let allowed = 1e-8f64.max(quad.error_estimate);
                cross_check = cross_check.max((cf.rhs - quad.rhs).abs() / allowed);
                cf
            }
            MethodChoice::Auto => gap_report(&profile, h, Method::Quadrature, &res)?,
        };
        r.profile_id = profile_id.to_string();
        rows.push(r);
    }
    let pass = rows.iter().all(|r| r.passes(tol)) && cross_check <= 1.0;
    let worst = rows
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .expect("non-empty grid");
    Ok(Outcome {
        command: "inequality check".into(),
        header: GAP_HEADER.to_vec(),
        csv_rows: rows.iter().map(gap_row).collect(),
        json_rows: rows.iter().map(to_json).collect(),
        pass,
        summary: json!({
            "min_gap": worst.gap,
            "tol_gap": tol,
            "well_distributed": well_distributed,
            "closed_form_quadrature_disagreement": cross_check,
        }),
        worst: Some(to_json(worst)),
        counterexample: (!pass).then(|| Counterexample::Inequality {
            profile: profile.to_spec(),
            h: h_grid.to_vec(),
            method,
            tol,
        }),
    })
}

pub fn run_inequality_fuzz(
    generator: Generator,
    count: usize,
    h_grid: &[f64],
    seed: u64,
    tol: f64,
) -> Result<Outcome> {
    let mut cfg = FuzzConfig::new(generator, count, h_grid.to_vec(), seed);
    cfg.tol_gap = tol;
    let out = fuzz_inequality(&cfg)?;
    Ok(Outcome {
        command: "inequality fuzz".into(),
        header: GAP_HEADER.to_vec(),
        csv_rows: out.per_instance.iter().map(gap_row).collect(),
        json_rows: out.per_instance.iter().map(to_json).collect(),
        pass: out.pass,
        summary: json!({
            "instances": out.instances,
            "evaluations": out.evaluations,
            "min_gap": out.min_gap,
            "tol_gap": tol,
        }),
        worst: Some(to_json(&out.worst)),
        counterexample: (!out.pass).then(|| Counterexample::Inequality {
            profile: out.worst.profile.clone(),
            h: h_grid.to_vec(),
            method: MethodChoice::Quadrature,
            tol,
        }),
    })
}

fn solver_opts(steps: usize) -> SolverOptions {
    SolverOptions {
        steps,
        ..SolverOptions::default()
    }
}

pub fn run_lambda_curve(
    forcing: &PeriodicProfile,
    a_grid: &[f64],
    steps: usize,
    tol: f64,
) -> Result<Outcome> {
    let f = ScalarForcing::new(forcing.clone());
    let curve = riccati::lambda_curve(&f, a_grid, &solver_opts(steps), tol)?;
    let energy_ok = curve.points.iter().all(|p| p.energy_error <= 1e-8);
    let pass = curve.pass() && energy_ok;
    Ok(Outcome {
        command: "riccati lambda-curve".into(),
        header: vec![
            "a",
            "Lambda",
            "Lambda_over_a",
            "residual",
            "energy_identity_error",
        ],
        csv_rows: curve
            .points
            .iter()
            .map(|p| {
                vec![
                    num(p.a),
                    num(p.lambda),
                    num(p.lambda_over_a),
                    num(p.residual),
                    num(p.energy_error),
                ]
            })
            .collect(),
        json_rows: curve.points.iter().map(to_json).collect(),
        pass,
        summary: json!({
            "forcing": forcing.to_spec(),
            "tolerance": tol,
            "increasing_violations": curve.increasing_violations,
            "ratio_violations": curve.ratio_violations,
            "cauchy_schwarz_violations": curve.cauchy_schwarz_violations,
            "energy_identity_ok": energy_ok,
        }),
        worst: None,
        counterexample: (!pass).then(|| Counterexample::LambdaCurve {
            forcing: forcing.to_spec(),
            a_grid: a_grid.to_vec(),
            steps,
            tol,
        }),
    })
}

/// Relative tolerance of the ν check; looser for small `h`, where the
/// finite difference of `g` is limited by solver round-off.
fn dnu_tolerance(h: f64) -> f64 {
    if h < 0.1 {
        1e-4
    } else {
        1e-6
    }
}

pub fn run_dnu(
    forcing: &PeriodicProfile,
    h_grid: &[f64],
    steps: usize,
    tol: f64,
) -> Result<Outcome> {
    let f = ScalarForcing::new(forcing.clone());
    let opts = solver_opts(steps);
    let mut csv_rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut pass = true;
    for &h in h_grid {
        let nu = riccati::dmu_dh(&f, h, &opts)?;
        let fd = riccati::finite_difference_dg(&f, h, &opts)?;
        let rel = (nu.integral - fd).abs() / fd.abs().max(1e-300);
        let abs = (nu.integral - fd).abs();
        let agrees = rel <= dnu_tolerance(h) || abs <= 1e-12;
        let ok = nu.integral >= -tol && agrees;
        pass &= ok;
        csv_rows.push(vec![
            num(h),
            num(nu.mu_integral),
            num(nu.integral),
            num(fd),
            num(rel),
            ok.to_string(),
        ]);
        json_rows.push(json!({
            "h": h, "mu_integral": nu.mu_integral, "nu_integral": nu.integral,
            "finite_difference": fd, "relative_error": rel, "pass": ok,
        }));
    }
    Ok(Outcome {
        command: "riccati dnu".into(),
        header: vec![
            "h",
            "mu_integral",
            "nu_integral",
            "finite_difference",
            "relative_error",
            "pass",
        ],
        csv_rows,
        json_rows,
        pass,
        summary: json!({ "forcing": forcing.to_spec(), "nu_floor": -tol }),
        worst: None,
        counterexample: (!pass).then(|| Counterexample::Dnu {
            forcing: forcing.to_spec(),
            h: h_grid.to_vec(),
            steps,
            tol,
        }),
    })
}

pub fn run_reduction(
    forcing: &PeriodicProfile,
    h_grid: &[f64],
    steps: usize,
    tol: f64,
) -> Result<Outcome> {
    let f = ScalarForcing::new(forcing.clone());
    let opts = solver_opts(steps);
    let res = Resolution::default();
    let mut csv_rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut pass = true;
    for &h in h_grid {
        let r = riccati::reduction_to_inequality(&f, h, &opts, &res)?;
        let ok = r.gap.gap >= -tol && (r.gap.gap < 0.0 || r.nu_integral >= -1e-10);
        pass &= ok;
        csv_rows.push(vec![
            num(h),
            num(r.h_rescaled),
            num(r.mu_mean),
            num(r.gap.lhs),
            num(r.gap.rhs),
            num(r.gap.gap),
            num(r.nu_integral),
            num(r.nu_from_gap),
            ok.to_string(),
        ]);
        json_rows.push(to_json(&r));
    }
    Ok(Outcome {
        command: "riccati reduction".into(),
        header: vec![
            "h",
            "h_rescaled",
            "mu_mean",
            "lhs",
            "rhs",
            "gap",
            "nu_integral",
            "nu_from_gap",
            "pass",
        ],
        csv_rows,
        json_rows,
        pass,
        summary: json!({ "forcing": forcing.to_spec(), "tol_gap": tol }),
        worst: None,
        counterexample: (!pass).then(|| Counterexample::Reduction {
            forcing: forcing.to_spec(),
            h: h_grid.to_vec(),
            steps,
            tol,
        }),
    })
}

const MATRIX_HEADER: [&str; 8] = [
    "a",
    "int_lambda_minus",
    "int_lambda_plus",
    "bunching_ratio",
    "one_over_a",
    "lyap_minus",
    "lyap_plus",
    "residual",
];

fn matrix_row(r: &LyapunovReport) -> Vec<String> {
    vec![
        num(r.a),
        num(r.int_lambda_minus),
        num(r.int_lambda_plus),
        num(r.bunching_ratio),
        num(r.one_over_a),
        num(r.lyap_minus),
        num(r.lyap_plus),
        num(r.residual),
    ]
}

fn matrix_outcome(
    command: &str,
    runs: Vec<(CurvatureField, LyapunovReport)>,
    periods: usize,
    steps: usize,
) -> Outcome {
    let pass = runs.iter().all(|(_, r)| r.pass);
    let failing = runs.iter().find(|(_, r)| !r.pass);
    let worst = runs
        .iter()
        .max_by(|a, b| (a.1.bunching_ratio * a.1.a).total_cmp(&(b.1.bunching_ratio * b.1.a)))
        .map(|(f, r)| json!({ "field": f.to_spec(), "report": r }));
    Outcome {
        command: command.into(),
        header: MATRIX_HEADER.to_vec(),
        csv_rows: runs.iter().map(|(_, r)| matrix_row(r)).collect(),
        json_rows: runs.iter().map(|(_, r)| to_json(r)).collect(),
        pass,
        summary: json!({
            "fields": runs.len(),
            "periods": periods,
            "bunching_tol": matrix::BUNCHING_TOL,
            "sandwich_tol": matrix::SANDWICH_TOL,
            "exponent_tol": matrix::EXPONENT_TOL,
        }),
        worst,
        counterexample: failing.map(|(f, _)| Counterexample::Matrix {
            field: f.to_spec(),
            periods,
            steps,
        }),
    }
}

fn matrix_opts(steps: usize) -> MatrixOptions {
    MatrixOptions {
        steps,
        ..MatrixOptions::default()
    }
}

pub fn run_matrix_field(field: CurvatureField, periods: usize, steps: usize) -> Result<Outcome> {
    let report = matrix::bunching_check(&field, &matrix_opts(steps), periods)?;
    Ok(matrix_outcome(
        "matrix demo",
        vec![(field, report)],
        periods,
        steps,
    ))
}

pub fn run_matrix_fuzz(
    dim: Option<usize>,
    count: usize,
    seed: u64,
    periods: usize,
    steps: usize,
) -> Result<Outcome> {
    let runs = matrix::matrix_fuzz(dim, count, seed, &matrix_opts(steps), periods)?;
    Ok(matrix_outcome("matrix fuzz", runs, periods, steps))
}

pub fn run_ghk(a1: f64, eps: &[f64], tol: f64) -> Result<Outcome> {
    let rows = eps
        .iter()
        .map(|&e| ghk::ghk_row(a1, e))
        .collect::<Result<Vec<_>>>()?;
    let pass = rows.iter().all(|r| r.pass(tol));
    Ok(Outcome {
        command: "ghk".into(),
        header: vec![
            "a1",
            "a2",
            "eps",
            "t0",
            "t1",
            "pointwise_ratio_at_t",
            "two_eps_sq",
            "avg_ratio",
            "a1_over_a2",
        ],
        csv_rows: rows
            .iter()
            .map(|r| {
                vec![
                    num(r.a1),
                    num(r.a2),
                    num(r.eps),
                    num(r.t0),
                    num(r.t1),
                    num(r.pointwise_ratio_at_t),
                    num(r.two_eps_sq),
                    num(r.avg_ratio),
                    num(r.a1_over_a2),
                ]
            })
            .collect(),
        json_rows: rows.iter().map(to_json).collect(),
        pass,
        summary: json!({ "tol": tol }),
        worst: None,
        counterexample: (!pass).then(|| Counterexample::Ghk {
            a1,
            eps: eps.to_vec(),
            tol,
        }),
    })
}

fn bump(b: BumpArg) -> BumpFunction {
    BumpFunction::new(match b {
        BumpArg::Odd => BumpKind::Odd,
        BumpArg::Even => BumpKind::Even,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run_pinching(
    eps: &[f64],
    alpha: f64,
    r0: f64,
    method: MethodArg,
    bump_arg: BumpArg,
    grid_points: usize,
    sweep: bool,
    tol: f64,
) -> Result<Outcome> {
    let chi = bump(bump_arg);
    let header = vec![
        "eps",
        "alpha",
        "r0",
        "a1",
        "a2",
        "ratio",
        "method",
        "deviation",
    ];
    let row = |c: &pinching::PinchingConstants, deviation: f64| {
        vec![
            num(c.eps),
            num(c.alpha),
            num(c.r0),
            num(c.a1),
            num(c.a2),
            num(c.ratio),
            c.method.as_str().to_string(),
            num(deviation),
        ]
    };
    let counterexample = Counterexample::Pinching {
        eps: eps.to_vec(),
        alpha,
        r0,
        method,
        bump: bump_arg,
        grid_points,
        sweep,
        tol,
    };
    if sweep {
        let report = pinching::eps_sweep(eps, alpha, r0, &chi, grid_points)?;
        let pass = report.slope_within(tol);
        eprintln!(
            "deviation slope {:.6} (expected {}, tolerance {tol})",
            report.slope, report.expected_slope
        );
        let chosen = |r: &pinching::SweepRow| match method {
            MethodArg::Exact => r.exact.clone(),
            MethodArg::Leading => r.leading.clone(),
        };
        return Ok(Outcome {
            command: "pinching sweep".into(),
            header,
            csv_rows: report
                .rows
                .iter()
                .map(|r| row(&chosen(r), r.deviation))
                .collect(),
            json_rows: report.rows.iter().map(to_json).collect(),
            pass,
            summary: json!({
                "slope": report.slope,
                "expected_slope": report.expected_slope,
                "slope_tol": tol,
            }),
            worst: None,
            counterexample: (!pass).then_some(counterexample),
        });
    }
    let mut csv_rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut pass = true;
    let target = (chi.max_dd - chi.min_dd) / chi.max_abs_dd();
    for &e in eps {
        let pert = ConformalPerturbation::new(e, alpha, r0, chi.clone())?;
        let c = pinching::pinching_constants(&pert, method.into(), grid_points)?;
        let deviation = pinching::leading_order_deviation(&pert, grid_points);
        let ok = 0.0 < c.a2
            && c.a2 <= c.a1
            && c.a1 <= 1.0
            && match method {
                MethodArg::Exact => c.ratio >= 1.5,
                MethodArg::Leading => (c.ratio - target).abs() <= 1e-3,
            };
        pass &= ok;
        csv_rows.push(row(&c, deviation));
        json_rows.push(json!({ "constants": c, "deviation": deviation, "pass": ok }));
    }
    Ok(Outcome {
        command: "pinching".into(),
        header,
        csv_rows,
        json_rows,
        pass,
        summary: json!({
            "bump": to_json(&chi),
            "limit_ratio": target,
            "exact_threshold": 1.5,
            "largest_eps_reaching_threshold": pinching::ratio_threshold(alpha, r0, &chi, grid_points, 1.5)?,
        }),
        worst: None,
        counterexample: (!pass).then_some(counterexample),
    })
}

pub fn dump_curvature_grid(
    path: &Path,
    eps: f64,
    alpha: f64,
    r0: f64,
    bump_arg: BumpArg,
) -> Result<()> {
    let pert = ConformalPerturbation::new(eps, alpha, r0, bump(bump_arg))?;
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err("dump-grid", e.to_string()))?;
    let io = |e: csv::Error| parse_err("dump-grid", e.to_string());
    w.write_record(["r", "w", "exact", "leading"]).map_err(io)?;
    for p in pinching::curvature_grid(&pert, 257, 11) {
        w.write_record(p.iter().map(|x| num(*x))).map_err(io)?;
    }
    w.flush().map_err(|e| parse_err("dump-grid", e.to_string()))
}

fn render(outcome: &Outcome, format: Format, config: &Value) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| parse_err("output", e.to_string());
            w.write_record(&outcome.header).map_err(io)?;
            for row in &outcome.csv_rows {
                w.write_record(row).map_err(io)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| parse_err("output", e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("utf-8 csv"))
        }
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "artifact_version": ARTIFACT_VERSION,
                "command": outcome.command,
                "config": config,
                "rows": outcome.json_rows,
                "summary": outcome.summary,
                "worst": outcome.worst,
                "pass": outcome.pass,
            });
            Ok(serde_json::to_string_pretty(&report).expect("serializable") + "\n")
        }
    }
}

fn tol_or(cli: &Cli, default: f64) -> f64 {
    cli.tol.unwrap_or(default)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    if let Some(path) = &cli.replay {
        let text = fs::read_to_string(path)
            .map_err(|e| parse_err("replay", format!("{}: {e}", path.display())))?;
        let file: CounterexampleFile = serde_json::from_str(&text).map_err(|e| {
            parse_err(
                "replay",
                format!("line {}, column {}: {e}", e.line(), e.column()),
            )
        })?;
        return replay(file.counterexample);
    }
    let Some(command) = &cli.command else {
        return Err(parse_err("command", "a subcommand or --replay is required"));
    };
    match command {
        Command::Inequality(InequalityCmd::Check(a)) => {
            let profile = parse_profile("profile", &a.profile)?;
            let h = parse_grid("h-grid", &a.h_grid)?;
            run_inequality_check(
                &a.profile,
                &profile,
                &h,
                a.method,
                tol_or(cli, DEFAULT_TOL_GAP),
            )
        }
        Command::Inequality(InequalityCmd::Fuzz(a)) => {
            if a.count == 0 {
                return Err(parse_err("count", "must be at least 1"));
            }
            let h = parse_grid("h-grid", &a.h_grid)?;
            run_inequality_fuzz(
                a.generator.into(),
                a.count,
                &h,
                cli.seed,
                tol_or(cli, DEFAULT_TOL_GAP),
            )
        }
        Command::Riccati(RiccatiCmd::LambdaCurve(a)) => {
            let f = parse_profile("forcing", &a.forcing)?;
            let grid = parse_grid("a-grid", &a.a_grid)?;
            run_lambda_curve(&f, &grid, a.steps, tol_or(cli, 1e-8))
        }
        Command::Riccati(RiccatiCmd::Dnu(a)) => {
            let f = parse_profile("forcing", &a.forcing)?;
            let h = parse_grid("h-grid", &a.h_grid)?;
            run_dnu(&f, &h, a.steps, tol_or(cli, 1e-10))
        }
        Command::Riccati(RiccatiCmd::Reduction(a)) => {
            let f = parse_profile("forcing", &a.forcing)?;
            let h = parse_grid("h-grid", &a.h_grid)?;
            run_reduction(&f, &h, a.steps, tol_or(cli, DEFAULT_TOL_GAP))
        }
        Command::Matrix(MatrixCmd::Demo(a)) => {
            let field = if let Some(path) = &a.spec {
                let text = fs::read_to_string(path)
                    .map_err(|e| parse_err("spec", format!("{}: {e}", path.display())))?;
                let spec: FieldSpec = serde_json::from_str(&text).map_err(|e| {
                    parse_err(
                        "spec",
                        format!("line {}, column {}: {e}", e.line(), e.column()),
                    )
                })?;
                CurvatureField::from_spec(&spec)?
            } else if let Some(r) = &a.rotating {
                if r.len() != 2 {
                    return Err(parse_err("rotating", "expects two values d1,d2"));
                }
                CurvatureField::rotating(r[0], r[1])?
            } else if let Some(c) = a.crossing {
                CurvatureField::crossing(c)?
            } else {
                let d = a.constant_diag.clone().unwrap_or_else(|| vec![1.0, 0.25]);
                CurvatureField::constant_diag(&d)?
            };
            if let Some(dim) = a.dim {
                if dim != field.dim() {
                    return Err(parse_err(
                        "dim",
                        format!("field has dimension {}, not {dim}", field.dim()),
                    ));
                }
            }
            run_matrix_field(field, a.periods, a.steps)
        }
        Command::Matrix(MatrixCmd::Fuzz(a)) => {
            if let Some(d) = a.dim {
                if !(2..=matrix::MAX_DIM).contains(&d) {
                    return Err(parse_err(
                        "dim",
                        format!("must lie in 2..={}", matrix::MAX_DIM),
                    ));
                }
            }
            run_matrix_fuzz(a.dim, a.count, cli.seed, a.periods, a.steps)
        }
        Command::Ghk(a) => run_ghk(a.a1, &a.eps, tol_or(cli, 1e-12)),
        Command::Pinching(a) => {
            if let Some(path) = &a.dump_grid {
                dump_curvature_grid(path, a.eps, a.alpha, a.r0, a.bump)?;
            }
            match &a.sweep_eps {
                Some(list) => run_pinching(
                    list,
                    a.alpha,
                    a.r0,
                    a.method,
                    a.bump,
                    a.grid_points,
                    true,
                    tol_or(cli, 0.1),
                ),
                None => run_pinching(
                    &[a.eps],
                    a.alpha,
                    a.r0,
                    a.method,
                    a.bump,
                    a.grid_points,
                    false,
                    tol_or(cli, 0.1),
                ),
            }
        }
    }
}

/// Re-runs a stored counterexample.
pub fn replay(c: Counterexample) -> Result<Outcome> {
    match c {
        Counterexample::Inequality {
            profile,
            h,
            method,
            tol,
        } => {
            let p = PeriodicProfile::from_spec(&profile)?;
            run_inequality_check("replay", &p, &h, method, tol)
        }
        Counterexample::LambdaCurve {
            forcing,
            a_grid,
            steps,
            tol,
        } => run_lambda_curve(&PeriodicProfile::from_spec(&forcing)?, &a_grid, steps, tol),
        Counterexample::Dnu {
            forcing,
            h,
            steps,
            tol,
        } => run_dnu(&PeriodicProfile::from_spec(&forcing)?, &h, steps, tol),
        Counterexample::Reduction {
            forcing,
            h,
            steps,
            tol,
        } => run_reduction(&PeriodicProfile::from_spec(&forcing)?, &h, steps, tol),
        Counterexample::Matrix {
            field,
            periods,
            steps,
        } => run_matrix_field(CurvatureField::from_spec(&field)?, periods, steps),
        Counterexample::Ghk { a1, eps, tol } => run_ghk(a1, &eps, tol),
        Counterexample::Pinching {
            eps,
            alpha,
            r0,
            method,
            bump,
            grid_points,
            sweep,
            tol,
        } => run_pinching(&eps, alpha, r0, method, bump, grid_points, sweep, tol),
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidProfile(_)
            | Error::NotNormalized { .. }
            | Error::NotWellDistributed
    )
}

fn counterexample_path(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".counterexample.json");
            PathBuf::from(s)
        }
        None => PathBuf::from("pinchlab-counterexample.json"),
    }
}

/// Runs the command line and returns the process exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(&cli)
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = match cli.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(parse_err("workers", e.to_string())),
        },
        None => dispatch(cli),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_usage_error(&e) { 2 } else { 1 };
        }
    };
    let config = match &cli.replay {
        Some(_) => json!({ "replay": true }),
        None => to_json(cli),
    };
    let text = match render(&outcome, cli.format, &config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    eprintln!(
        "{}: {}",
        outcome.command,
        if outcome.pass { "PASS" } else { "FAIL" }
    );
    if outcome.pass {
        return 0;
    }
    if let Some(c) = outcome.counterexample {
        let path = counterexample_path(cli.out.as_deref());
        let file = CounterexampleFile {
            schema_version: SCHEMA_VERSION,
            counterexample: c,
        };
        let body = serde_json::to_string_pretty(&file).expect("serializable");
        match fs::write(&path, body) {
            Ok(()) => eprintln!("counterexample written to {}", path.display()),
            Err(e) => eprintln!("error: cannot write counterexample: {e}"),
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_grammar() {
        let c = parse_profile("p", "constant:2.5").unwrap();
        assert_eq!(c.evaluate(0.3), 2.5);
        assert_eq!(parse_profile("p", "constant").unwrap().evaluate(0.1), 1.0);
        let s = parse_profile("p", "step:2,0.25;0.6667,0.75").unwrap();
        assert_eq!(s.evaluate(0.1), 2.0);
        assert_eq!(s.evaluate(0.5), 0.6667);
        let t = parse_profile("p", "trig:1,0.5").unwrap();
        assert!((t.evaluate(0.25) - 1.5).abs() < 1e-15);
        let t2 = parse_profile("p", "trig:1,0,0.3").unwrap();
        assert!((t2.evaluate(0.0) - 1.3).abs() < 1e-15);
        let g = parse_profile("p", "grid:1,2,3").unwrap();
        assert!(g.is_grid());
        let j = parse_profile("p", r#"{"kind":"constant","value":3}"#).unwrap();
        assert_eq!(j.evaluate(0.0), 3.0);
        for bad in [
            "step:1",
            "trig:",
            "wave:1",
            "step:1,0.5;x,0.5",
            r#"{"kind":"step"}"#,
        ] {
            let e = parse_profile("p", bad).unwrap_err();
            assert!(is_usage_error(&e), "{bad}: {e:?}");
        }
    }

    #[test]
    fn grid_grammar() {
        let g = parse_grid("h", "log:0.01:100:17").unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[16], 100.0);
        assert_eq!(parse_grid("h", "lin:1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("h", "0.1,1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert_eq!(parse_grid("h", "1").unwrap(), vec![1.0]);
        for bad in ["log:0:1:3", "log:1:2", "x", "-1", "lin:2:1:4"] {
            assert!(parse_grid("h", bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn counterexample_round_trip() {
        let c = Counterexample::Ghk {
            a1: 50.0,
            eps: vec![0.05],
            tol: 1e-12,
        };
        let file = CounterexampleFile {
            schema_version: SCHEMA_VERSION,
            counterexample: c.clone(),
        };
        let text = serde_json::to_string(&file).unwrap();
        let back: CounterexampleFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.counterexample, c);
        assert!(replay(c).unwrap().pass);
    }
}
