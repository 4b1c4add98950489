//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::bundles::TotalPoint;
use crate::calculus::{random_vector, BiCovector, StepControl};
use crate::config::{preset, CurveSpec, Scenario, ScenarioConfig};
use crate::connections::{transport_group, transport_multiplicativity};
use crate::error::{Error, Result};
use crate::liegroup::{AlgebraElement, GroupElement};
use crate::principal::{GeneralizedPrincipalConnection, CURVATURE_PATH_TOL};
use crate::report::{Meta, RunReport};
use crate::scenarios::gauge::Utiyama;
use crate::suite::{check_seed, run_suite};

#[derive(Parser, Debug)]
#[command(name = "lgbundle", version, about = "Checks for Lie group bundle connections and their curvature")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the invariant suite of a scenario.
    Validate(ValidateArgs),
    /// Transport fiber data along a configured curve.
    Transport(TransportArgs),
    /// Evaluate the curvature at a point.
    Curvature(CurvatureArgs),
    /// Re-read a report, audit it and print it as a table or CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario configuration file (JSON).
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Named preset scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integrator step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave out timing and version data.
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated check ids; all applicable checks by default.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// Also write a CSV of residuals.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Curve id from the configuration; the first curve by default.
    #[arg(long)]
    pub curve: Option<String>,
    /// Algebra coordinates of the initial fiber point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub fiber: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub common: Common,
    /// Quotient coordinates of the point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Algebra coordinates of the fiber point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub fiber: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u2: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON-lines report written by `validate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for failing checks.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for usage, configuration and I/O errors.
pub const EXIT_ERROR: i32 = 2;

/// Runs the command line and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Transport(a) => transport(a),
        Command::Curvature(a) => curvature(a),
        Command::Report(a) => report(a),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match (&common.config, &common.scenario) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Error::Usage("give --config or --scenario".into())),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(s) = common.step {
        cfg.step = s;
    }
    if let Some(s) = common.samples {
        cfg.samples = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn meta(start: Instant) -> Meta {
    Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_ms: start.elapsed().as_millis() as u64,
    }
}

fn validate(a: ValidateArgs) -> Result<i32> {
    let start = Instant::now();
    let mut cfg = load(&a.common)?;
    if let Some(list) = &a.checks {
        cfg.checks = Some(list.iter().filter(|c| !c.trim().is_empty()).cloned().collect());
    }
    cfg.validate()?;
    let kind = cfg.build()?.kind();
    let records = run_suite(&cfg)?;
    let mut report = RunReport::new(&cfg.name, kind, cfg.seed, cfg.samples, cfg.step, records);
    if !a.common.no_meta {
        report = report.with_meta(meta(start));
    }
    emit(&a.common.out, &report.to_jsonl())?;
    if let Some(p) = &a.csv {
        std::fs::write(p, report.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    if report.all_passed() {
        Ok(0)
    } else {
        eprintln!("failing checks: {}", report.summary.failing.join(", "));
        Ok(EXIT_FAILED)
    }
}

fn matrix_json(g: &GroupElement) -> Value {
    let m = &g.0;
    Value::Array((0..m.nrows()).map(|i| json!((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())).collect())
}

fn point_json(y: &TotalPoint) -> Value {
    json!({ "quotient": y.quotient.as_slice(), "fiber": matrix_json(&y.fiber) })
}

fn finish(common: &Common, mut record: Value, start: Instant, pass: bool) -> Result<i32> {
    record["pass"] = json!(pass);
    if !common.no_meta {
        record["meta"] = serde_json::to_value(meta(start)).expect("meta serializes");
    }
    emit(&common.out, &format!("{}\n", serde_json::to_string(&record).expect("record serializes")))?;
    Ok(if pass { 0 } else { EXIT_FAILED })
}

fn algebra_arg(v: &Option<Vec<f64>>, d: usize, rng: &mut ChaCha8Rng, what: &str) -> Result<AlgebraElement> {
    match v {
        Some(c) if c.len() == d => Ok(AlgebraElement::from_slice(c)),
        Some(c) => Err(Error::Usage(format!("{what} needs {d} coordinates, got {}", c.len()))),
        None => Ok(AlgebraElement(random_vector(rng, d, 0.8))),
    }
}

fn vector_arg(v: &Option<Vec<f64>>, n: usize, fallback: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    match v {
        Some(c) if c.len() == n => Ok(DVector::from_vec(c.clone())),
        Some(c) => Err(Error::Usage(format!("{what} needs {n} coordinates, got {}", c.len()))),
        None => Ok(fallback),
    }
}

fn transport(a: TransportArgs) -> Result<i32> {
    let start = Instant::now();
    let cfg = load(&a.common)?;
    let scenario = cfg.build()?;
    let specs = cfg.curves()?;
    let spec = match &a.curve {
        Some(id) => specs
            .iter()
            .find(|c| c.id() == id)
            .ok_or_else(|| Error::Usage(format!("no curve '{id}' in the configuration")))?,
        None => specs
            .first()
            .ok_or_else(|| Error::Usage("the configuration defines no curves".into()))?,
    };
    let curve = spec.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(check_seed(cfg.seed, "transport"));
    let control = StepControl::with_step(cfg.step).estimating();
    let (omega, closed_form) = match &scenario {
        Scenario::Principal(s) => (s.glued.clone().unwrap_or_else(|| s.single.clone()), None),
        Scenario::Affine(s) => (s.connection.clone(), Some(s.clone())),
        Scenario::GaugeJet(_) => return Err(Error::Usage("gauge jet scenarios have no curves".into())),
    };
    let space = omega.space().clone();
    let group = space.group().clone();
    let fiber = group.exp(&algebra_arg(&a.fiber, group.dim(), &mut rng, "--fiber")?)?;
    let y0 = TotalPoint {
        quotient: curve.position(curve.interval().0),
        fiber,
    };
    let out = omega.transport(&curve, &y0, &control)?;
    let membership = group.membership_residual(&out.end.fiber.0);
    let base_curve = curve.project(space.base_dim())?;
    let g = group.sample(&mut rng, 0.8);
    let h = group.sample(&mut rng, 0.8);
    let plain = StepControl::with_step(cfg.step);
    let multiplicativity = transport_multiplicativity(omega.nu(), &base_curve, &g, &h, &plain)?;
    let compatibility = omega.compatibility_residual(&curve, &y0, &g, &plain)?;
    let group_end = transport_group(omega.nu(), &base_curve, &y0.fiber, &plain)?.end;
    let mut record = json!({
        "record": "transport",
        "scenario": cfg.name,
        "curve": spec.id(),
        "closed": curve.is_closed(),
        "start": point_json(&y0),
        "end": point_json(&out.end),
        "group_transport_end": matrix_json(&group_end),
        "steps": out.integration.steps,
        "error_estimate": out.integration.error_estimate,
        "membership_residual": membership,
        "multiplicativity_residual": multiplicativity,
        "compatibility_residual": compatibility,
    });
    let mut pass = membership <= 1e-9 && multiplicativity <= 1e-7 && compatibility <= 1e-7;
    if let (Some(s), CurveSpec::Line { .. }) = (&closed_form, spec) {
        if s.scenario.is_constant() {
            let (t0, t1) = curve.interval();
            let exact =
                s.scenario
                    .constant_transport(&curve.position(t0), &curve.position(t1), &group.log(&y0.fiber)?.0)?;
            let gap = (group.log(&out.end.fiber)?.0 - exact).norm();
            record["closed_form_gap"] = json!(gap);
            pass &= gap <= 1e-7;
        }
    }
    finish(&a.common, record, start, pass)
}

fn bicovector_json(b: &BiCovector) -> Value {
    let n = b.base_dim();
    Value::Array(
        (0..n)
            .map(|mu| Value::Array((0..n).map(|nu| json!(b.get(mu, nu).coords().as_slice())).collect()))
            .collect(),
    )
}

fn curvature(a: CurvatureArgs) -> Result<i32> {
    let start = Instant::now();
    let cfg = load(&a.common)?;
    let scenario = cfg.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(check_seed(cfg.seed, "curvature"));
    let omega: GeneralizedPrincipalConnection = match &scenario {
        Scenario::Principal(s) => s.glued.clone().unwrap_or_else(|| s.single.clone()),
        Scenario::Affine(s) => s.connection.clone(),
        Scenario::GaugeJet(s) => {
            let u = Utiyama::new(s.jets.clone());
            let jet = u.sample_jet(&mut rng);
            let gauge = u.sample_gauge(&mut rng);
            let f = u.curvature(&jet)?;
            let moved = u.curvature(&u.apply(&gauge, &jet)?)?;
            let residual = moved.sub(&f).max_norm();
            let record = json!({
                "record": "curvature",
                "scenario": cfg.name,
                "curvature": bicovector_json(&f),
                "invariance_residual": residual,
                "tolerance": 1e-12,
            });
            return finish(&a.common, record, start, residual <= 1e-12);
        }
    };
    let space = omega.space().clone();
    let group = space.group().clone();
    let q = space.quotient_dim();
    let fallback = space.quotient().sample(&mut rng, 0.1);
    let point = vector_arg(&a.point, q, fallback, "--point")?;
    space.quotient().require(&point)?;
    let fiber = group.exp(&algebra_arg(&a.fiber, group.dim(), &mut rng, "--fiber")?)?;
    let r1 = random_vector(&mut rng, q, 1.0);
    let r2 = random_vector(&mut rng, q, 1.0);
    let u1 = vector_arg(&a.u1, q, r1, "--u1")?;
    let u2 = vector_arg(&a.u2, q, r2, "--u2")?;
    let y = TotalPoint { quotient: point, fiber };
    let eval = omega.curvature_paths(&y, &u1, &u2, None)?;
    let gap = eval.gap();
    let g = group.sample(&mut rng, 0.8);
    let (reduced, shift) = if gap <= CURVATURE_PATH_TOL {
        (
            Some(omega.reduced_curvature_residual(&y, &g, &u1, &u2)?),
            Some(omega.reduced_curvature_shift_residual(&y, &g, &u1, &u2)?),
        )
    } else {
        (None, None)
    };
    let record = json!({
        "record": "curvature",
        "scenario": cfg.name,
        "point": point_json(&y),
        "u1": u1.as_slice(),
        "u2": u2.as_slice(),
        "bracket": eval.bracket.coords().as_slice(),
        "covariant": eval.covariant.coords().as_slice(),
        "gap": gap,
        "tolerance": CURVATURE_PATH_TOL,
        "reduced_residual": reduced,
        "reduced_shift_residual": shift,
    });
    let pass = gap <= CURVATURE_PATH_TOL;
    finish(&a.common, record, start, pass)
}

fn report(a: ReportArgs) -> Result<i32> {
    let path = &a.input;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let rep = RunReport::from_jsonl(&text)?;
    let problems = rep.audit();
    let body = if a.csv {
        rep.to_csv()
    } else {
        let mut s = format!(
            "{} ({}): {} of {} checks pass\n",
            rep.summary.scenario, rep.summary.kind, rep.summary.passed, rep.summary.checks
        );
        for r in &rep.records {
            let num = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<5} {:<40} max {:>10}  tol {:.1e}  order {}\n",
                if r.pass { "pass" } else { "FAIL" },
                r.check,
                num(r.max_residual),
                r.tolerance,
                num(r.order_estimate)
            ));
        }
        s
    };
    emit(&a.out, &body)?;
    for p in &problems {
        eprintln!("audit: {p}");
    }
    Ok(if problems.is_empty() && rep.all_passed() { 0 } else { EXIT_FAILED })
}
