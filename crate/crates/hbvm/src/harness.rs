//! Experiment runner: resolved run specifications, trajectory integration
//! with online error accounting, convergence tables with rates, and grid
//! dumps of the computed solution.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveIntegrator, ControllerSettings};
use crate::error::{Error, Result};
use crate::problems::{BenchmarkProblem, ErrorAccumulator, ErrorReport, ProblemKind, ProblemSystem};
use crate::solver::{Integrator, IterationMode, SolverConfig};
use crate::tableau::build_tableau;

/// Time integrator family of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MethodSpec {
    /// s-stage Gauss collocation (the k = s member of the family).
    Gauss { s: usize },
    /// Fixed (k, s) method with k quadrature points and s stages.
    Hbvm { k: usize, s: usize },
    /// Per-step selection of s from the stage coefficient decay. The
    /// quadrature size follows `max(s + 2, 20)` unless `degree_rule` asks
    /// for the energy-exact size from the Hamiltonian degree.
    Spectral {
        s_init: usize,
        /// Stage-decay tolerance; `None` picks the problem default.
        tol: Option<f64>,
        degree_rule: bool,
    },
}

impl MethodSpec {
    pub fn spectral(s_init: usize, tol: Option<f64>) -> Self {
        MethodSpec::Spectral {
            s_init,
            tol,
            degree_rule: false,
        }
    }

    /// Short CSV-safe label, e.g. `gauss-2`, `hbvm-6-3`, `spectral`.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Gauss { s } => format!("gauss-{s}"),
            MethodSpec::Hbvm { k, s } => format!("hbvm-{k}-{s}"),
            MethodSpec::Spectral { .. } => "spectral".to_string(),
        }
    }
}

/// Everything needed to reproduce one integration, fully resolved (no
/// defaults left to fill in at run time).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub method: MethodSpec,
    /// Number of uniform steps; dt = T / n_steps.
    pub n_steps: usize,
    /// Number of positive space frequencies N.
    pub n_modes: usize,
    /// Number of grid subintervals m.
    pub m: usize,
    pub solver: IterationMode,
    pub nonlinear_tol: f64,
    pub max_iters: usize,
}

impl RunSpec {
    /// Spec with the problem's default space resolution and solver settings.
    pub fn new(problem: ProblemKind, method: MethodSpec, n_steps: usize) -> Self {
        let p = BenchmarkProblem::from_kind(problem);
        RunSpec {
            problem,
            method,
            n_steps,
            n_modes: p.default_n_modes,
            m: p.default_m,
            solver: IterationMode::LinearNewton,
            nonlinear_tol: 1e-15,
            max_iters: 100,
        }
    }
}

/// Stage counts seen by an adaptive run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StageSummary {
    pub s_min: usize,
    pub s_max: usize,
    /// Selection in force after the last step.
    pub s_final: usize,
    pub k_final: usize,
    /// True when some step wanted more stages than the controller cap.
    pub s_max_exceeded: bool,
}

/// Outcome of one integration. A run that stops early because the stage
/// iteration diverged is still a report (`completed = false`), not an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: RunSpec,
    pub dt: f64,
    /// Max-norm residual of projecting the initial data onto the basis,
    /// i.e. the space-discretization floor of this run.
    pub initial_residual: f64,
    pub errors: ErrorReport,
    /// Quadrature size and stage count (final values for adaptive runs).
    pub k: usize,
    pub s: usize,
    pub stages: Option<StageSummary>,
    pub iterations_avg: f64,
    pub iterations_max: usize,
    pub wall_seconds: f64,
    pub completed: bool,
    pub failure: Option<String>,
    /// 1-based index of the step whose solve failed.
    pub failed_step: Option<usize>,
}

enum Driver<'a> {
    Fixed(Integrator<'a, ProblemSystem>),
    Adaptive(AdaptiveIntegrator<'a, ProblemSystem>),
}

/// Integrate a spec, reporting errors against the exact solution. The
/// observer sees every accepted state (including the initial one) and is the
/// hook for grid dumps.
pub fn run_observed(
    spec: &RunSpec,
    mut observer: impl FnMut(usize, f64, &ProblemSystem, &DVector<f64>),
) -> Result<RunReport> {
    if spec.n_steps == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    let problem = BenchmarkProblem::from_kind(spec.problem);
    let basis = problem.basis(spec.n_modes, spec.m)?;
    let system = problem.system(basis);
    let init = problem.initial_state(&system)?;
    let dt = problem.final_time / spec.n_steps as f64;
    let config = SolverConfig {
        mode: spec.solver,
        nonlinear_tol: spec.nonlinear_tol,
        max_iters: spec.max_iters,
        machine_eps: f64::EPSILON,
    };

    let mut driver = match spec.method {
        MethodSpec::Gauss { s } => Driver::Fixed(Integrator::new(
            &system,
            build_tableau(s, s)?,
            config,
        )),
        MethodSpec::Hbvm { k, s } => Driver::Fixed(Integrator::new(
            &system,
            build_tableau(k, s)?,
            config,
        )),
        MethodSpec::Spectral {
            s_init,
            tol,
            degree_rule,
        } => {
            let tol = tol.unwrap_or_else(|| problem.default_spectral_tol());
            let degree = if degree_rule {
                problem.hamiltonian_degree()
            } else {
                None
            };
            let settings = ControllerSettings::new(tol, degree);
            Driver::Adaptive(AdaptiveIntegrator::new(&system, s_init, settings, config)?)
        }
    };

    let start = Instant::now();
    let mut y = init.coefficients.pack();
    let mut acc = ErrorAccumulator::new(&problem, &system, &y);
    observer(0, 0.0, &system, &y);

    let mut iter_total = 0usize;
    let mut iter_max = 0usize;
    let mut completed = true;
    let mut failure = None;
    let mut failed_step = None;
    let mut steps_done = 0usize;
    let mut s_seen: Option<(usize, usize)> = None;
    let mut last_used: Option<(usize, usize)> = None;

    for step in 1..=spec.n_steps {
        let t = dt * step as f64;
        let outcome = match &mut driver {
            Driver::Fixed(integ) => integ.step(&y, dt).map(|(y1, sol)| (y1, sol.iterations)),
            Driver::Adaptive(ai) => ai.step(&y, dt).map(|(y1, rec)| {
                s_seen = Some(match s_seen {
                    Some((lo, hi)) => (lo.min(rec.s), hi.max(rec.s)),
                    None => (rec.s, rec.s),
                });
                last_used = Some((rec.k, rec.s));
                (y1, rec.iterations)
            }),
        };
        match outcome {
            Ok((y1, iterations)) => {
                iter_total += iterations;
                iter_max = iter_max.max(iterations);
                steps_done += 1;
                y = y1;
                acc.record(&system, t, &y);
                observer(step, t, &system, &y);
            }
            Err(e @ Error::NoConvergence { .. }) => {
                completed = false;
                failure = Some(e.to_string());
                failed_step = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let (k, s, stages) = match &driver {
        Driver::Fixed(integ) => (integ.tableau().k, integ.tableau().s, None),
        Driver::Adaptive(ai) => {
            // Report what the last accepted step actually used, not the
            // pending order the controller queued for a step never taken.
            let (kf, sf) = last_used.unwrap_or((ai.current_k(), ai.current_s()));
            let (lo, hi) = s_seen.unwrap_or((sf, sf));
            (
                kf,
                sf,
                Some(StageSummary {
                    s_min: lo,
                    s_max: hi,
                    s_final: sf,
                    k_final: kf,
                    s_max_exceeded: ai.s_max_exceeded(),
                }),
            )
        }
    };

    Ok(RunReport {
        spec: *spec,
        dt,
        initial_residual: init.residual,
        errors: acc.finish(),
        k,
        s,
        stages,
        iterations_avg: if steps_done > 0 {
            iter_total as f64 / steps_done as f64
        } else {
            0.0
        },
        iterations_max: iter_max,
        wall_seconds: start.elapsed().as_secs_f64(),
        completed,
        failure,
        failed_step,
    })
}

pub fn run(spec: &RunSpec) -> Result<RunReport> {
    run_observed(spec, |_, _, _, _| ())
}

/// One table row: a report plus convergence-rate columns relative to the
/// previous row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub report: RunReport,
    pub rate_u: Option<f64>,
    pub rate_h: Option<f64>,
    pub plateau_u: bool,
    pub plateau_h: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub rows: Vec<TableRow>,
}

/// Run one spec per step count and attach convergence rates.
///
/// A row whose stage iteration diverges is kept in the table (flagged, no
/// errors) and the remaining rows still run.
pub fn run_table(specs: &[RunSpec]) -> Result<Table> {
    let mut reports = Vec::with_capacity(specs.len());
    for spec in specs {
        reports.push(run(spec)?);
    }
    Ok(assemble_table(reports))
}

/// Rate and plateau computation. The rate between consecutive rows is
/// `log(e_prev / e_cur) / log(n_cur / n_prev)`. A rate column is marked as
/// plateaued when the error has stopped improving (rate below 0.5) or sits
/// within a factor 10 of the smallest energy drift in the table, which is
/// the observed conservation floor of the discretization.
pub fn assemble_table(reports: Vec<RunReport>) -> Table {
    let floor = reports
        .iter()
        .filter(|r| r.completed)
        .map(|r| r.errors.e_h)
        .fold(f64::INFINITY, f64::min);
    let mut rows: Vec<TableRow> = Vec::with_capacity(reports.len());
    let mut prev: Option<(usize, ErrorReport)> = None;
    for report in reports {
        let (mut rate_u, mut rate_h) = (None, None);
        if report.completed {
            if let Some((n_prev, e_prev)) = &prev {
                let ratio = (report.spec.n_steps as f64 / *n_prev as f64).ln();
                if ratio > 0.0 {
                    rate_u = Some((e_prev.e_u / report.errors.e_u).ln() / ratio);
                    rate_h = Some((e_prev.e_h / report.errors.e_h).ln() / ratio);
                }
            }
        }
        let plateau = |e: f64, rate: Option<f64>| {
            report.completed && (e <= 10.0 * floor || rate.is_some_and(|r| r < 0.5))
        };
        let plateau_u = plateau(report.errors.e_u, rate_u);
        let plateau_h = plateau(report.errors.e_h, rate_h);
        if report.completed {
            prev = Some((report.spec.n_steps, report.errors));
        }
        rows.push(TableRow {
            report,
            rate_u,
            rate_h,
            plateau_u,
            plateau_h,
        });
    }
    Table { rows }
}

/// The fixed CSV schema shared by single runs and tables.
pub const CSV_HEADER: &str =
    "problem,method,k,s,n,dt,e_u,rate_u,e_H,rate_H,e_1,e_2,iters_avg,wall_s";

fn csv_row(
    r: &RunReport,
    rate_u: Option<f64>,
    rate_h: Option<f64>,
    plateau_u: bool,
    plateau_h: bool,
) -> String {
    let rate_field = |rate: Option<f64>, plateau: bool| {
        if plateau {
            "**".to_string()
        } else {
            rate.map(|x| format!("{x:.2}")).unwrap_or_default()
        }
    };
    let opt_field = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    format!(
        "{},{},{},{},{},{:.6e},{:.6e},{},{:.6e},{},{},{},{:.2},{:.3}",
        r.spec.problem,
        r.spec.method.label(),
        r.k,
        r.s,
        r.spec.n_steps,
        r.dt,
        r.errors.e_u,
        rate_field(rate_u, plateau_u),
        r.errors.e_h,
        rate_field(rate_h, plateau_h),
        opt_field(r.errors.e_1),
        opt_field(r.errors.e_2),
        r.iterations_avg,
        r.wall_seconds,
    )
}

pub fn run_csv(report: &RunReport) -> String {
    format!(
        "{CSV_HEADER}\n{}\n",
        csv_row(report, None, None, false, false)
    )
}

pub fn table_csv(table: &Table) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&csv_row(
            &row.report,
            row.rate_u,
            row.rate_h,
            row.plateau_u,
            row.plateau_h,
        ));
        out.push('\n');
    }
    out
}

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization")
}

pub fn table_json(table: &Table) -> String {
    serde_json::to_string_pretty(table).expect("table serialization")
}

/// JSON with the wall-clock field removed, for bitwise determinism checks.
pub fn report_json_deterministic(report: &RunReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serialization");
    if let Some(map) = value.as_object_mut() {
        map.remove("wall_seconds");
    }
    serde_json::to_string_pretty(&value).expect("report serialization")
}

/// Space-time samples of the scalar solution profile (u for the wave and
/// KdV problems, the squared modulus for Schroedinger).
#[derive(Debug, Clone)]
pub struct GridDump {
    pub xgrid: Vec<f64>,
    pub times: Vec<f64>,
    /// One row per recorded time, one column per grid point.
    pub values: Vec<Vec<f64>>,
}

fn solution_profile(system: &ProblemSystem, y: &DVector<f64>) -> Vec<f64> {
    let basis = system.basis();
    let nc = basis.n_coeffs();
    match system {
        ProblemSystem::Wave(_) => {
            let q = y.rows(0, nc).clone_owned();
            basis.eval_on_grid(&q).expect("layout").as_slice().to_vec()
        }
        ProblemSystem::Nlse(_) => {
            let q = y.rows(0, nc).clone_owned();
            let p = y.rows(nc, nc).clone_owned();
            let u = basis.eval_on_grid(&q).expect("layout");
            let v = basis.eval_on_grid(&p).expect("layout");
            u.iter().zip(v.iter()).map(|(a, b)| a * a + b * b).collect()
        }
        ProblemSystem::Kdv(s) => s.u_grid(y).as_slice().to_vec(),
    }
}

/// Integrate and keep every stride-th snapshot (first and last always).
pub fn run_grid(spec: &RunSpec, stride: usize) -> Result<(RunReport, GridDump)> {
    let stride = stride.max(1);
    let mut dump = GridDump {
        xgrid: Vec::new(),
        times: Vec::new(),
        values: Vec::new(),
    };
    let n_steps = spec.n_steps;
    let report = run_observed(spec, |step, t, system, y| {
        if step == 0 {
            dump.xgrid = system.basis().grid().to_vec();
        }
        if step % stride == 0 || step == n_steps {
            dump.times.push(t);
            dump.values.push(solution_profile(system, y));
        }
    })?;
    Ok((report, dump))
}

/// Plain-text matrix: the first row is the space grid (with a zero corner
/// entry), every further row starts with the time sample followed by the
/// solution values at that time.
pub fn grid_text(dump: &GridDump) -> String {
    let mut out = String::new();
    out.push_str("0.0000000000000000e0");
    for x in &dump.xgrid {
        out.push_str(&format!(" {x:.16e}"));
    }
    out.push('\n');
    for (t, row) in dump.times.iter().zip(&dump.values) {
        out.push_str(&format!("{t:.16e}"));
        for v in row {
            out.push_str(&format!(" {v:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Write text to a file, tagging IO errors with the path.
pub fn write_text(path: &str, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Key=value config parsing: one pair per line, blank lines and lines
/// starting with '#' ignored.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidSpec(format!("config line {}: expected key=value", idx + 1))
        })?;
        pairs.push((key.trim().to_lowercase(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("invalid value '{value}' for {key}")))
}

/// Assemble a spec from key=value pairs (later pairs win). Recognized keys:
/// problem, method, s, k, n, modes, m, solver, newton-tol, max-iters,
/// stage-tol, s-init, degree-rule.
pub fn spec_from_pairs(pairs: &[(String, String)]) -> Result<RunSpec> {
    let mut problem = None;
    let mut family = None;
    let mut s = None;
    let mut k = None;
    let mut n = None;
    let mut modes = None;
    let mut m = None;
    let mut solver = None;
    let mut newton_tol = None;
    let mut max_iters = None;
    let mut stage_tol = None;
    let mut s_init = None;
    let mut degree_rule = None;

    for (key, value) in pairs {
        match key.as_str() {
            "problem" => {
                problem = Some(value.parse::<ProblemKind>().map_err(Error::InvalidSpec)?)
            }
            "method" => family = Some(value.clone()),
            "s" => s = Some(parse_num::<usize>(key, value)?),
            "k" => k = Some(parse_num::<usize>(key, value)?),
            "n" => n = Some(parse_num::<usize>(key, value)?),
            "modes" => modes = Some(parse_num::<usize>(key, value)?),
            "m" => m = Some(parse_num::<usize>(key, value)?),
            "solver" => {
                solver = Some(match value.as_str() {
                    "linear-newton" | "newton" => IterationMode::LinearNewton,
                    "fixed-point" => IterationMode::FixedPoint,
                    other => {
                        return Err(Error::InvalidSpec(format!("unknown solver '{other}'")))
                    }
                })
            }
            "newton-tol" => newton_tol = Some(parse_num::<f64>(key, value)?),
            "max-iters" => max_iters = Some(parse_num::<usize>(key, value)?),
            "stage-tol" => stage_tol = Some(parse_num::<f64>(key, value)?),
            "s-init" => s_init = Some(parse_num::<usize>(key, value)?),
            "degree-rule" => degree_rule = Some(parse_num::<bool>(key, value)?),
            other => return Err(Error::InvalidSpec(format!("unknown config key '{other}'"))),
        }
    }

    let problem =
        problem.ok_or_else(|| Error::InvalidSpec("missing required key 'problem'".into()))?;
    let family =
        family.ok_or_else(|| Error::InvalidSpec("missing required key 'method'".into()))?;
    let method = match family.as_str() {
        "gauss" => MethodSpec::Gauss {
            s: s.ok_or_else(|| Error::InvalidSpec("gauss needs s".into()))?,
        },
        "hbvm" => MethodSpec::Hbvm {
            k: k.ok_or_else(|| Error::InvalidSpec("hbvm needs k".into()))?,
            s: s.ok_or_else(|| Error::InvalidSpec("hbvm needs s".into()))?,
        },
        "spectral" => MethodSpec::Spectral {
            s_init: s_init.unwrap_or(20),
            tol: stage_tol,
            degree_rule: degree_rule.unwrap_or(false),
        },
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown method '{other}' (expected gauss, hbvm or spectral)"
            )))
        }
    };
    let n = n.ok_or_else(|| Error::InvalidSpec("missing required key 'n'".into()))?;

    let mut spec = RunSpec::new(problem, method, n);
    if let Some(v) = modes {
        spec.n_modes = v;
    }
    if let Some(v) = m {
        spec.m = v;
    }
    if let Some(v) = solver {
        spec.solver = v;
    }
    if let Some(v) = newton_tol {
        spec.nonlinear_tol = v;
    }
    if let Some(v) = max_iters {
        spec.max_iters = v;
    }
    Ok(spec)
}

/// Default step-count series for a problem/method pair's convergence table.
pub fn default_n_list(problem: ProblemKind, method: &MethodSpec) -> Vec<usize> {
    let doubling = |start: usize, count: usize| -> Vec<usize> {
        (0..count).map(|i| start << i).collect()
    };
    let s_of = |method: &MethodSpec| match method {
        MethodSpec::Gauss { s } => *s,
        MethodSpec::Hbvm { s, .. } => *s,
        MethodSpec::Spectral { .. } => 0,
    };
    match (problem, method) {
        (_, MethodSpec::Spectral { .. }) => match problem {
            ProblemKind::Kdv => vec![60, 90, 120],
            _ => vec![100, 150, 200],
        },
        (ProblemKind::SineGordon, m) => {
            // The highest-order member stops one halving earlier.
            doubling(100, if s_of(m) >= 3 { 8 } else { 9 })
        }
        (ProblemKind::Nlse, m) => doubling(100, if s_of(m) >= 3 { 5 } else { 6 }),
        (ProblemKind::Kdv, m) => doubling(60, if s_of(m) >= 3 { 8 } else { 9 }),
    }
}

/// Reduced space resolution for smoke-test runs: (N, m).
pub fn quick_space(problem: ProblemKind) -> (usize, usize) {
    match problem {
        // KdV keeps 3N <= m - 1 so the cubic quadrature stays exact.
        ProblemKind::Kdv => (64, 193),
        _ => (64, 129),
    }
}
