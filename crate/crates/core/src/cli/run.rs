//! Experiment drivers behind the subcommands.
//!
//! Each driver composes library calls, writes its tables and returns the
//! contract assertions it checked. `run` wraps that with the manifest, the
//! failure dump and the exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::config::{Expectation, Experiment, ExperimentConfig, SchemeChoice};
use crate::cli::output::{fmt_f64, LinePlot, Output};
use crate::convex_order::{convex_order_check_1d, convex_order_check_lp, dirac_collapse, random_partition, PartitionKind};
use crate::convexity::{
    prekopa_closure_suite_with, second_difference_test, Band, ClosureOptions, ConvexityOptions, ProfileClass,
};
use crate::error::{Error, Result};
use crate::kernel::build_ou_kernel;
use crate::measures::{
    measure_from_potential, validate_inputs, AtomicMeasure, Curvature, GammaGrid, PotentialField,
    Sign, ValidationOptions, ValidationReport,
};
use crate::numeric::trial_rng;
use crate::schrodinger::{
    fortet_solve_problem, phi_closure_suite, sinkhorn_solve_problem, FortetOptions, Problem, Scheme,
    SchrodingerSolution, SinkhornOptions,
};
use crate::transport::{gj_criterion_check, monotonicity_experiment, zero_noise_sweep, GjOptions, MonotonicityOptions, SweepOptions};

/// Largest TV distance tolerated between the Fortet and Sinkhorn couplings.
const SCHEME_AGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Passed,
    AssertionFailed,
    ConfigError,
    SetupError,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::AssertionFailed => 1,
            Status::ConfigError | Status::SetupError => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: Status,
    pub message: String,
    pub out_dir: PathBuf,
    /// Files written, relative to `out_dir`, manifest last.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        self.status.exit_code()
    }
}

/// Assertions checked by one experiment.
struct Outcome {
    passed: bool,
    message: String,
    summary: Value,
    failures: Vec<Value>,
}

struct Failure {
    stage: &'static str,
    error: Error,
}

type Staged<T> = std::result::Result<T, Failure>;

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Staged<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Staged<T> {
        self.map_err(|error| Failure { stage, error })
    }
}

pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let mut out = match Output::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            return RunReport {
                status: Status::SetupError,
                message: format!("cannot create {}: {e}", cfg.out.display()),
                out_dir: cfg.out.clone(),
                files: Vec::new(),
            }
        }
    };
    let result = match cfg.experiment {
        Some(e) => execute(e, cfg, &mut out),
        None => Err(Failure {
            stage: "config",
            error: Error::InvalidArgument("no experiment selected".into()),
        }),
    };
    let (status, stage, message, summary) = match result {
        Ok(o) if o.passed => (Status::Passed, None, o.message, o.summary),
        Ok(o) => match out.json("failures.json", &o.failures) {
            Ok(()) => (Status::AssertionFailed, Some("assertions"), o.message, o.summary),
            Err(e) => (Status::SetupError, Some("output"), e.to_string(), o.summary),
        },
        Err(f) => {
            let status = if f.stage == "config" {
                Status::ConfigError
            } else {
                Status::SetupError
            };
            (status, Some(f.stage), f.error.to_string(), Value::Null)
        }
    };
    let manifest = json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.echo(),
        "seed": cfg.seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "status": status,
        "failure_stage": stage,
        "message": message,
        "summary": summary,
        "files": out.files().iter().chain(std::iter::once(&"manifest.json".to_string())).collect::<Vec<_>>(),
    });
    write_manifest(&mut out, &manifest, RunReport {
        status,
        message,
        out_dir: cfg.out.clone(),
        files: Vec::new(),
    })
}

/// Manifest for a run that never got a valid configuration.
pub fn config_failure(out_dir: &Path, message: &str) -> RunReport {
    let report = RunReport {
        status: Status::ConfigError,
        message: message.to_string(),
        out_dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let Ok(mut out) = Output::create(out_dir) else {
        return report;
    };
    let manifest = json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": Value::Null,
        "seed": Value::Null,
        "wall_time_s": 0.0,
        "status": Status::ConfigError,
        "failure_stage": "config",
        "message": message,
        "summary": Value::Null,
        "files": ["manifest.json"],
    });
    write_manifest(&mut out, &manifest, report)
}

fn write_manifest(out: &mut Output, manifest: &Value, mut report: RunReport) -> RunReport {
    if let Err(e) = out.json("manifest.json", manifest) {
        report.status = Status::SetupError;
        report.message = format!("{}; manifest not written: {e}", report.message);
    }
    report.files = out.files().to_vec();
    report
}

fn execute(e: Experiment, cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    match e {
        Experiment::Solve => solve(cfg, out),
        Experiment::LimitSweep => limit_sweep(cfg, out),
        Experiment::Monotonicity => monotonicity(cfg, out),
        Experiment::GjCheck => gj_check(cfg, out),
        Experiment::OrderCheck => order_check(cfg, out),
        Experiment::PrekopaSuite => prekopa_suite(cfg, out),
    }
}

fn grid(cfg: &ExperimentConfig) -> Staged<Arc<GammaGrid>> {
    Ok(Arc::new(GammaGrid::new(cfg.dimension, cfg.bound(), cfg.points()).stage("grid")?))
}

fn fields(cfg: &ExperimentConfig, grid: &Arc<GammaGrid>) -> Staged<(PotentialField, PotentialField)> {
    let v = PotentialField::from_spec(grid.clone(), &cfg.v, Curvature::Unspecified).stage("potentials")?;
    let w = PotentialField::from_spec(grid.clone(), &cfg.w, Curvature::Unspecified).stage("potentials")?;
    Ok((v, w))
}

fn hypotheses(cfg: &ExperimentConfig, v: &PotentialField, w: &PotentialField) -> Staged<ValidationReport> {
    validate_inputs(v, w, &ValidationOptions {
        waive_compactness: cfg.waive_compactness,
        convexity_tol: Some(cfg.convexity_tol),
    })
    .stage("validate")
}

fn violation_list(r: &ValidationReport) -> Vec<String> {
    r.violations.iter().map(|v| v.to_string()).collect()
}

fn sinkhorn_options(cfg: &ExperimentConfig) -> SinkhornOptions {
    SinkhornOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    }
}

fn fortet_options(cfg: &ExperimentConfig) -> FortetOptions {
    FortetOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..FortetOptions::default()
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Fortet => "fortet",
        Scheme::Sinkhorn => "sinkhorn",
    }
}

fn b(x: bool) -> String {
    x.to_string()
}

fn node_columns(grid: &GammaGrid) -> Vec<&'static str> {
    if grid.dim() == 1 {
        vec!["node", "x1"]
    } else {
        vec!["node", "x1", "x2"]
    }
}

fn node_cells(grid: &GammaGrid, i: usize) -> Vec<String> {
    let mut r = vec![i.to_string()];
    r.extend(grid.coords(i).into_iter().map(fmt_f64));
    r
}

/// Convexity of `h` on the interior and concavity of `log g` on the interior
/// part of the target support.
fn structure_check(problem: &Problem, sol: &SchrodingerSolution, tol: f64) -> Staged<(bool, f64, f64)> {
    let k = &problem.kernel;
    let interior = k.interior_mask(0.0, 6.0);
    let on_nu: Vec<bool> = interior.iter().zip(&problem.nu_mask).map(|(a, b)| *a && *b).collect();
    let h = second_difference_test(k.grid(), &sol.log_f, &ConvexityOptions {
        tol,
        relative: true,
        band: Band::Mask(interior),
    })
    .stage("structure")?;
    let g = second_difference_test(k.grid(), &sol.log_g, &ConvexityOptions {
        tol,
        relative: true,
        band: Band::Mask(on_nu),
    })
    .stage("structure")?;
    Ok((h.convex && g.concave, h.min_second_difference, g.max_second_difference))
}

fn solve(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let grid = grid(cfg)?;
    let (v, w) = fields(cfg, &grid)?;
    let hyp = hypotheses(cfg, &v, &w)?;
    let eps = cfg.epsilons()[0];
    let kernel = Arc::new(build_ou_kernel(grid.clone(), eps).stage("kernel")?);
    let problem = Problem::from_potentials(kernel, &v, &w).stage("setup")?;
    let schemes = match cfg.scheme() {
        SchemeChoice::Sinkhorn => vec![Scheme::Sinkhorn],
        SchemeChoice::Fortet => vec![Scheme::Fortet],
        SchemeChoice::Both => vec![Scheme::Fortet, Scheme::Sinkhorn],
    };
    let mut sols = Vec::new();
    for s in schemes {
        let sol = match s {
            Scheme::Fortet => fortet_solve_problem(&problem, &fortet_options(cfg)),
            Scheme::Sinkhorn => sinkhorn_solve_problem(&problem, &sinkhorn_options(cfg)),
        }
        .stage("solve")?;
        sols.push(sol);
    }

    let mut failures = Vec::new();
    let mut solutions = Vec::new();
    for sol in &sols {
        let name = scheme_name(sol.scheme);
        if !sol.converged {
            failures.push(json!({
                "check": "converged", "scheme": name,
                "iterations": sol.iterations, "stop_value": sol.stop_value,
            }));
        }
        // convexity of h and concavity of log g only hold under the hypotheses
        let structure = if hyp.ok() {
            let (ok, h_min, g_max) = structure_check(&problem, sol, cfg.convexity_tol)?;
            if !ok {
                failures.push(json!({
                    "check": "structure", "scheme": name,
                    "h_min_second_difference": h_min, "log_g_max_second_difference": g_max,
                }));
            }
            Some(ok)
        } else {
            None
        };
        solutions.push(json!({
            "scheme": name, "cost": sol.cost, "direct_cost": sol.direct_cost,
            "iterations": sol.iterations, "converged": sol.converged,
            "fixed_point_residual": sol.fixed_point_residual, "gauge_integral": sol.gauge_integral,
            "structure_ok": structure, "fortet_trace": sol.fortet,
        }));

        let mut header = node_columns(&grid);
        header.extend(["mu", "nu", "h", "log_g"]);
        out.csv(&format!("solution_{name}.csv"), &header, (0..grid.len()).map(|i| {
            let mut r = node_cells(&grid, i);
            r.extend([
                fmt_f64(problem.mu.weights()[i]),
                fmt_f64(problem.nu.weights()[i]),
                fmt_f64(sol.log_f[i]),
                fmt_f64(sol.log_g[i]),
            ]);
            r
        }))
        .stage("output")?;
        if cfg.coupling {
            let c = sol.coupling().stage("output")?;
            let n = c.size();
            let rows = (0..n * n)
                .filter(|k| c.data()[*k] > 0.0)
                .map(|k| vec![(k / n).to_string(), (k % n).to_string(), fmt_f64(c.data()[k])]);
            out.csv(&format!("coupling_{name}.csv"), &["i", "j", "pi"], rows).stage("output")?;
        }
        if cfg.plots && grid.dim() == 1 {
            let xs = grid.axis();
            let series = |v: &[f64]| xs.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
            out.line_plot(&format!("profiles_{name}.svg"), &LinePlot {
                title: &format!("potentials at eps = {eps} ({name})"),
                x_label: "x",
                y_label: "value",
                series: vec![("h = log f", series(&sol.log_f)), ("log g", series(&sol.log_g))],
            })
            .stage("output")?;
        }
    }
    out.csv(
        "summary.csv",
        &[
            "scheme", "epsilon", "cost", "direct_cost", "first_marginal_error", "second_marginal_error",
            "fixed_point_residual", "gauge_integral", "iterations", "converged", "stop_value",
        ],
        sols.iter().map(|s| {
            vec![
                scheme_name(s.scheme).to_string(),
                fmt_f64(eps),
                fmt_f64(s.cost),
                fmt_f64(s.direct_cost),
                fmt_f64(s.first_marginal_error),
                fmt_f64(s.second_marginal_error),
                fmt_f64(s.fixed_point_residual),
                fmt_f64(s.gauge_integral),
                s.iterations.to_string(),
                b(s.converged),
                fmt_f64(s.stop_value),
            ]
        }),
    )
    .stage("output")?;

    let agreement = match sols.as_slice() {
        [a, b] => match (&a.coupling, &b.coupling) {
            (Some(ca), Some(cb)) => Some(ca.tv_distance(cb).stage("compare")?),
            _ => None,
        },
        _ => None,
    };
    if let Some(d) = agreement {
        if !(d < SCHEME_AGREEMENT_TOL) {
            failures.push(json!({"check": "scheme-agreement", "coupling_tv": d, "limit": SCHEME_AGREEMENT_TOL}));
        }
    }
    let costs: Vec<String> = sols
        .iter()
        .map(|s| format!("{} cost {} ({} iterations)", scheme_name(s.scheme), fmt_f64(s.cost), s.iterations))
        .collect();
    let mut message = format!("eps = {eps}: {}", costs.join(", "));
    if let Some(d) = agreement {
        message += &format!("; coupling TV {}", fmt_f64(d));
    }
    if !hyp.ok() {
        message += &format!("; {} hypothesis warnings", hyp.violations.len());
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        summary: json!({
            "epsilon": eps,
            "hypothesis_warnings": violation_list(&hyp),
            "solutions": solutions,
            "coupling_tv": agreement,
        }),
        message,
        failures,
    })
}

fn limit_sweep(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let grid = grid(cfg)?;
    let (v, w) = fields(cfg, &grid)?;
    let opts = SweepOptions {
        scheme: if cfg.scheme() == SchemeChoice::Fortet {
            Scheme::Fortet
        } else {
            Scheme::Sinkhorn
        },
        sinkhorn: sinkhorn_options(cfg),
        fortet: fortet_options(cfg),
        slack: cfg.slack,
        threshold: cfg.threshold,
    };
    let report = zero_noise_sweep(&v, &w, &cfg.epsilons(), &opts).stage("sweep")?;
    out.csv(
        "sweep.csv",
        &["epsilon", "eps_cost", "half_w2sq", "gap", "iterations", "residual"],
        report.rows.iter().map(|r| {
            vec![
                fmt_f64(r.epsilon),
                fmt_f64(r.eps_cost),
                fmt_f64(r.half_w2sq),
                fmt_f64(r.gap),
                r.iterations.to_string(),
                fmt_f64(r.residual),
            ]
        }),
    )
    .stage("output")?;
    if cfg.plots {
        let pts = report.rows.iter().map(|r| (r.epsilon.log10(), r.gap.log10())).collect();
        out.line_plot("gap.svg", &LinePlot {
            title: "zero-noise gap",
            x_label: "log10 eps",
            y_label: "log10 |eps T - W2^2/2|",
            series: vec![("gap", pts)],
        })
        .stage("output")?;
    }
    let mut failures = Vec::new();
    for r in &report.rows {
        if let Some(f) = &r.failure {
            failures.push(json!({"check": "solve", "epsilon": r.epsilon, "error": f}));
        } else if !r.converged {
            failures.push(json!({"check": "converged", "epsilon": r.epsilon, "residual": r.residual}));
        }
    }
    if !report.gap_decreasing {
        failures.push(json!({"check": "gap-decreasing", "slack": cfg.slack, "rows": report.rows}));
    }
    if !report.final_ok {
        failures.push(json!({
            "check": "final-gap", "relative_gap": report.final_relative_gap, "threshold": cfg.threshold,
        }));
    }
    let last = report.rows.last();
    Ok(Outcome {
        passed: failures.is_empty(),
        message: format!(
            "{} levels, final gap {} = {:.2}% of W2^2/2 = {}",
            report.rows.len(),
            last.map_or("NaN".into(), |r| fmt_f64(r.gap)),
            100.0 * report.final_relative_gap,
            last.map_or("NaN".into(), |r| fmt_f64(r.half_w2sq)),
        ),
        summary: serde_json::to_value(&report).unwrap_or(Value::Null),
        failures,
    })
}

fn monotonicity(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let grid = grid(cfg)?;
    let (v, w) = fields(cfg, &grid)?;
    let hyp = hypotheses(cfg, &v, &w)?;
    let mu = measure_from_potential(&v, Sign::Plus).stage("setup")?;
    let nu = measure_from_potential(&w, Sign::Minus).stage("setup")?;
    let opts = MonotonicityOptions {
        epsilons: cfg.epsilons(),
        trials_per_epsilon: cfg.trials(),
        max_cells: cfg.max_cells,
        seed: cfg.seed,
        sinkhorn: sinkhorn_options(cfg),
        ..MonotonicityOptions::default()
    };
    let report = monotonicity_experiment(&mu, &nu, &opts).stage("solve")?;
    out.csv(
        "monotonicity.csv",
        &[
            "trial", "epsilon", "cells", "cost_nu", "cost_eta", "margin", "solver_tol", "certificate_margin",
            "violation", "certificate_ok",
        ],
        report.trials.iter().map(|t| {
            vec![
                t.trial.to_string(),
                fmt_f64(t.epsilon),
                t.cells.to_string(),
                fmt_f64(t.cost_nu),
                fmt_f64(t.cost_eta),
                fmt_f64(t.margin),
                fmt_f64(t.solver_tol),
                fmt_f64(t.certificate_margin),
                b(t.violation),
                b(t.certificate_ok),
            ]
        }),
    )
    .stage("output")?;
    let mut failures: Vec<Value> = report
        .trials
        .iter()
        .filter(|t| t.violation || !t.certificate_ok)
        .map(|t| serde_json::to_value(t).unwrap_or(Value::Null))
        .collect();
    if !report.all_converged {
        failures.push(json!({"check": "converged"}));
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        message: format!(
            "{} trials, {} violations, {} certificate failures, min margin {}, {} discarded",
            report.trials.len(),
            report.violations,
            report.certificate_failures,
            fmt_f64(report.min_margin),
            report.discarded
        ),
        summary: json!({
            "trials": report.trials.len(),
            "violations": report.violations,
            "certificate_failures": report.certificate_failures,
            "min_margin": report.min_margin,
            "min_certificate_margin": report.min_certificate_margin,
            "discarded": report.discarded,
            "all_converged": report.all_converged,
            "hypothesis_warnings": violation_list(&hyp),
        }),
        failures,
    })
}

fn gj_check(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let grid = grid(cfg)?;
    let (v, w) = fields(cfg, &grid)?;
    let mu = measure_from_potential(&v, Sign::Plus).stage("setup")?;
    let nu = measure_from_potential(&w, Sign::Minus).stage("setup")?;
    let opts = GjOptions {
        trials: cfg.trials(),
        max_cells: cfg.max_cells,
        seed: cfg.seed,
        tol: cfg.tol,
        ..GjOptions::default()
    };
    let r = gj_criterion_check(&mu, &nu, &opts).stage("check")?;
    out.csv(
        "gj.csv",
        &["trial", "contiguous", "cells", "w2_mu_eta", "margin", "violation"],
        r.trials.iter().map(|t| {
            vec![
                t.trial.to_string(),
                b(t.contiguous),
                t.cells.to_string(),
                fmt_f64(t.w2_mu_eta),
                fmt_f64(t.margin),
                b(t.violation),
            ]
        }),
    )
    .stage("output")?;
    out.csv(
        "brenier.csv",
        &["x", "t_x"],
        r.map.knots.iter().map(|(x, y)| vec![fmt_f64(*x), fmt_f64(*y)]),
    )
    .stage("output")?;
    if cfg.plots {
        out.line_plot("brenier.svg", &LinePlot {
            title: "monotone rearrangement",
            x_label: "x",
            y_label: "T(x)",
            series: vec![("T", r.map.knots.clone())],
        })
        .stage("output")?;
    }
    let violated = !r.lipschitz_ok && r.violations > 0;
    let mut failures = Vec::new();
    if !r.consistent {
        failures.push(json!({
            "check": "equivalence", "lipschitz": r.map.lipschitz, "lipschitz_ok": r.lipschitz_ok,
            "violations": r.violations,
        }));
    }
    if r.discarded > 0 {
        failures.push(json!({"check": "collapse-order", "discarded": r.discarded}));
    }
    match cfg.expect {
        Expectation::Pass if !(r.lipschitz_ok && r.criterion_holds) => {
            let bad: Vec<_> = r.trials.iter().filter(|t| t.violation).collect();
            failures.push(json!({
                "check": "expected-pass", "lipschitz": r.map.lipschitz, "is_function": r.map.is_function,
                "violating_trials": bad,
            }));
        }
        Expectation::Violation if !violated => {
            failures.push(json!({
                "check": "expected-violation", "lipschitz": r.map.lipschitz, "violations": r.violations,
            }));
        }
        _ => {}
    }
    let message = if violated {
        format!(
            "W2 criterion violated, Lipschitz > 1 (L = {}, {} of {} collapses closer to mu than nu)",
            fmt_f64(r.map.lipschitz),
            r.violations,
            r.trials.len()
        )
    } else if r.criterion_holds && r.lipschitz_ok {
        format!(
            "W2 criterion holds on {} collapses, Lipschitz {} <= 1",
            r.trials.len(),
            fmt_f64(r.map.lipschitz)
        )
    } else {
        format!(
            "inconclusive: Lipschitz {} with {} violating collapses",
            fmt_f64(r.map.lipschitz),
            r.violations
        )
    };
    Ok(Outcome {
        passed: failures.is_empty(),
        message,
        summary: json!({
            "w2_mu_nu": r.w2_mu_nu,
            "lipschitz": r.map.lipschitz,
            "is_function": r.map.is_function,
            "strictly_increasing": r.map.strictly_increasing,
            "lipschitz_ok": r.lipschitz_ok,
            "violations": r.violations,
            "trials": r.trials.len(),
            "criterion_holds": r.criterion_holds,
            "consistent": r.consistent,
        }),
        failures,
    })
}

/// Reads `x1[,x2],weight` rows; the header line is required.
fn read_atoms(path: &Path, dim: usize) -> Result<AtomicMeasure> {
    let text = fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let (mut locs, mut weights) = (Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::Dimension(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                k + 2,
                rec.len(),
                dim + 1
            )));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("{}: row {}: bad number '{f}'", path.display(), k + 2)))
            })
            .collect::<Result<_>>()?;
        locs.extend_from_slice(&nums[..dim]);
        weights.push(nums[dim]);
    }
    AtomicMeasure::new(dim, locs, weights)
}

fn random_atoms<R: Rng>(dim: usize, max_atoms: usize, rng: &mut R) -> AtomicMeasure {
    let atoms = rng.gen_range(1..=max_atoms);
    let locs = (0..atoms * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let weights = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
    AtomicMeasure::new(dim, locs, weights).expect("positive weights")
}

/// Mean-matched candidate: shifted copy on even trials, a copy shrunk
/// towards its mean on odd ones, so both verdicts occur.
fn candidate(raw: &AtomicMeasure, target: &AtomicMeasure, shrink: bool) -> AtomicMeasure {
    let d = raw.dim();
    let (c, m) = (raw.mean(), target.mean());
    let factor = if shrink { 0.3 } else { 1.0 };
    let locs = raw
        .locations()
        .iter()
        .enumerate()
        .map(|(k, x)| m[k % d] + factor * (x - c[k % d]))
        .collect();
    AtomicMeasure::new(d, locs, raw.weights().to_vec()).expect("same weights")
}

struct OrderRow {
    trial: usize,
    kind: &'static str,
    eta_atoms: usize,
    nu_atoms: usize,
    one_d: Option<bool>,
    lp: bool,
    expected: Option<bool>,
}

impl OrderRow {
    fn ok(&self) -> bool {
        self.one_d.is_none_or(|a| a == self.lp) && self.expected.is_none_or(|e| e == self.lp)
    }

    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<bool>| v.map_or(String::new(), |x| x.to_string());
        vec![
            self.trial.to_string(),
            self.kind.to_string(),
            self.eta_atoms.to_string(),
            self.nu_atoms.to_string(),
            opt(self.one_d),
            b(self.lp),
            opt(self.expected),
            b(self.ok()),
        ]
    }
}

fn order_row(trial: usize, kind: &'static str, eta: &AtomicMeasure, nu: &AtomicMeasure, expected: Option<bool>, tol: f64) -> Result<OrderRow> {
    let one_d = if eta.dim() == 1 {
        Some(convex_order_check_1d(eta, nu, tol)?.holds)
    } else {
        None
    };
    let lp = convex_order_check_lp(eta, nu, tol)?.feasible;
    Ok(OrderRow {
        trial,
        kind,
        eta_atoms: eta.len(),
        nu_atoms: nu.len(),
        one_d,
        lp,
        expected,
    })
}

fn order_check(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let tol = cfg.tol;
    let dim = cfg.dimension;
    let mut rows = Vec::new();
    if let (Some(ef), Some(nf)) = (&cfg.eta_file, &cfg.nu_file) {
        let eta = read_atoms(ef, dim).stage("input")?;
        let nu = read_atoms(nf, dim).stage("input")?;
        let expected = Some(cfg.expect == Expectation::Pass);
        rows.push(order_row(0, "files", &eta, &nu, expected, tol).stage("check")?);
    } else {
        for t in 0..cfg.trials() {
            let mut rng = trial_rng(cfg.seed, t);
            let nu = random_atoms(dim, 16, &mut rng);
            if dim == 1 {
                let raw = random_atoms(dim, 8, &mut rng);
                rows.push(order_row(t, "pair", &candidate(&raw, &nu, t % 2 == 1), &nu, None, tol).stage("check")?);
            }
            let kind = if t % 4 < 2 {
                PartitionKind::Contiguous
            } else {
                PartitionKind::Random
            };
            let labels = random_partition(&nu, cfg.max_cells, kind, &mut rng);
            let eta = dirac_collapse(&nu, &labels).stage("check")?;
            rows.push(order_row(t, "collapse", &eta, &nu, Some(true), tol).stage("check")?);
            let at_mean = AtomicMeasure::dirac(&nu.mean());
            rows.push(order_row(t, "dirac-at-mean", &at_mean, &nu, Some(true), tol).stage("check")?);
        }
    }
    out.csv(
        "order.csv",
        &["trial", "kind", "eta_atoms", "nu_atoms", "one_d", "lp", "expected", "ok"],
        rows.iter().map(OrderRow::cells),
    )
    .stage("output")?;
    let failures: Vec<Value> = rows
        .iter()
        .filter(|r| !r.ok())
        .map(|r| json!({"trial": r.trial, "kind": r.kind, "one_d": r.one_d, "lp": r.lp, "expected": r.expected}))
        .collect();
    let dominated = rows.iter().filter(|r| r.kind != "dirac-at-mean" && r.lp).count();
    let message = if cfg.eta_file.is_some() {
        let r = &rows[0];
        format!("eta {} nu in convex order", if r.lp { "<=_c" } else { "is not <=_c" })
    } else {
        format!("{} checks, {} disagreements, {} dominated", rows.len(), failures.len(), dominated)
    };
    Ok(Outcome {
        passed: failures.is_empty(),
        message,
        summary: json!({"checks": rows.len(), "disagreements": failures.len(), "dominated": dominated}),
        failures,
    })
}

fn prekopa_suite(cfg: &ExperimentConfig, out: &mut Output) -> Staged<Outcome> {
    let grid = grid(cfg)?;
    let eps = cfg.epsilons()[0];
    let kernel = Arc::new(build_ou_kernel(grid.clone(), eps).stage("kernel")?);
    let opts = ClosureOptions {
        tol: cfg.convexity_tol,
        // steeper profiles leave too few interior nodes on the 2D box
        slope_bound: if cfg.dimension == 2 { 1.0 } else { ClosureOptions::default().slope_bound },
        ..ClosureOptions::default()
    };
    let n = cfg.trials();
    let phi = phi_closure_suite(&kernel, n, cfg.seed, &opts).stage("closure")?;
    let semi = prekopa_closure_suite_with(&kernel, n, cfg.seed, &opts).stage("closure")?;
    let failed = |c: ProfileClass| semi.failures.iter().filter(|f| f.class == c).count();
    let rows = [
        ("phi", phi.cases, phi.passed, phi.interior_nodes, phi.worst_margin),
        (
            "semigroup-log-convex",
            n,
            n - failed(ProfileClass::LogConvex),
            semi.interior_nodes,
            semi.worst_log_convex_margin,
        ),
        (
            "semigroup-log-concave",
            n,
            n - failed(ProfileClass::LogConcave),
            semi.interior_nodes,
            semi.worst_log_concave_margin,
        ),
    ];
    out.csv(
        "closure.csv",
        &["suite", "dimension", "epsilon", "cases", "passed", "interior_nodes", "worst_margin"],
        rows.iter().map(|(s, c, p, i, m)| {
            vec![
                s.to_string(),
                cfg.dimension.to_string(),
                fmt_f64(eps),
                c.to_string(),
                p.to_string(),
                i.to_string(),
                fmt_f64(*m),
            ]
        }),
    )
    .stage("output")?;
    let mut failures: Vec<Value> = phi
        .failures
        .iter()
        .chain(&semi.failures)
        .map(|c| serde_json::to_value(c).unwrap_or(Value::Null))
        .collect();
    if phi.interior_nodes == 0 || semi.interior_nodes == 0 {
        failures.push(json!({"check": "interior", "message": "no interior nodes to test"}));
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        message: format!(
            "Phi {}/{}, semigroup {}/{} at eps = {eps} ({} interior nodes)",
            phi.passed, phi.cases, semi.passed, semi.cases, phi.interior_nodes
        ),
        summary: json!({"phi": phi, "semigroup": semi}),
        failures,
    })
}
