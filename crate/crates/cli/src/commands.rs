//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ptstring::bounds::{calibrate_ck, BoundParams};
use ptstring::diagnostics::{envelope_validity_end, evaluate_trajectory, DiagnosticSample, LyapunovWeights};
use ptstring::kernel_fd::{inverse_residual, solve_inverse_kernel, KernelField};
use ptstring::simulator::{simulate, Scenario, SimulationSetup, Trajectory};
use ptstring::verify::{fd_oracle_error, run_suite, Check};
use ptstring::{GainProfile, SeriesKernel64};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::output;
use crate::plot::{line_plot, Series};

/// Resolved command-line context.
pub struct RunContext {
    pub config: ScenarioConfig,
    pub out: PathBuf,
    pub svg: bool,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Agreement of the FD kernel with the series oracle.
#[derive(Debug, Serialize)]
pub struct KernelReport {
    pub kernel_n: usize,
    pub solver_dt: f64,
    pub t_max: f64,
    pub slices: usize,
    pub oracle_t_max: f64,
    pub oracle_order: usize,
    /// Worst per-slice `sup |k_fd - k_series| / sup |k_series|` for `t <= oracle_t_max`.
    pub max_relative_error: f64,
    pub inverse_max_sweeps: usize,
    pub inverse_max_residual: f64,
}

/// Solves the closed-loop kernel, the inverse kernel and the series oracle, and writes
/// `kernel.csv`, `inverse_kernel.csv`, `series_terms.csv` and `kernel_report.json`.
pub fn run_kernel(ctx: &RunContext) -> Result<KernelReport> {
    let setup = ctx.config.setup()?;
    setup.validate(Scenario::ClosedLoop).context("kernel preconditions")?;
    ensure_dir(&ctx.out)?;
    let kernel = setup.solve_kernel(Scenario::ClosedLoop)?.expect("closed loop has a kernel");
    let inverse = solve_inverse_kernel(&kernel).context("inverse kernel")?;
    let oracle_t = (0.8 * setup.pt.horizon()).min(kernel.t_max());
    let oracle = SeriesKernel64::with_tolerance(&setup.params, &GainProfile::PrescribedTime(setup.schedule()), oracle_t, 1e-10)
        .context("series oracle")?;
    let err = fd_oracle_error(&kernel, &oracle, oracle_t)?;
    let f = kernel.field();
    let every = (f.slice_count() / 40).max(1);
    kernel.write_csv(fs::File::create(ctx.out.join("kernel.csv"))?, every)?;
    inverse.write_csv(fs::File::create(ctx.out.join("inverse_kernel.csv"))?, every)?;
    oracle.write_table(fs::File::create(ctx.out.join("series_terms.csv"))?)?;
    let residual = (0..f.slice_count())
        .into_par_iter()
        .map(|l| inverse_residual(f.grid(), f.slice(l), inverse.field().slice(l)))
        .reduce(|| 0.0, f64::max);
    let report = KernelReport {
        kernel_n: setup.kernel_n,
        solver_dt: kernel.solver_dt(),
        t_max: kernel.t_max(),
        slices: f.slice_count(),
        oracle_t_max: oracle_t,
        oracle_order: oracle.order(),
        max_relative_error: err,
        inverse_max_sweeps: inverse.sweeps.iter().copied().max().unwrap_or(0),
        inverse_max_residual: residual,
    };
    write_json(&ctx.out.join("kernel_report.json"), &report)?;
    Ok(report)
}

/// Headline numbers of one run.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub scenario: &'static str,
    pub initial: &'static str,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub norm_ratio: f64,
    pub max_abs_control: f64,
    pub final_control: f64,
    /// Time from which kernel traces were held at the last solved slice.
    pub trace_hold_from: Option<f64>,
    /// End of the window on which the decay envelope exists, if any.
    pub envelope_valid_until: Option<f64>,
}

fn bound_params(setup: &SimulationSetup<f64>) -> Result<BoundParams<f64>> {
    let sched = setup.schedule();
    let times: Vec<f64> = (0..=9).map(|k| 0.1 * k as f64 * 0.9 * sched.horizon()).collect();
    Ok(calibrate_ck(&setup.params, &sched, setup.tri_grid()?, &times)?)
}

fn summarize(traj: &Trajectory<f64>, setup: &SimulationSetup<f64>, weights: &LyapunovWeights<f64>) -> RunSummary {
    let n0 = traj.initial_norm();
    let fin = traj.final_sample().map_or(f64::NAN, |n| n.l2);
    RunSummary {
        scenario: traj.scenario.name(),
        initial: setup.initial.name(),
        t_end: setup.t_end,
        dt: traj.dt,
        steps: traj.norms.len().saturating_sub(1),
        initial_norm: n0,
        final_norm: fin,
        norm_ratio: fin / n0,
        max_abs_control: traj.controls.iter().map(|c| c.u.abs()).fold(0.0, f64::max),
        final_control: traj.controls.last().map_or(0.0, |c| c.u),
        trace_hold_from: traj.trace_hold_from,
        envelope_valid_until: envelope_validity_end(weights, &setup.schedule()),
    }
}

/// Runs one scenario and writes its CSV files, plots and `summary.json` into `dir`.
pub fn run_one(
    setup: &SimulationSetup<f64>,
    scenario: Scenario,
    kernel: Option<&KernelField<f64>>,
    dir: &Path,
    svg: bool,
) -> Result<RunSummary> {
    ensure_dir(dir)?;
    let owned;
    let kernel = match (scenario, kernel) {
        (Scenario::OpenLoop | Scenario::Target, _) => None,
        (_, Some(k)) => Some(k),
        (_, None) => {
            owned = setup.solve_kernel(scenario)?;
            owned.as_ref()
        }
    };
    let traj = simulate(scenario, setup, kernel).with_context(|| format!("{} run", scenario.name()))?;
    let weights = LyapunovWeights::default_for(&setup.params);
    let diag = evaluate_trajectory(&traj, kernel, &weights, &setup.params, &setup.schedule(), &bound_params(setup)?)?;
    output::write_trajectory(dir, &traj)?;
    output::write_norms(dir, &traj)?;
    output::write_control(dir, &traj)?;
    output::write_diagnostics(dir, &diag)?;
    if svg {
        render_run(dir, &traj, &diag)?;
    }
    let summary = summarize(&traj, setup, &weights);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn render_run(dir: &Path, traj: &Trajectory<f64>, diag: &[DiagnosticSample<f64>]) -> Result<()> {
    let norm = Series { label: "||p||", points: traj.norms.iter().map(|n| (n.t, n.l2)).collect() };
    let env = Series { label: "envelope", points: diag.iter().filter_map(|d| d.envelope.map(|e| (d.t, e))).collect() };
    line_plot(&dir.join("norms.svg"), &format!("{} norm", traj.scenario.name()), "t (s)", "L2 norm", &[norm, env], true)?;
    let u = Series { label: "u", points: traj.controls.iter().map(|c| (c.t, c.u)).collect() };
    line_plot(&dir.join("control.svg"), &format!("{} control", traj.scenario.name()), "t (s)", "u (N)", &[u], false)?;
    let e = Series { label: "Ek + Ep", points: traj.norms.iter().map(|n| (n.t, n.ek + n.ep)).collect() };
    line_plot(&dir.join("energy.svg"), &format!("{} energy", traj.scenario.name()), "t (s)", "energy (J)", &[e], false)
}

/// Runs the configured scenario; a sweep writes one subdirectory per profile plus `compare/`.
pub fn run_simulate(ctx: &RunContext) -> Result<serde_json::Value> {
    let setup = ctx.config.validate()?;
    match ctx.config.scenario.kind {
        ScenarioKind::Sweep => {
            let profiles = ctx.config.sweep_profiles()?;
            let kernel = setup.solve_kernel(Scenario::ClosedLoop)?.expect("closed loop has a kernel");
            let runs: Vec<Result<RunSummary>> = profiles
                .par_iter()
                .map(|&p| {
                    let mut s = setup.clone();
                    s.initial = p;
                    run_one(&s, Scenario::ClosedLoop, Some(&kernel), &ctx.out.join(p.name()), ctx.svg)
                })
                .collect();
            let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
            let cmp = compare(&setup, Some(&kernel), &ctx.out.join("compare"), ctx.svg)?;
            let value = json!({ "runs": runs, "compare": cmp });
            write_json(&ctx.out.join("sweep.json"), &value)?;
            Ok(value)
        }
        kind => {
            let s = run_one(&setup, kind.governing(), None, &ctx.out, ctx.svg)?;
            Ok(serde_json::to_value(s)?)
        }
    }
}

/// Prescribed-time versus frozen-gain closed loop from the same initial state.
#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub initial: &'static str,
    pub pt_final_norm: f64,
    pub baseline_final_norm: f64,
    /// Whether the prescribed-time norm stays below the baseline over the last `T_min` before the stop time.
    pub pt_below_baseline_near_end: bool,
    pub pt_trace_hold_from: Option<f64>,
}

fn compare(setup: &SimulationSetup<f64>, kernel: Option<&KernelField<f64>>, dir: &Path, svg: bool) -> Result<CompareReport> {
    ensure_dir(dir)?;
    let pt = simulate(Scenario::ClosedLoop, setup, kernel).context("prescribed-time run")?;
    let base = simulate(Scenario::Baseline, setup, None).context("baseline run")?;
    let rows: Vec<Vec<f64>> = pt.norms.iter().zip(&base.norms).map(|(a, b)| vec![a.t, a.l2, b.l2]).collect();
    output::write_table(&dir.join("compare.csv"), &["t", "l2_pt", "l2_baseline"], &rows)?;
    let window_start = setup.t_end - setup.params.minimal_time();
    let below = rows.iter().filter(|r| r[0] >= window_start).all(|r| r[1] < r[2]);
    if svg {
        let a = Series { label: "prescribed time", points: rows.iter().map(|r| (r[0], r[1])).collect() };
        let b = Series { label: "frozen gain", points: rows.iter().map(|r| (r[0], r[2])).collect() };
        line_plot(&dir.join("compare.svg"), "closed-loop norm", "t (s)", "L2 norm (log)", &[a, b], true)?;
    }
    let report = CompareReport {
        initial: setup.initial.name(),
        pt_final_norm: pt.final_sample().map_or(f64::NAN, |n| n.l2),
        baseline_final_norm: base.final_sample().map_or(f64::NAN, |n| n.l2),
        pt_below_baseline_near_end: below,
        pt_trace_hold_from: pt.trace_hold_from,
    };
    write_json(&dir.join("compare.json"), &report)?;
    Ok(report)
}

pub fn run_compare(ctx: &RunContext) -> Result<CompareReport> {
    let setup = ctx.config.setup()?;
    setup.validate(Scenario::ClosedLoop).context("closed-loop preconditions")?;
    setup.validate(Scenario::Baseline).context("baseline preconditions")?;
    compare(&setup, None, &ctx.out, ctx.svg)
}

fn check_json(c: &Check) -> serde_json::Value {
    let metrics: Vec<serde_json::Value> =
        c.metrics.iter().map(|m| json!({ "name": m.name, "value": m.value, "limit": m.limit, "passed": m.passed })).collect();
    json!({
        "criterion": c.criterion,
        "name": c.name,
        "passed": c.passed,
        "skipped": c.skipped,
        "gating": c.gating,
        "metrics": metrics,
        "note": c.note,
    })
}

/// Runs the verification suite, prints one line per check and writes `verify.json`.
///
/// Returns `true` when every gating check passed. An invalid configuration is itself a
/// failing check, so this only errors on I/O.
pub fn run_verify(ctx: &RunContext) -> Result<bool> {
    let setup = match ctx.config.setup() {
        Ok(s) => s,
        Err(e) => {
            ensure_dir(&ctx.out)?;
            let report = json!({ "passed": false, "error": format!("{e:#}"), "checks": [] });
            write_json(&ctx.out.join("verify.json"), &report)?;
            println!("FAIL configuration: {e:#}");
            return Ok(false);
        }
    };
    let checks = run_suite(&setup);
    for c in &checks {
        println!("{}", c.summary_line());
    }
    let passed = checks.iter().all(Check::acceptable);
    ensure_dir(&ctx.out)?;
    let report = json!({ "passed": passed, "checks": checks.iter().map(check_json).collect::<Vec<_>>() });
    write_json(&ctx.out.join("verify.json"), &report)?;
    Ok(passed)
}
