//! Command-line front end: `degwave <subcommand> <scenario.ini | --preset NAME>`.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid scenario,
//! 3 HUM iteration did not converge, 4 explicit scheme went unstable.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::carleman::{beta_window, carleman_scan, ratio_trend_nonincreasing};
use crate::config::{self, Resolved, Scenario};
use crate::control::{
    self, hum_solve, observability_sample, probe_from_report, steer_general, ControlSetup, HumProblem, HumSolution,
};
use crate::error::{Error, Result};
use crate::output::{self, fmt_f64, ArtifactDir};
use crate::spaces::{self, critical_exponent};
use crate::wavesolver::{self, boundary_trace, energy_trace, solve_forward, SourceTerm, StatePair};

#[derive(Debug, Parser)]
#[command(name = "degwave", version, about = "Degenerate wave equation solver, diagnostics and HUM controls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward solve from [solve] data; writes trajectory, energy and boundary trace
    Solve(RunArgs),
    /// Hardy ratios over the built-in 20-field suite (2D only)
    Hardy(RunArgs),
    /// Carleman sides over the [carleman] s/gamma grid on random adjoint runs
    CarlemanScan(RunArgs),
    /// Observability ratios and unique-continuation flags on random adjoint data
    Observability(RunArgs),
    /// HUM control of [hum] initial data to the [hum] target
    Hum(RunArgs),
    /// Steering to a nonzero target by pull-back and null control
    Steer(RunArgs),
    /// Check every invariant of a scenario without computing
    Validate(RunArgs),
    /// Print a built-in scenario
    Preset {
        /// benchmark-1d, benchmark-1d-steer, benchmark-2d or classical
        name: String,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario instead of a file
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides `output_dir`
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `seed`
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. } | Error::Parse(_) | Error::Degenerate(_) => 2,
        Error::NonConvergence { .. } => 3,
        Error::Instability { .. } => 4,
        Error::Io(_) => 1,
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let (args, name) = match &cli.command {
        Command::Preset { name } => {
            return match config::preset(name) {
                Some(text) => {
                    print!("{text}");
                    0
                }
                None => {
                    eprintln!("unknown preset {name:?}; available: {}", config::PRESET_NAMES.join(", "));
                    2
                }
            };
        }
        Command::Solve(a) => (a, "solve"),
        Command::Hardy(a) => (a, "hardy"),
        Command::CarlemanScan(a) => (a, "carleman-scan"),
        Command::Observability(a) => (a, "observability"),
        Command::Hum(a) => (a, "hum"),
        Command::Steer(a) => (a, "steer"),
        Command::Validate(a) => (a, "validate"),
    };
    let scenario = match load(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if name == "validate" {
        return match validate(&scenario) {
            Ok(report) => {
                print!("{report}");
                0
            }
            Err(e) => {
                eprintln!("invalid: {e}");
                exit_code(&e)
            }
        };
    }
    let resolved = match scenario.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("invalid: {e}");
            return exit_code(&e);
        }
    };
    let mut dir = match ArtifactDir::create(&scenario.output_dir) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let started = unix_seconds();
    let result = match name {
        "solve" => cmd_solve(&scenario, &resolved, &mut dir),
        "hardy" => cmd_hardy(&resolved, &mut dir),
        "carleman-scan" => cmd_carleman(&scenario, &resolved, &mut dir),
        "observability" => cmd_observability(&scenario, &resolved, &mut dir),
        "hum" => cmd_hum(&scenario, &resolved, &mut dir, false),
        "steer" => cmd_hum(&scenario, &resolved, &mut dir, true),
        _ => unreachable!(),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e)
        }
    };
    let root = dir.root().to_path_buf();
    let manifest = dir.finish();
    let log = format!(
        "started_unix={started}\nfinished_unix={}\ncommand={name}\nexit_code={code}\nresult={}\n",
        unix_seconds(),
        match &result {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        }
    );
    if let Err(e) = std::fs::write(root.join(output::RUN_LOG), log) {
        eprintln!("error: cannot write run log: {e}");
    }
    match manifest {
        Ok(_) => {
            if code == 0 {
                println!("{name}: wrote artifacts to {}", root.display());
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if code == 0 {
                exit_code(&e)
            } else {
                code
            }
        }
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn load(args: &RunArgs) -> Result<Scenario> {
    let mut s = match (&args.config, &args.preset) {
        (Some(p), _) => Scenario::from_path(p)?,
        (None, Some(name)) => {
            let text = config::preset(name).ok_or_else(|| {
                Error::validation("preset", format!("unknown preset {name:?}; available: {}", config::PRESET_NAMES.join(", ")))
            })?;
            Scenario::parse(&text)?
        }
        (None, None) => return Err(Error::validation("config", "give a scenario file or --preset")),
    };
    if let Some(d) = &args.output_dir {
        s.output_dir = d.clone();
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    Ok(s)
}

/// Dry run: resolves the scenario and lists the checks that passed.
pub fn validate(s: &Scenario) -> Result<String> {
    let r = s.resolve()?;
    let d = r.grid.domain();
    let mut out = String::new();
    out.push_str(&format!(
        "ok domain: dim = {}, alpha = {}, bounds = {:?}\n",
        d.dim(),
        d.alpha(),
        d.bounds()
    ));
    out.push_str(&format!("ok grid: {} nodes, h = {:?}\n", r.grid.len(), r.grid.spacing()));
    out.push_str(&format!(
        "ok region: delta = {}, epsilon = {}, include_origin = {}, covers_domain = {}\n",
        r.delta,
        r.epsilon,
        r.omega.contains_origin(),
        r.omega.covers_domain()
    ));
    out.push_str(&format!("ok time: T = {}, dt = {}\n", r.t_final, r.dt));
    if s.region.include_origin {
        let t_min = crate::geometry::minimal_time(d, r.epsilon, r.delta)?;
        out.push_str(&format!("   minimal control time {t_min}\n"));
    }
    if let Some(c) = &r.carleman {
        let w = beta_window(d, r.epsilon, r.delta, r.t_final);
        out.push_str(&format!(
            "ok carleman: beta = {} in ({}, {}), binding {}; t0 = {}\n",
            c.beta, w.lower, w.upper, w.binding, c.t0
        ));
    }
    if s.hum.is_some() {
        out.push_str("ok hum\n");
    }
    if s.observability.is_some() {
        out.push_str("ok observability\n");
    }
    Ok(out)
}

fn setup(r: &Resolved) -> ControlSetup<'_> {
    ControlSetup {
        grid: &r.grid,
        omega: &r.omega,
        t_final: r.t_final,
        dt: r.dt,
    }
}

fn grid_json(r: &Resolved) -> serde_json::Value {
    let d = r.grid.domain();
    json!({
        "dim": d.dim(),
        "bounds": d.bounds(),
        "alpha": d.alpha(),
        "cells_per_axis": r.grid.cells_per_axis(),
        "nodes": r.grid.len(),
        "delta": r.delta,
        "epsilon": r.epsilon,
        "include_origin": r.omega.contains_origin(),
    })
}

fn cmd_solve(s: &Scenario, r: &Resolved, dir: &mut ArtifactDir) -> Result<()> {
    let init = match &s.solve {
        Some(spec) => spec.initial(&r.grid),
        None => StatePair::zeros(&r.grid),
    };
    let traj = solve_forward(&r.grid, &init, &SourceTerm::Zero, r.t_final, r.dt, s.time.stride)?;
    dir.write_str("trajectory.csv", &output::trajectory_csv(&r.grid, &traj, 1))?;
    let energy = energy_trace(&traj);
    dir.write_str("energy.csv", &output::energy_csv(energy))?;
    let trace = boundary_trace(&r.grid, &traj);
    let mut header = vec!["t".to_string()];
    header.extend((0..trace.points.len()).map(|p| format!("node{}", trace.points[p].node)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = trace
        .times
        .iter()
        .zip(&trace.values)
        .map(|(t, v)| std::iter::once(*t).chain(v.iter().copied()).collect())
        .collect();
    dir.write_str(
        "boundary_trace.csv",
        &output::csv_text(&header, output::numeric_rows(rows.iter().map(Vec::as_slice))),
    )?;
    let e0 = energy.first().map_or(0.0, |e| e.total);
    let drift = energy.iter().map(|e| (e.total - e0).abs()).fold(0.0, f64::max);
    dir.write_json(
        "summary.json",
        &json!({
            "command": "solve",
            "grid": grid_json(r),
            "T": r.t_final,
            "dt": traj.dt(),
            "n_steps": traj.n_steps(),
            "stride": traj.stride(),
            "initial_energy": e0,
            "max_energy_drift_relative": if e0 > 0.0 { drift / e0 } else { drift },
            "boundary_trace_l2_norm": trace.l2_norm,
        }),
    )
}

fn cmd_hardy(r: &Resolved, dir: &mut ArtifactDir) -> Result<()> {
    let d = r.grid.domain();
    let q = critical_exponent(d.dim(), d.alpha());
    let mut rows = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for (name, u) in spaces::hardy_suite(&r.grid) {
        let h = spaces::hardy_ratio(&r.grid, &u)?;
        let lq = spaces::lq_embedding_ratio(&r.grid, &u, q)?;
        max_ratio = max_ratio.max(h.ratio);
        rows.push(vec![
            name,
            fmt_f64(h.ratio),
            fmt_f64(h.prefactor),
            fmt_f64(h.weighted_l2),
            fmt_f64(h.h1_norm),
            fmt_f64(h.excluded_mass_bound),
            fmt_f64(lq),
        ]);
    }
    dir.write_str(
        "hardy.csv",
        &output::csv_text(
            &["field", "ratio", "prefactor", "weighted_l2", "h1_norm", "excluded_mass_bound", "lq_ratio"],
            rows,
        ),
    )?;
    dir.write_json(
        "summary.json",
        &json!({
            "command": "hardy",
            "grid": grid_json(r),
            "prefactor": d.dim() as f64 - 2.0 + d.alpha(),
            "max_ratio": max_ratio,
            "critical_exponent": q,
        }),
    )
}

fn cmd_carleman(s: &Scenario, r: &Resolved, dir: &mut ArtifactDir) -> Result<()> {
    let spec = s
        .carleman
        .as_ref()
        .ok_or_else(|| Error::validation("carleman", "section [carleman] is required"))?;
    let base = r.carleman.expect("resolved with the section");
    let data = control::random_adjoint_data(&r.grid, spec.samples, s.seed);
    let mut c_hat: f64 = 0.0;
    let mut trends = Vec::new();
    for (k, q) in data.iter().enumerate() {
        let traj = solve_forward(&r.grid, q, &SourceTerm::Zero, r.t_final, r.dt, 1)?;
        let rows = carleman_scan(&r.grid, &traj, &SourceTerm::Zero, &r.omega, &base, &spec.s, &spec.gamma)?;
        for g in &spec.gamma {
            let ratios: Vec<f64> = rows.iter().filter(|x| x.gamma == *g).filter_map(|x| x.sides.ratio).collect();
            trends.push(ratio_trend_nonincreasing(&ratios));
        }
        c_hat = rows.iter().filter_map(|x| x.sides.ratio).fold(c_hat, f64::max);
        let text = output::csv_text(
            &["s", "gamma", "log_lhs", "log_rhs_control", "log_rhs_source", "ratio"],
            rows.iter().map(|x| {
                vec![
                    fmt_f64(x.s),
                    fmt_f64(x.gamma),
                    fmt_f64(x.sides.log_lhs),
                    fmt_f64(x.sides.log_rhs_control),
                    fmt_f64(x.sides.log_rhs_source),
                    x.sides.ratio.map_or("nan".to_string(), fmt_f64),
                ]
            }),
        );
        dir.write_str(&format!("carleman_run{k}.csv"), &text)?;
    }
    let w = beta_window(r.grid.domain(), r.epsilon, r.delta, r.t_final);
    dir.write_json(
        "summary.json",
        &json!({
            "command": "carleman-scan",
            "grid": grid_json(r),
            "T": r.t_final,
            "seed": s.seed,
            "runs": spec.samples,
            "params": base,
            "beta_window": w,
            "c_hat": c_hat,
            "trend_nonincreasing": trends.iter().all(|&t| t),
        }),
    )
}

fn cmd_observability(s: &Scenario, r: &Resolved, dir: &mut ArtifactDir) -> Result<()> {
    let spec = s
        .observability
        .as_ref()
        .ok_or_else(|| Error::validation("observability", "section [observability] is required"))?;
    let report = observability_sample(&setup(r), spec.samples, s.seed)?;
    let probe = probe_from_report(&report, spec.threshold);
    dir.write_str(
        "observability.csv",
        &output::csv_text(
            &["sample", "energy", "omega_integral", "ratio"],
            (0..report.samples).map(|k| {
                vec![
                    k.to_string(),
                    fmt_f64(report.energies[k]),
                    fmt_f64(report.omega_integrals[k]),
                    fmt_f64(report.ratios[k]),
                ]
            }),
        ),
    )?;
    dir.write_json(
        "summary.json",
        &json!({
            "command": "observability",
            "grid": grid_json(r),
            "T": report.t_used,
            "seed": s.seed,
            "samples": report.samples,
            "min_ratio": report.min_ratio,
            "max_ratio": report.max_ratio,
            "unique_continuation": probe,
        }),
    )
}

fn residuals_csv(history: &[f64]) -> String {
    output::csv_text(
        &["iteration", "relative_residual"],
        history.iter().enumerate().map(|(k, r)| vec![k.to_string(), fmt_f64(*r)]),
    )
}

fn cmd_hum(s: &Scenario, r: &Resolved, dir: &mut ArtifactDir, steer: bool) -> Result<()> {
    let spec = s
        .hum
        .as_ref()
        .ok_or_else(|| Error::validation("hum", "section [hum] is required"))?;
    let problem = HumProblem {
        initial: spec.initial(&r.grid),
        target: spec.target(&r.grid),
        tol: spec.tol,
        max_iter: spec.max_iter,
    };
    let command = if steer { "steer" } else { "hum" };
    let st = setup(r);
    let result: Result<HumSolution> = if steer {
        steer_general(&st, &problem)
    } else {
        hum_solve(&st, &problem)
    };
    let sol = match result {
        Ok(sol) => sol,
        Err(Error::NonConvergence {
            iterations,
            residual,
            tol,
            history,
        }) => {
            dir.write_str("residuals.csv", &residuals_csv(&history))?;
            dir.write_json(
                "summary.json",
                &json!({
                    "command": command,
                    "status": "no_convergence",
                    "grid": grid_json(r),
                    "T": r.t_final,
                    "iterations": iterations,
                    "relative_residual": residual,
                    "tol": tol,
                }),
            )?;
            return Err(Error::NonConvergence {
                iterations,
                residual,
                tol,
                history,
            });
        }
        Err(e) => return Err(e),
    };
    dir.write_str("residuals.csv", &residuals_csv(&sol.residual_history))?;
    dir.write_str("control.csv", &output::trajectory_csv(&r.grid, &sol.control, s.time.stride))?;
    let (n, dt) = wavesolver::time_steps(r.t_final, r.dt)?;
    dir.write_json(
        "summary.json",
        &json!({
            "command": command,
            "status": "converged",
            "grid": grid_json(r),
            "T": r.t_final,
            "dt": dt,
            "n_steps": n,
            "tol": spec.tol,
            "iterations": sol.iterations,
            "final_relative_residual": sol.residual_history.last(),
            "final_state_error": sol.final_state_error,
            "control_l2_norm": sol.control.l2_norm_squared(&r.grid).sqrt(),
        }),
    )
}
