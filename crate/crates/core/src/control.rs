//! HUM control synthesis for the interior-controlled degenerate wave equation.
//!
//! For adjoint data `q = (z0, z1)` let `z` be the free solution and `u` the
//! solution driven by `chi_omega z` with zero state at `T`, marched back to 0.
//! `J q = (u_t(0), -u(0))`. With the discrete Taylor start and its inverse
//! used for velocities, summation by parts gives exactly
//!
//! ```text
//! <u(0), z1> - <u_t(0), z0> = iint_{omega x (0,T)} z^2   (trapezoid in time)
//! ```
//!
//! so `M q = -J q = (-u_t(0), u(0))` is symmetric positive semidefinite in the
//! grid inner product with `<M q, q'> = iint_omega z z'`. Null control of
//! `(y0, y1)` solves `M q = (-y1, y0)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{check_control_time, ControlRegion, Grid};
use crate::spaces::{self, ScalarField};
use crate::wavesolver::{solve_backward, solve_forward, SourceTerm, SpaceTimeField, StatePair};

/// Shared inputs of every control computation.
#[derive(Debug, Clone, Copy)]
pub struct ControlSetup<'a> {
    pub grid: &'a Grid,
    pub omega: &'a ControlRegion,
    pub t_final: f64,
    pub dt: f64,
}

/// Grid inner product on data pairs.
pub fn data_inner(grid: &Grid, a: &StatePair, b: &StatePair) -> f64 {
    spaces::inner(grid, &a.u, &b.u) + spaces::inner(grid, &a.v, &b.v)
}

pub fn data_norm(grid: &Grid, a: &StatePair) -> f64 {
    data_inner(grid, a, a).sqrt()
}

/// Duality pairing between an image of `J` and adjoint data,
/// `<(p0, p1), (z0, z1)> = -int (p0 z0 + p1 z1)`; with it
/// `pairing(J q, q) = iint_omega z^2`.
pub fn pairing(grid: &Grid, image: &StatePair, q: &StatePair) -> f64 {
    -data_inner(grid, image, q)
}

/// `iint_{omega x (0,T)} z z'` with trapezoidal time weights.
pub fn omega_product(grid: &Grid, omega: &ControlRegion, z: &SpaceTimeField, w: &SpaceTimeField) -> f64 {
    let nw = grid.node_weights();
    z.time_weights()
        .iter()
        .zip(z.snapshots().iter().zip(w.snapshots()))
        .map(|(tw, (a, b))| {
            tw * (0..grid.len())
                .filter(|&i| omega.contains(i))
                .map(|i| nw[i] * a[i] * b[i])
                .sum::<f64>()
        })
        .sum()
}

/// Free adjoint solution from `q`, every step stored.
pub fn adjoint_solution(setup: &ControlSetup<'_>, q: &StatePair) -> Result<SpaceTimeField> {
    solve_forward(setup.grid, q, &SourceTerm::Zero, setup.t_final, setup.dt, 1)
}

/// `(u(0), u_t(0))` for the system driven by `chi_omega z` with zero state at `T`.
fn controlled_initial_state(setup: &ControlSetup<'_>, z: &SpaceTimeField) -> Result<StatePair> {
    let source = SourceTerm::Masked(z, setup.omega);
    let n = z.n_steps();
    let back = solve_backward(setup.grid, &StatePair::zeros(setup.grid), &source, setup.t_final, setup.dt, n.max(1))?;
    Ok(back.initial_state())
}

/// `J q = (u_t(0), -u(0))`.
pub fn apply_j(setup: &ControlSetup<'_>, q: &StatePair) -> Result<StatePair> {
    let z = adjoint_solution(setup, q)?;
    let s = controlled_initial_state(setup, &z)?;
    Ok(StatePair::new(s.v, s.u.scaled(-1.0)))
}

/// `M q = -J q` together with the adjoint solution.
fn gramian_apply(setup: &ControlSetup<'_>, q: &StatePair) -> Result<(StatePair, SpaceTimeField)> {
    let z = adjoint_solution(setup, q)?;
    let s = controlled_initial_state(setup, &z)?;
    Ok((StatePair::new(s.v.scaled(-1.0), s.u), z))
}

/// `G(q, q') = iint_omega z z'`.
pub fn gramian(setup: &ControlSetup<'_>, q: &StatePair, q2: &StatePair) -> Result<f64> {
    let z = adjoint_solution(setup, q)?;
    let w = adjoint_solution(setup, q2)?;
    Ok(omega_product(setup.grid, setup.omega, &z, &w))
}

#[derive(Debug, Clone)]
pub struct HumProblem {
    pub initial: StatePair,
    pub target: StatePair,
    pub tol: f64,
    pub max_iter: usize,
}

impl HumProblem {
    pub fn validate(&self, setup: &ControlSetup<'_>) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::validation("hum.tol", format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("hum.max_iter", "need at least one iteration"));
        }
        if setup.omega.contains_origin() {
            let domain = setup.grid.domain();
            check_control_time(domain, setup.omega.epsilon(), setup.omega.delta(), setup.t_final)
                .map_err(|m| Error::validation("time.T", m))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HumSolution {
    /// Minimizing adjoint datum `(z0, z1)`.
    pub adjoint_datum: StatePair,
    /// `f = chi_omega z`, one snapshot per step.
    pub control: SpaceTimeField,
    /// Relative residual `||b - M q|| / scale` per iteration (entry 0 is the
    /// starting residual).
    pub residual_history: Vec<f64>,
    pub final_state: StatePair,
    pub final_state_error: f64,
    pub iterations: usize,
}

/// Energy-norm miss `||(u(T), u_t(T)) - target||_E`, relative to the larger
/// of the initial and target energy norms (absolute if both vanish).
pub fn state_error(grid: &Grid, initial: &StatePair, target: &StatePair, reached: &StatePair) -> f64 {
    let miss = reached.add_scaled(-1.0, target).energy_norm(grid);
    let scale = initial.energy_norm(grid).max(target.energy_norm(grid));
    if scale > 0.0 {
        miss / scale
    } else {
        miss
    }
}

/// Runs the controlled system forward from `initial` with `control` and
/// returns the terminal state.
pub fn resimulate(setup: &ControlSetup<'_>, initial: &StatePair, control: &SpaceTimeField) -> Result<StatePair> {
    let traj = solve_forward(
        setup.grid,
        initial,
        &SourceTerm::Field(control),
        setup.t_final,
        setup.dt,
        control.n_steps().max(1),
    )?;
    Ok(traj.final_state())
}

/// State at time 0 whose free evolution reaches `target` at `T`.
pub fn pull_back(setup: &ControlSetup<'_>, target: &StatePair) -> Result<StatePair> {
    if target.is_zero() {
        return Ok(StatePair::zeros(setup.grid));
    }
    let n = crate::wavesolver::time_steps(setup.t_final, setup.dt)?.0;
    let back = solve_backward(setup.grid, target, &SourceTerm::Zero, setup.t_final, setup.dt, n)?;
    let s = back.initial_state();
    Ok(StatePair::new(
        ScalarField::dirichlet_from_values(setup.grid, s.u.into_values()),
        ScalarField::dirichlet_from_values(setup.grid, s.v.into_values()),
    ))
}

fn zero_control(setup: &ControlSetup<'_>) -> Result<SpaceTimeField> {
    let (n, dt) = crate::wavesolver::time_steps(setup.t_final, setup.dt)?;
    Ok(SpaceTimeField::from_snapshots(dt, vec![vec![0.0; setup.grid.len()]; n + 1]))
}

/// Conjugate-residual iteration on `M q = b`: a Krylov method of the
/// conjugate-gradient family whose residual norm is monotone.
fn conjugate_residual(
    setup: &ControlSetup<'_>,
    b: &StatePair,
    scale: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(StatePair, Vec<f64>, usize, bool)> {
    let grid = setup.grid;
    let mut x = StatePair::zeros(grid);
    let mut r = b.clone();
    let mut history = vec![data_norm(grid, &r) / scale];
    if history[0] <= tol {
        return Ok((x, history, 0, true));
    }
    let (ar, _) = gramian_apply(setup, &r)?;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut r_ar = data_inner(grid, &r, &ar);
    for k in 1..=max_iter {
        let ap_ap = data_inner(grid, &ap, &ap);
        if !(ap_ap > 0.0 && r_ar > 0.0) {
            log::warn!("Krylov breakdown at iteration {k}");
            return Ok((x, history, k - 1, false));
        }
        let a = r_ar / ap_ap;
        x = x.add_scaled(a, &p);
        r = r.add_scaled(-a, &ap);
        let rel = data_norm(grid, &r) / scale;
        history.push(rel);
        if rel <= tol {
            return Ok((x, history, k, true));
        }
        let (ar_new, _) = gramian_apply(setup, &r)?;
        let r_ar_new = data_inner(grid, &r, &ar_new);
        let beta = r_ar_new / r_ar;
        p = r.add_scaled(beta, &p);
        ap = ar_new.add_scaled(beta, &ap);
        r_ar = r_ar_new;
    }
    Ok((x, history, max_iter, false))
}

/// Null control of `initial - pull_back(target)` followed by re-simulation
/// from `initial` against `target`.
pub fn hum_solve(setup: &ControlSetup<'_>, problem: &HumProblem) -> Result<HumSolution> {
    problem.validate(setup)?;
    let grid = setup.grid;
    let pulled = pull_back(setup, &problem.target)?;
    let y = problem.initial.add_scaled(-1.0, &pulled);
    let rhs = |s: &StatePair| StatePair::new(s.v.scaled(-1.0), s.u.clone());
    let b = rhs(&y);
    let scale = data_norm(grid, &rhs(&problem.initial)).max(data_norm(grid, &rhs(&pulled)));

    let (q, history, iterations, control) = if scale == 0.0 {
        (StatePair::zeros(grid), vec![0.0], 0, zero_control(setup)?)
    } else {
        let (q, history, iterations, converged) = conjugate_residual(setup, &b, scale, problem.tol, problem.max_iter)?;
        if !converged {
            let residual = *history.last().unwrap_or(&f64::NAN);
            return Err(Error::NonConvergence {
                iterations,
                residual,
                tol: problem.tol,
                history,
            });
        }
        let control = if iterations == 0 {
            zero_control(setup)?
        } else {
            adjoint_solution(setup, &q)?.masked(setup.omega)
        };
        (q, history, iterations, control)
    };

    let final_state = resimulate(setup, &problem.initial, &control)?;
    let final_state_error = state_error(grid, &problem.initial, &problem.target, &final_state);
    Ok(HumSolution {
        adjoint_datum: q,
        control,
        residual_history: history,
        final_state,
        final_state_error,
        iterations,
    })
}

/// Steers `initial` to a nonzero `target` by driving the difference with the
/// target's free pre-image to rest; the control is checked by
/// re-simulation of the original problem.
pub fn steer_general(setup: &ControlSetup<'_>, problem: &HumProblem) -> Result<HumSolution> {
    let pulled = pull_back(setup, &problem.target)?;
    let null = HumProblem {
        initial: problem.initial.add_scaled(-1.0, &pulled),
        target: StatePair::zeros(setup.grid),
        ..problem.clone()
    };
    let mut sol = hum_solve(setup, &null)?;
    sol.final_state = resimulate(setup, &problem.initial, &sol.control)?;
    sol.final_state_error = state_error(setup.grid, &problem.initial, &problem.target, &sol.final_state);
    Ok(sol)
}

/// Lowest `count` Dirichlet eigenmodes of the constant-coefficient operator
/// on the box, ordered by eigenvalue (ties broken lexicographically).
pub fn lowest_modes(grid: &Grid, count: usize) -> Vec<ScalarField> {
    let dim = grid.dim();
    let bounds = grid.domain().bounds();
    let lens: Vec<f64> = bounds.iter().map(|(a, b)| b - a).collect();
    let kmax = count + 1;
    let mut indices: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..dim {
        indices = indices
            .into_iter()
            .flat_map(|v| {
                (1..=kmax).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    let eig = |ks: &[usize]| -> f64 { ks.iter().zip(&lens).map(|(&k, l)| (k as f64 / l).powi(2)).sum() };
    indices.sort_by(|a, b| eig(a).total_cmp(&eig(b)).then_with(|| a.cmp(b)));
    indices
        .into_iter()
        .take(count)
        .map(|ks| {
            ScalarField::dirichlet_from_fn(grid, |x| {
                ks.iter()
                    .enumerate()
                    .map(|(k, &m)| (m as f64 * std::f64::consts::PI * (x[k] - bounds[k].0) / lens[k]).sin())
                    .product()
            })
        })
        .collect()
}

/// Band-limited random adjoint data: standard normal coefficients on the
/// lowest ten modes for both components.
pub fn random_band_limited(grid: &Grid, modes: &[ScalarField], rng: &mut ChaCha8Rng) -> StatePair {
    let mut combo = || {
        let mut acc = vec![0.0; grid.len()];
        for m in modes {
            let c: f64 = StandardNormal.sample(rng);
            for (a, v) in acc.iter_mut().zip(m.iter()) {
                *a += c * v;
            }
        }
        ScalarField::dirichlet_from_values(grid, acc)
    };
    let u = combo();
    let v = combo();
    StatePair::new(u, v)
}

pub const RANDOM_MODES: usize = 10;

/// Seeded random adjoint data, identical for identical seeds.
pub fn random_adjoint_data(grid: &Grid, n_samples: usize, seed: u64) -> Vec<StatePair> {
    let modes = lowest_modes(grid, RANDOM_MODES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).map(|_| random_band_limited(grid, &modes, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub samples: usize,
    pub energies: Vec<f64>,
    pub omega_integrals: Vec<f64>,
    /// `E(0) / iint_omega z^2` per sample.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub t_used: f64,
}

/// Samples the observability quotient `E(0) / iint_{omega x (0,T)} z^2` over
/// seeded random adjoint data.
pub fn observability_sample(setup: &ControlSetup<'_>, n_samples: usize, seed: u64) -> Result<ObservabilityReport> {
    if n_samples == 0 {
        return Err(Error::validation("observability.samples", "need at least one sample"));
    }
    let data = random_adjoint_data(setup.grid, n_samples, seed);
    let rows: Vec<(f64, f64)> = data
        .par_iter()
        .map(|q| {
            let z = adjoint_solution(setup, q)?;
            let e0 = spaces::energy(setup.grid, &q.u, &q.v, 0.0).total;
            let obs = omega_product(setup.grid, setup.omega, &z, &z);
            Ok((e0, obs))
        })
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let omega_integrals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ratios: Vec<f64> = rows.iter().map(|&(e, o)| e / o).collect();
    Ok(ObservabilityReport {
        samples: n_samples,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        energies,
        omega_integrals,
        ratios,
        t_used: setup.t_final,
    })
}

/// Factor applied to `threshold * E(0)` when flagging samples.
pub const CONTINUATION_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationProbe {
    pub samples: usize,
    pub threshold: f64,
    /// Indices of samples with `iint_omega z^2 <= threshold * 1e-10 * E(0)`.
    pub flagged: Vec<usize>,
    /// Smallest `iint_omega z^2 / E(0)` seen.
    pub min_observed_fraction: f64,
}

/// Flags samples whose observation on `omega` is negligible relative to their
/// energy; any flag would witness approximate failure of unique continuation.
pub fn unique_continuation_probe(
    setup: &ControlSetup<'_>,
    n_samples: usize,
    seed: u64,
    threshold: f64,
) -> Result<ContinuationProbe> {
    if !(threshold > 0.0) {
        return Err(Error::validation("observability.threshold", "threshold must be positive"));
    }
    let report = observability_sample(setup, n_samples, seed)?;
    Ok(probe_from_report(&report, threshold))
}

pub fn probe_from_report(report: &ObservabilityReport, threshold: f64) -> ContinuationProbe {
    let flagged = report
        .energies
        .iter()
        .zip(&report.omega_integrals)
        .enumerate()
        .filter(|(_, (&e, &o))| e > 0.0 && o <= threshold * CONTINUATION_FACTOR * e)
        .map(|(i, _)| i)
        .collect();
    let min_observed_fraction = report
        .energies
        .iter()
        .zip(&report.omega_integrals)
        .filter(|(&e, _)| e > 0.0)
        .map(|(&e, &o)| o / e)
        .fold(f64::INFINITY, f64::min);
    ContinuationProbe {
        samples: report.samples,
        threshold,
        flagged,
        min_observed_fraction,
    }
}
