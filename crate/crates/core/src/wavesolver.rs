//! Explicit leapfrog solver for `u_tt - div(|x|^alpha grad u) = f` with
//! homogeneous Dirichlet data.
//!
//! The spatial operator is the flux-form stencil with the coefficient sampled
//! at face centers, so it is symmetric and negative semidefinite in the grid
//! inner product and never touches `a(0) = 0`. The first step uses the Taylor
//! start `u1 = u0 + dt v0 + dt^2/2 (A u0 + f0)`; the velocity reported at the
//! last step inverts that formula, which makes forward/backward solves exact
//! inverses of each other up to round-off.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{ControlRegion, Grid, Side};
use crate::spaces::{self, EnergySnapshot, ScalarField};

/// Instability detector: growth factor and window length.
const GROWTH_LIMIT: f64 = 10.0;
const GROWTH_WINDOW: usize = 100;

/// Discrete `div(|x|^alpha grad .)` with Dirichlet rows.
#[derive(Debug, Clone)]
pub struct Operator<'g> {
    grid: &'g Grid,
    /// `a(face) / h^2` for the face joining node `i` to `i + stride[k]`,
    /// stored per axis at index `i`.
    up: Vec<Vec<f64>>,
}

pub fn assemble_operator(grid: &Grid) -> Operator<'_> {
    let mut up = vec![vec![0.0; grid.len()]; grid.dim()];
    let h = grid.spacing();
    for f in grid.faces() {
        up[f.axis][f.lower] = f.coeff / (h[f.axis] * h[f.axis]);
    }
    Operator { grid, up }
}

impl<'g> Operator<'g> {
    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    /// `out = A u`; boundary rows are zero.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let strides = self.grid.strides();
        for &i in self.grid.interior() {
            let mut acc = 0.0;
            for (k, &s) in strides.iter().enumerate() {
                let c = &self.up[k];
                acc += c[i] * (u[i + s] - u[i]) - c[i - s] * (u[i] - u[i - s]);
            }
            out[i] = acc;
        }
    }

    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply(u, &mut out);
        out
    }

    /// Nonzero entries `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        if self.grid.is_boundary(i) {
            return Vec::new();
        }
        let mut entries = vec![(i, 0.0)];
        for (k, &s) in self.grid.strides().iter().enumerate() {
            let cu = self.up[k][i];
            let cd = self.up[k][i - s];
            entries[0].1 -= cu + cd;
            entries.push((i - s, cd));
            entries.push((i + s, cu));
        }
        entries.sort_by_key(|e| e.0);
        entries
    }
}

/// Largest stable leapfrog step, scaled by `safety`:
/// `dt = safety / sqrt(max_a * sum_k 1/h_k^2)`, i.e. `safety * h / sqrt(max_a)`
/// in 1D and `safety * h / sqrt(2 max_a)` on a square 2D grid.
pub fn cfl_timestep(grid: &Grid, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::validation("time.safety", format!("safety must lie in (0, 1], got {safety}")));
    }
    Ok(cfl_timestep_unchecked(grid, safety))
}

/// Same formula without the `safety <= 1` check (used to probe instability).
pub fn cfl_timestep_unchecked(grid: &Grid, safety: f64) -> f64 {
    let inv_h2: f64 = grid.spacing().iter().map(|h| 1.0 / (h * h)).sum();
    safety / (grid.max_face_coefficient() * inv_h2).sqrt()
}

/// Number of steps and the effective step for a horizon: `n = ceil(T/dt)`,
/// `dt_eff = T/n <= dt`.
pub fn time_steps(t_final: f64, dt_max: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::validation("time.T", format!("horizon must be positive, got {t_final}")));
    }
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(Error::validation("time.dt", format!("time step must be positive, got {dt_max}")));
    }
    let n = ((t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

/// Displacement / velocity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl StatePair {
    pub fn new(u: ScalarField, v: ScalarField) -> Self {
        Self { u, v }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: ScalarField::zeros(grid),
            v: ScalarField::zeros(grid),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.scaled(c),
            v: self.v.scaled(c),
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &StatePair) -> Self {
        Self {
            u: self.u.add_scaled(c, &other.u),
            v: self.v.add_scaled(c, &other.v),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    /// `(||v||^2 + int |x|^alpha |grad u|^2)^(1/2)`
    pub fn energy_norm(&self, grid: &Grid) -> f64 {
        spaces::energy(grid, &self.u, &self.v, 0.0).total.sqrt()
    }

    fn check_boundary(&self, grid: &Grid, what: &str) -> Result<()> {
        for (name, f) in [("u", &self.u), ("v", &self.v)] {
            if f.len() != grid.len() {
                return Err(Error::validation(
                    format!("{what}.{name}"),
                    format!("field has {} values, grid has {} nodes", f.len(), grid.len()),
                ));
            }
            if (0..grid.len()).any(|i| grid.is_boundary(i) && f[i] != 0.0) {
                return Err(Error::validation(format!("{what}.{name}"), "field must vanish on the boundary"));
            }
        }
        Ok(())
    }
}

/// Stored solution history.
///
/// Snapshots are kept every `stride` steps plus the final step; `steps[j]` is
/// the time-step index of snapshot `j`. Solver output also carries velocities
/// at the stored steps and the staggered discrete energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    dt: f64,
    n_steps: usize,
    stride: usize,
    steps: Vec<usize>,
    snapshots: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    energy: Vec<EnergySnapshot>,
}

impl SpaceTimeField {
    /// A field with one snapshot per time step (no velocities or energies).
    pub fn from_snapshots(dt: f64, snapshots: Vec<Vec<f64>>) -> Self {
        let n_steps = snapshots.len().saturating_sub(1);
        Self {
            dt,
            n_steps,
            stride: 1,
            steps: (0..=n_steps).collect(),
            snapshots,
            velocities: Vec::new(),
            energy: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn time(&self, j: usize) -> f64 {
        self.steps[j] as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn snapshot(&self, j: usize) -> &[f64] {
        &self.snapshots[j]
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.snapshots
    }

    pub fn velocity(&self, j: usize) -> Option<&[f64]> {
        self.velocities.get(j).map(|v| v.as_slice())
    }

    pub fn has_velocities(&self) -> bool {
        self.velocities.len() == self.snapshots.len()
    }

    /// State at snapshot `j` (requires velocities).
    pub fn state(&self, j: usize) -> StatePair {
        StatePair {
            u: ScalarField::from_values(self.snapshots[j].clone()),
            v: ScalarField::from_values(self.velocities[j].clone()),
        }
    }

    pub fn initial_state(&self) -> StatePair {
        self.state(0)
    }

    pub fn final_state(&self) -> StatePair {
        self.state(self.len() - 1)
    }

    /// Trapezoidal weights over the stored times.
    pub fn time_weights(&self) -> Vec<f64> {
        let t = self.times();
        let mut w = vec![0.0; t.len()];
        for j in 1..t.len() {
            let d = t[j] - t[j - 1];
            w[j - 1] += 0.5 * d;
            w[j] += 0.5 * d;
        }
        w
    }

    /// Pointwise product with a node mask (velocities and energies dropped).
    pub fn masked(&self, region: &ControlRegion) -> Self {
        Self {
            dt: self.dt,
            n_steps: self.n_steps,
            stride: self.stride,
            steps: self.steps.clone(),
            snapshots: self.snapshots.iter().map(|s| region.restrict(s)).collect(),
            velocities: Vec::new(),
            energy: Vec::new(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let sc = |v: &Vec<Vec<f64>>| v.iter().map(|s| s.iter().map(|x| c * x).collect()).collect();
        Self {
            dt: self.dt,
            n_steps: self.n_steps,
            stride: self.stride,
            steps: self.steps.clone(),
            snapshots: sc(&self.snapshots),
            velocities: sc(&self.velocities),
            energy: Vec::new(),
        }
    }

    /// `int_0^T int_Omega f^2` with the grid and trapezoidal time weights.
    pub fn l2_norm_squared(&self, grid: &Grid) -> f64 {
        self.time_weights()
            .iter()
            .zip(&self.snapshots)
            .map(|(w, s)| w * spaces::inner(grid, s, s))
            .sum()
    }
}

/// Right-hand side of the wave equation.
pub enum SourceTerm<'a> {
    Zero,
    /// Per-step values (stride 1, same step count as the solve).
    Field(&'a SpaceTimeField),
    /// Per-step values restricted to a control region.
    Masked(&'a SpaceTimeField, &'a ControlRegion),
    /// Closed form `f(x, t)`, sampled on demand.
    Function(Box<dyn Fn(&[f64], f64) -> f64 + Sync + 'a>),
}

impl std::fmt::Debug for SourceTerm<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTerm::Zero => write!(f, "Zero"),
            SourceTerm::Field(_) => write!(f, "Field"),
            SourceTerm::Masked(..) => write!(f, "Masked"),
            SourceTerm::Function(_) => write!(f, "Function"),
        }
    }
}

impl SourceTerm<'_> {
    pub fn function(f: impl Fn(&[f64], f64) -> f64 + Sync + 'static) -> SourceTerm<'static> {
        SourceTerm::Function(Box::new(f))
    }

    fn check(&self, n_steps: usize) -> Result<()> {
        let field = match self {
            SourceTerm::Field(f) | SourceTerm::Masked(f, _) => f,
            _ => return Ok(()),
        };
        if field.stride != 1 || field.n_steps != n_steps {
            return Err(Error::validation(
                "source",
                format!(
                    "tabulated source must hold every step (stride 1, {} steps), got stride {} with {} steps",
                    n_steps, field.stride, field.n_steps
                ),
            ));
        }
        Ok(())
    }

    /// Fills `out` with the source at time step `step` / time `t`; returns
    /// false when the source is identically zero there.
    pub(crate) fn sample_at(&self, grid: &Grid, step: usize, t: f64, out: &mut [f64]) -> bool {
        match self {
            SourceTerm::Zero => false,
            SourceTerm::Field(f) => {
                out.copy_from_slice(&f.snapshots[step]);
                zero_boundary(grid, out);
                true
            }
            SourceTerm::Masked(f, region) => {
                for ((o, &v), &m) in out.iter_mut().zip(&f.snapshots[step]).zip(region.mask()) {
                    *o = if m { v } else { 0.0 };
                }
                zero_boundary(grid, out);
                true
            }
            SourceTerm::Function(func) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = if grid.is_boundary(i) { 0.0 } else { func(grid.point(i), t) };
                }
                true
            }
        }
    }
}

fn zero_boundary(grid: &Grid, v: &mut [f64]) {
    for (i, x) in v.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *x = 0.0;
        }
    }
}

/// Direction of a solve relative to physical time.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Runs leapfrog for `n_steps` from `(u0, v0)` in solver time, mapping
/// solver step `m` to physical step `m` (forward) or `n - m` (backward).
fn leapfrog(
    grid: &Grid,
    init: &StatePair,
    source: &SourceTerm<'_>,
    n_steps: usize,
    dt: f64,
    stride: usize,
    dir: Direction,
) -> Result<SpaceTimeField> {
    let op = assemble_operator(grid);
    let len = grid.len();
    let w = grid.node_weights();
    let dot = |a: &[f64], b: &[f64]| -> f64 { w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum() };
    let dt2 = dt * dt;
    let t_final = dt * n_steps as f64;
    let phys_step = |m: usize| match dir {
        Direction::Forward => m,
        Direction::Backward => n_steps - m,
    };
    let phys_time = |m: usize| phys_step(m) as f64 * dt;
    let phys_half_time = |m: usize| match dir {
        Direction::Forward => (m as f64 + 0.5) * dt,
        Direction::Backward => t_final - (m as f64 + 0.5) * dt,
    };

    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    let mut velocities = Vec::new();
    let mut energy = Vec::new();

    let mut u_prev = init.u.to_vec();
    let mut u_curr = vec![0.0; len];
    let mut u_next = vec![0.0; len];
    let mut au = vec![0.0; len];
    let mut f = vec![0.0; len];

    // step 0
    op.apply(&u_prev, &mut au);
    let has_f = source.sample_at(grid, phys_step(0), phys_time(0), &mut f);
    let mut p_prev = -dot(&u_prev, &au);
    let mut fnorm_hist: VecDeque<f64> = VecDeque::with_capacity(GROWTH_WINDOW + 2);
    let mut energy_hist: VecDeque<f64> = VecDeque::with_capacity(GROWTH_WINDOW + 2);
    fnorm_hist.push_back(if has_f { dt * dot(&f, &f).sqrt() } else { 0.0 });
    for i in 0..len {
        let fi = if has_f { f[i] } else { 0.0 };
        u_curr[i] = u_prev[i] + dt * init.v[i] + 0.5 * dt2 * (au[i] + fi);
    }
    steps.push(0);
    snapshots.push(u_prev.clone());
    velocities.push(init.v.to_vec());
    let mut c_prev = -dot(&u_curr, &au);
    let mut d_prev: f64 = u_curr.iter().zip(&u_prev).zip(w).map(|((a, b), w)| w * (a - b) * (a - b)).sum();

    for m in 1..=n_steps {
        op.apply(&u_curr, &mut au);
        let has_f = source.sample_at(grid, phys_step(m), phys_time(m), &mut f);
        let p_curr = -dot(&u_curr, &au);

        // staggered energy at m - 1/2
        let kinetic = d_prev / dt2 - 0.25 * (p_curr - 2.0 * c_prev + p_prev);
        let potential = 0.25 * (p_curr + 2.0 * c_prev + p_prev);
        let half = m - 1;
        if half % stride == 0 || m == n_steps {
            energy.push(EnergySnapshot::new(phys_half_time(half), kinetic, potential));
        }

        // instability monitor on |kinetic| + |potential|
        let size = kinetic.abs() + potential.abs();
        if !size.is_finite() {
            return Err(Error::Instability {
                step: m,
                time: phys_time(m),
            });
        }
        energy_hist.push_back(size.sqrt());
        fnorm_hist.push_back(if has_f { dt * dot(&f, &f).sqrt() } else { 0.0 });
        if energy_hist.len() > GROWTH_WINDOW {
            let old = energy_hist.pop_front().unwrap_or(0.0);
            let work: f64 = fnorm_hist.iter().sum();
            let now = *energy_hist.back().unwrap_or(&0.0);
            if now > GROWTH_LIMIT.sqrt() * (old + work) + f64::MIN_POSITIVE {
                return Err(Error::Instability {
                    step: m,
                    time: phys_time(m),
                });
            }
        }
        if fnorm_hist.len() > GROWTH_WINDOW + 1 {
            fnorm_hist.pop_front();
        }

        if m == n_steps {
            let mut v = vec![0.0; len];
            for i in 0..len {
                let fi = if has_f { f[i] } else { 0.0 };
                v[i] = (u_curr[i] - u_prev[i]) / dt + 0.5 * dt * (au[i] + fi);
            }
            steps.push(m);
            snapshots.push(u_curr.clone());
            velocities.push(v);
            break;
        }

        for i in 0..len {
            let fi = if has_f { f[i] } else { 0.0 };
            u_next[i] = 2.0 * u_curr[i] - u_prev[i] + dt2 * (au[i] + fi);
        }
        if m % stride == 0 {
            steps.push(m);
            snapshots.push(u_curr.clone());
            velocities.push(u_next.iter().zip(&u_prev).map(|(a, b)| (a - b) / (2.0 * dt)).collect());
        }
        c_prev = -dot(&u_next, &au);
        d_prev = u_next.iter().zip(&u_curr).zip(w).map(|((a, b), w)| w * (a - b) * (a - b)).sum();
        p_prev = p_curr;
        std::mem::swap(&mut u_prev, &mut u_curr);
        std::mem::swap(&mut u_curr, &mut u_next);
    }

    if dir == Direction::Backward {
        steps = steps.into_iter().rev().map(|m| n_steps - m).collect();
        snapshots.reverse();
        velocities.reverse();
        for v in velocities.iter_mut() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        energy.reverse();
    }

    Ok(SpaceTimeField {
        dt,
        n_steps,
        stride,
        steps,
        snapshots,
        velocities,
        energy,
    })
}

/// Leapfrog trajectory from initial data over `[0, T]`.
///
/// The step actually used is `T / ceil(T / dt)`. Every `stride`-th step is
/// stored together with the final step.
pub fn solve_forward(
    grid: &Grid,
    init: &StatePair,
    source: &SourceTerm<'_>,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<SpaceTimeField> {
    let (n, dt) = time_steps(t_final, dt)?;
    init.check_boundary(grid, "initial")?;
    source.check(n)?;
    leapfrog(grid, init, source, n, dt, stride.max(1), Direction::Forward)
}

/// Leapfrog trajectory from terminal data at `T`, marched back to 0.
pub fn solve_backward(
    grid: &Grid,
    terminal: &StatePair,
    source: &SourceTerm<'_>,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<SpaceTimeField> {
    let (n, dt) = time_steps(t_final, dt)?;
    terminal.check_boundary(grid, "terminal")?;
    source.check(n)?;
    let reversed = StatePair {
        u: terminal.u.clone(),
        v: terminal.v.scaled(-1.0),
    };
    leapfrog(grid, &reversed, source, n, dt, stride.max(1), Direction::Backward)
}

/// Staggered discrete energy at `t_{m+1/2}` for the stored steps `m` (and the
/// last half step). Exactly conserved by source-free leapfrog.
pub fn energy_trace(traj: &SpaceTimeField) -> &[EnergySnapshot] {
    &traj.energy
}

/// A boundary node where the normal derivative is sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub node: usize,
    pub axis: usize,
    pub side: Side,
    /// Surface quadrature weight.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub points: Vec<TracePoint>,
    pub times: Vec<f64>,
    /// `values[j][p]`: normal derivative at point `p`, snapshot `j`.
    pub values: Vec<Vec<f64>>,
    /// `||d_nu u||_{L2(Sigma)}`
    pub l2_norm: f64,
}

/// One-sided second-order normal derivative on every side of the box.
pub fn boundary_trace(grid: &Grid, traj: &SpaceTimeField) -> BoundaryTrace {
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let h = grid.spacing();
    let strides = grid.strides();
    let mut points = Vec::new();
    for axis in 0..dim {
        for side in [Side::Lower, Side::Upper] {
            let fixed = if side == Side::Lower { 0 } else { n };
            for node in 0..grid.len() {
                let mut rem = node;
                let mut idx = vec![0; dim];
                for k in 0..dim {
                    idx[k] = rem % grid.shape()[k];
                    rem /= grid.shape()[k];
                }
                if idx[axis] != fixed {
                    continue;
                }
                let weight = (0..dim)
                    .filter(|&k| k != axis)
                    .map(|k| if idx[k] == 0 || idx[k] == n { 0.5 * h[k] } else { h[k] })
                    .product();
                points.push(TracePoint { node, axis, side, weight });
            }
        }
    }

    let values: Vec<Vec<f64>> = traj
        .snapshots()
        .iter()
        .map(|u| {
            points
                .iter()
                .map(|p| {
                    let s = strides[p.axis];
                    let (b, i1, i2) = match p.side {
                        Side::Upper => (p.node, p.node - s, p.node - 2 * s),
                        Side::Lower => (p.node, p.node + s, p.node + 2 * s),
                    };
                    (3.0 * u[b] - 4.0 * u[i1] + u[i2]) / (2.0 * h[p.axis])
                })
                .collect()
        })
        .collect();
    let tw = traj.time_weights();
    let l2 = tw
        .iter()
        .zip(&values)
        .map(|(wt, row)| wt * row.iter().zip(&points).map(|(v, p)| p.weight * v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    BoundaryTrace {
        points,
        times: traj.times(),
        values,
        l2_norm: l2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn line(alpha: f64, cells: usize) -> Grid {
        Grid::new(Domain::new(vec![(-1.0, 1.0)], alpha).unwrap(), cells).unwrap()
    }

    fn square(alpha: f64, cells: usize) -> Grid {
        Grid::new(Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0)], alpha).unwrap(), cells).unwrap()
    }

    fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::dirichlet_from_values(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn standing(grid: &Grid) -> StatePair {
        StatePair::new(
            ScalarField::dirichlet_from_fn(grid, |x| (PI * x[0]).sin()),
            ScalarField::zeros(grid),
        )
    }

    #[test]
    fn alpha_zero_stencils() {
        let g = line(0.0, 10);
        let op = assemble_operator(&g);
        let h2 = g.spacing()[0].powi(2);
        let row = op.row(5);
        assert_eq!(row, vec![(4, 1.0 / h2), (5, -2.0 / h2), (6, 1.0 / h2)]);

        let g = square(0.0, 10);
        let op = assemble_operator(&g);
        let h2 = g.spacing()[0].powi(2);
        let c = 5 + 11 * 5;
        let row = op.row(c);
        let expect = vec![(c - 11, 1.0 / h2), (c - 1, 1.0 / h2), (c, -4.0 / h2), (c + 1, 1.0 / h2), (c + 11, 1.0 / h2)];
        assert_eq!(row.len(), 5);
        for (a, b) in row.iter().zip(&expect) {
            assert_eq!(a.0, b.0);
            assert_relative_eq!(a.1, b.1, max_relative = 1e-14);
        }
    }

    #[test]
    fn degenerate_row_at_origin_is_nonzero() {
        let g = line(1.0, 100);
        let op = assemble_operator(&g);
        let row = op.row(50);
        let h = g.spacing()[0];
        let a = (h / 2.0).powf(1.0) / (h * h);
        assert_relative_eq!(row[0].1, a, max_relative = 1e-12);
        assert_relative_eq!(row[2].1, a, max_relative = 1e-12);
        assert!(row[1].1 < 0.0);
    }

    #[test]
    fn operator_symmetric_and_nonpositive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [line(0.5, 64), square(1.3, 24)] {
            let op = assemble_operator(&g);
            for _ in 0..10 {
                let u = random_field(&g, &mut rng);
                let v = random_field(&g, &mut rng);
                let auv = spaces::inner(&g, &op.apply_vec(&u), &v);
                let uav = spaces::inner(&g, &u, &op.apply_vec(&v));
                assert_relative_eq!(auv, uav, max_relative = 1e-12);
                let auu = spaces::inner(&g, &op.apply_vec(&u), &u);
                assert!(auu <= 0.0);
                // -<Au,u> is the weighted Dirichlet form
                assert_relative_eq!(-auu, spaces::weighted_dirichlet_form(&g, &u), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cfl_examples() {
        let g = line(0.0, 200);
        assert_relative_eq!(cfl_timestep(&g, 0.9).unwrap(), 0.009, max_relative = 1e-12);
        let g = line(1.0, 200);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        assert_relative_eq!(dt, 0.009 / 0.995f64.sqrt(), max_relative = 1e-12);
        let g = square(0.0, 200);
        assert_relative_eq!(cfl_timestep(&g, 1.0).unwrap(), 0.01 / 2f64.sqrt(), max_relative = 1e-12);
        assert!(cfl_timestep(&g, 1.2).is_err());
        assert!(cfl_timestep(&g, 0.0).is_err());
    }

    #[test]
    fn time_step_count() {
        let (n, dt) = time_steps(4.0, 0.009).unwrap();
        assert_eq!(n, 445);
        assert!(dt <= 0.009);
        let (n, dt) = time_steps(1.0, 0.1).unwrap();
        assert_eq!(n, 10);
        assert_relative_eq!(dt, 0.1, max_relative = 1e-15);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = line(0.5, 40);
        let traj = solve_forward(&g, &StatePair::zeros(&g), &SourceTerm::Zero, 1.0, 0.01, 1).unwrap();
        assert!(traj.snapshots().iter().all(|s| s.iter().all(|&x| x == 0.0)));
        assert!(energy_trace(&traj).iter().all(|e| e.total == 0.0));
        let bt = boundary_trace(&g, &traj);
        assert_eq!(bt.l2_norm, 0.0);
        let back = solve_backward(&g, &StatePair::zeros(&g), &SourceTerm::Zero, 1.0, 0.01, 1).unwrap();
        assert!(back.snapshots().iter().all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn rejects_incompatible_initial_data() {
        let g = line(0.5, 40);
        let mut init = StatePair::zeros(&g);
        init.u[0] = 1.0;
        assert!(matches!(
            solve_forward(&g, &init, &SourceTerm::Zero, 1.0, 0.01, 1),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn snapshot_layout_and_stride() {
        let g = line(0.5, 40);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let traj = solve_forward(&g, &standing(&g), &SourceTerm::Zero, 1.0, dt, 1).unwrap();
        let n = traj.n_steps();
        assert_eq!(traj.len(), (1.0 / traj.dt()).round() as usize + 1);
        assert_relative_eq!(traj.t_final(), 1.0, max_relative = 1e-14);
        assert_eq!(traj.snapshot(0), standing(&g).u.values());

        let strided = solve_forward(&g, &standing(&g), &SourceTerm::Zero, 1.0, dt, 7).unwrap();
        assert_eq!(strided.steps()[1], 7);
        assert_eq!(*strided.steps().last().unwrap(), n);
        for (j, &s) in strided.steps().iter().enumerate() {
            assert_eq!(strided.snapshot(j), traj.snapshot(s));
        }
    }

    #[test]
    fn standing_wave_matches_separation_of_variables() {
        let g = line(0.0, 200);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let traj = solve_forward(&g, &standing(&g), &SourceTerm::Zero, 2.0, dt, 1).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..traj.len() {
            let t = traj.time(j);
            for i in 0..g.len() {
                let x = g.point(i)[0];
                err = err.max((traj.snapshot(j)[i] - (PI * x).sin() * (PI * t).cos()).abs());
            }
        }
        assert!(err < 5e-3, "err = {err}");
    }

    #[test]
    fn backward_standing_wave() {
        let g = line(0.0, 200);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let t_final = 1.5;
        // terminal data of sin(pi x) cos(pi (T - t)) at t = T
        let term = standing(&g);
        let traj = solve_backward(&g, &term, &SourceTerm::Zero, t_final, dt, 1).unwrap();
        assert_eq!(traj.snapshot(traj.len() - 1), term.u.values());
        let mut err: f64 = 0.0;
        for j in 0..traj.len() {
            let t = traj.time(j);
            for i in 0..g.len() {
                let x = g.point(i)[0];
                err = err.max((traj.snapshot(j)[i] - (PI * x).sin() * (PI * (t_final - t)).cos()).abs());
            }
        }
        assert!(err < 5e-3, "err = {err}");
    }

    #[test]
    fn round_trip_is_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [line(0.5, 100), square(1.0, 20)] {
            let init = StatePair::new(random_field(&g, &mut rng), random_field(&g, &mut rng));
            let dt = cfl_timestep(&g, 0.9).unwrap();
            let fwd = solve_forward(&g, &init, &SourceTerm::Zero, 2.0, dt, 5).unwrap();
            let back = solve_backward(&g, &fwd.final_state(), &SourceTerm::Zero, 2.0, dt, 5).unwrap();
            let start = back.initial_state();
            let du = start.u.add_scaled(-1.0, &init.u);
            let dv = start.v.add_scaled(-1.0, &init.v);
            let rel = (spaces::l2_norm(&g, &du) + spaces::l2_norm(&g, &dv))
                / (spaces::l2_norm(&g, &init.u) + spaces::l2_norm(&g, &init.v));
            assert!(rel < 1e-10, "rel = {rel}");
        }
    }

    #[test]
    fn energy_conserved_without_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = line(0.5, 200);
        let init = StatePair::new(random_field(&g, &mut rng), random_field(&g, &mut rng));
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let traj = solve_forward(&g, &init, &SourceTerm::Zero, 4.0, dt, 10).unwrap();
        let e = energy_trace(&traj);
        let e0 = e[0].total;
        let drift = e.iter().map(|s| (s.total - e0).abs() / e0).fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift = {drift}");
        assert!(e.iter().all(|s| s.kinetic >= 0.0 && s.potential >= 0.0));
    }

    #[test]
    fn stability_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for alpha in [0.0, 0.5] {
            let g = line(alpha, 200);
            let init = StatePair::new(random_field(&g, &mut rng), ScalarField::zeros(&g));
            let dt = cfl_timestep(&g, 0.9).unwrap();
            let traj = solve_forward(&g, &init, &SourceTerm::Zero, 2000.0 * dt, dt, 100).unwrap();
            let e = energy_trace(&traj);
            let drift = e.iter().map(|s| (s.total - e[0].total).abs() / e[0].total).fold(0.0, f64::max);
            assert!(drift < 1e-8);

            let dt = cfl_timestep_unchecked(&g, 1.05);
            let res = solve_forward(&g, &init, &SourceTerm::Zero, 2000.0 * dt, dt, 100);
            assert!(matches!(res, Err(Error::Instability { .. })), "alpha = {alpha}");
        }
    }

    #[test]
    fn boundary_trace_of_standing_wave() {
        // |d_nu u| at x = +-1 for sin(pi x) cos(pi t) is pi |cos(pi t)|
        let g = line(0.0, 400);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let traj = solve_forward(&g, &standing(&g), &SourceTerm::Zero, 1.0, dt, 1).unwrap();
        let bt = boundary_trace(&g, &traj);
        assert_eq!(bt.points.len(), 2);
        for (j, row) in bt.values.iter().enumerate() {
            let t = bt.times[j];
            for v in row {
                assert!((v.abs() - PI * (PI * t).cos().abs()).abs() < 2e-3, "t = {t}, v = {v}");
            }
        }
        // int_0^1 2 pi^2 cos^2(pi t) dt = pi^2
        assert_relative_eq!(bt.l2_norm, PI, max_relative = 1e-3);
    }

    #[test]
    fn driven_energy_accounting() {
        // E(t+) - E(t-) equals the discrete work <f, u^{n+1} - u^{n-1}>, so the
        // energy stays within (sqrt(E0) + int ||f||)^2.
        let g = line(0.5, 100);
        let dt = cfl_timestep(&g, 0.9).unwrap();
        let src = SourceTerm::function(|x: &[f64], t: f64| (3.0 * t).sin() * (1.0 - x[0] * x[0]));
        let traj = solve_forward(&g, &standing(&g), &src, 3.0, dt, 1).unwrap();
        let e = energy_trace(&traj);
        let mut budget = e[0].total.sqrt();
        for (j, s) in e.iter().enumerate().skip(1) {
            // ||f(t)|| = |sin 3t| (int (1-x^2)^2)^(1/2) = |sin 3t| sqrt(16/15)
            let f_l2 = (3.0 * s.time).sin().abs() * (16.0f64 / 15.0).sqrt();
            budget += dt * f_l2;
            assert!(s.total.sqrt() <= budget * 1.05 + 1e-12, "j = {j}");
        }
    }
}
