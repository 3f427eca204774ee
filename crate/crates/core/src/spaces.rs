//! Discrete weighted norms, energies and the Hardy / embedding diagnostics.
//!
//! All integrals use the dual-cell midpoint rule for nodal values and the
//! face midpoint rule for gradients, so that the weighted Dirichlet form
//! agrees with `-<A u, u>` of the flux-form operator to round-off.

use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{norm, Grid};

/// Nodal values on a grid. `dirichlet` records that the field is meant to
/// vanish on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    dirichlet: bool,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            dirichlet: true,
        }
    }

    /// Wraps raw values without touching the boundary.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            dirichlet: false,
        }
    }

    /// Samples `f` at the nodes and forces zero boundary values.
    pub fn dirichlet_from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = grid.sample(f);
        for (i, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *v = 0.0;
            }
        }
        Self {
            values,
            dirichlet: true,
        }
    }

    /// Wraps values and zeroes the boundary nodes.
    pub fn dirichlet_from_values(grid: &Grid, mut values: Vec<f64>) -> Self {
        for (i, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *v = 0.0;
            }
        }
        Self {
            values,
            dirichlet: true,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            dirichlet: self.dirichlet,
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
            dirichlet: self.dirichlet && other.dirichlet,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Kinetic and potential parts of the energy at one time.
///
/// `total` is the squared energy `||u_t||^2 + int |x|^alpha |grad u|^2`; take
/// the square root where a norm is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySnapshot {
    pub time: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

impl EnergySnapshot {
    pub fn new(time: f64, kinetic: f64, potential: f64) -> Self {
        Self {
            time,
            kinetic,
            potential,
            total: kinetic + potential,
        }
    }
}

/// Grid inner product `sum_i w_i u_i v_i`.
pub fn inner(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    grid.node_weights()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

pub fn l2_norm(grid: &Grid, u: &[f64]) -> f64 {
    inner(grid, u, u).sqrt()
}

/// `(sum_i w_i |u_i|^q)^(1/q)`
pub fn lq_norm(grid: &Grid, u: &[f64], q: f64) -> f64 {
    grid.node_weights()
        .iter()
        .zip(u)
        .map(|(w, v)| w * v.abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

fn dirichlet_form_with(grid: &Grid, u: &[f64], coeff: impl Fn(f64) -> f64) -> f64 {
    let h = grid.spacing();
    grid.faces()
        .iter()
        .map(|f| {
            let g = (u[f.upper] - u[f.lower]) / h[f.axis];
            f.weight * coeff(f.coeff) * g * g
        })
        .sum()
}

/// `int |x|^alpha grad u . grad u` with face-centered differences.
pub fn weighted_dirichlet_form(grid: &Grid, u: &[f64]) -> f64 {
    dirichlet_form_with(grid, u, |a| a)
}

/// `int |grad u|^2`, same quadrature as the weighted form.
pub fn dirichlet_form(grid: &Grid, u: &[f64]) -> f64 {
    dirichlet_form_with(grid, u, |_| 1.0)
}

/// `|| |x|^(alpha/2) grad u ||_{L2} + ||u||_{L2}`
pub fn weighted_h1_norm(grid: &Grid, u: &[f64]) -> f64 {
    weighted_dirichlet_form(grid, u).sqrt() + l2_norm(grid, u)
}

/// Unweighted `||grad u|| + ||u||`.
pub fn h1_norm(grid: &Grid, u: &[f64]) -> f64 {
    dirichlet_form(grid, u).sqrt() + l2_norm(grid, u)
}

pub fn energy(grid: &Grid, u: &[f64], u_t: &[f64], t: f64) -> EnergySnapshot {
    let kinetic = inner(grid, u_t, u_t);
    let potential = weighted_dirichlet_form(grid, u);
    EnergySnapshot::new(t, kinetic, potential)
}

/// Result of one Hardy-ratio evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyReport {
    /// `(N - 2 + alpha) || |x|^(alpha/2 - 1) u || / ||u||_H`
    pub ratio: f64,
    pub prefactor: f64,
    /// `|| |x|^(alpha/2 - 1) u ||` over the nodes kept in the quadrature.
    pub weighted_l2: f64,
    pub h1_norm: f64,
    /// Upper bound on the squared weighted mass dropped with the cell that
    /// contains the origin.
    pub excluded_mass_bound: f64,
}

/// Ratio of the two sides of the weighted Hardy inequality.
///
/// The weight `|x|^(alpha - 2)` is singular at the origin; the dual cell that
/// contains it is dropped and an upper bound for the dropped mass is
/// reported instead.
pub fn hardy_ratio(grid: &Grid, u: &[f64]) -> Result<HardyReport> {
    let n = grid.dim();
    let alpha = grid.domain().alpha();
    if n < 2 {
        return Err(Error::validation(
            "domain.dim",
            "the Hardy inequality needs N >= 2 (dimension 1 given)",
        ));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::validation("domain.alpha", format!("Hardy inequality needs alpha in (0,2), got {alpha}")));
    }
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("Hardy ratio of the zero field".into()));
    }
    let h = grid.spacing();
    let in_origin_cell = |p: &[f64]| p.iter().zip(h).all(|(x, hk)| x.abs() <= 0.5 * hk * (1.0 + 1e-12));

    let mut mass = 0.0;
    let mut umax_near: f64 = 0.0;
    for i in 0..grid.len() {
        let p = grid.point(i);
        if in_origin_cell(p) {
            umax_near = umax_near.max(u[i].abs());
            continue;
        }
        mass += grid.node_weights()[i] * norm(p).powf(alpha - 2.0) * u[i] * u[i];
    }
    // neighbours bound the field on the dropped cell
    for f in grid.faces() {
        if in_origin_cell(grid.point(f.lower)) || in_origin_cell(grid.point(f.upper)) {
            umax_near = umax_near.max(u[f.lower].abs()).max(u[f.upper].abs());
        }
    }
    // int_{B(0, r)} |x|^(alpha-2) dx = 2 pi r^alpha / alpha in the plane; r is
    // the half-diagonal of the dual cell.
    let r = 0.5 * h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let excluded_mass_bound = umax_near * umax_near * 2.0 * std::f64::consts::PI * r.powf(alpha) / alpha;

    let prefactor = n as f64 - 2.0 + alpha;
    let weighted_l2 = mass.sqrt();
    let h1 = weighted_h1_norm(grid, u);
    Ok(HardyReport {
        ratio: prefactor * weighted_l2 / h1,
        prefactor,
        weighted_l2,
        h1_norm: h1,
        excluded_mass_bound,
    })
}

/// Largest admissible exponent `2N / (N - 2 + alpha)` (infinite when the
/// denominator vanishes).
pub fn critical_exponent(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64 - 2.0 + alpha;
    if d <= 0.0 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / d
    }
}

/// `||u||_{L^q} / ||u||_H` for `1 <= q <= 2N/(N-2+alpha)`.
pub fn lq_embedding_ratio(grid: &Grid, u: &[f64], q: f64) -> Result<f64> {
    let n = grid.dim();
    if n < 2 {
        return Err(Error::validation("domain.dim", "the embedding bound is checked for N >= 2"));
    }
    let qc = critical_exponent(n, grid.domain().alpha());
    if !(q >= 1.0 && q <= qc) {
        return Err(Error::validation(
            "q",
            format!("exponent q = {q} outside [1, 2N/(N-2+alpha)] = [1, {qc}]"),
        ));
    }
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("embedding ratio of the zero field".into()));
    }
    Ok(lq_norm(grid, u, q) / weighted_h1_norm(grid, u))
}

/// Twenty compactly supported test fields used to estimate the Hardy
/// constant: radial bumps `(1 - |x-c|^2/r^2)_+^p` and separable bumps,
/// scaled to the distance from the origin to the boundary.
pub fn hardy_suite(grid: &Grid) -> Vec<(String, ScalarField)> {
    let rho = grid.domain().origin_clearance();
    let radial: [(f64, f64, f64, i32); 15] = [
        (0.0, 0.0, 1.0, 2),
        (0.0, 0.0, 0.5, 2),
        (0.0, 0.0, 0.25, 2),
        (0.0, 0.0, 1.0, 3),
        (0.0, 0.0, 0.7, 4),
        (0.3, 0.0, 0.6, 2),
        (-0.3, 0.2, 0.5, 2),
        (0.5, 0.5, 0.4, 2),
        (-0.5, -0.4, 0.45, 3),
        (0.1, 0.1, 0.3, 2),
        (0.2, -0.6, 0.35, 2),
        (0.0, 0.5, 0.5, 2),
        (0.6, -0.2, 0.35, 3),
        (-0.7, 0.0, 0.25, 2),
        (0.05, 0.0, 0.15, 2),
    ];
    let separable: [(f64, f64); 5] = [(1.0, 0.5), (0.5, 1.0), (0.8, 0.8), (0.3, 0.9), (1.0, 1.0)];
    let mut out = Vec::with_capacity(20);
    for (cx, cy, r, p) in radial {
        let name = format!("radial(c=({cx},{cy}),r={r},p={p})");
        let f = ScalarField::dirichlet_from_fn(grid, |x| {
            let dx = x[0] / rho - cx;
            let dy = x.get(1).copied().unwrap_or(0.0) / rho - cy;
            (1.0 - (dx * dx + dy * dy) / (r * r)).max(0.0).powi(p)
        });
        out.push((name, f));
    }
    for (a, b) in separable {
        let name = format!("separable(a={a},b={b})");
        let f = ScalarField::dirichlet_from_fn(grid, |x| {
            let sx = x[0] / rho / a;
            let sy = x.get(1).copied().unwrap_or(0.0) / rho / b;
            (1.0 - sx * sx).max(0.0).powi(2) * (1.0 - sy * sy).max(0.0).powi(2)
        });
        out.push((name, f));
    }
    out
}
