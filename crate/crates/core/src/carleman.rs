//! Carleman weights `psi = |x|^2 - beta (t - t0)^2 + beta0`, `phi = e^(gamma psi)`
//! and numerical evaluation of both sides of the weighted estimate
//!
//! ```text
//! iint_Q e^{2 s phi} s gamma phi (a |grad z|^2 + z_t^2 + s^2 gamma^2 phi^2 z^2)
//!   <= C iint_{omega x (0,T)} (same density) + C iint_Q e^{2 s phi} F^2
//! ```
//!
//! on computed solutions. The weight overflows doubles for moderate `s`, so
//! every integral is accumulated as `exp(exponent - M)` with one common
//! offset `M` and reported as a logarithm.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{norm, ControlRegion, Domain, Grid};
use crate::wavesolver::{SourceTerm, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanParams {
    pub s: f64,
    pub gamma: f64,
    pub beta: f64,
    pub t0: f64,
    pub beta0: f64,
    pub epsilon: f64,
    pub delta: f64,
}

/// Admissible interval for `beta` at horizon `T`, together with the name of
/// the upper constraint that binds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaWindow {
    /// `(4 max|x|^2 + 4 delta) / T^2`
    pub lower: f64,
    pub upper: f64,
    pub binding: &'static str,
}

impl BetaWindow {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lower && beta < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Upper bound on `beta` used in the weighted estimate: `(2 - alpha) eps^alpha / 5`.
pub fn carleman_beta_bound(alpha: f64, epsilon: f64) -> f64 {
    (2.0 - alpha) / 5.0 * epsilon.powf(alpha)
}

/// Intersection of the `beta` constraints of the estimate and of the
/// observability horizon: `beta < (2-alpha) eps^alpha / 5`, `beta < eps^alpha / 5`,
/// `beta < eps^(alpha+1)` and `beta T^2 > 4 max|x|^2 + 4 delta`.
pub fn beta_window(domain: &Domain, epsilon: f64, delta: f64, t_final: f64) -> BetaWindow {
    let alpha = domain.alpha();
    let r = domain.max_radius();
    let candidates = [
        (carleman_beta_bound(alpha, epsilon), "beta < (2-alpha) eps^alpha / 5"),
        (epsilon.powf(alpha) / 5.0, "beta < eps^alpha / 5"),
        (epsilon.powf(alpha + 1.0), "beta < eps^(alpha+1)"),
    ];
    let (upper, binding) = candidates
        .into_iter()
        .fold((f64::INFINITY, ""), |acc, c| if c.0 < acc.0 { c } else { acc });
    BetaWindow {
        lower: (4.0 * r * r + 4.0 * delta) / (t_final * t_final),
        upper,
        binding,
    }
}

impl CarlemanParams {
    /// Checks `s, gamma >= 1`, `beta0 >= 0`, `t0 in (0, T)` and
    /// `0 < beta < (2-alpha) eps^alpha / 5`.
    pub fn validate(&self, alpha: f64, t_final: f64) -> Result<()> {
        if !(self.s >= 1.0) {
            return Err(Error::validation("carleman.s", format!("s must be >= 1, got {}", self.s)));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::validation("carleman.gamma", format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(self.beta0 >= 0.0) {
            return Err(Error::validation("carleman.beta0", format!("beta0 must be >= 0, got {}", self.beta0)));
        }
        if !(self.t0 > 0.0 && self.t0 < t_final) {
            return Err(Error::validation(
                "carleman.t0",
                format!("t0 must lie in (0, T) = (0, {t_final}), got {}", self.t0),
            ));
        }
        let bound = carleman_beta_bound(alpha, self.epsilon);
        if !(self.beta > 0.0 && self.beta < bound) {
            return Err(Error::validation(
                "carleman.beta",
                format!("beta must satisfy 0 < beta < (2-alpha) eps^alpha / 5 = {bound}, got {}", self.beta),
            ));
        }
        Ok(())
    }

    /// Additional checks needed when the weight drives the observability
    /// horizon: the full `beta` window at `T`.
    pub fn validate_for_observability(&self, domain: &Domain, t_final: f64) -> Result<()> {
        self.validate(domain.alpha(), t_final)?;
        let w = beta_window(domain, self.epsilon, self.delta, t_final);
        if self.beta >= w.upper {
            return Err(Error::validation(
                "carleman.beta",
                format!("beta = {} violates {} (= {})", self.beta, w.binding, w.upper),
            ));
        }
        if self.beta <= w.lower {
            return Err(Error::validation(
                "carleman.beta",
                format!(
                    "beta = {} violates beta T^2 > 4 max|x|^2 + 4 delta (needs beta > {})",
                    self.beta, w.lower
                ),
            ));
        }
        Ok(())
    }

    pub fn with_s_gamma(&self, s: f64, gamma: f64) -> Self {
        Self { s, gamma, ..*self }
    }
}

pub fn psi(p: &[f64], t: f64, params: &CarlemanParams) -> f64 {
    let r = norm(p);
    r * r - params.beta * (t - params.t0).powi(2) + params.beta0
}

pub fn phi(p: &[f64], t: f64, params: &CarlemanParams) -> f64 {
    (params.gamma * psi(p, t, params)).exp()
}

/// `grad phi = 2 gamma phi x`
pub fn grad_phi(p: &[f64], t: f64, params: &CarlemanParams) -> Vec<f64> {
    let f = phi(p, t, params);
    p.iter().map(|x| 2.0 * params.gamma * f * x).collect()
}

/// `phi_t = -2 gamma beta (t - t0) phi`
pub fn phi_t(p: &[f64], t: f64, params: &CarlemanParams) -> f64 {
    -2.0 * params.gamma * params.beta * (t - params.t0) * phi(p, t, params)
}

/// Both sides of the weighted estimate for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanSides {
    pub log_lhs: f64,
    pub log_rhs_control: f64,
    pub log_rhs_source: f64,
    /// `exp(log_*)`; may be infinite for large `s`, the logs are exact.
    pub lhs: f64,
    pub rhs_control: f64,
    pub rhs_source: f64,
    /// `lhs / (rhs_control + rhs_source)`; `None` when the denominator is 0.
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

/// Accumulates `sum exp(e_k - offset) * d_k` for a fixed offset.
#[derive(Default, Clone, Copy)]
struct LogSum {
    sum: f64,
}

impl LogSum {
    fn add(&mut self, exponent: f64, offset: f64, density: f64) {
        if density > 0.0 {
            self.sum += (exponent - offset).exp() * density;
        }
    }

    fn log(&self, offset: f64) -> f64 {
        if self.sum > 0.0 {
            offset + self.sum.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Evaluates the two sides on a computed solution `traj` of the adjoint
/// equation with source `source`.
pub fn carleman_sides(
    grid: &Grid,
    traj: &SpaceTimeField,
    source: &SourceTerm<'_>,
    omega: &ControlRegion,
    params: &CarlemanParams,
) -> Result<CarlemanSides> {
    if !traj.has_velocities() {
        return Err(Error::validation("trajectory", "Carleman sides need stored velocities"));
    }
    params.validate(grid.domain().alpha(), traj.t_final())?;
    let (s, g) = (params.s, params.gamma);
    let h = grid.spacing();
    let tw = traj.time_weights();
    let nw = grid.node_weights();

    // sampled source at stored times
    let mut fvals = vec![0.0; grid.len()];

    // Common offset: the largest exponent over all sampling points.
    let max_phi = traj
        .times()
        .iter()
        .map(|&t| {
            let a = (0..grid.len()).map(|i| phi(grid.point(i), t, params)).fold(0.0, f64::max);
            let b = (0..grid.faces().len())
                .map(|f| phi(grid.face_center(f), t, params))
                .fold(0.0, f64::max);
            a.max(b)
        })
        .fold(0.0, f64::max);
    let offset = 2.0 * s * max_phi + (s * g * max_phi).ln().max(0.0);

    let mut lhs = LogSum::default();
    let mut ctl = LogSum::default();
    let mut src = LogSum::default();
    for j in 0..traj.len() {
        let t = traj.time(j);
        let wt = tw[j];
        if wt == 0.0 {
            continue;
        }
        let z = traj.snapshot(j);
        let zt = traj.velocity(j).unwrap_or(&[]);
        for i in 0..grid.len() {
            let f = phi(grid.point(i), t, params);
            let e = 2.0 * s * f + (s * g * f).ln();
            let d = wt * nw[i] * (zt[i] * zt[i] + s * s * g * g * f * f * z[i] * z[i]);
            lhs.add(e, offset, d);
            if omega.contains(i) {
                ctl.add(e, offset, d);
            }
        }
        for (k, face) in grid.faces().iter().enumerate() {
            let f = phi(grid.face_center(k), t, params);
            let e = 2.0 * s * f + (s * g * f).ln();
            let grad = (z[face.upper] - z[face.lower]) / h[face.axis];
            let d = wt * face.weight * face.coeff * grad * grad;
            lhs.add(e, offset, d);
            if omega.contains_face(face) {
                ctl.add(e, offset, d);
            }
        }
        if source.sample_at(grid, traj.steps()[j], t, &mut fvals) {
            for i in 0..grid.len() {
                let e = 2.0 * s * phi(grid.point(i), t, params);
                src.add(e, offset, wt * nw[i] * fvals[i] * fvals[i]);
            }
        }
    }

    let log_lhs = lhs.log(offset);
    let log_rhs_control = ctl.log(offset);
    let log_rhs_source = src.log(offset);
    let log_den = log_add_exp(log_rhs_control, log_rhs_source);
    let degenerate = log_den == f64::NEG_INFINITY;
    let ratio = if degenerate { None } else { Some((log_lhs - log_den).exp()) };
    Ok(CarlemanSides {
        log_lhs,
        log_rhs_control,
        log_rhs_source,
        lhs: log_lhs.exp(),
        rhs_control: log_rhs_control.exp(),
        rhs_source: log_rhs_source.exp(),
        ratio,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub s: f64,
    pub gamma: f64,
    pub sides: CarlemanSides,
}

/// Evaluates the sides on every `(s, gamma)` pair, `gamma` outer and `s`
/// inner, in the order given. Pairs failing validation are skipped.
pub fn carleman_scan(
    grid: &Grid,
    traj: &SpaceTimeField,
    source: &SourceTerm<'_>,
    omega: &ControlRegion,
    base: &CarlemanParams,
    s_list: &[f64],
    gamma_list: &[f64],
) -> Result<Vec<ScanRow>> {
    if s_list.is_empty() || gamma_list.is_empty() {
        return Err(Error::validation("carleman.s", "scan lists must be nonempty"));
    }
    let cells: Vec<(f64, f64)> = gamma_list
        .iter()
        .flat_map(|&g| s_list.iter().map(move |&s| (s, g)))
        .collect();
    let rows: Vec<Option<ScanRow>> = cells
        .par_iter()
        .map(|&(s, gamma)| {
            let params = base.with_s_gamma(s, gamma);
            match carleman_sides(grid, traj, source, omega, &params) {
                Ok(sides) => Some(ScanRow { s, gamma, sides }),
                Err(e) => {
                    log::warn!("skipping (s = {s}, gamma = {gamma}): {e}");
                    None
                }
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Monotone-trend check on ratios ordered by increasing `s`: the mean of the
/// last third does not exceed the mean of the first third.
pub fn ratio_trend_nonincreasing(ratios: &[f64]) -> bool {
    if ratios.len() < 2 {
        return true;
    }
    let third = (ratios.len() / 3).max(1);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    mean(&ratios[ratios.len() - third..]) <= mean(&ratios[..third])
}

/// Result of the threshold search for `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub s_star: f64,
    pub gamma_star: f64,
    /// `(s, ratio)` for every probe.
    pub history: Vec<(f64, f64)>,
    pub stabilized: bool,
}

/// Doubles `s` from `s_start` until consecutive ratios differ by less than
/// `rel_tol` (at most `max_rounds` doublings).
#[allow(clippy::too_many_arguments)]
pub fn calibrate_thresholds(
    grid: &Grid,
    traj: &SpaceTimeField,
    source: &SourceTerm<'_>,
    omega: &ControlRegion,
    base: &CarlemanParams,
    s_start: f64,
    gamma: f64,
    rel_tol: f64,
    max_rounds: usize,
) -> Result<Calibration> {
    let mut s = s_start;
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    for _ in 0..=max_rounds {
        let sides = carleman_sides(grid, traj, source, omega, &base.with_s_gamma(s, gamma))?;
        let r = sides
            .ratio
            .ok_or_else(|| Error::Degenerate("zero solution in calibration".into()))?;
        history.push((s, r));
        if let Some(p) = prev {
            if (r - p).abs() <= rel_tol * p {
                return Ok(Calibration {
                    s_star: s / 2.0,
                    gamma_star: gamma,
                    history,
                    stabilized: true,
                });
            }
        }
        prev = Some(r);
        s *= 2.0;
    }
    Ok(Calibration {
        s_star: s / 2.0,
        gamma_star: gamma,
        history,
        stabilized: false,
    })
}
