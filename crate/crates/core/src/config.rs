//! Scenario files: flat sectioned `key = value` text.
//!
//! ```text
//! seed = 42
//! output_dir = out
//!
//! [domain]
//! dim = 1
//! bounds = -1,1            ; 2D: -1,1;-1,1
//! alpha = 0.5
//!
//! [grid]
//! cells_per_axis = 200
//!
//! [region]
//! delta = 0.1              ; default 3 cells
//! epsilon = 0.1            ; default 5 cells
//! include_origin = true
//!
//! [time]
//! T = auto                 ; minimal control time
//! dt = auto                ; CFL step at `safety`
//! safety = 0.9
//! stride = 10
//! ```
//!
//! Optional sections: `[solve]`, `[carleman]`, `[hum]`, `[observability]`.
//! Fields are given as presets: `zero`, `bump`, `sine:AMP:K`,
//! `modes:C1,C2,...`.

use std::path::{Path, PathBuf};

use ini::Ini;

use crate::carleman::{beta_window, CarlemanParams};
use crate::control::lowest_modes;
use crate::error::{Error, Result};
use crate::geometry::{build_control_region, check_control_time, minimal_time, ControlRegion, Domain, Grid};
use crate::spaces::ScalarField;
use crate::wavesolver::{cfl_timestep, StatePair};

pub const BENCHMARK_1D: &str = "\
seed = 42
output_dir = out/benchmark-1d

[domain]
dim = 1
bounds = -1,1
alpha = 0.5

[grid]
cells_per_axis = 200

[region]
delta = 0.1
epsilon = 0.1
include_origin = true

[time]
T = auto
dt = auto
safety = 0.9
stride = 10

[solve]
initial_u = bump
initial_v = zero

[carleman]
s = 10,20,40
gamma = 2
beta = auto
t0 = auto
beta0 = 0
samples = 5

[hum]
tol = 1e-6
max_iter = 500
initial_u = bump
initial_v = zero
target_u = zero
target_v = zero

[observability]
samples = 100
threshold = 1
";

pub const BENCHMARK_2D: &str = "\
seed = 42
output_dir = out/benchmark-2d

[domain]
dim = 2
bounds = -1,1;-1,1
alpha = 0.5

[grid]
cells_per_axis = 40

[region]
delta = 0.1
epsilon = 0.15
include_origin = true

[time]
T = auto
dt = auto
safety = 0.9
stride = 10

[solve]
initial_u = bump
initial_v = zero

[carleman]
s = 10,20,40
gamma = 2
beta = auto
t0 = auto
beta0 = 0
samples = 5

[hum]
tol = 1e-6
max_iter = 500
initial_u = bump
initial_v = zero
target_u = zero
target_v = zero

[observability]
samples = 20
threshold = 1
";

pub const CLASSICAL: &str = "\
seed = 42
output_dir = out/classical

[domain]
dim = 1
bounds = -1,1
alpha = 0

[grid]
cells_per_axis = 200

[region]
delta = 0.1
include_origin = false

[time]
T = 4
dt = auto
safety = 0.9
stride = 10

[solve]
initial_u = sine:1:1
initial_v = zero
";

/// Built-in scenario text by name.
pub fn preset(name: &str) -> Option<String> {
    match name {
        "benchmark-1d" => Some(BENCHMARK_1D.to_string()),
        "benchmark-1d-steer" => Some(
            BENCHMARK_1D
                .replace("target_u = zero", "target_u = sine:0.1:2")
                .replace("out/benchmark-1d", "out/benchmark-1d-steer"),
        ),
        "benchmark-2d" => Some(BENCHMARK_2D.to_string()),
        "classical" => Some(CLASSICAL.to_string()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["benchmark-1d", "benchmark-1d-steer", "benchmark-2d", "classical"];

/// Named initial/target field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// `exp(-20 |x|^2) prod_k (x_k - a_k)(b_k - x_k)`
    Bump,
    /// `amp prod_k sin(k pi x_k)`, zeroed on the boundary.
    Sine { amp: f64, k: f64 },
    /// Combination of the lowest constant-coefficient Dirichlet modes.
    Modes(Vec<f64>),
}

impl FieldSpec {
    pub fn parse(key: &str, s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: String| Error::validation(key, m);
        if s == "zero" {
            return Ok(FieldSpec::Zero);
        }
        if s == "bump" {
            return Ok(FieldSpec::Bump);
        }
        if let Some(rest) = s.strip_prefix("sine:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(bad(format!("expected sine:AMP:K, got {s:?}")));
            }
            let amp = parse_f64(key, parts[0])?;
            let k = parse_f64(key, parts[1])?;
            return Ok(FieldSpec::Sine { amp, k });
        }
        if let Some(rest) = s.strip_prefix("modes:") {
            let c = parse_list(key, rest)?;
            if c.is_empty() {
                return Err(bad("modes list is empty".into()));
            }
            return Ok(FieldSpec::Modes(c));
        }
        Err(bad(format!("unknown field preset {s:?} (zero, bump, sine:AMP:K, modes:C1,C2,...)")))
    }

    pub fn build(&self, grid: &Grid) -> ScalarField {
        let bounds = grid.domain().bounds().to_vec();
        match self {
            FieldSpec::Zero => ScalarField::zeros(grid),
            FieldSpec::Bump => ScalarField::dirichlet_from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-20.0 * r2).exp() * x.iter().zip(&bounds).map(|(v, (a, b))| (v - a) * (b - v)).product::<f64>()
            }),
            FieldSpec::Sine { amp, k } => ScalarField::dirichlet_from_fn(grid, |x| {
                amp * x.iter().map(|v| (k * std::f64::consts::PI * v).sin()).product::<f64>()
            }),
            FieldSpec::Modes(c) => {
                let modes = lowest_modes(grid, c.len());
                let mut acc = vec![0.0; grid.len()];
                for (ci, m) in c.iter().zip(&modes) {
                    for (a, v) in acc.iter_mut().zip(m.iter()) {
                        *a += ci * v;
                    }
                }
                ScalarField::dirichlet_from_values(grid, acc)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub include_origin: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpec {
    pub t_final: Auto,
    pub dt: Auto,
    pub safety: f64,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSpec {
    pub initial_u: FieldSpec,
    pub initial_v: FieldSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanSpec {
    pub s: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Auto,
    pub t0: Auto,
    pub beta0: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_u: FieldSpec,
    pub initial_v: FieldSpec,
    pub target_u: FieldSpec,
    pub target_v: FieldSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilitySpec {
    pub samples: usize,
    pub threshold: f64,
}

/// Parsed scenario, before any invariant beyond syntax is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub alpha: f64,
    pub cells_per_axis: usize,
    pub region: RegionSpec,
    pub time: TimeSpec,
    pub solve: Option<SolveSpec>,
    pub carleman: Option<CarlemanSpec>,
    pub hum: Option<HumSpec>,
    pub observability: Option<ObservabilitySpec>,
}

/// Everything derived from a validated scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid,
    pub omega: ControlRegion,
    pub delta: f64,
    pub epsilon: f64,
    pub t_final: f64,
    pub dt: f64,
    pub carleman: Option<CarlemanParams>,
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(key, format!("expected a number, got {:?}", s.trim())))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| parse_f64(key, p)).collect()
}

fn parse_auto(key: &str, s: &str) -> Result<Auto> {
    if s.trim() == "auto" {
        Ok(Auto::Auto)
    } else {
        parse_f64(key, s).map(Auto::Value)
    }
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::validation(key, format!("expected a non-negative integer, got {:?}", s.trim())))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::validation(key, format!("expected true or false, got {other:?}"))),
    }
}

struct Section<'a> {
    name: &'static str,
    props: Option<&'a ini::Properties>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.name.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.name)
        }
    }

    fn get(&self, k: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(k))
    }

    fn req(&self, k: &str) -> Result<&'a str> {
        self.get(k).ok_or_else(|| Error::validation(self.key(k), "missing required key"))
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64> {
        self.get(k).map_or(Ok(default), |v| parse_f64(&self.key(k), v))
    }

    fn usize_or(&self, k: &str, default: usize) -> Result<usize> {
        self.get(k).map_or(Ok(default), |v| parse_usize(&self.key(k), v))
    }

    fn auto_or(&self, k: &str) -> Result<Auto> {
        self.get(k).map_or(Ok(Auto::Auto), |v| parse_auto(&self.key(k), v))
    }

    fn field_or_zero(&self, k: &str) -> Result<FieldSpec> {
        self.get(k).map_or(Ok(FieldSpec::Zero), |v| FieldSpec::parse(&self.key(k), v))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !allowed.contains(&k) {
                    return Err(Error::validation(self.key(k), "unknown key"));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["domain", "grid", "region", "time", "solve", "carleman", "hum", "observability"];

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for (name, _) in ini.iter() {
            if let Some(n) = name {
                if !SECTIONS.contains(&n) {
                    return Err(Error::validation(n, "unknown section"));
                }
            }
        }
        let sec = |name: &'static str| Section {
            name,
            props: if name.is_empty() { Some(ini.general_section()) } else { ini.section(Some(name)) },
        };

        let general = sec("");
        general.check_keys(&["seed", "output_dir"])?;
        let seed = general
            .get("seed")
            .map_or(Ok(0), |v| v.trim().parse::<u64>().map_err(|_| Error::validation("seed", "expected an unsigned integer")))?;
        let output_dir = PathBuf::from(general.get("output_dir").unwrap_or("out").trim());

        let d = sec("domain");
        d.check_keys(&["dim", "bounds", "alpha"])?;
        let dim = parse_usize("domain.dim", d.req("dim")?)?;
        let bounds = d
            .req("bounds")?
            .split(';')
            .map(|axis| {
                let v = parse_list("domain.bounds", axis)?;
                match v[..] {
                    [a, b] => Ok((a, b)),
                    _ => Err(Error::validation("domain.bounds", format!("axis {axis:?} needs two numbers LOW,HIGH"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if bounds.len() != dim {
            return Err(Error::validation(
                "domain.bounds",
                format!("{} axes given for dim = {dim}", bounds.len()),
            ));
        }
        let alpha = parse_f64("domain.alpha", d.req("alpha")?)?;

        let g = sec("grid");
        g.check_keys(&["cells_per_axis"])?;
        let cells_per_axis = parse_usize("grid.cells_per_axis", g.req("cells_per_axis")?)?;

        let r = sec("region");
        r.check_keys(&["delta", "epsilon", "include_origin"])?;
        let region = RegionSpec {
            delta: r.get("delta").map(|v| parse_f64("region.delta", v)).transpose()?,
            epsilon: r.get("epsilon").map(|v| parse_f64("region.epsilon", v)).transpose()?,
            include_origin: r.get("include_origin").map_or(Ok(true), |v| parse_bool("region.include_origin", v))?,
        };

        let t = sec("time");
        t.check_keys(&["T", "dt", "safety", "stride"])?;
        let time = TimeSpec {
            t_final: t.auto_or("T")?,
            dt: t.auto_or("dt")?,
            safety: t.f64_or("safety", 0.9)?,
            stride: t.usize_or("stride", 1)?,
        };

        let solve = match sec("solve") {
            s if s.props.is_some() => {
                s.check_keys(&["initial_u", "initial_v"])?;
                Some(SolveSpec {
                    initial_u: s.field_or_zero("initial_u")?,
                    initial_v: s.field_or_zero("initial_v")?,
                })
            }
            _ => None,
        };

        let carleman = match sec("carleman") {
            c if c.props.is_some() => {
                c.check_keys(&["s", "gamma", "beta", "t0", "beta0", "samples"])?;
                Some(CarlemanSpec {
                    s: c.get("s").map_or(Ok(vec![10.0, 20.0, 40.0]), |v| parse_list("carleman.s", v))?,
                    gamma: c.get("gamma").map_or(Ok(vec![2.0]), |v| parse_list("carleman.gamma", v))?,
                    beta: c.auto_or("beta")?,
                    t0: c.auto_or("t0")?,
                    beta0: c.f64_or("beta0", 0.0)?,
                    samples: c.usize_or("samples", 5)?,
                })
            }
            _ => None,
        };

        let hum = match sec("hum") {
            h if h.props.is_some() => {
                h.check_keys(&["tol", "max_iter", "initial_u", "initial_v", "target_u", "target_v"])?;
                Some(HumSpec {
                    tol: h.f64_or("tol", 1e-6)?,
                    max_iter: h.usize_or("max_iter", 500)?,
                    initial_u: h.field_or_zero("initial_u")?,
                    initial_v: h.field_or_zero("initial_v")?,
                    target_u: h.field_or_zero("target_u")?,
                    target_v: h.field_or_zero("target_v")?,
                })
            }
            _ => None,
        };

        let observability = match sec("observability") {
            o if o.props.is_some() => {
                o.check_keys(&["samples", "threshold"])?;
                Some(ObservabilitySpec {
                    samples: o.usize_or("samples", 100)?,
                    threshold: o.f64_or("threshold", 1.0)?,
                })
            }
            _ => None,
        };

        Ok(Scenario {
            seed,
            output_dir,
            dim,
            bounds,
            alpha,
            cells_per_axis,
            region,
            time,
            solve,
            carleman,
            hum,
            observability,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Checks every invariant and derives grid, region and time step. Time
    /// constraints and the `beta` window are only enforced when a
    /// `[carleman]`, `[hum]` or `[observability]` section asks for them.
    pub fn resolve(&self) -> Result<Resolved> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::validation("domain.dim", format!("dim must be 1 or 2, got {}", self.dim)));
        }
        let domain = Domain::new(self.bounds.clone(), self.alpha)?;
        let grid = Grid::new(domain, self.cells_per_axis)?;
        let h = grid.spacing().iter().copied().fold(0.0, f64::max);
        let delta = self.region.delta.unwrap_or(3.0 * h);
        let epsilon = self.region.epsilon.unwrap_or(5.0 * h);
        let omega = build_control_region(&grid, delta, epsilon, self.region.include_origin)?;
        let domain = grid.domain();

        let needs_horizon = self.hum.is_some() || self.observability.is_some() || self.carleman.is_some();
        let t_final = match self.time.t_final {
            Auto::Value(t) => {
                if !(t > 0.0) {
                    return Err(Error::validation("time.T", format!("horizon must be positive, got {t}")));
                }
                t
            }
            Auto::Auto => minimal_time(domain, epsilon, delta)?,
        };
        if needs_horizon && self.region.include_origin {
            check_control_time(domain, epsilon, delta, t_final).map_err(|m| Error::validation("time.T", m))?;
        }

        let cfl = cfl_timestep(&grid, self.time.safety)?;
        let dt = match self.time.dt {
            Auto::Auto => cfl,
            Auto::Value(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::validation("time.dt", format!("time step must be positive, got {dt}")));
                }
                if dt > cfl_timestep(&grid, 1.0)? {
                    return Err(Error::validation(
                        "time.dt",
                        format!("dt = {dt} exceeds the CFL limit {}", cfl_timestep(&grid, 1.0)?),
                    ));
                }
                dt
            }
        };
        if self.time.stride == 0 {
            return Err(Error::validation("time.stride", "stride must be at least 1"));
        }

        let carleman = match &self.carleman {
            None => None,
            Some(c) => {
                if c.s.is_empty() {
                    return Err(Error::validation("carleman.s", "list is empty"));
                }
                if c.gamma.is_empty() {
                    return Err(Error::validation("carleman.gamma", "list is empty"));
                }
                if c.samples == 0 {
                    return Err(Error::validation("carleman.samples", "need at least one run"));
                }
                let window = beta_window(domain, epsilon, delta, t_final);
                let beta = match c.beta {
                    Auto::Value(b) => b,
                    Auto::Auto => {
                        if window.is_empty() {
                            return Err(Error::validation(
                                "carleman.beta",
                                format!(
                                    "no admissible beta at T = {t_final}: need {} < beta < {} ({})",
                                    window.lower, window.upper, window.binding
                                ),
                            ));
                        }
                        window.midpoint()
                    }
                };
                let t0 = match c.t0 {
                    Auto::Value(t0) => t0,
                    Auto::Auto => 0.5 * t_final,
                };
                let params = CarlemanParams {
                    s: c.s[0],
                    gamma: c.gamma[0],
                    beta,
                    t0,
                    beta0: c.beta0,
                    epsilon,
                    delta,
                };
                for &s in &c.s {
                    for &g in &c.gamma {
                        params.with_s_gamma(s, g).validate(domain.alpha(), t_final)?;
                    }
                }
                if self.region.include_origin {
                    params.validate_for_observability(domain, t_final)?;
                }
                Some(params)
            }
        };

        if let Some(h) = &self.hum {
            if !(h.tol > 0.0) {
                return Err(Error::validation("hum.tol", format!("tolerance must be positive, got {}", h.tol)));
            }
            if h.max_iter == 0 {
                return Err(Error::validation("hum.max_iter", "need at least one iteration"));
            }
        }
        if let Some(o) = &self.observability {
            if o.samples == 0 {
                return Err(Error::validation("observability.samples", "need at least one sample"));
            }
            if !(o.threshold > 0.0) {
                return Err(Error::validation("observability.threshold", "threshold must be positive"));
            }
        }

        Ok(Resolved {
            grid,
            omega,
            delta,
            epsilon,
            t_final,
            dt,
            carleman,
        })
    }
}

impl HumSpec {
    pub fn initial(&self, grid: &Grid) -> StatePair {
        StatePair::new(self.initial_u.build(grid), self.initial_v.build(grid))
    }

    pub fn target(&self, grid: &Grid) -> StatePair {
        StatePair::new(self.target_u.build(grid), self.target_v.build(grid))
    }
}

impl SolveSpec {
    pub fn initial(&self, grid: &Grid) -> StatePair {
        StatePair::new(self.initial_u.build(grid), self.initial_v.build(grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_key(text: &str) -> String {
        match Scenario::parse(text).and_then(|s| s.resolve().map(|_| ())) {
            Err(Error::Validation { key, .. }) => key,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let s = Scenario::parse(&preset(name).unwrap()).unwrap();
            let r = s.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(r.t_final > 0.0 && r.dt > 0.0);
        }
    }

    #[test]
    fn benchmark_values() {
        let s = Scenario::parse(BENCHMARK_1D).unwrap();
        assert_eq!(s.bounds, vec![(-1.0, 1.0)]);
        assert_eq!(s.seed, 42);
        assert_eq!(s.hum.as_ref().unwrap().target_u, FieldSpec::Zero);
        let steer = Scenario::parse(&preset("benchmark-1d-steer").unwrap()).unwrap();
        assert_eq!(steer.hum.unwrap().target_u, FieldSpec::Sine { amp: 0.1, k: 2.0 });
        let r = s.resolve().unwrap();
        assert_eq!(r.grid.len(), 201);
        assert_eq!(r.dt, cfl_timestep(&r.grid, 0.9).unwrap());
        let c = r.carleman.unwrap();
        assert!((c.t0 - r.t_final / 2.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_out_of_range() {
        let text = BENCHMARK_1D.replace("alpha = 0.5", "alpha = 2.5");
        assert_eq!(err_key(&text), "domain.alpha");
    }

    #[test]
    fn short_horizon_names_t0() {
        let text = BENCHMARK_1D.replace("T = auto", "T = 2");
        let e = Scenario::parse(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(e.starts_with("time.T") && e.contains("T0"), "{e}");
    }

    #[test]
    fn beta_outside_window() {
        // beta = eps^alpha
        let text = BENCHMARK_1D.replace("beta = auto", &format!("beta = {}", 0.1f64.powf(0.5)));
        let e = Scenario::parse(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(e.starts_with("carleman.beta") && e.contains("beta <"), "{e}");
    }

    #[test]
    fn syntax_errors_name_keys() {
        assert_eq!(err_key(&BENCHMARK_1D.replace("cells_per_axis = 200", "cells_per_axis = x")), "grid.cells_per_axis");
        assert_eq!(err_key(&BENCHMARK_1D.replace("bounds = -1,1", "bounds = -1")), "domain.bounds");
        assert_eq!(err_key(&BENCHMARK_1D.replace("tol = 1e-6", "tol = 0")), "hum.tol");
        assert_eq!(err_key(&BENCHMARK_1D.replace("stride = 10", "stride = 0")), "time.stride");
        assert_eq!(err_key(&BENCHMARK_1D.replace("initial_u = bump\ninitial_v", "initial_u = blob\ninitial_v")), "solve.initial_u");
        assert_eq!(err_key(&format!("{BENCHMARK_1D}\n[extra]\nx = 1\n")), "extra");
        assert_eq!(err_key(&BENCHMARK_1D.replace("safety = 0.9", "safty = 0.9")), "time.safty");
        assert_eq!(err_key(&BENCHMARK_1D.replace("dt = auto", "dt = 0.5")), "time.dt");
    }

    #[test]
    fn region_defaults_are_cell_multiples() {
        let text = "[domain]\ndim = 1\nbounds = -1,1\nalpha = 0.5\n[grid]\ncells_per_axis = 100\n[time]\nT = 1\n";
        let r = Scenario::parse(text).unwrap().resolve().unwrap();
        assert!((r.delta - 0.06).abs() < 1e-12);
        assert!((r.epsilon - 0.1).abs() < 1e-12);
    }

    #[test]
    fn field_presets() {
        let g = Grid::new(Domain::new(vec![(-1.0, 1.0)], 0.5).unwrap(), 20).unwrap();
        let b = FieldSpec::Bump.build(&g);
        let x = g.point(7)[0];
        assert!((b[7] - (-20.0 * x * x).exp() * (1.0 - x * x)).abs() < 1e-15);
        let s = FieldSpec::parse("k", "sine:0.1:2").unwrap().build(&g);
        assert!((s[7] - 0.1 * (2.0 * std::f64::consts::PI * x).sin()).abs() < 1e-15);
        let m = FieldSpec::parse("k", "modes:0,1").unwrap().build(&g);
        assert!((m[7] - (std::f64::consts::PI * (x + 1.0)).sin()).abs() < 1e-14);
        assert!(FieldSpec::parse("k", "sine:1").is_err());
    }
}
