//! Box domains, tensor-product grids, the degenerate coefficient `|x|^alpha`,
//! the boundary part where `x . nu >= 0`, and the control region.

use crate::error::{Error, Result};

/// Tolerance used when comparing node distances against region radii.
const DIST_TOL: f64 = 1e-9;

/// Evaluates the diffusion coefficient `a(p) = |p|^alpha`.
///
/// `alpha == 0` is the constant-coefficient reference mode and returns 1
/// everywhere, including the origin.
pub fn coefficient_at(alpha: f64, p: &[f64]) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    norm(p).powf(alpha)
}

/// Constant `L` in `|a(p) - a(q)| <= L |p - q|^min(alpha, 1)` on the ball of
/// radius `radius`.
pub fn coefficient_holder_constant(alpha: f64, radius: f64) -> f64 {
    if alpha <= 1.0 {
        1.0
    } else {
        alpha * radius.powf(alpha - 1.0)
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An axis-aligned box `prod_k (a_k, b_k)` containing the origin, together
/// with the degeneracy exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
    alpha: f64,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>, alpha: f64) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::validation(
                "domain.dim",
                format!("dimension must be 1 or 2, got {}", bounds.len()),
            ));
        }
        for (k, &(a, b)) in bounds.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < 0.0 && 0.0 < b) {
                return Err(Error::validation(
                    "domain.bounds",
                    format!("axis {k}: the origin must be strictly interior (need a < 0 < b, got [{a}, {b}])"),
                ));
            }
        }
        if !(0.0..2.0).contains(&alpha) {
            return Err(Error::validation(
                "domain.alpha",
                format!("alpha must lie in (0,2) (alpha = 0 admitted as the non-degenerate reference), got {alpha}"),
            ));
        }
        Ok(Self { bounds, alpha })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn coefficient(&self, p: &[f64]) -> f64 {
        coefficient_at(self.alpha, p)
    }

    /// `max_{x in closure(Omega)} |x|`, attained at the farthest corner.
    pub fn max_radius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from the origin to the boundary.
    pub fn origin_clearance(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(a, b)| (-a).min(b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_axis_length(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(a, b)| b - a)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lower,
    Upper,
}

/// One flat side of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub axis: usize,
    pub side: Side,
    /// `x . nu` at the face center.
    pub x_dot_nu: f64,
}

impl BoundaryFace {
    /// Distance from an interior point to this (closed) side.
    pub fn distance(&self, bounds: &[(f64, f64)], p: &[f64]) -> f64 {
        let (a, b) = bounds[self.axis];
        match self.side {
            Side::Lower => (p[self.axis] - a).max(0.0),
            Side::Upper => (b - p[self.axis]).max(0.0),
        }
    }
}

/// All sides of the box with their outward normal evaluated against the
/// face center.
pub fn boundary_faces(domain: &Domain) -> Vec<BoundaryFace> {
    let mut faces = Vec::with_capacity(2 * domain.dim());
    for (axis, &(a, b)) in domain.bounds().iter().enumerate() {
        // For a flat side x . nu is constant, so the face center is exact.
        faces.push(BoundaryFace {
            axis,
            side: Side::Lower,
            x_dot_nu: -a,
        });
        faces.push(BoundaryFace {
            axis,
            side: Side::Upper,
            x_dot_nu: b,
        });
    }
    faces
}

/// The sides of the box on which `x . nu >= 0`.
pub fn gamma_plus(domain: &Domain) -> Vec<BoundaryFace> {
    boundary_faces(domain)
        .into_iter()
        .filter(|f| f.x_dot_nu >= 0.0)
        .collect()
}

/// A grid face between two neighbouring nodes along `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub lower: usize,
    pub upper: usize,
    pub axis: usize,
    /// `a` sampled at the face center.
    pub coeff: f64,
    /// Quadrature weight of the face (dual volume).
    pub weight: f64,
}

/// Uniform tensor-product grid on a box domain. Nodes include the boundary.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    cells: usize,
    shape: Vec<usize>,
    strides: Vec<usize>,
    spacing: Vec<f64>,
    points: Vec<f64>,
    node_weights: Vec<f64>,
    on_boundary: Vec<bool>,
    interior: Vec<usize>,
    faces: Vec<Face>,
    face_centers: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, cells_per_axis: usize) -> Result<Self> {
        if cells_per_axis < 8 {
            return Err(Error::validation(
                "grid.cells_per_axis",
                format!("need at least 8 cells per axis, got {cells_per_axis}"),
            ));
        }
        let dim = domain.dim();
        let n = cells_per_axis + 1;
        let shape = vec![n; dim];
        let mut strides = vec![1; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * shape[k - 1];
        }
        let len = n.pow(dim as u32);
        let spacing: Vec<f64> = domain
            .bounds()
            .iter()
            .map(|&(a, b)| (b - a) / cells_per_axis as f64)
            .collect();

        if domain.alpha() > 0.0 {
            for (k, &(a, _)) in domain.bounds().iter().enumerate() {
                for i in 0..cells_per_axis {
                    let xf = a + (i as f64 + 0.5) * spacing[k];
                    if xf.abs() < 1e-12 * spacing[k] {
                        return Err(Error::validation(
                            "grid.cells_per_axis",
                            format!("a face center on axis {k} falls on the degenerate point; choose a node count that makes 0 a node"),
                        ));
                    }
                }
            }
        }

        let coord = |k: usize, i: usize| -> f64 {
            let (a, b) = domain.bounds()[k];
            if i == cells_per_axis {
                b
            } else {
                a + i as f64 * spacing[k]
            }
        };
        let axis_weight = |k: usize, i: usize| -> f64 {
            if i == 0 || i == cells_per_axis {
                0.5 * spacing[k]
            } else {
                spacing[k]
            }
        };

        let mut points = Vec::with_capacity(len * dim);
        let mut node_weights = Vec::with_capacity(len);
        let mut on_boundary = Vec::with_capacity(len);
        let mut interior = Vec::new();
        let mut idx = vec![0usize; dim];
        for node in 0..len {
            let mut rem = node;
            for k in 0..dim {
                idx[k] = rem % shape[k];
                rem /= shape[k];
            }
            let mut w = 1.0;
            let mut bnd = false;
            for k in 0..dim {
                points.push(coord(k, idx[k]));
                w *= axis_weight(k, idx[k]);
                bnd |= idx[k] == 0 || idx[k] == cells_per_axis;
            }
            node_weights.push(w);
            on_boundary.push(bnd);
            if !bnd {
                interior.push(node);
            }
        }

        let mut faces = Vec::new();
        let mut face_centers = Vec::new();
        let mut center = vec![0.0; dim];
        for node in 0..len {
            let mut rem = node;
            for k in 0..dim {
                idx[k] = rem % shape[k];
                rem /= shape[k];
            }
            for axis in 0..dim {
                if idx[axis] == cells_per_axis {
                    continue;
                }
                let mut weight = spacing[axis];
                for k in 0..dim {
                    center[k] = coord(k, idx[k]);
                    if k != axis {
                        weight *= axis_weight(k, idx[k]);
                    }
                }
                center[axis] = domain.bounds()[axis].0 + (idx[axis] as f64 + 0.5) * spacing[axis];
                faces.push(Face {
                    lower: node,
                    upper: node + strides[axis],
                    axis,
                    coeff: domain.coefficient(&center),
                    weight,
                });
                face_centers.extend_from_slice(&center);
            }
        }

        Ok(Self {
            domain,
            cells: cells_per_axis,
            shape,
            strides,
            spacing,
            points,
            node_weights,
            on_boundary,
            interior,
            faces,
            face_centers,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.node_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_weights.is_empty()
    }

    /// Coordinates of node `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    /// Dual-cell volume of each node (midpoint rule on the dual mesh; half
    /// cells on the boundary).
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_center(&self, f: usize) -> &[f64] {
        let d = self.dim();
        &self.face_centers[f * d..(f + 1) * d]
    }

    /// Largest face-sampled coefficient.
    pub fn max_face_coefficient(&self) -> f64 {
        self.faces.iter().map(|f| f.coeff).fold(0.0, f64::max)
    }

    /// Index of the node at the origin, if the origin is a node.
    pub fn origin_node(&self) -> Option<usize> {
        (0..self.len()).find(|&i| norm(self.point(i)) < 1e-12 * self.spacing[0])
    }

    /// Samples a closed-form function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }
}

/// Node mask of the control region `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRegion {
    mask: Vec<bool>,
    delta: f64,
    epsilon: f64,
    contains_origin: bool,
    covers_domain: bool,
}

impl ControlRegion {
    /// Builds a region from an arbitrary node mask (no geometric checks).
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self {
            mask,
            delta: 0.0,
            epsilon: 0.0,
            contains_origin: false,
            covers_domain: false,
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, node: usize) -> bool {
        self.mask[node]
    }

    pub fn contains_face(&self, face: &Face) -> bool {
        self.mask[face.lower] && self.mask[face.upper]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Width `3 delta` of the boundary collar.
    pub fn collar_width(&self) -> f64 {
        3.0 * self.delta
    }

    pub fn contains_origin(&self) -> bool {
        self.contains_origin
    }

    /// True when every interior node is controlled (the scenario is then
    /// trivially observable).
    pub fn covers_domain(&self) -> bool {
        self.covers_domain
    }

    /// Masked copy of a nodal field.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    }
}

/// Builds `omega` as the union of the `3 delta` collar of the outward part of
/// the boundary and, optionally, the ball `B(0, 3 epsilon)`.
pub fn build_control_region(
    grid: &Grid,
    delta: f64,
    epsilon: f64,
    include_origin: bool,
) -> Result<ControlRegion> {
    let domain = grid.domain();
    if !(delta > 0.0) {
        return Err(Error::validation("region.delta", format!("delta must be positive, got {delta}")));
    }
    if 3.0 * delta >= 0.5 * domain.min_axis_length() {
        return Err(Error::validation(
            "region.delta",
            format!(
                "collar width 3*delta = {} must be below half the smallest axis length {}",
                3.0 * delta,
                0.5 * domain.min_axis_length()
            ),
        ));
    }
    if include_origin {
        if !(epsilon > 0.0) {
            return Err(Error::validation("region.epsilon", format!("epsilon must be positive, got {epsilon}")));
        }
        if 3.0 * epsilon >= domain.origin_clearance() {
            return Err(Error::validation(
                "region.epsilon",
                format!(
                    "B(0, 3*epsilon) must lie inside the domain: 3*epsilon = {} >= dist(0, boundary) = {}",
                    3.0 * epsilon,
                    domain.origin_clearance()
                ),
            ));
        }
    }

    let gp = gamma_plus(domain);
    let collar = 3.0 * delta * (1.0 + DIST_TOL);
    let ball = 3.0 * epsilon * (1.0 + DIST_TOL);
    let mask: Vec<bool> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let near_boundary = gp.iter().any(|f| f.distance(domain.bounds(), p) <= collar);
            near_boundary || (include_origin && norm(p) <= ball)
        })
        .collect();
    let covers_domain = grid.interior().iter().all(|&i| mask[i]);
    if covers_domain {
        log::warn!("control region covers the whole domain (delta = {delta}, epsilon = {epsilon})");
    }
    Ok(ControlRegion {
        mask,
        delta,
        epsilon,
        contains_origin: include_origin,
        covers_domain,
    })
}

/// `T0 = 2 max|x| / sqrt(epsilon^(alpha+1))`.
pub fn control_time_floor(domain: &Domain, epsilon: f64) -> f64 {
    2.0 * domain.max_radius() / epsilon.powf(domain.alpha() + 1.0).sqrt()
}

/// Checks `T >= T0` and `epsilon^(alpha+1) T^2 > 4 max|x|^2 + 4 delta`.
/// The error string names the violated constraint.
pub fn check_control_time(domain: &Domain, epsilon: f64, delta: f64, t: f64) -> std::result::Result<(), String> {
    let t0 = control_time_floor(domain, epsilon);
    if t < t0 {
        return Err(format!("T = {t} is below the minimal control time T0 = {t0}"));
    }
    let r = domain.max_radius();
    let lhs = epsilon.powf(domain.alpha() + 1.0) * t * t;
    let rhs = 4.0 * r * r + 4.0 * delta;
    if lhs <= rhs {
        return Err(format!(
            "T = {t} violates epsilon^(alpha+1) T^2 > 4 max|x|^2 + 4 delta ({lhs} <= {rhs})"
        ));
    }
    Ok(())
}

/// Smallest admissible control horizon, inflated by 1%.
pub fn minimal_time(domain: &Domain, epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < domain.origin_clearance()) {
        return Err(Error::validation(
            "region.epsilon",
            format!("epsilon must lie in (0, dist(0, boundary) = {}), got {epsilon}", domain.origin_clearance()),
        ));
    }
    let r = domain.max_radius();
    let e = epsilon.powf(domain.alpha() + 1.0);
    let t0 = control_time_floor(domain, epsilon);
    let t_energy = ((4.0 * r * r + 4.0 * delta) / e).sqrt();
    Ok(t0.max(t_energy) * 1.01)
}
