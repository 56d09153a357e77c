use super::{Boundary, Domain2D, KnnIndex, NodeKind, NodeSet, Point};
use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    /// Lattice points closer than `clearance * s` to the boundary are dropped.
    pub clearance: f64,
    /// Row of nodes along the curve offset by sqrt(3)/2 s inside the boundary.
    pub layer: FirstLayer,
    pub relax_sweeps: usize,
    /// Neighbourhood radius of the smoothing step, in units of s.
    pub relax_radius: f64,
    /// Fraction of the way each node moves toward its neighbour centroid.
    pub relax_factor: f64,
}

/// Placement of the first interior row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstLayer {
    None,
    /// Equally spaced along the offset curve, half a spacing out of step with the boundary nodes.
    Staggered,
    /// Inward projections of the boundary nodes along their normals.
    Aligned,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { clearance: 1.6, layer: FirstLayer::Staggered, relax_sweeps: 20, relax_radius: 1.5, relax_factor: 0.5 }
    }
}

/// Boundary nodes equally spaced in arc length, an optional first row along the
/// inward offset curve, interior nodes from a clipped hexagonal lattice, then
/// smoothing of the lattice nodes.
pub fn generate_nodes(domain: &Domain2D, spacing: f64, opts: &GenerateOptions) -> Result<NodeSet> {
    let s = spacing;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Geometry(format!("spacing must be positive, got {s}")));
    }
    let (bpos, bnrm) = boundary_nodes(domain, s);
    let h = 3f64.sqrt() / 2.0 * s;
    let rmax = domain.r0 + domain.amp.abs();
    let nrow = (2.0 * rmax / h).ceil() as i64 + 1;
    let ncol = (2.0 * rmax / s).ceil() as i64 + 1;
    let mut interior = Vec::new();
    for j in 0..nrow {
        let y = domain.center.y - rmax + j as f64 * h;
        let shift = if j % 2 == 1 { 0.5 * s } else { 0.0 };
        for i in 0..ncol {
            let p = Point::new(domain.center.x - rmax + i as f64 * s + shift, y);
            if keeps_clearance(domain, &p, opts.clearance * s) {
                interior.push(p);
            }
        }
    }
    if interior.len() < 100 {
        return Err(Error::TooFewNodes(format!("spacing {s} leaves only {} interior nodes", interior.len())));
    }

    // Sweeps run in place, node by node; a move is rejected if it would bring the
    // node within `min_sep` of another node or within `min_gap` of the boundary,
    // which stops the clumping plain centroid smoothing produces.
    let min_gap = 0.5 * s;
    let min_sep = 0.75 * s;
    let n_i = interior.len();
    let layer = match opts.layer {
        FirstLayer::None => Vec::new(),
        FirstLayer::Staggered => offset_nodes(domain, s),
        FirstLayer::Aligned => bpos.iter().zip(&bnrm).map(|(p, n)| p - h * n).collect(),
    };
    let mut all: Vec<Point> = interior.iter().chain(layer.iter()).chain(bpos.iter()).copied().collect();
    for _ in 0..opts.relax_sweeps {
        let idx = KnnIndex::new(&all);
        let reach = (opts.relax_radius + 1.0) * s;
        for i in 0..n_i {
            let p = all[i];
            let cand: Vec<usize> = idx.within(&p, reach).into_iter().map(|(j, _)| j).filter(|&j| j != i).collect();
            let near: Vec<Point> =
                cand.iter().map(|&j| all[j]).filter(|q| (q - p).norm() <= opts.relax_radius * s).collect();
            if near.is_empty() {
                continue;
            }
            let c = near.iter().fold(Point::zeros(), |a, b| a + b) / near.len() as f64;
            let q = p + opts.relax_factor * (c - p);
            let crowded = cand.iter().any(|&j| (all[j] - q).norm() < min_sep);
            if !crowded && keeps_clearance(domain, &q, min_gap) {
                all[i] = q;
            }
        }
    }
    let interior: Vec<Point> = all[..n_i + layer.len()].to_vec();
    let n_i = interior.len();

    let mut pos = interior;
    pos.extend_from_slice(&bpos);
    let mut kinds = vec![NodeKind::Interior; n_i];
    kinds.extend(std::iter::repeat(NodeKind::Boundary).take(bpos.len()));
    let mut normals = vec![Point::zeros(); n_i];
    normals.extend_from_slice(&bnrm);
    NodeSet::new(pos, kinds, normals, s)
}

fn keeps_clearance(domain: &Domain2D, p: &Point, gap: f64) -> bool {
    let d = p - domain.center;
    let radial = domain.radius(d.y.atan2(d.x)) - d.norm();
    if radial < gap {
        return false;
    }
    // the radial gap bounds the true distance from above; only nearby points need the exact check
    if radial > 4.0 * gap {
        return true;
    }
    domain.project(p).distance >= gap
}

/// Parameters of `n` points equally spaced in arc length along `speed`, shifted
/// by `phase` spacings.
fn equal_arc_params(speed: impl Fn(f64) -> f64, s: f64, phase: f64) -> Vec<f64> {
    let n_fine = 40_000;
    let h = 2.0 * PI / n_fine as f64;
    let mut cum = Vec::with_capacity(n_fine + 1);
    cum.push(0.0);
    for i in 0..n_fine {
        // Simpson on each cell
        let a = i as f64 * h;
        let l = (speed(a) + 4.0 * speed(a + 0.5 * h) + speed(a + h)) * h / 6.0;
        cum.push(cum[i] + l);
    }
    let total = cum[n_fine];
    let n = (total / s).round().max(3.0) as usize;
    let mut out = Vec::with_capacity(n);
    let mut cell = 0;
    for k in 0..n {
        let target = total * (k as f64 + phase) / n as f64;
        while cell + 1 < n_fine && cum[cell + 1] < target {
            cell += 1;
        }
        let frac = (target - cum[cell]) / (cum[cell + 1] - cum[cell]);
        out.push((cell as f64 + frac) * h);
    }
    out
}

fn boundary_nodes(domain: &Domain2D, s: f64) -> (Vec<Point>, Vec<Point>) {
    let t = equal_arc_params(|a| domain.tangent(a).norm(), s, 0.0);
    (t.iter().map(|&a| domain.point(a)).collect(), t.iter().map(|&a| domain.normal(a)).collect())
}

/// Nodes on the curve B(t) - h n(t), staggered by half a spacing against the boundary nodes.
fn offset_nodes(domain: &Domain2D, s: f64) -> Vec<Point> {
    let h = 3f64.sqrt() / 2.0 * s;
    // |d/dt (B - h n)| = |B'| (1 - h kappa)
    let speed = |a: f64| domain.tangent(a).norm() * (1.0 - h * domain.curvature(a)).abs();
    equal_arc_params(speed, s, 0.5).iter().map(|&a| domain.point(a) - h * domain.normal(a)).collect()
}

/// Spacing that gives roughly `n` interior nodes: a lattice-density estimate
/// corrected by a few trial generations.
pub fn spacing_for_interior_count(domain: &Domain2D, n: usize, opts: &GenerateOptions) -> f64 {
    let cell = 3f64.sqrt() / 2.0;
    let mut s = (domain.area() / (n as f64 * cell)).sqrt();
    for _ in 0..4 {
        match generate_nodes(domain, s, opts) {
            Ok(nodes) => {
                let got = nodes.n_interior() as f64;
                if (got - n as f64).abs() <= 0.01 * n as f64 {
                    break;
                }
                s *= (got / n as f64).sqrt();
            }
            Err(_) => s *= 0.5,
        }
    }
    s
}
