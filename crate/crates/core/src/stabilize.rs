//! Boundary-node selection against optimal directions, boundary-node
//! projection, and gradient-based placement of boundary nodes.

use crate::error::{Error, Result};
use crate::geometry::{Boundary, NodeKind, NodeSet, Point, Stencil};
use crate::interp::{build_matrix, factorize_matrix};
use crate::kernels::{grad_unchecked, rbf_hessian, KernelSpec, PolyBasis};
use crate::optdir::{initial_directions, iterate_g, schur_data, Init, DEFAULT_MAX_ITER, DEFAULT_TOL};
use log::debug;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    d_min: f64,
}

impl SelectionConfig {
    pub fn new(d_min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d_min) {
            return Err(Error::Domain(format!("d_min must lie in [0, 1], got {d_min}")));
        }
        Ok(Self { d_min })
    }
    pub fn d_min(&self) -> f64 {
        self.d_min
    }
}

/// Scores below the minimum by less than this are removed together, which keeps
/// mirror pairs of a symmetric stencil in step.
const TIE_TOL: f64 = 1e-9;

/// Removes boundary nodes whose normal deviates too far from the optimal
/// direction, worst first, recomputing the directions after each removal.
/// Returns the reduced stencil and the number of removed nodes.
pub fn select_boundary_nodes(
    stencil: &Stencil,
    nodes: &NodeSet,
    kernel: &KernelSpec,
    cfg: &SelectionConfig,
) -> Result<(Stencil, usize)> {
    if stencil.m_b() == 0 || cfg.d_min == 0.0 {
        return Ok((stencil.clone(), 0));
    }
    let data = schur_data(stencil, nodes, kernel)?;
    let centroid = data.interior_centroid();
    let mut keep: Vec<usize> = (0..stencil.m_b()).collect();
    let mut g = data.g_bb.clone();
    while !keep.is_empty() {
        let normals: Vec<Point> = keep.iter().map(|&k| *nodes.normal(stencil.boundary[k])).collect();
        let pts: Vec<Point> = keep.iter().map(|&k| data.boundary_points[k]).collect();
        let scores = direction_scores(&g, &normals, &pts, &centroid)?;
        let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
        if worst >= cfg.d_min {
            break;
        }
        let drop: Vec<usize> = (0..keep.len()).filter(|&i| scores[i] <= worst + TIE_TOL).collect();
        let rest: Vec<usize> = (0..keep.len()).filter(|i| !drop.contains(i)).collect();
        g = g.select(&rest, &rest);
        keep = rest.iter().map(|&i| keep[i]).collect();
    }
    let removed = stencil.m_b() - keep.len();
    let boundary = keep.iter().map(|&k| stencil.boundary[k]).collect();
    Ok((Stencil::new(stencil.center, stencil.interior.clone(), boundary), removed))
}

/// |n_i . n_opt_i| for every boundary node; zero for a node whose row of G vanishes.
fn direction_scores(g: &crate::dmat::DMat, normals: &[Point], pts: &[Point], centroid: &Point) -> Result<Vec<f64>> {
    let mb = g.rows();
    let dead: Vec<bool> = (0..mb).map(|i| (0..mb).all(|j| g.get(i, j).iter().all(|v| *v == 0.0))).collect();
    if dead.iter().any(|&d| d) {
        return Ok(dead.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect());
    }
    let start = initial_directions(g, &Init::Diag, pts, centroid)
        .or_else(|_| initial_directions(g, &Init::Geometric, pts, centroid))?;
    let r = iterate_g(g, start, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    if r.residual >= DEFAULT_TOL {
        debug!("optimal directions stopped at residual {:.3e}", r.residual);
    }
    Ok(r.directions.iter().zip(normals).map(|(o, n)| o.dot(n).abs()).collect())
}

/// First-layer threshold and de-duplication radius, in units of the spacing.
pub const FIRST_LAYER: f64 = 0.9;
pub const DEDUP_RADIUS: f64 = 0.5;

/// Replaces the boundary nodes by the projections of the interior nodes lying
/// within 0.9 s of the boundary. Interior nodes keep their relative order and
/// come first; projected boundary nodes follow.
pub fn project_boundary_nodes<B: Boundary + ?Sized>(nodes: &NodeSet, boundary: &B) -> Result<NodeSet> {
    let s = nodes.spacing();
    let interior = nodes.interior_indices();
    let mut cands: Vec<(f64, usize, Point, Point)> = interior
        .iter()
        .filter_map(|&i| {
            let p = boundary.project(nodes.position(i));
            (p.distance < FIRST_LAYER * s).then_some((p.distance, i, p.foot, p.normal))
        })
        .collect();
    if cands.is_empty() {
        return Err(Error::Geometry("no interior node lies in the first layer".into()));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<(usize, Point, Point)> = Vec::new();
    for (_, src, foot, normal) in cands {
        if kept.iter().all(|(_, f, _)| (f - foot).norm() >= DEDUP_RADIUS * s) {
            kept.push((src, foot, normal));
        }
    }
    // restore source order so the result does not depend on distance ties
    kept.sort_by_key(|k| k.0);
    let mut pos: Vec<Point> = interior.iter().map(|&i| *nodes.position(i)).collect();
    let mut kinds = vec![NodeKind::Interior; pos.len()];
    let mut normals = vec![Point::zeros(); pos.len()];
    for (_, foot, normal) in kept {
        pos.push(foot);
        kinds.push(NodeKind::Boundary);
        normals.push(normal);
    }
    NodeSet::new(pos, kinds, normals, s)
}

/// Sum over the stencil's boundary nodes of the interior Lebesgue function,
/// F = sum_k sum_i |psi_i(x_k)|, without polynomial augmentation.
pub fn placement_cost(points: &[Point], m_i: usize, normals: &[Point], kernel: &KernelSpec) -> Result<f64> {
    Ok(cost_and_gradient(points, m_i, normals, kernel, false)?.0)
}

/// F and dF/dx for every boundary node (normals held fixed), via one adjoint
/// solve per boundary evaluation point.
pub fn cost_and_gradient(
    points: &[Point],
    m_i: usize,
    normals: &[Point],
    kernel: &KernelSpec,
    with_gradient: bool,
) -> Result<(f64, Vec<Point>)> {
    let m = points.len();
    let m_b = m - m_i;
    let basis = PolyBasis::none(2);
    let a = build_matrix(points, m_i, normals, kernel, &basis);
    let fac = factorize_matrix(&a, m)?;
    let phi_at = |x: &Point| DVector::from_fn(m, |j, _| kernel.phi_unchecked((x - points[j]).norm()));
    let psis: Vec<DVector<f64>> = (m_i..m)
        .map(|k| fac.solve_adjoint(&DMatrix::from_column_slice(m, 1, phi_at(&points[k]).as_slice())))
        .map(|r| r.map(|c| DVector::from_column_slice(c.as_slice())))
        .collect::<Result<_>>()?;
    let cost: f64 = psis.iter().map(|p| p.rows(0, m_i).abs().sum()).sum();
    if !with_gradient {
        return Ok((cost, Vec::new()));
    }
    // adjoint vectors c_k = M^{-1} sgn(psi_I(x_k))
    let adj: Vec<DVector<f64>> = psis
        .iter()
        .map(|p| {
            let s = DVector::from_fn(m, |i, _| if i < m_i { p[i].signum() } else { 0.0 });
            fac.solve(&s)
        })
        .collect::<Result<_>>()?;
    let grad_at = |center: &Point, x: &Point| {
        let g = grad_unchecked(kernel, center.as_slice(), x.as_slice());
        Point::new(g[0], g[1])
    };
    let hess_at = |center: &Point, x: &Point| -> Result<nalgebra::Matrix2<f64>> {
        let h = rbf_hessian(kernel, center.as_slice(), x.as_slice())?;
        Ok(nalgebra::Matrix2::new(h[0], h[1], h[2], h[3]))
    };
    let mut grads = vec![Point::zeros(); m_b];
    for (jb, gj) in grads.iter_mut().enumerate() {
        let j = m_i + jb;
        for eta in 0..2 {
            let e = if eta == 0 { Point::new(1.0, 0.0) } else { Point::new(0.0, 1.0) };
            // dM: rows are functionals at node r, columns kernels centred at c
            let mut dm = DMatrix::<f64>::zeros(m, m);
            for r in 0..m {
                for c in 0..m {
                    if r != j && c != j {
                        continue;
                    }
                    let mut v = 0.0;
                    if r < m_i {
                        if c == j {
                            v -= grad_at(&points[c], &points[r]).dot(&e);
                        }
                    } else {
                        let hn = hess_at(&points[c], &points[r])? * normals[r - m_i];
                        if r == j {
                            v += hn.dot(&e);
                        }
                        if c == j {
                            v -= hn.dot(&e);
                        }
                    }
                    dm[(r, c)] = v;
                }
            }
            let mut total = 0.0;
            for (kb, (psi, ck)) in psis.iter().zip(&adj).enumerate() {
                let k = m_i + kb;
                let dphi = DVector::from_fn(m, |c, _| {
                    let mut v = 0.0;
                    if k == j {
                        v += grad_at(&points[c], &points[k]).dot(&e);
                    }
                    if c == j {
                        v -= grad_at(&points[c], &points[k]).dot(&e);
                    }
                    v
                });
                total += ck.dot(&dphi) - psi.dot(&(&dm * ck));
            }
            gj[eta] = total;
        }
    }
    Ok((cost, grads))
}

#[derive(Debug, Clone)]
pub struct PlacementResult {
    pub nodes: NodeSet,
    pub stencil: Stencil,
    pub cost_history: Vec<f64>,
    pub merged: usize,
}

const MERGE_RADIUS: f64 = 0.25;
const MAX_HALVINGS: usize = 30;

/// Gradient descent on the boundary-node positions of one stencil. Each node
/// moves against the tangential part of its sensitivity and is put back on the
/// boundary, which also supplies its new normal. Steps that do not lower the
/// cost are halved; nodes closer than 0.25 s are merged at their midpoint.
pub fn optimize_boundary_positions<B: Boundary + ?Sized>(
    stencil: &Stencil,
    nodes: &NodeSet,
    kernel: &KernelSpec,
    boundary: &B,
    step: f64,
    max_iter: usize,
) -> Result<PlacementResult> {
    if stencil.m_b() == 0 {
        return Err(Error::TooFewNodes("placement needs at least one boundary node".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    stencil.validate(nodes)?;
    let s = nodes.spacing();
    let interior: Vec<Point> = stencil.interior.iter().map(|&i| *nodes.position(i)).collect();
    let m_i = interior.len();
    let mut bpos: Vec<Point> = stencil.boundary.iter().map(|&b| *nodes.position(b)).collect();
    let mut bnrm: Vec<Point> = stencil.boundary.iter().map(|&b| *nodes.normal(b)).collect();
    let eval = |bp: &[Point], bn: &[Point], grad: bool| {
        let pts: Vec<Point> = interior.iter().chain(bp.iter()).copied().collect();
        cost_and_gradient(&pts, m_i, bn, kernel, grad)
    };
    let (mut cost, mut grad) = eval(&bpos, &bnrm, true)?;
    let mut history = vec![cost];
    let mut merged = 0;
    for _ in 0..max_iter {
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand_p = Vec::with_capacity(bpos.len());
            let mut cand_n = Vec::with_capacity(bpos.len());
            for ((p, n), g) in bpos.iter().zip(&bnrm).zip(&grad) {
                let gt = g - g.dot(n) * n;
                let pr = boundary.project(&(p - t * s * s * gt));
                cand_p.push(pr.foot);
                cand_n.push(pr.normal);
            }
            let n_merged = merge_close(&mut cand_p, &mut cand_n, MERGE_RADIUS * s, boundary);
            if let Ok((c, g)) = eval(&cand_p, &cand_n, true) {
                if c <= cost {
                    accepted = Some((cand_p, cand_n, c, g, n_merged));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((p, n, c, g, nm)) = accepted else {
            break;
        };
        let done = (cost - c).abs() < 1e-6 * cost;
        bpos = p;
        bnrm = n;
        cost = c;
        grad = g;
        merged += nm;
        history.push(cost);
        if done {
            break;
        }
    }
    let mut pos = interior.clone();
    let mut kinds = vec![NodeKind::Interior; m_i];
    let mut normals = vec![Point::zeros(); m_i];
    pos.extend(&bpos);
    kinds.extend(std::iter::repeat(NodeKind::Boundary).take(bpos.len()));
    normals.extend(&bnrm);
    let out = NodeSet::new_unchecked(pos, kinds, normals, s)?;
    let center = stencil.interior.iter().position(|&i| i == stencil.center).unwrap_or(0);
    let st = Stencil::new(center, (0..m_i).collect(), (m_i..m_i + bpos.len()).collect());
    Ok(PlacementResult { nodes: out, stencil: st, cost_history: history, merged })
}

fn merge_close<B: Boundary + ?Sized>(p: &mut Vec<Point>, n: &mut Vec<Point>, radius: f64, boundary: &B) -> usize {
    let mut count = 0;
    'outer: loop {
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if (p[i] - p[j]).norm() < radius {
                    let pr = boundary.project(&(0.5 * (p[i] + p[j])));
                    p[i] = pr.foot;
                    n[i] = pr.normal;
                    p.remove(j);
                    n.remove(j);
                    count += 1;
                    continue 'outer;
                }
            }
        }
        return count;
    }
}
