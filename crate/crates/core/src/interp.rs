//! Local interpolation systems with Neumann rows and polynomial augmentation.

use crate::error::{Error, Result};
use crate::geometry::{NodeSet, Point, Stencil};
use crate::kernels::{grad_unchecked, rbf_laplacian, KernelSpec, PolyBasis};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum DiffOperator {
    Identity,
    /// Derivative along coordinate `eta`.
    Partial(usize),
    Laplacian,
    /// Directional derivative along a unit vector.
    NormalDeriv(Point),
}

impl DiffOperator {
    pub fn normal_deriv(n: Point) -> Result<Self> {
        if (n.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("direction of length {} is not unit", n.norm())));
        }
        Ok(DiffOperator::NormalDeriv(n))
    }
}

/// The assembled matrix of one stencil. Local ordering is the stencil's
/// interior nodes followed by its boundary nodes, then the q polynomial rows.
#[derive(Debug, Clone)]
pub struct StencilSystem {
    pub stencil: Stencil,
    pub kernel: KernelSpec,
    pub basis: PolyBasis,
    pub points: Vec<Point>,
    /// Normals of the boundary rows, in stencil order.
    pub normals: Vec<Point>,
    pub matrix: DMatrix<f64>,
}

impl StencilSystem {
    pub fn m_i(&self) -> usize {
        self.stencil.m_i()
    }
    pub fn m_b(&self) -> usize {
        self.stencil.m_b()
    }
    pub fn m(&self) -> usize {
        self.points.len()
    }
    pub fn q(&self) -> usize {
        self.basis.size()
    }
}

/// Builds M = [phi_BC, P_BC; P^T, 0] for the stencil using the nodes' own normals.
pub fn assemble(stencil: &Stencil, nodes: &NodeSet, kernel: &KernelSpec, basis: &PolyBasis) -> Result<StencilSystem> {
    stencil.validate(nodes)?;
    let normals: Vec<Point> = stencil.boundary.iter().map(|&b| *nodes.normal(b)).collect();
    assemble_with_normals(stencil, nodes, kernel, basis, &normals)
}

/// As [`assemble`] but with explicit boundary-row directions.
pub fn assemble_with_normals(
    stencil: &Stencil,
    nodes: &NodeSet,
    kernel: &KernelSpec,
    basis: &PolyBasis,
    normals: &[Point],
) -> Result<StencilSystem> {
    if normals.len() != stencil.m_b() {
        return Err(Error::ShapeMismatch(format!("{} normals for {} boundary nodes", normals.len(), stencil.m_b())));
    }
    if basis.size() > 0 && basis.dim() != 2 {
        return Err(Error::ShapeMismatch("polynomial basis must be two-dimensional".into()));
    }
    let points: Vec<Point> = stencil.all().map(|i| *nodes.position(i)).collect();
    let sep = 1e-9 * nodes.spacing();
    for i in 0..points.len() {
        for j in 0..i {
            if (points[i] - points[j]).norm() <= sep {
                return Err(Error::SingularAssembly(format!(
                    "nodes {} and {} coincide",
                    stencil.all().nth(j).unwrap_or(j),
                    stencil.all().nth(i).unwrap_or(i)
                )));
            }
        }
    }
    let matrix = build_matrix(&points, stencil.m_i(), normals, kernel, basis);
    Ok(StencilSystem {
        stencil: stencil.clone(),
        kernel: *kernel,
        basis: basis.clone(),
        points,
        normals: normals.to_vec(),
        matrix,
    })
}

pub(crate) fn build_matrix(
    points: &[Point],
    m_i: usize,
    normals: &[Point],
    kernel: &KernelSpec,
    basis: &PolyBasis,
) -> DMatrix<f64> {
    let m = points.len();
    let q = basis.size();
    let mut a = DMatrix::zeros(m + q, m + q);
    for i in 0..m {
        let xi = points[i].as_slice();
        if i < m_i {
            for j in 0..m {
                a[(i, j)] = kernel.phi_unchecked((points[i] - points[j]).norm());
            }
            for l in 0..q {
                a[(i, m + l)] = basis.eval(l, xi).expect("valid basis index");
            }
        } else {
            let n = &normals[i - m_i];
            for j in 0..m {
                let g = grad_unchecked(kernel, points[j].as_slice(), xi);
                a[(i, j)] = g[0] * n.x + g[1] * n.y;
            }
            for l in 0..q {
                let g = basis.gradient(l, xi).expect("valid basis index");
                a[(i, m + l)] = g[0] * n.x + g[1] * n.y;
            }
        }
    }
    for l in 0..q {
        for j in 0..m {
            a[(m + l, j)] = basis.eval(l, points[j].as_slice()).expect("valid basis index");
        }
    }
    a
}

/// Right-hand side [Psi(x); Pi(x)] of the adjoint system for one evaluation point.
pub fn operator_rhs(sys: &StencilSystem, op: &DiffOperator, x: &Point) -> Result<DVector<f64>> {
    let m = sys.m();
    let q = sys.q();
    let mut r = DVector::zeros(m + q);
    let xs = x.as_slice();
    for j in 0..m {
        let c = sys.points[j].as_slice();
        r[j] = match op {
            DiffOperator::Identity => sys.kernel.phi_unchecked((x - sys.points[j]).norm()),
            DiffOperator::Partial(eta) => {
                if *eta >= 2 {
                    return Err(Error::IndexOutOfRange { index: *eta, size: 2 });
                }
                grad_unchecked(&sys.kernel, c, xs)[*eta]
            }
            DiffOperator::Laplacian => rbf_laplacian(&sys.kernel, c, xs)?,
            DiffOperator::NormalDeriv(n) => {
                let g = grad_unchecked(&sys.kernel, c, xs);
                g[0] * n.x + g[1] * n.y
            }
        };
    }
    for l in 0..q {
        r[m + l] = match op {
            DiffOperator::Identity => sys.basis.eval(l, xs)?,
            DiffOperator::Partial(eta) => sys.basis.gradient(l, xs)?[*eta],
            DiffOperator::Laplacian => sys.basis.laplacian(l, xs)?,
            DiffOperator::NormalDeriv(n) => {
                let g = sys.basis.gradient(l, xs)?;
                g[0] * n.x + g[1] * n.y
            }
        };
    }
    Ok(r)
}

/// LU factors of M and M^T with the 1-norm condition number.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub kappa1: f64,
    m: usize,
}

/// Reciprocal 1-norm condition below this is treated as singular.
pub const RCOND_MIN: f64 = 1e-15;

pub fn factorize(sys: &StencilSystem) -> Result<Factorization> {
    factorize_matrix(&sys.matrix, sys.m())
}

pub(crate) fn factorize_matrix(a: &DMatrix<f64>, m: usize) -> Result<Factorization> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("interpolation matrix".into()));
    }
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::IllConditioned { kappa: f64::INFINITY })?;
    let kappa1 = norm1(a) * norm1(&inv);
    if !kappa1.is_finite() || 1.0 / kappa1 < RCOND_MIN {
        return Err(Error::IllConditioned { kappa: kappa1 });
    }
    Ok(Factorization { lu, lu_t: a.transpose().lu(), kappa1, m })
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl Factorization {
    /// Solves M z = b.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(b).ok_or(Error::IllConditioned { kappa: f64::INFINITY })
    }

    /// Solves M^T c = b for several right-hand sides (columns).
    pub fn solve_adjoint(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu_t.solve(b).ok_or(Error::IllConditioned { kappa: f64::INFINITY })
    }

    /// First m entries of the solution of M^T c = [Psi(x); Pi(x)].
    pub fn weights(&self, sys: &StencilSystem, op: &DiffOperator, x: &Point) -> Result<DVector<f64>> {
        let rhs = operator_rhs(sys, op, x)?;
        let c = self.lu_t.solve(&rhs).ok_or(Error::IllConditioned { kappa: f64::INFINITY })?;
        Ok(c.rows(0, self.m).into_owned())
    }

    /// Weights for many evaluation points, one column per point.
    pub fn weights_many(&self, sys: &StencilSystem, op: &DiffOperator, xs: &[Point]) -> Result<DMatrix<f64>> {
        let mut rhs = DMatrix::zeros(sys.m() + sys.q(), xs.len());
        for (k, x) in xs.iter().enumerate() {
            rhs.set_column(k, &operator_rhs(sys, op, x)?);
        }
        let c = self.solve_adjoint(&rhs)?;
        Ok(c.rows(0, self.m).into_owned())
    }
}

/// Stencil weights for `op` at `x`; the polynomial tail of the adjoint solution is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilWeights {
    pub c: DVector<f64>,
    pub eval_point: Point,
}

pub fn stencil_weights(sys: &StencilSystem, op: &DiffOperator, x: &Point) -> Result<StencilWeights> {
    let f = factorize(sys)?;
    Ok(StencilWeights { c: f.weights(sys, op, x)?, eval_point: *x })
}

/// Cardinal functions psi_1..psi_m evaluated at `x`.
pub fn cardinal_functions(sys: &StencilSystem, x: &Point) -> Result<DVector<f64>> {
    Ok(stencil_weights(sys, &DiffOperator::Identity, x)?.c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LebesgueConstants {
    pub lambda_i: f64,
    pub lambda_b: f64,
    /// Sum over the value and first-derivative variants of Lambda_I + Lambda_B.
    pub lambda_m: f64,
}

/// Grid points of a `res` x `res` lattice over the bounding box of the stencil
/// that fall inside its convex hull, plus the stencil nodes themselves.
pub fn hull_samples(points: &[Point], res: usize) -> Vec<Point> {
    let hull = convex_hull(points);
    let mut out: Vec<Point> = points.to_vec();
    if hull.len() < 3 || res < 2 {
        return out;
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let span = (hi - lo).norm();
    for j in 0..res {
        for i in 0..res {
            let t = Point::new(i as f64 / (res - 1) as f64, j as f64 / (res - 1) as f64);
            let p = lo + (hi - lo).component_mul(&t);
            if inside_convex(&hull, &p, 1e-12 * span) {
                out.push(p);
            }
        }
    }
    out
}

pub fn lebesgue(sys: &StencilSystem, grid_resolution: usize) -> Result<LebesgueConstants> {
    let f = factorize(sys)?;
    let xs = hull_samples(&sys.points, grid_resolution);
    let m_i = sys.m_i();
    let maxes = |op: DiffOperator| -> Result<(f64, f64)> {
        let w = f.weights_many(sys, &op, &xs)?;
        let mut li = 0.0f64;
        let mut lb = 0.0f64;
        for col in w.column_iter() {
            let (a, b) = col.as_slice().split_at(m_i);
            li = li.max(a.iter().map(|v| v.abs()).sum());
            lb = lb.max(b.iter().map(|v| v.abs()).sum());
        }
        Ok((li, lb))
    };
    let (li, lb) = maxes(DiffOperator::Identity)?;
    let (lxi, lxb) = maxes(DiffOperator::Partial(0))?;
    let (lyi, lyb) = maxes(DiffOperator::Partial(1))?;
    Ok(LebesgueConstants { lambda_i: li, lambda_b: lb, lambda_m: li + lb + lxi + lxb + lyi + lyb })
}

/// 2-norm condition number from the singular values; infinite when singular.
pub fn condition_number(sys: &StencilSystem) -> f64 {
    matrix_condition(&sys.matrix)
}

pub fn matrix_condition(a: &DMatrix<f64>) -> f64 {
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// |u(x) - u_h(x)| for the interpolant built from u at interior nodes and
/// du . n at boundary nodes.
pub fn interp_error(
    sys: &StencilSystem,
    u: impl Fn(&Point) -> f64,
    du: impl Fn(&Point) -> Point,
    x_eval: &Point,
) -> Result<f64> {
    let c = cardinal_functions(sys, x_eval)?;
    let m_i = sys.m_i();
    let mut uh = 0.0;
    for (k, p) in sys.points.iter().enumerate() {
        let data = if k < m_i { u(p) } else { du(p).dot(&sys.normals[k - m_i]) };
        uh += c[k] * data;
    }
    Ok((u(x_eval) - uh).abs())
}

fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise hull vertices (monotone chain).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut p: Vec<Point> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut h: Vec<Point> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while h.len() >= start + 2 && cross(&h[h.len() - 2], &h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(*q);
        }
        h.pop();
    }
    h
}

fn inside_convex(hull: &[Point], p: &Point, tol: f64) -> bool {
    (0..hull.len()).all(|i| {
        let a = &hull[i];
        let b = &hull[(i + 1) % hull.len()];
        cross(a, b, p) >= -tol * (b - a).norm()
    })
}
