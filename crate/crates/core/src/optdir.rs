//! Schur-complement view of the boundary rows and the normal directions that
//! maximise det S_BB.

use crate::dmat::DMat;
use crate::error::{Error, Result};
use crate::geometry::{NodeSet, Point, Stencil};
use crate::interp::build_matrix;
use crate::kernels::{grad_unchecked, KernelSpec, PolyBasis};
use log::warn;
use nalgebra::{DMatrix, Matrix2, SymmetricEigen, LU};

/// Blocks of M split into interior (I) and boundary (B) parts for a
/// stencil without polynomial augmentation.
#[derive(Debug, Clone)]
pub struct SchurData {
    pub stencil: Stencil,
    pub kernel: KernelSpec,
    pub interior_points: Vec<Point>,
    pub boundary_points: Vec<Point>,
    pub phi_ii: DMatrix<f64>,
    phi_ii_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// phi_II^{-1} phi_IB: interior-only cardinal functions at the boundary nodes.
    pub psi_bar: DMatrix<f64>,
    /// D_BB(i, j): gradient of the kernel centred at boundary node j, at boundary node i.
    pub d_bb: DMat,
    /// D_BI(i, j): gradient of the kernel centred at interior node j, at boundary node i.
    pub d_bi: DMat,
    pub g_bb: DMat,
}

pub fn schur_data(stencil: &Stencil, nodes: &NodeSet, kernel: &KernelSpec) -> Result<SchurData> {
    stencil.validate(nodes)?;
    if stencil.m_b() == 0 {
        return Err(Error::TooFewNodes("Schur analysis needs at least one boundary node".into()));
    }
    if stencil.m_i() == 0 {
        return Err(Error::TooFewNodes("Schur analysis needs at least one interior node".into()));
    }
    if kernel.family().conditional_order() > 1 {
        return Err(Error::NotAdmissible(format!(
            "{} is conditionally positive definite of order {}; phi_II may be singular",
            kernel.family(),
            kernel.family().conditional_order()
        )));
    }
    let ip: Vec<Point> = stencil.interior.iter().map(|&i| *nodes.position(i)).collect();
    let bp: Vec<Point> = stencil.boundary.iter().map(|&i| *nodes.position(i)).collect();
    let (mi, mb) = (ip.len(), bp.len());
    let phi_ii = DMatrix::from_fn(mi, mi, |i, j| kernel.phi_unchecked((ip[i] - ip[j]).norm()));
    let phi_ib = DMatrix::from_fn(mi, mb, |i, j| kernel.phi_unchecked((ip[i] - bp[j]).norm()));
    let lu = phi_ii.clone().lu();
    let psi_bar = lu.solve(&phi_ib).ok_or_else(|| Error::Singular("phi_II".into()))?;
    if psi_bar.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("phi_II".into()));
    }
    let d_bb = DMat::from_fn(mb, mb, 2, |i, j| grad_unchecked(kernel, bp[j].as_slice(), bp[i].as_slice()));
    let d_bi = DMat::from_fn(mb, mi, 2, |i, j| grad_unchecked(kernel, ip[j].as_slice(), bp[i].as_slice()));
    let g_bb = d_bb.sub(&d_bi.matmul(&psi_bar)?)?;
    Ok(SchurData {
        stencil: stencil.clone(),
        kernel: *kernel,
        interior_points: ip,
        boundary_points: bp,
        phi_ii,
        phi_ii_lu: lu,
        psi_bar,
        d_bb,
        d_bi,
        g_bb,
    })
}

impl SchurData {
    pub fn m_i(&self) -> usize {
        self.interior_points.len()
    }
    pub fn m_b(&self) -> usize {
        self.boundary_points.len()
    }
    pub fn det_phi_ii(&self) -> f64 {
        self.phi_ii_lu.determinant()
    }
    pub fn interior_centroid(&self) -> Point {
        self.interior_points.iter().fold(Point::zeros(), |a, b| a + b) / self.m_i() as f64
    }
    /// Solves phi_II z = b.
    pub fn solve_phi_ii(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.phi_ii_lu.solve(b).ok_or_else(|| Error::Singular("phi_II".into()))
    }
}

pub fn normals_dmat(normals: &[Point]) -> DMat {
    DMat::from_fn(normals.len(), 1, 2, |i, _| vec![normals[i].x, normals[i].y])
}

/// S_BB = H(G_BB, N).
pub fn s_bb(data: &SchurData, normals: &[Point]) -> Result<DMatrix<f64>> {
    data.g_bb.op_h(&normals_dmat(normals))
}

/// Optimal vector of a single boundary node, scaled by 1/|det phi_II|.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleNodeV {
    pub v: Point,
    /// Coefficients of the unit vectors e_{j,m} (interior node j towards the boundary node).
    pub weights: Vec<f64>,
    pub unit_dirs: Vec<Point>,
}

pub fn single_node_v(data: &SchurData) -> Result<SingleNodeV> {
    if data.m_b() != 1 {
        return Err(Error::ShapeMismatch(format!("single_node_v needs m_B = 1, got {}", data.m_b())));
    }
    let sgn = data.det_phi_ii().signum();
    let xb = data.boundary_points[0];
    let mut v = Point::zeros();
    let mut scale = 0.0;
    let mut weights = Vec::with_capacity(data.m_i());
    let mut unit_dirs = Vec::with_capacity(data.m_i());
    for (j, xj) in data.interior_points.iter().enumerate() {
        let r = (xb - xj).norm();
        let e = (xb - xj) / r;
        let w = -sgn * data.psi_bar[(j, 0)] * data.kernel.phi_prime_unchecked(r);
        v += w * e;
        scale += w.abs();
        weights.push(w);
        unit_dirs.push(e);
    }
    if v.norm() < 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularLocation(v.norm()));
    }
    Ok(SingleNodeV { v, weights, unit_dirs })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// g_ii / |g_ii|
    Diag,
    /// Boundary node minus the interior centroid, normalised.
    Geometric,
    Custom(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub directions: Vec<Point>,
    pub iterations: usize,
    /// max_i (1 - |t_i . n_i| / |t_i|) for the returned directions.
    pub residual: f64,
    pub det_value: f64,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

pub fn optimal_directions(data: &SchurData, init: &Init, tol: f64, max_iter: usize) -> Result<OptResult> {
    let start = initial_directions(&data.g_bb, init, &data.boundary_points, &data.interior_centroid())?;
    optimize_g(&data.g_bb, start, tol, max_iter)
}

pub fn initial_directions(g: &DMat, init: &Init, boundary: &[Point], centroid: &Point) -> Result<Vec<Point>> {
    let mb = g.rows();
    let out: Vec<Point> = match init {
        Init::Diag => (0..mb)
            .map(|i| {
                let v = Point::from_column_slice(g.get(i, i));
                if v.norm() > 0.0 {
                    Ok(v.normalize())
                } else {
                    Err(Error::Singular(format!("g_{i}{i} vanishes; diagonal start undefined")))
                }
            })
            .collect::<Result<_>>()?,
        Init::Geometric => boundary.iter().map(|b| (b - centroid).normalize()).collect(),
        Init::Custom(v) => {
            if v.len() != mb {
                return Err(Error::ShapeMismatch(format!("{} start vectors for {mb} nodes", v.len())));
            }
            v.iter().map(|n| n.normalize()).collect()
        }
    };
    if out.iter().any(|n| !n.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite("start directions".into()));
    }
    Ok(out)
}

/// Stationarity vectors t_i at the directions `n`, each up to a positive or
/// negative scale. Falls back to the full determinant form when S_i is singular.
pub fn stationarity_vectors(g: &DMat, n: &[Point]) -> Result<Vec<Point>> {
    let mb = g.rows();
    let h = g.op_h(&normals_dmat(n))?;
    let mut t = Vec::with_capacity(mb);
    for i in 0..mb {
        if mb == 1 {
            t.push(Point::from_column_slice(g.get(0, 0)));
            continue;
        }
        let keep: Vec<usize> = (0..mb).filter(|&j| j != i).collect();
        let s_i = h.select_rows(&keep).select_columns(&keep);
        let c_i = DMatrix::from_fn(mb - 1, 1, |r, _| h[(keep[r], i)]);
        let w = s_i.clone().lu().solve(&c_i).filter(|w| w.iter().all(|v| v.is_finite()));
        let rcond = small_rcond(&s_i);
        let ti = match w {
            Some(w) if rcond > 1e-13 => {
                let mut v = Point::from_column_slice(g.get(i, i));
                for (k, &j) in keep.iter().enumerate() {
                    v -= w[(k, 0)] * Point::from_column_slice(g.get(i, j));
                }
                v
            }
            _ => {
                let nd = normals_dmat(n);
                Point::new(g.det_h_partial(&nd, i, 0)?, g.det_h_partial(&nd, i, 1)?)
            }
        };
        t.push(ti);
    }
    Ok(t)
}

fn small_rcond(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    if sv.max() == 0.0 {
        0.0
    } else {
        sv.min() / sv.max()
    }
}

fn residual_of(t: &[Point], n: &[Point]) -> f64 {
    t.iter()
        .zip(n)
        .map(|(ti, ni)| {
            let tn = ti.norm();
            if tn == 0.0 {
                1.0
            } else {
                1.0 - (ti.dot(ni).abs() / tn).min(1.0)
            }
        })
        .fold(0.0, f64::max)
}

fn rotate(n: &Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c * n.x - s * n.y, s * n.x + c * n.y)
}

/// Fixed-point iteration n_i <- t_i / |t_i| (all nodes updated from the same
/// iterate), with the sign of each update chosen to keep n_i^(k+1) . n_i^(k) >= 0.
pub fn optimize_g(g: &DMat, start: Vec<Point>, tol: f64, max_iter: usize) -> Result<OptResult> {
    let r = iterate_g(g, start, tol, max_iter)?;
    if r.residual >= tol {
        return Err(Error::NotConverged { iterations: r.iterations, residual: r.residual });
    }
    Ok(r)
}

/// Same iteration as [`optimize_g`] but returns the last iterate when the
/// tolerance is not met; callers inspect `residual`.
pub fn iterate_g(g: &DMat, start: Vec<Point>, tol: f64, max_iter: usize) -> Result<OptResult> {
    let mb = g.rows();
    if g.cols() != mb || start.len() != mb {
        return Err(Error::ShapeMismatch("G must be square with one start vector per row".into()));
    }
    if g.dim() != 2 {
        return Err(Error::ShapeMismatch("optimal directions are implemented for d = 2".into()));
    }
    if let Some(i) = (0..mb).find(|&i| (0..mb).all(|j| g.get(i, j).iter().all(|v| *v == 0.0))) {
        return Err(Error::Singular(format!("row {i} of G_BB vanishes")));
    }
    let mut n = start;
    let mut residual = f64::INFINITY;
    let mut it = 0;
    while it <= max_iter {
        let mut t = stationarity_vectors(g, &n)?;
        let mut perturbed = false;
        for i in 0..mb {
            if t[i].norm() == 0.0 || !t[i].iter().all(|v| v.is_finite()) {
                warn!("degenerate stationarity vector at node {i}; rotating by 1e-3 rad");
                for (j, nj) in n.iter_mut().enumerate() {
                    if j != i {
                        *nj = rotate(nj, 1e-3);
                    }
                }
                perturbed = true;
            }
        }
        if perturbed {
            t = stationarity_vectors(g, &n)?;
        }
        residual = residual_of(&t, &n);
        if residual < tol {
            break;
        }
        if it == max_iter {
            break;
        }
        for i in 0..mb {
            let tn = t[i].norm();
            if tn > 0.0 {
                let cand = t[i] / tn;
                n[i] = if cand.dot(&n[i]) >= 0.0 { cand } else { -cand };
            }
        }
        it += 1;
    }
    let det_value = g.op_h(&normals_dmat(&n))?.determinant();
    Ok(OptResult { directions: n, iterations: it, residual, det_value })
}

/// Closed-form maximiser for two boundary nodes: det S_BB = n1^T G n2 with
/// G = g11 g22^T - g12 g21^T.
pub fn two_node_matrix(g: &DMat) -> Result<Matrix2<f64>> {
    if g.rows() != 2 || g.cols() != 2 || g.dim() != 2 {
        return Err(Error::ShapeMismatch("two-node form needs a 2x2 d-matrix in 2D".into()));
    }
    let v = |i, j| Point::from_column_slice(g.get(i, j));
    Ok(v(0, 0) * v(1, 1).transpose() - v(0, 1) * v(1, 0).transpose())
}

pub fn two_node_closed_form(gm: &Matrix2<f64>) -> Result<(Point, Point, f64)> {
    let gtg = gm.transpose() * gm;
    let eig = SymmetricEigen::new(gtg);
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let lmax = eig.eigenvalues[k];
    if !(lmax > 0.0) {
        return Err(Error::Singular("G vanishes".into()));
    }
    let n2: Point = eig.eigenvectors.column(k).into_owned().normalize();
    let n1 = (gm * n2).normalize();
    Ok((n1, n2, lmax.sqrt()))
}

/// The symmetric three-node example with two distinct families of extrema.
pub fn symmetric_three_node_g() -> DMat {
    let ex = vec![1.0, 0.0];
    let ey = vec![0.0, 1.0];
    let z = vec![0.0, 0.0];
    DMat::from_fn(3, 3, 2, |i, j| match (i, j) {
        (0, 0) | (1, 2) | (2, 1) => ex.clone(),
        (1, 1) | (0, 2) | (2, 0) => z.clone(),
        _ => ey.clone(),
    })
}

pub fn symmetric_three_node_det(a: [f64; 3]) -> f64 {
    -(a[0].cos() * a[1].cos() * a[2].cos() + a[0].sin() * a[1].sin() * a[2].sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeNodeReport {
    pub det_at_zero: f64,
    pub det_at_half_pi: f64,
    /// Converged angles (mod pi) and determinant from a start near 0.
    pub from_zero: ([f64; 3], f64),
    /// Same from a start near pi/2.
    pub from_half_pi: ([f64; 3], f64),
}

pub fn symmetric_three_node_case() -> Result<ThreeNodeReport> {
    let g = symmetric_three_node_g();
    let h = std::f64::consts::FRAC_PI_2;
    let run = |a: [f64; 3]| -> Result<([f64; 3], f64)> {
        let start = a.iter().map(|t| Point::new(t.cos(), t.sin())).collect();
        let r = optimize_g(&g, start, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let mut ang = [0.0; 3];
        for (k, n) in r.directions.iter().enumerate() {
            ang[k] = n.y.atan2(n.x).rem_euclid(std::f64::consts::PI);
        }
        Ok((ang, r.det_value))
    };
    Ok(ThreeNodeReport {
        det_at_zero: g.op_h(&normals_dmat(&[Point::new(1.0, 0.0); 3]))?.determinant(),
        det_at_half_pi: symmetric_three_node_det([h; 3]),
        from_zero: run([0.15, -0.1, 0.05])?,
        from_half_pi: run([h + 0.1, h - 0.12, h + 0.08])?,
    })
}

/// Influence of polynomial augmentation on the boundary Schur complement.
#[derive(Debug, Clone)]
pub struct PolyInfluence {
    /// Delta W at the stencil's actual normals.
    pub delta_w: DMatrix<f64>,
    /// G_BB of the augmented system: S_BB(aug) = H(g_aug, N).
    pub g_aug: DMat,
    pub bare: OptResult,
    pub augmented: OptResult,
    /// Angle between bare and augmented optimal directions (sign-insensitive), per node.
    pub angles: Vec<f64>,
}

impl PolyInfluence {
    pub fn max_angle(&self) -> f64 {
        self.angles.iter().copied().fold(0.0, f64::max)
    }
}

pub fn poly_delta_w(
    stencil: &Stencil,
    nodes: &NodeSet,
    kernel: &KernelSpec,
    basis: &PolyBasis,
) -> Result<PolyInfluence> {
    let data = schur_data(stencil, nodes, kernel)?;
    let (g_aug, delta_w) = augmented_g(&data, stencil, nodes, basis)?;
    let bare = optimize_g(
        &data.g_bb,
        initial_directions(&data.g_bb, &Init::Diag, &data.boundary_points, &data.interior_centroid())?,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    // start the augmented run from the bare optimum so both land in the same family
    let augmented = optimize_g(&g_aug, bare.directions.clone(), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let angles =
        bare.directions.iter().zip(&augmented.directions).map(|(a, b)| a.dot(b).abs().min(1.0).acos()).collect();
    Ok(PolyInfluence { delta_w, g_aug, bare, augmented, angles })
}

/// G_BB of the augmented system together with Delta W at the stencil's normals.
pub fn augmented_g(
    data: &SchurData,
    stencil: &Stencil,
    nodes: &NodeSet,
    basis: &PolyBasis,
) -> Result<(DMat, DMatrix<f64>)> {
    let q = basis.size();
    let (mi, mb) = (data.m_i(), data.m_b());
    let deg = basis.degree().unwrap_or(0);
    let p_i = DMatrix::from_fn(mi, q, |i, l| basis.eval(l, data.interior_points[i].as_slice()).unwrap());
    let p_b = DMatrix::from_fn(mb, q, |i, l| basis.eval(l, data.boundary_points[i].as_slice()).unwrap());
    if q == 0 || q > mi || p_i.rank(1e-10 * p_i.abs().max().max(1.0)) < q {
        return Err(Error::NotUnisolvent(deg));
    }
    let phi_inv_p = data.solve_phi_ii(&p_i)?;
    let s = (p_i.transpose() * &phi_inv_p).try_inverse().ok_or(Error::NotUnisolvent(deg))?;
    // E = phi_IB^T phi_II^{-1} P_I - P_B = psi_bar^T P_I - P_B
    let e = data.psi_bar.transpose() * &p_i - &p_b;
    // d-matrix form of dE: D_BI phi_II^{-1} P_I - grad P_B
    let grad_pb = DMat::from_fn(mb, q, 2, |i, l| basis.gradient(l, data.boundary_points[i].as_slice()).unwrap());
    let de = data.d_bi.matmul(&phi_inv_p)?.sub(&grad_pb)?;
    let g_delta = de.matmul(&(&s * e.transpose()))?;
    let g_aug = data.g_bb.add(&g_delta)?;
    let actual: Vec<Point> = stencil.boundary.iter().map(|&b| *nodes.normal(b)).collect();
    let delta_w = g_delta.op_h(&normals_dmat(&actual))?;
    Ok((g_aug, delta_w))
}

/// Full M with the stencil's own normals; a convenience for determinant checks.
pub fn full_matrix(
    stencil: &Stencil,
    nodes: &NodeSet,
    kernel: &KernelSpec,
    basis: &PolyBasis,
    normals: &[Point],
) -> DMatrix<f64> {
    let points: Vec<Point> = stencil.all().map(|i| *nodes.position(i)).collect();
    build_matrix(&points, stencil.m_i(), normals, kernel, basis)
}

/// det M = det(phi_II) det(S_BB) evaluated from the Schur data.
pub fn det_from_blocks(data: &SchurData, normals: &[Point]) -> Result<f64> {
    Ok(data.det_phi_ii() * s_bb(data, normals)?.determinant())
}
