//! Global RBF-FD operators on interior unknowns, the pure-Neumann Poisson
//! solve, and the repeated Helmholtz-Hodge projection used as a stability probe.

use crate::error::{Error, Result};
use crate::geometry::{NodeSet, Point, Stencil};
use crate::interp::{assemble, factorize, DiffOperator};
use crate::kernels::{KernelSpec, PolyBasis};
use crate::stabilize::{select_boundary_nodes, SelectionConfig};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use log::info;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssemblyOptions {
    /// Filter each stencil's boundary nodes before assembly.
    pub selection: Option<SelectionConfig>,
    /// Keep boundary nodes as Neumann rows; `false` gives interior-only stencils.
    pub neumann: bool,
    /// Rebuild failing stencils without boundary nodes instead of aborting.
    pub skip_singular: bool,
}

/// Discrete operator u -> L u + Q g on the interior unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem {
    /// Global node id of each unknown.
    pub interior: Vec<usize>,
    /// (row, column, value) with rows and columns indexing unknowns, sorted by row.
    pub entries: Vec<(usize, usize, f64)>,
    /// Per row: (global boundary node id, coefficient of its Neumann datum).
    pub q_contrib: Vec<Vec<(usize, f64)>>,
    /// Boundary nodes removed by selection, per row.
    pub n_rem: Vec<usize>,
    /// Rows whose stencil failed and was rebuilt without boundary nodes.
    pub skipped: Vec<usize>,
}

impl GlobalSystem {
    pub fn n(&self) -> usize {
        self.interior.len()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for &(r, c, v) in &self.entries {
            out[r] += v * u[c];
        }
        out
    }

    /// Q g with `g` indexed by global node id.
    pub fn boundary_term(&self, g: &[f64]) -> Vec<f64> {
        self.q_contrib.iter().map(|row| row.iter().map(|&(b, c)| c * g[b]).sum()).collect()
    }
}

/// Applies boundary-node selection to every stencil; returns the reduced
/// stencils and the number of nodes removed from each.
pub fn select_all(
    nodes: &NodeSet,
    stencils: &[Stencil],
    kernel: &KernelSpec,
    cfg: &SelectionConfig,
) -> Result<(Vec<Stencil>, Vec<usize>)> {
    let out: Vec<(Stencil, usize)> =
        stencils.par_iter().map(|st| select_boundary_nodes(st, nodes, kernel, cfg)).collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}

struct Row {
    interior: Vec<(usize, f64)>,
    boundary: Vec<(usize, f64)>,
    n_rem: usize,
    skipped: bool,
}

fn row_weights(
    st: &Stencil,
    nodes: &NodeSet,
    op: &DiffOperator,
    kernel: &KernelSpec,
    basis: &PolyBasis,
) -> Result<(Vec<(usize, f64)>, Vec<(usize, f64)>)> {
    let sys = assemble(st, nodes, kernel, basis)?;
    let w = factorize(&sys)?.weights(&sys, op, nodes.position(st.center))?;
    let m_i = st.m_i();
    Ok((
        st.interior.iter().enumerate().map(|(k, &g)| (g, w[k])).collect(),
        st.boundary.iter().enumerate().map(|(k, &g)| (g, w[m_i + k])).collect(),
    ))
}

/// One row per stencil, in the order of the interior nodes of `nodes`.
pub fn assemble_global(
    nodes: &NodeSet,
    stencils: &[Stencil],
    op: &DiffOperator,
    kernel: &KernelSpec,
    basis: &PolyBasis,
    opts: &AssemblyOptions,
) -> Result<GlobalSystem> {
    let interior = nodes.interior_indices();
    if stencils.len() != interior.len() {
        return Err(Error::ShapeMismatch(format!("{} stencils for {} interior nodes", stencils.len(), interior.len())));
    }
    let slot: HashMap<usize, usize> = interior.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let mut by_row: Vec<Option<&Stencil>> = vec![None; interior.len()];
    for st in stencils {
        let &k = slot
            .get(&st.center)
            .ok_or_else(|| Error::Geometry(format!("stencil centre {} is not an interior node", st.center)))?;
        if by_row[k].replace(st).is_some() {
            return Err(Error::Geometry(format!("two stencils centred at node {}", st.center)));
        }
    }
    let rows: Vec<Row> = by_row
        .par_iter()
        .map(|st| {
            let st = st.expect("every row has a stencil");
            let mut local = st.clone();
            let mut n_rem = 0;
            if !opts.neumann {
                local.boundary.clear();
            } else if let Some(cfg) = &opts.selection {
                let (red, n) = select_boundary_nodes(st, nodes, kernel, cfg)?;
                local = red;
                n_rem = n;
            }
            match row_weights(&local, nodes, op, kernel, basis) {
                Ok((i, b)) => Ok(Row { interior: i, boundary: b, n_rem, skipped: false }),
                Err(_) if opts.skip_singular && local.m_b() > 0 => {
                    local.boundary.clear();
                    let (i, b) = row_weights(&local, nodes, op, kernel, basis).map_err(|e| tag(st.center, e))?;
                    Ok(Row { interior: i, boundary: b, n_rem, skipped: true })
                }
                Err(e) => Err(tag(st.center, e)),
            }
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(rows.iter().map(|r| r.interior.len()).sum());
    let mut q_contrib = Vec::with_capacity(rows.len());
    let mut n_rem = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    for (r, row) in rows.into_iter().enumerate() {
        for (g, v) in row.interior {
            entries.push((r, slot[&g], v));
        }
        q_contrib.push(row.boundary);
        n_rem.push(row.n_rem);
        if row.skipped {
            skipped.push(interior[r]);
        }
    }
    if !skipped.is_empty() {
        info!("{} stencils rebuilt without boundary nodes", skipped.len());
    }
    Ok(GlobalSystem { interior, entries, q_contrib, n_rem, skipped })
}

fn tag(node: usize, e: Error) -> Error {
    match e {
        Error::IllConditioned { kappa } => {
            Error::SingularAssembly(format!("stencil at node {node} is ill-conditioned (kappa {kappa:.3e})"))
        }
        other => Error::SingularAssembly(format!("stencil at node {node}: {other}")),
    }
}

/// Sparse LU of the bordered system [[L, 1], [1^T, 0]].
pub struct NeumannPoisson {
    lu: Lu<usize, f64>,
    n: usize,
}

impl NeumannPoisson {
    pub fn new(sys: &GlobalSystem) -> Result<Self> {
        let n = sys.n();
        let mut t: Vec<Triplet<usize, usize, f64>> =
            sys.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        for k in 0..n {
            t.push(Triplet::new(k, n, 1.0));
            t.push(Triplet::new(n, k, 1.0));
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n + 1, n + 1, &t)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(Self { lu, n })
    }

    /// Solves L u = rhs - mu with sum(u) = 0.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::ShapeMismatch(format!("rhs of length {} for {} unknowns", rhs.len(), self.n)));
        }
        let mut b = Mat::<f64>::from_fn(self.n + 1, 1, |i, _| if i < self.n { rhs[i] } else { 0.0 });
        self.lu.solve_in_place(b.as_mut());
        let u: Vec<f64> = b.col_as_slice(0)[..self.n].to_vec();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(u)
    }
}

/// Solves the Laplacian system with Neumann data `g` (indexed by global node
/// id) and source `f` (indexed by unknown), returning the zero-mean solution.
pub fn solve_poisson_neumann(sys: &GlobalSystem, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let q = sys.boundary_term(g);
    let rhs: Vec<f64> = f.iter().zip(&q).map(|(a, b)| a - b).collect();
    NeumannPoisson::new(sys)?.solve(&rhs)
}

/// RMS of the mean-aligned difference over the range of the exact field.
pub fn nrmse(u_h: &[f64], u_exact: &[f64]) -> Result<f64> {
    if u_h.len() != u_exact.len() || u_h.is_empty() {
        return Err(Error::ShapeMismatch(format!("fields of length {} and {}", u_h.len(), u_exact.len())));
    }
    let (lo, hi) = u_exact.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Domain("exact field is constant".into()));
    }
    let n = u_h.len() as f64;
    let d: Vec<f64> = u_h.iter().zip(u_exact).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n;
    Ok((d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt() / range)
}

/// Operators reused by every projection step.
pub struct HhdOperators {
    pub laplacian: GlobalSystem,
    poisson: NeumannPoisson,
    /// Interior-only first derivatives for the velocity.
    pub dx_velocity: GlobalSystem,
    pub dy_velocity: GlobalSystem,
    /// First derivatives of the potential on the Neumann-aware stencils (g = 0).
    pub dx_potential: GlobalSystem,
    pub dy_potential: GlobalSystem,
}

pub fn hhd_operators(
    nodes: &NodeSet,
    stencils: &[Stencil],
    kernel: &KernelSpec,
    basis: &PolyBasis,
    selection: Option<SelectionConfig>,
    skip_singular: bool,
) -> Result<HhdOperators> {
    let (reduced, removed) = match &selection {
        Some(cfg) => select_all(nodes, stencils, kernel, cfg)?,
        None => (stencils.to_vec(), vec![0; stencils.len()]),
    };
    let neumann = AssemblyOptions { selection: None, neumann: true, skip_singular };
    let plain = AssemblyOptions { selection: None, neumann: false, skip_singular };
    let mut laplacian = assemble_global(nodes, &reduced, &DiffOperator::Laplacian, kernel, basis, &neumann)?;
    // rows follow interior order, stencils may not
    let order: HashMap<usize, usize> = reduced.iter().zip(&removed).map(|(s, &r)| (s.center, r)).collect();
    laplacian.n_rem = laplacian.interior.iter().map(|g| order[g]).collect();
    let poisson = NeumannPoisson::new(&laplacian)?;
    Ok(HhdOperators {
        poisson,
        dx_velocity: assemble_global(nodes, &reduced, &DiffOperator::Partial(0), kernel, basis, &plain)?,
        dy_velocity: assemble_global(nodes, &reduced, &DiffOperator::Partial(1), kernel, basis, &plain)?,
        dx_potential: assemble_global(nodes, &reduced, &DiffOperator::Partial(0), kernel, basis, &neumann)?,
        dy_potential: assemble_global(nodes, &reduced, &DiffOperator::Partial(1), kernel, basis, &neumann)?,
        laplacian,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HhdState {
    pub u: Vec<Point>,
    pub iteration: usize,
    /// Euclidean norm of the discrete divergence before each projection.
    pub div_norm_history: Vec<f64>,
    /// max |u| after each projection.
    pub sup_norm_history: Vec<f64>,
}

fn sup_norm(u: &[Point]) -> f64 {
    u.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Runs `n_iter` projections u <- u - grad(phi) with lap(phi) = div(u) and
/// homogeneous Neumann data. Stops early once the field is no longer finite.
pub fn hhd_iterate(ops: &HhdOperators, w: &[Point], n_iter: usize) -> Result<HhdState> {
    let n = ops.laplacian.n();
    if w.len() != n {
        return Err(Error::ShapeMismatch(format!("{} vectors for {n} unknowns", w.len())));
    }
    let mut st = HhdState { u: w.to_vec(), iteration: 0, div_norm_history: Vec::new(), sup_norm_history: Vec::new() };
    for _ in 0..n_iter {
        let ux: Vec<f64> = st.u.iter().map(|v| v.x).collect();
        let uy: Vec<f64> = st.u.iter().map(|v| v.y).collect();
        let div: Vec<f64> =
            ops.dx_velocity.apply(&ux).iter().zip(ops.dy_velocity.apply(&uy)).map(|(a, b)| a + b).collect();
        let dn = div.iter().map(|v| v * v).sum::<f64>().sqrt();
        let phi = match ops.poisson.solve(&div) {
            Ok(p) => p,
            Err(_) if !dn.is_finite() => {
                st.div_norm_history.push(f64::INFINITY);
                st.sup_norm_history.push(f64::INFINITY);
                st.iteration += 1;
                break;
            }
            Err(e) => return Err(e),
        };
        let gx = ops.dx_potential.apply(&phi);
        let gy = ops.dy_potential.apply(&phi);
        for (k, v) in st.u.iter_mut().enumerate() {
            *v -= Point::new(gx[k], gy[k]);
        }
        let sup = sup_norm(&st.u);
        st.div_norm_history.push(dn);
        st.sup_norm_history.push(sup);
        st.iteration += 1;
        if !sup.is_finite() {
            break;
        }
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// max |u| stayed within 10 |w|.
    Stable,
    /// Between 10 and 1000 |w|.
    Marginal,
    /// Above 1000 |w| or non-finite.
    Divergent,
}

impl HhdState {
    /// max over iterations of |u| / |w|, including the initial field.
    pub fn growth(&self, w: &[Point]) -> f64 {
        let w0 = sup_norm(w);
        let m =
            self.sup_norm_history.iter().copied().fold(w0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        m / w0
    }

    pub fn classify(&self, w: &[Point]) -> Stability {
        let g = self.growth(w);
        if g <= 10.0 {
            Stability::Stable
        } else if g <= 1e3 {
            Stability::Marginal
        } else {
            Stability::Divergent
        }
    }
}

/// Irrotational vortex about the origin, w = (-y, x) / r^2.
pub fn vortex(p: &Point) -> Point {
    Point::new(-p.y, p.x) / p.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_stencils, generate_nodes, Domain2D, GenerateOptions};

    fn disk_setup(s: f64) -> (NodeSet, Vec<Stencil>) {
        let d = Domain2D::disk(Point::new(0.2, -0.1), 1.0);
        let nodes = generate_nodes(&d, s, &GenerateOptions::default()).unwrap();
        let st = build_stencils(&nodes, 15).unwrap();
        (nodes, st)
    }

    #[test]
    fn nrmse_examples() {
        let a = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(nrmse(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 5.0).collect();
        assert!(nrmse(&b, &a).unwrap() < 1e-15);
        assert!(nrmse(&a, &[1.0; 4]).is_err());
        assert!(nrmse(&a, &a[..2]).is_err());
        // uniform noise of amplitude 0.01 * range has RMS close to 0.01/sqrt(3)
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let exact: Vec<f64> = (0..20000).map(|i| i as f64 / 19999.0).collect();
        let noisy: Vec<f64> = exact.iter().map(|v| v + 0.01 * rng.gen_range(-1.0..1.0)).collect();
        let e = nrmse(&noisy, &exact).unwrap();
        assert!((e / (0.01 / 3f64.sqrt()) - 1.0).abs() < 0.2);
    }

    #[test]
    fn laplacian_of_quadratic_far_from_boundary() {
        let (nodes, st) = disk_setup(0.08);
        let k = KernelSpec::mq(0.5 / 0.08).unwrap();
        let sys = assemble_global(
            &nodes,
            &st,
            &DiffOperator::Laplacian,
            &k,
            &PolyBasis::new(2, 2),
            &AssemblyOptions { neumann: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(sys.n(), nodes.n_interior());
        let u: Vec<f64> = sys.interior.iter().map(|&g| nodes.position(g).norm_squared()).collect();
        let gdata: Vec<f64> = (0..nodes.len()).map(|g| 2.0 * nodes.position(g).dot(nodes.normal(g))).collect();
        let lu = sys.apply(&u);
        let q = sys.boundary_term(&gdata);
        let d = Domain2D::disk(Point::new(0.2, -0.1), 1.0);
        for (r, &g) in sys.interior.iter().enumerate() {
            let total = lu[r] + q[r];
            if d.distance(nodes.position(g)) > 3.0 * 0.08 {
                assert!((total - 4.0).abs() < 1e-6, "row {r}: {total}");
            }
            // with exact Neumann data the quadratic is reproduced everywhere
            assert!((total - 4.0).abs() < 1e-5, "row {r}: {total}");
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let (nodes, st) = disk_setup(0.1);
        let k = KernelSpec::mq(5.0).unwrap();
        for neumann in [false, true] {
            let sys = assemble_global(
                &nodes,
                &st,
                &DiffOperator::Partial(0),
                &k,
                &PolyBasis::new(1, 2),
                &AssemblyOptions { neumann, ..Default::default() },
            )
            .unwrap();
            let one = vec![1.0; sys.n()];
            for v in sys.apply(&one) {
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn homogeneous_poisson_gives_zero_and_mean_is_zero() {
        let (nodes, st) = disk_setup(0.1);
        let k = KernelSpec::mq(5.0).unwrap();
        let sys = assemble_global(
            &nodes,
            &st,
            &DiffOperator::Laplacian,
            &k,
            &PolyBasis::new(2, 2),
            &AssemblyOptions {
                neumann: true,
                selection: Some(SelectionConfig::new(0.7).unwrap()),
                skip_singular: false,
            },
        )
        .unwrap();
        let g = vec![0.0; nodes.len()];
        let u = solve_poisson_neumann(&sys, &vec![0.0; sys.n()], &g).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-12));
        let f: Vec<f64> = sys.interior.iter().map(|&i| nodes.position(i).x.sin()).collect();
        let u = solve_poisson_neumann(&sys, &f, &g).unwrap();
        assert!(u.iter().sum::<f64>().abs() / u.len() as f64 <= 1e-10);
    }

    #[test]
    fn assembly_is_deterministic() {
        let (nodes, st) = disk_setup(0.12);
        let k = KernelSpec::mq(0.5 / 0.12).unwrap();
        let opts = AssemblyOptions {
            neumann: true,
            selection: Some(SelectionConfig::new(0.7).unwrap()),
            skip_singular: false,
        };
        let a = assemble_global(&nodes, &st, &DiffOperator::Laplacian, &k, &PolyBasis::new(2, 2), &opts).unwrap();
        let b = assemble_global(&nodes, &st, &DiffOperator::Laplacian, &k, &PolyBasis::new(2, 2), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hhd_constant_field_and_linearity() {
        let (nodes, st) = disk_setup(0.12);
        let k = KernelSpec::mq(0.5 / 0.12).unwrap();
        let ops =
            hhd_operators(&nodes, &st, &k, &PolyBasis::new(2, 2), Some(SelectionConfig::new(0.7).unwrap()), false)
                .unwrap();
        let n = ops.laplacian.n();
        let c = vec![Point::new(0.3, -1.2); n];
        let r = hhd_iterate(&ops, &c, 5).unwrap();
        assert_eq!(r.sup_norm_history.len(), 5);
        for v in &r.u {
            assert!((v - Point::new(0.3, -1.2)).norm() < 1e-10);
        }
        let w: Vec<Point> =
            ops.laplacian.interior.iter().map(|&g| vortex(&(nodes.position(g) + Point::new(2.5, 0.0)))).collect();
        let w2: Vec<Point> = w.iter().map(|v| 2.0 * v).collect();
        let a = hhd_iterate(&ops, &w, 4).unwrap();
        let b = hhd_iterate(&ops, &w2, 4).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((2.0 * x - y).norm() <= 1e-10 * y.norm().max(1.0));
        }
        for (x, y) in a.div_norm_history.iter().zip(&b.div_norm_history) {
            assert!((2.0 * x - y).abs() <= 1e-10 * y.abs().max(1e-300));
        }
    }
}
