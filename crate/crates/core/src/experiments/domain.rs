use crate::error::{Error, Result};
use crate::geometry::{
    build_stencils, generate_nodes, spacing_for_interior_count, Domain2D, FirstLayer, GenerateOptions, NodeSet, Point,
};
use crate::interp::DiffOperator;
use crate::kernels::{KernelSpec, PolyBasis};
use crate::pde::{
    assemble_global, hhd_iterate, hhd_operators, nrmse, solve_poisson_neumann, vortex, AssemblyOptions, HhdState,
    Stability,
};
use crate::stabilize::{project_boundary_nodes, SelectionConfig};

/// Stencil size used with each polynomial degree.
pub fn default_mi(degree: usize) -> usize {
    match degree {
        0..=2 => 15,
        3 => 20,
        _ => 30,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainRunConfig {
    pub kernel: String,
    pub eps_s: f64,
    pub degree: usize,
    pub m_i: usize,
    /// `None` disables boundary-node selection.
    pub d_min: Option<f64>,
    pub skip_singular: bool,
}

impl DomainRunConfig {
    pub fn mq(eps_s: f64, degree: usize, d_min: Option<f64>) -> Self {
        Self { kernel: "mq".into(), eps_s, degree, m_i: default_mi(degree), d_min, skip_singular: false }
    }

    fn kernel_for(&self, nodes: &NodeSet) -> Result<KernelSpec> {
        KernelSpec::from_name(&self.kernel, self.eps_s, nodes.spacing())
    }

    fn selection(&self) -> Result<Option<SelectionConfig>> {
        self.d_min.map(SelectionConfig::new).transpose()
    }
}

/// Node set on the five-lobed test domain. The plain set staggers the first
/// interior row against the boundary nodes; the projected set puts that row on
/// the inward normals of the boundary nodes, so each boundary node is the
/// projection of a first-row node.
pub fn domain_nodes(spacing: f64, projected: bool) -> Result<NodeSet> {
    let d = Domain2D::test_domain();
    if projected {
        let opts = GenerateOptions { layer: FirstLayer::Aligned, ..GenerateOptions::default() };
        project_boundary_nodes(&generate_nodes(&d, spacing, &opts)?, &d)
    } else {
        generate_nodes(&d, spacing, &GenerateOptions::default())
    }
}

/// Spacing that gives about `n` interior nodes on the test domain.
pub fn domain_spacing(n_interior: usize) -> f64 {
    spacing_for_interior_count(&Domain2D::test_domain(), n_interior, &GenerateOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HhdRun {
    pub state: HhdState,
    pub growth: f64,
    pub stability: Stability,
    pub removed: usize,
    pub skipped: usize,
}

/// Repeated projection of the vortex field w = (-y, x)/r^2.
pub fn hhd_run(nodes: &NodeSet, cfg: &DomainRunConfig, n_iter: usize) -> Result<HhdRun> {
    let kernel = cfg.kernel_for(nodes)?;
    let basis = PolyBasis::new(cfg.degree, 2);
    let stencils = build_stencils(nodes, cfg.m_i)?;
    let ops = hhd_operators(nodes, &stencils, &kernel, &basis, cfg.selection()?, cfg.skip_singular)?;
    let w: Vec<Point> = ops.laplacian.interior.iter().map(|&g| vortex(nodes.position(g))).collect();
    let state = hhd_iterate(&ops, &w, n_iter)?;
    let growth = state.growth(&w);
    Ok(HhdRun {
        stability: state.classify(&w),
        growth,
        removed: ops.laplacian.n_rem.iter().sum(),
        skipped: ops.laplacian.skipped.len(),
        state,
    })
}

pub fn manufactured_u(p: &Point) -> f64 {
    1.0 / p.norm()
}

pub fn manufactured_f(p: &Point) -> f64 {
    p.norm().powi(-3)
}

pub fn manufactured_grad(p: &Point) -> Point {
    -p / p.norm().powi(3)
}

/// NRMSE of the pure-Neumann solve for u = 1/r on the given nodes.
pub fn poisson_run(nodes: &NodeSet, cfg: &DomainRunConfig) -> Result<f64> {
    let kernel = cfg.kernel_for(nodes)?;
    let basis = PolyBasis::new(cfg.degree, 2);
    let stencils = build_stencils(nodes, cfg.m_i)?;
    let opts = AssemblyOptions { selection: cfg.selection()?, neumann: true, skip_singular: cfg.skip_singular };
    let sys = assemble_global(nodes, &stencils, &DiffOperator::Laplacian, &kernel, &basis, &opts)?;
    let f: Vec<f64> = sys.interior.iter().map(|&g| manufactured_f(nodes.position(g))).collect();
    let g: Vec<f64> = (0..nodes.len())
        .map(|k| if nodes.is_boundary(k) { manufactured_grad(nodes.position(k)).dot(nodes.normal(k)) } else { 0.0 })
        .collect();
    let u = solve_poisson_neumann(&sys, &f, &g)?;
    let exact: Vec<f64> = sys.interior.iter().map(|&g| manufactured_u(nodes.position(g))).collect();
    let e = nrmse(&u, &exact)?;
    if !e.is_finite() {
        return Err(Error::NonFinite("Poisson error".into()));
    }
    Ok(e)
}

/// Shape parameters of the stability map: 0.2 to 0.9 in steps of 0.1.
pub fn default_map_eps_s() -> Vec<f64> {
    (2..=9).map(|k| k as f64 / 10.0).collect()
}

/// Selection thresholds of the stability map; 0 means no selection.
pub fn default_map_dmin() -> Vec<f64> {
    vec![0.0, 0.05, 0.2, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub degree: usize,
    pub eps_s: f64,
    pub d_min: f64,
    pub stable: bool,
    pub growth: f64,
}

fn selection_of(d_min: f64) -> Option<f64> {
    (d_min > 0.0).then_some(d_min)
}

/// HHD growth over a (P, eps s, d_min) grid. Runs that fail to assemble are
/// recorded as divergent with infinite growth.
pub fn stability_map(
    nodes: &NodeSet,
    degrees: &[usize],
    eps_s: &[f64],
    d_min: &[f64],
    n_iter: usize,
) -> Vec<StabilityRow> {
    let mut rows = Vec::with_capacity(degrees.len() * eps_s.len() * d_min.len());
    for &degree in degrees {
        for &e in eps_s {
            for &d in d_min {
                let cfg = DomainRunConfig::mq(e, degree, selection_of(d));
                let growth = match hhd_run(nodes, &cfg, n_iter) {
                    Ok(r) => r.growth,
                    Err(err) => {
                        log::warn!("HHD run P={degree} eps_s={e} d_min={d} failed: {err}");
                        f64::INFINITY
                    }
                };
                rows.push(StabilityRow { degree, eps_s: e, d_min: d, stable: growth <= 10.0, growth });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRow {
    pub degree: usize,
    pub eps_s: f64,
    pub d_min: f64,
    pub nrmse: f64,
}

/// Poisson NRMSE over a d_min sweep; failed solves are recorded as infinite.
/// Singular stencils fall back to interior-only versions so that small d_min
/// values still produce a number.
pub fn poisson_sweep(nodes: &NodeSet, degrees: &[usize], eps_s: &[f64], d_min: &[f64]) -> Vec<PoissonRow> {
    let mut rows = Vec::new();
    for &degree in degrees {
        for &e in eps_s {
            for &d in d_min {
                let mut cfg = DomainRunConfig::mq(e, degree, selection_of(d));
                cfg.skip_singular = true;
                let nrmse = poisson_run(nodes, &cfg).unwrap_or_else(|err| {
                    log::warn!("Poisson run P={degree} eps_s={e} d_min={d} failed: {err}");
                    f64::INFINITY
                });
                rows.push(PoissonRow { degree, eps_s: e, d_min: d, nrmse });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub spacing: f64,
    pub n_interior: usize,
    pub nrmse: f64,
    pub fine_n_interior: usize,
    pub fine_nrmse: f64,
}

impl Refinement {
    pub fn ratio(&self) -> f64 {
        self.nrmse / self.fine_nrmse
    }
}

/// Poisson errors at spacing s and s/2 on the plain node sets.
pub fn poisson_refinement(spacing: f64, cfg: &DomainRunConfig) -> Result<Refinement> {
    let coarse = domain_nodes(spacing, false)?;
    let fine = domain_nodes(0.5 * spacing, false)?;
    Ok(Refinement {
        spacing,
        n_interior: coarse.n_interior(),
        nrmse: poisson_run(&coarse, cfg)?,
        fine_n_interior: fine.n_interior(),
        fine_nrmse: poisson_run(&fine, cfg)?,
    })
}
