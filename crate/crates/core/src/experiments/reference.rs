use crate::error::Result;
use crate::geometry::{reference_stencil, FanLine, NodeSet, Point, Stencil};
use crate::interp::{assemble, interp_error, lebesgue, matrix_condition};
use crate::kernels::{KernelSpec, PolyBasis};
use crate::stabilize::{
    optimize_boundary_positions, project_boundary_nodes, select_boundary_nodes, PlacementResult, SelectionConfig,
};
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    /// All seven boundary nodes with their fan normals.
    Plain,
    /// Boundary nodes filtered against their optimal directions.
    Select,
    /// Boundary nodes replaced by projections of the first interior row.
    Project,
}

impl RefMode {
    pub fn name(self) -> &'static str {
        match self {
            RefMode::Plain => "none",
            RefMode::Select => "approach1",
            RefMode::Project => "approach2",
        }
    }

    /// Sweep interval for alpha; the projected layout is only meaningful for moderate angles.
    pub fn alpha_range(self) -> (f64, f64) {
        match self {
            RefMode::Project => (-FRAC_PI_3, FRAC_PI_3),
            _ => (-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefSweepConfig {
    pub kernel: KernelSpec,
    pub basis: PolyBasis,
    pub spacing: f64,
    pub d_min: f64,
    pub n_alpha: usize,
    /// Lattice resolution for the Lebesgue constants; 0 skips them (reported as NaN).
    pub lebesgue_res: usize,
}

impl RefSweepConfig {
    /// MQ with eps s = 0.5, no polynomial tail, 721 samples.
    pub fn standard(spacing: f64) -> Result<Self> {
        Ok(Self {
            kernel: KernelSpec::mq(0.5 / spacing)?,
            basis: PolyBasis::none(2),
            spacing,
            d_min: 0.6,
            n_alpha: 721,
            lebesgue_res: 0,
        })
    }

    pub fn alphas(&self, mode: RefMode) -> Vec<f64> {
        let (a, b) = mode.alpha_range();
        if self.n_alpha == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..self.n_alpha).map(|i| a + (b - a) * i as f64 / (self.n_alpha - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefRow {
    pub alpha: f64,
    pub kappa: f64,
    pub lambda_i: f64,
    pub lambda_b: f64,
    pub interp_err: f64,
    pub n_rem: usize,
}

pub fn test_function(p: &Point) -> f64 {
    (p.x + 2.0 * p.y).exp()
}

pub fn test_gradient(p: &Point) -> Point {
    let e = (p.x + 2.0 * p.y).exp();
    Point::new(e, 2.0 * e)
}

/// The layout used at one angle for the given mode, with the number of boundary
/// nodes dropped relative to the seven of the plain layout.
pub fn reference_layout(alpha: f64, cfg: &RefSweepConfig, mode: RefMode) -> Result<(NodeSet, Stencil, usize)> {
    let (nodes, st) = reference_stencil(alpha, cfg.spacing);
    match mode {
        RefMode::Plain => Ok((nodes, st, 0)),
        RefMode::Select => {
            let (red, n) = select_boundary_nodes(&st, &nodes, &cfg.kernel, &SelectionConfig::new(cfg.d_min)?)?;
            Ok((nodes, red, n))
        }
        RefMode::Project => {
            let p = project_boundary_nodes(&nodes, &FanLine { alpha, spacing: cfg.spacing })?;
            let b = p.boundary_indices();
            let lost = st.m_b().saturating_sub(b.len());
            let st = Stencil::new(st.center, (0..st.m_i()).collect(), b);
            Ok((p, st, lost))
        }
    }
}

pub fn ref_row(alpha: f64, cfg: &RefSweepConfig, mode: RefMode) -> RefRow {
    let bad = |n_rem| RefRow {
        alpha,
        kappa: f64::INFINITY,
        lambda_i: f64::INFINITY,
        lambda_b: f64::INFINITY,
        interp_err: f64::INFINITY,
        n_rem,
    };
    let Ok((nodes, st, n_rem)) = reference_layout(alpha, cfg, mode) else {
        return bad(0);
    };
    let Ok(sys) = assemble(&st, &nodes, &cfg.kernel, &cfg.basis) else {
        return bad(n_rem);
    };
    let kappa = matrix_condition(&sys.matrix);
    let x_eval = Point::new(0.5 * cfg.spacing, 0.5 * cfg.spacing);
    let interp_err = interp_error(&sys, test_function, test_gradient, &x_eval).unwrap_or(f64::INFINITY);
    let (lambda_i, lambda_b) = if cfg.lebesgue_res == 0 {
        (f64::NAN, f64::NAN)
    } else {
        lebesgue(&sys, cfg.lebesgue_res).map_or((f64::INFINITY, f64::INFINITY), |l| (l.lambda_i, l.lambda_b))
    };
    RefRow { alpha, kappa, lambda_i, lambda_b, interp_err, n_rem }
}

pub fn ref_sweep(cfg: &RefSweepConfig, mode: RefMode) -> Vec<RefRow> {
    cfg.alphas(mode).par_iter().map(|&a| ref_row(a, cfg, mode)).collect()
}

/// Outcome of the boundary-position optimisation on the reference stencil.
#[derive(Debug, Clone)]
pub struct PlacementRun {
    pub alpha: f64,
    pub initial: Vec<Point>,
    pub result: PlacementResult,
    /// Boundary nodes obtained by projecting the first interior row, for comparison.
    pub projected: Vec<Point>,
}

impl PlacementRun {
    pub fn final_positions(&self) -> Vec<Point> {
        self.result.stencil.boundary.iter().map(|&b| *self.result.nodes.position(b)).collect()
    }
}

pub fn placement_run(alpha: f64, cfg: &RefSweepConfig, step: f64, max_iter: usize) -> Result<PlacementRun> {
    let (nodes, st) = reference_stencil(alpha, cfg.spacing);
    let line = FanLine { alpha, spacing: cfg.spacing };
    let result = optimize_boundary_positions(&st, &nodes, &cfg.kernel, &line, step, max_iter)?;
    let projected = project_boundary_nodes(&nodes, &line)?;
    Ok(PlacementRun {
        alpha,
        initial: st.boundary.iter().map(|&b| *nodes.position(b)).collect(),
        projected: projected.boundary_indices().iter().map(|&b| *projected.position(b)).collect(),
        result,
    })
}
