use crate::error::Result;
use crate::geometry::{reference_stencil, NodeSet, Point};
use crate::kernels::{KernelSpec, PolyBasis};
use crate::optdir::{augmented_g, initial_directions, iterate_g, schur_data, Init, DEFAULT_MAX_ITER, DEFAULT_TOL};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Shape parameters swept by default. 0.1 is left out: at that value the
/// double-precision Schur data is dominated by cancellation.
pub const DEFAULT_EPS_S: [f64; 7] = [0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0];

#[derive(Debug, Clone)]
pub struct OptDirConfig {
    pub kernel: String,
    pub eps_s: Vec<f64>,
    pub alpha: f64,
    pub spacing: f64,
    /// Seed for the perturbed copy of the layout; `None` runs the regular layout only.
    pub seed: Option<u64>,
    /// Degree of the augmentation used for the augmented rows.
    pub degree: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptDirConfig {
    fn default() -> Self {
        Self {
            kernel: "mq".into(),
            eps_s: DEFAULT_EPS_S.to_vec(),
            alpha: 0.0,
            spacing: 1.0,
            seed: None,
            degree: 2,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptDirRow {
    pub eps_s: f64,
    pub perturbed: bool,
    pub augmented: bool,
    /// Boundary node index within the stencil, left to right.
    pub node: usize,
    pub x: f64,
    pub y: f64,
    pub nx: f64,
    pub ny: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Reference layout with interior nodes displaced within +-0.15 s per coordinate.
pub fn perturbed_reference(alpha: f64, spacing: f64, seed: u64) -> NodeSet {
    let (mut nodes, st) = reference_stencil(alpha, spacing);
    let mut rng = StdRng::seed_from_u64(seed);
    let a = 0.15 * spacing;
    for &i in &st.interior {
        let p = nodes.position(i) + Point::new(rng.gen_range(-a..=a), rng.gen_range(-a..=a));
        nodes = nodes.with_position(i, p);
    }
    nodes
}

/// Optimal directions of every boundary node of the reference stencil, bare and
/// augmented, on the regular and (with a seed) perturbed layout.
pub fn optdir_table(cfg: &OptDirConfig) -> Result<Vec<OptDirRow>> {
    let (regular, st) = reference_stencil(cfg.alpha, cfg.spacing);
    let mut layouts = vec![(false, regular)];
    if let Some(seed) = cfg.seed {
        layouts.push((true, perturbed_reference(cfg.alpha, cfg.spacing, seed)));
    }
    let basis = PolyBasis::new(cfg.degree, 2);
    let mut rows = Vec::new();
    for &eps_s in &cfg.eps_s {
        let kernel = KernelSpec::from_name(&cfg.kernel, eps_s, cfg.spacing)?;
        for (perturbed, nodes) in &layouts {
            let data = schur_data(&st, nodes, &kernel)?;
            let start = initial_directions(&data.g_bb, &Init::Diag, &data.boundary_points, &data.interior_centroid())?;
            let bare = iterate_g(&data.g_bb, start, cfg.tol, cfg.max_iter)?;
            let (g_aug, _) = augmented_g(&data, &st, nodes, &basis)?;
            let aug = iterate_g(&g_aug, bare.directions.clone(), cfg.tol, cfg.max_iter)?;
            for (augmented, r) in [(false, &bare), (true, &aug)] {
                for (k, d) in r.directions.iter().enumerate() {
                    let p = data.boundary_points[k];
                    rows.push(OptDirRow {
                        eps_s,
                        perturbed: *perturbed,
                        augmented,
                        node: k,
                        x: p.x,
                        y: p.y,
                        nx: d.x,
                        ny: d.y,
                        residual: r.residual,
                        iterations: r.iterations,
                        converged: r.residual < cfg.tol,
                    });
                }
            }
        }
    }
    Ok(rows)
}
