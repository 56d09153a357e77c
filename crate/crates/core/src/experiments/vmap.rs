use crate::error::{Error, Result};
use crate::geometry::{NodeKind, NodeSet, Point, Stencil};
use crate::kernels::KernelSpec;
use crate::optdir::{schur_data, single_node_v};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

/// Hexagonal interior arrangements above the line y = 0, listed by rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    Hex3,
    Hex5,
    Hex12,
    Hex15,
}

impl Arrangement {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hex3" => Ok(Self::Hex3),
            "hex5" => Ok(Self::Hex5),
            "hex12" => Ok(Self::Hex12),
            "hex15" => Ok(Self::Hex15),
            _ => Err(Error::Parse(format!("unknown arrangement '{s}'"))),
        }
    }

    fn rows(self) -> &'static [usize] {
        match self {
            Self::Hex3 => &[2, 1],
            Self::Hex5 => &[3, 2],
            Self::Hex12 => &[5, 4, 3],
            Self::Hex15 => &[6, 5, 4],
        }
    }

    /// Node positions; with a seed every node is displaced uniformly within
    /// +-0.15 s in each coordinate.
    pub fn points(self, spacing: f64, seed: Option<u64>) -> Vec<Point> {
        let h = 3f64.sqrt() / 2.0 * spacing;
        let mut out = Vec::new();
        for (k, &count) in self.rows().iter().enumerate() {
            let x0 = -(count as f64 - 1.0) / 2.0 * spacing;
            for i in 0..count {
                out.push(Point::new(x0 + i as f64 * spacing, (k + 1) as f64 * h));
            }
        }
        if let Some(seed) = seed {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = 0.15 * spacing;
            for p in &mut out {
                *p += Point::new(rng.gen_range(-a..=a), rng.gen_range(-a..=a));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct VmapConfig {
    pub kernel: KernelSpec,
    pub spacing: f64,
    pub arrangement: Arrangement,
    pub seed: Option<u64>,
    /// Grid points per side.
    pub resolution: usize,
    /// Distance the grid extends beyond the arrangement's bounding box, in units of s.
    pub margin: f64,
}

impl VmapConfig {
    pub fn new(kernel: KernelSpec, spacing: f64, arrangement: Arrangement) -> Self {
        Self { kernel, spacing, arrangement, seed: None, resolution: 81, margin: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VRow {
    pub x: f64,
    pub y: f64,
    pub vnorm: f64,
    pub vx: f64,
    pub vy: f64,
}

/// v for a single boundary node at `xb`; zero at singular locations, including
/// the interior nodes themselves.
pub fn v_at(interior: &[Point], xb: Point, kernel: &KernelSpec, spacing: f64) -> Result<Point> {
    if interior.iter().any(|p| (p - xb).norm() < 1e-9 * spacing) {
        return Ok(Point::zeros());
    }
    let mut pos = interior.to_vec();
    pos.push(xb);
    let mut kinds = vec![NodeKind::Interior; interior.len()];
    kinds.push(NodeKind::Boundary);
    let mut normals = vec![Point::zeros(); interior.len()];
    normals.push(Point::new(0.0, -1.0));
    let nodes = NodeSet::new_unchecked(pos, kinds, normals, spacing)?;
    let st = Stencil::new(0, (0..interior.len()).collect(), vec![interior.len()]);
    let data = schur_data(&st, &nodes, kernel)?;
    match single_node_v(&data) {
        Ok(v) => Ok(v.v),
        Err(Error::SingularLocation(_)) => Ok(Point::zeros()),
        Err(e) => Err(e),
    }
}

fn row(p: Point, v: Point) -> VRow {
    VRow { x: p.x, y: p.y, vnorm: v.norm(), vx: v.x, vy: v.y }
}

/// Grid of candidate boundary-node positions in row-major order (x fastest).
pub fn vmap_grid(cfg: &VmapConfig) -> Result<Vec<VRow>> {
    let pts = cfg.arrangement.points(cfg.spacing, cfg.seed);
    let (lo, hi) = bounding_box(&pts);
    let m = cfg.margin * cfg.spacing;
    let n = cfg.resolution.max(2);
    let coord = |a: f64, b: f64, i: usize| a - m + (b - a + 2.0 * m) * i as f64 / (n - 1) as f64;
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let p = Point::new(coord(lo.x, hi.x, k % n), coord(lo.y, hi.y, k / n));
            v_at(&pts, p, &cfg.kernel, cfg.spacing).map(|v| row(p, v))
        })
        .collect()
}

/// v along the lower curve of points at distance s from the nearest interior node.
pub fn vmap_curve(cfg: &VmapConfig, samples: usize) -> Result<Vec<VRow>> {
    let pts = cfg.arrangement.points(cfg.spacing, cfg.seed);
    let s = cfg.spacing;
    let (lo, hi) = bounding_box(&pts);
    let (a, b) = (lo.x - s * (1.0 - 1e-6), hi.x + s * (1.0 - 1e-6));
    (0..samples.max(2))
        .map(|i| {
            let x = a + (b - a) * i as f64 / (samples.max(2) - 1) as f64;
            let y = pts
                .iter()
                .filter(|p| (x - p.x).abs() <= s)
                .map(|p| p.y - (s * s - (x - p.x).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let p = Point::new(x, y);
            v_at(&pts, p, &cfg.kernel, s).map(|v| row(p, v))
        })
        .collect()
}

fn bounding_box(pts: &[Point]) -> (Point, Point) {
    let lo = pts.iter().fold(Point::repeat(f64::INFINITY), |a, p| a.inf(p));
    let hi = pts.iter().fold(Point::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    (lo, hi)
}

/// Grid local minima of |v| that fall below `rel` times the grid maximum:
/// approximate singular locations.
pub fn near_zeros(rows: &[VRow], resolution: usize, rel: f64) -> Vec<VRow> {
    let n = resolution;
    let vmax = rows.iter().map(|r| r.vnorm).fold(0.0, f64::max);
    let mut out = Vec::new();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let c = rows[j * n + i];
            if c.vnorm > rel * vmax {
                continue;
            }
            let is_min = (-1i64..=1).all(|dj| {
                (-1i64..=1).all(|di| {
                    let k = ((j as i64 + dj) as usize) * n + (i as i64 + di) as usize;
                    rows[k].vnorm >= c.vnorm
                })
            });
            if is_min {
                out.push(c);
            }
        }
    }
    out
}
