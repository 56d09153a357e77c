use super::{NodeSet, Point, Stencil};
use crate::error::{Error, Result};
use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rayon::prelude::*;
use std::num::NonZero;

/// k-d tree over a point list; query results carry indices into that list.
pub struct KnnIndex {
    tree: Option<ImmutableKdTree<f64, 2>>,
    points: Vec<[f64; 2]>,
}

impl KnnIndex {
    pub fn new(points: &[Point]) -> Self {
        let points: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
        let tree = if points.is_empty() {
            None
        } else {
            Some(ImmutableKdTree::new_from_slice(&points).expect("non-empty point list"))
        };
        Self { tree, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points as (index, distance), sorted by distance then index.
    pub fn nearest(&self, p: &Point, k: usize) -> Vec<(usize, f64)> {
        let Some(tree) = &self.tree else {
            return Vec::new();
        };
        let k = k.min(self.points.len());
        let Some(kk) = NonZero::new(k) else {
            return Vec::new();
        };
        let q = [p.x, p.y];
        let res = tree.query(&q).nearest_n::<SquaredEuclidean<f64>>(kk).execute();
        let mut out: Vec<(usize, f64)> = res.iter().map(|r| (r.item as usize, r.distance.sqrt())).collect();
        sort_by_distance(&mut out);
        out
    }

    /// All points with distance <= `radius`, sorted by distance then index.
    pub fn within(&self, p: &Point, radius: f64) -> Vec<(usize, f64)> {
        let Some(tree) = &self.tree else {
            return Vec::new();
        };
        let q = [p.x, p.y];
        let res = tree.query(&q).within::<SquaredEuclidean<f64>>(radius * radius).execute();
        let mut out: Vec<(usize, f64)> = res.iter().map(|r| (r.item as usize, r.distance.sqrt())).collect();
        out.retain(|&(_, d)| d <= radius);
        sort_by_distance(&mut out);
        out
    }
}

fn sort_by_distance(v: &mut [(usize, f64)]) {
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// One stencil per interior node: its `m_i` nearest interior nodes (itself
/// first) and every boundary node within 1.1 times the farthest selected
/// interior distance.
pub fn build_stencils(nodes: &NodeSet, m_i: usize) -> Result<Vec<Stencil>> {
    build_stencils_with_reach(nodes, m_i, BOUNDARY_REACH)
}

/// Default factor applied to the interior reach when collecting boundary nodes.
pub const BOUNDARY_REACH: f64 = 1.1;

/// As [`build_stencils`], collecting boundary nodes within `reach_factor` times
/// the farthest selected interior distance.
pub fn build_stencils_with_reach(nodes: &NodeSet, m_i: usize, reach_factor: f64) -> Result<Vec<Stencil>> {
    let interior = nodes.interior_indices();
    let boundary = nodes.boundary_indices();
    if m_i == 0 || m_i > interior.len() {
        return Err(Error::TooFewNodes(format!("{} interior nodes for stencils of {m_i}", interior.len())));
    }
    let ipts: Vec<Point> = interior.iter().map(|&i| *nodes.position(i)).collect();
    let bpts: Vec<Point> = boundary.iter().map(|&i| *nodes.position(i)).collect();
    let itree = KnnIndex::new(&ipts);
    let btree = KnnIndex::new(&bpts);
    // a few spare neighbours so ties at the cut are broken by index
    let spare = 12;
    let out = interior
        .par_iter()
        .map(|&c| {
            let p = nodes.position(c);
            let mut near = itree.nearest(p, m_i + spare);
            near.truncate(m_i);
            // the centre itself leads even when another node sits at distance 0
            if let Some(pos) = near.iter().position(|&(j, _)| interior[j] == c) {
                let me = near.remove(pos);
                near.insert(0, me);
            }
            let reach = near.iter().map(|x| x.1).fold(0.0, f64::max);
            let b = btree.within(p, reach_factor * reach).into_iter().map(|(j, _)| boundary[j]).collect();
            Stencil::new(c, near.into_iter().map(|(j, _)| interior[j]).collect(), b)
        })
        .collect();
    Ok(out)
}
