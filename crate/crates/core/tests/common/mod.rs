#![allow(dead_code)]

use neumann_rbf::{DMat, NodeKind, NodeSet, Point, Stencil};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn unit(rng: &mut StdRng) -> Point {
    let t = rng.gen_range(0.0..2.0 * PI);
    Point::new(t.cos(), t.sin())
}

/// `n` points in a disc, pairwise at least 0.6 apart (unit spacing).
pub fn scattered(rng: &mut StdRng, n: usize) -> Vec<Point> {
    let r = 0.8 * (n as f64).sqrt();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if p.norm() <= r && pts.iter().all(|q| (p - q).norm() >= 0.6) {
            pts.push(p);
        }
    }
    pts
}

/// Interior nodes first, then boundary nodes with random unit normals.
pub fn random_stencil(rng: &mut StdRng, m_i: usize, m_b: usize) -> (NodeSet, Stencil) {
    let pts = scattered(rng, m_i + m_b);
    let kinds = (0..m_i + m_b).map(|k| if k < m_i { NodeKind::Interior } else { NodeKind::Boundary }).collect();
    let normals = (0..m_i + m_b).map(|k| if k < m_i { Point::zeros() } else { unit(rng) }).collect();
    let nodes = NodeSet::new_unchecked(pts, kinds, normals, 1.0).unwrap();
    (nodes, Stencil::new(0, (0..m_i).collect(), (m_i..m_i + m_b).collect()))
}

pub fn random_dmat(rng: &mut StdRng, rows: usize, cols: usize) -> DMat {
    DMat::from_fn(rows, cols, 2, |_, _| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
}

pub fn boundary_normals(nodes: &NodeSet, st: &Stencil) -> Vec<Point> {
    st.boundary.iter().map(|&b| *nodes.normal(b)).collect()
}
