//! Node sets, stencils, the flat reference layout, a node generator for the
//! polar test domain, and nearest-neighbour stencil selection.

mod domain;
mod generate;
mod io;
mod reference;
mod stencils;

pub use domain::{Boundary, Domain2D, FanLine, Projection};
pub use generate::{generate_nodes, spacing_for_interior_count, FirstLayer, GenerateOptions};
pub use io::{read_nodes, write_nodes};
pub use reference::{reference_normal, reference_stencil, REF_CENTER};
pub use stencils::{build_stencils, build_stencils_with_reach, KnnIndex, BOUNDARY_REACH};

use crate::error::{Error, Result};
use nalgebra::Vector2;

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    positions: Vec<Point>,
    kinds: Vec<NodeKind>,
    /// Zero vector for interior nodes.
    normals: Vec<Point>,
    spacing: f64,
}

impl NodeSet {
    /// Validates unit normals on boundary nodes and pairwise distinctness.
    pub fn new(positions: Vec<Point>, kinds: Vec<NodeKind>, normals: Vec<Point>, spacing: f64) -> Result<Self> {
        let ns = Self::new_unchecked(positions, kinds, normals, spacing)?;
        let min_sep = 1e-9 * spacing;
        if ns.len() > 1 {
            let idx = KnnIndex::new(&ns.positions);
            for (i, p) in ns.positions.iter().enumerate() {
                for (j, d) in idx.nearest(p, 2) {
                    if j != i && d <= min_sep {
                        return Err(Error::Geometry(format!("nodes {i} and {j} coincide")));
                    }
                }
            }
        }
        Ok(ns)
    }

    /// Checks shapes and normals only; duplicates are left for assembly to catch.
    pub fn new_unchecked(
        positions: Vec<Point>,
        kinds: Vec<NodeKind>,
        normals: Vec<Point>,
        spacing: f64,
    ) -> Result<Self> {
        if positions.len() != kinds.len() || positions.len() != normals.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} positions, {} kinds, {} normals",
                positions.len(),
                kinds.len(),
                normals.len()
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
        }
        let mut normals = normals;
        for (i, k) in kinds.iter().enumerate() {
            match k {
                NodeKind::Boundary => {
                    if (normals[i].norm() - 1.0).abs() > 1e-12 {
                        return Err(Error::Geometry(format!(
                            "boundary node {i} has a normal of length {}",
                            normals[i].norm()
                        )));
                    }
                }
                NodeKind::Interior => normals[i] = Point::zeros(),
            }
        }
        Ok(Self { positions, kinds, normals, spacing })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn position(&self, i: usize) -> &Point {
        &self.positions[i]
    }
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }
    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }
    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }
    pub fn normal(&self, i: usize) -> &Point {
        &self.normals[i]
    }
    pub fn is_boundary(&self, i: usize) -> bool {
        self.kinds[i] == NodeKind::Boundary
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }
    pub fn n_interior(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    /// Copy with a single boundary normal replaced (the vector is normalised).
    pub fn with_normal(&self, i: usize, n: Point) -> Result<Self> {
        if !self.is_boundary(i) {
            return Err(Error::Geometry(format!("node {i} is not a boundary node")));
        }
        let mut out = self.clone();
        out.normals[i] = n.normalize();
        Ok(out)
    }

    /// Copy with one node moved.
    pub fn with_position(&self, i: usize, p: Point) -> Self {
        let mut out = self.clone();
        out.positions[i] = p;
        out
    }

    /// Appends the nodes of `other` (spacing of `self` is kept).
    pub fn extended(&self, positions: &[Point], kinds: &[NodeKind], normals: &[Point]) -> Result<Self> {
        let mut p = self.positions.clone();
        let mut k = self.kinds.clone();
        let mut n = self.normals.clone();
        p.extend_from_slice(positions);
        k.extend_from_slice(kinds);
        n.extend_from_slice(normals);
        Self::new_unchecked(p, k, n, self.spacing)
    }

    /// Keeps only the listed nodes, in the given order.
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            positions: keep.iter().map(|&i| self.positions[i]).collect(),
            kinds: keep.iter().map(|&i| self.kinds[i]).collect(),
            normals: keep.iter().map(|&i| self.normals[i]).collect(),
            spacing: self.spacing,
        }
    }
}

/// Index lists of one local stencil.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stencil {
    pub center: usize,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl Stencil {
    pub fn new(center: usize, interior: Vec<usize>, boundary: Vec<usize>) -> Self {
        Self { center, interior, boundary }
    }

    pub fn m_i(&self) -> usize {
        self.interior.len()
    }
    pub fn m_b(&self) -> usize {
        self.boundary.len()
    }
    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior indices followed by boundary indices.
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().chain(self.boundary.iter()).copied()
    }

    pub fn validate(&self, nodes: &NodeSet) -> Result<()> {
        if self.is_empty() {
            return Err(Error::TooFewNodes("empty stencil".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for i in self.all() {
            if i >= nodes.len() {
                return Err(Error::IndexOutOfRange { index: i, size: nodes.len() });
            }
            if !seen.insert(i) {
                return Err(Error::Geometry(format!("node {i} listed twice in stencil")));
            }
        }
        if let Some(&i) = self.interior.iter().find(|&&i| nodes.is_boundary(i)) {
            return Err(Error::Geometry(format!("boundary node {i} in interior list")));
        }
        if let Some(&i) = self.boundary.iter().find(|&&i| !nodes.is_boundary(i)) {
            return Err(Error::Geometry(format!("interior node {i} in boundary list")));
        }
        Ok(())
    }

    /// Copy without the boundary node at local position `k`.
    pub fn without_boundary(&self, k: usize) -> Self {
        let mut s = self.clone();
        s.boundary.remove(k);
        s
    }
}
