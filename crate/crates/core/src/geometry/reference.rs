use super::{NodeKind, NodeSet, Point, Stencil};

/// Index of the stencil centre, the first-row node at (s/2, sqrt(3)/2 s).
pub const REF_CENTER: usize = 3;

/// Normal of the flat reference boundary at abscissa `x`: the unit vector along
/// the line through G = (0, 3s cot alpha), pointing into y < 0 for |alpha| < pi/2.
/// `alpha` is the angle of the rightmost node's normal from the downward vertical.
pub fn reference_normal(alpha: f64, spacing: f64, x: f64) -> Point {
    let th = (x * alpha.sin()).atan2(3.0 * spacing * alpha.cos());
    Point::new(th.sin(), -th.cos())
}

/// Fifteen interior nodes in hexagonal rows of 6, 5 and 4 above seven boundary
/// nodes on y = 0. Interior nodes come first (row by row, left to right), then the
/// boundary nodes from x = -3s to x = 3s.
pub fn reference_stencil(alpha: f64, spacing: f64) -> (NodeSet, Stencil) {
    let s = spacing;
    let h = 3f64.sqrt() / 2.0 * s;
    let mut pos = Vec::with_capacity(22);
    for (row, count) in [(1, 6), (2, 5), (3, 4)] {
        let x0 = -(count as f64 - 1.0) / 2.0 * s;
        for k in 0..count {
            pos.push(Point::new(x0 + k as f64 * s, row as f64 * h));
        }
    }
    let mut kinds = vec![NodeKind::Interior; 15];
    let mut normals = vec![Point::zeros(); 15];
    for k in -3..=3 {
        let x = k as f64 * s;
        pos.push(Point::new(x, 0.0));
        kinds.push(NodeKind::Boundary);
        normals.push(reference_normal(alpha, s, x));
    }
    let nodes = NodeSet::new_unchecked(pos, kinds, normals, s).expect("reference layout is valid");
    let stencil = Stencil::new(REF_CENTER, (0..15).collect(), (15..22).collect());
    (nodes, stencil)
}
