use super::{NodeKind, NodeSet, Point};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Writes `x y kind [nx ny]` lines with 17 significant digits, preceded by a
/// `# spacing <s>` comment.
pub fn write_nodes<W: Write>(nodes: &NodeSet, mut w: W) -> Result<()> {
    writeln!(w, "# spacing {:.16e}", nodes.spacing())?;
    for i in 0..nodes.len() {
        let p = nodes.position(i);
        match nodes.kind(i) {
            NodeKind::Interior => writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y)?,
            NodeKind::Boundary => {
                let n = nodes.normal(i);
                writeln!(w, "{:.16e} {:.16e} 1 {:.16e} {:.16e}", p.x, p.y, n.x, n.y)?
            }
        }
    }
    Ok(())
}

/// Reads the format produced by [`write_nodes`]. Without a spacing header the
/// spacing must be supplied.
pub fn read_nodes<R: BufRead>(r: R, spacing: Option<f64>) -> Result<NodeSet> {
    let mut pos = Vec::new();
    let mut kinds = Vec::new();
    let mut normals = Vec::new();
    let mut s = spacing;
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            let mut it = c.split_whitespace();
            if it.next() == Some("spacing") && s.is_none() {
                s = it.next().and_then(|v| v.parse().ok());
            }
            continue;
        }
        let bad = |m: &str| Error::Parse(format!("line {}: {m}", ln + 1));
        let f: Vec<&str> = t.split_whitespace().collect();
        let num = |k: usize| -> Result<f64> {
            f.get(k).ok_or_else(|| bad("missing field"))?.parse::<f64>().map_err(|_| bad("bad number"))
        };
        let x = num(0)?;
        let y = num(1)?;
        match f.get(2).copied() {
            Some("0") if f.len() == 3 => {
                kinds.push(NodeKind::Interior);
                normals.push(Point::zeros());
            }
            Some("1") if f.len() == 5 => {
                kinds.push(NodeKind::Boundary);
                normals.push(Point::new(num(3)?, num(4)?));
            }
            _ => return Err(bad("expected `x y 0` or `x y 1 nx ny`")),
        }
        pos.push(Point::new(x, y));
    }
    let s = s.ok_or_else(|| Error::Parse("node spacing not given".into()))?;
    NodeSet::new(pos, kinds, normals, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_stencil;

    #[test]
    fn round_trip_is_exact() {
        let (nodes, _) = reference_stencil(0.3719, 0.0371);
        let mut buf = Vec::new();
        write_nodes(&nodes, &mut buf).unwrap();
        let back = read_nodes(buf.as_slice(), None).unwrap();
        assert_eq!(back, nodes);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(read_nodes("0 0 1 1.0\n".as_bytes(), Some(1.0)).is_err());
        assert!(read_nodes("0 0 2\n".as_bytes(), Some(1.0)).is_err());
        assert!(read_nodes("0 0 0\n".as_bytes(), None).is_err());
        assert!(read_nodes("# c\n0 0 0\n1 0 1 0 -1\n".as_bytes(), Some(1.0)).is_ok());
    }
}
