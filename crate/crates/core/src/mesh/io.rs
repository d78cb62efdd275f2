//! Plain-text triangle mesh files.
//!
//! ```text
//! nodes <N> triangles <M>
//! x y            (N lines)
//! i j k          (M lines, 0-based node indices)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{load_triangle_mesh, BoundaryPredicate, Mesh, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMeshData {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMeshData {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Config("empty mesh file".into()))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (n_nodes, n_tris) = match words.as_slice() {
            ["nodes", n, "triangles", m] => (
                n.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad node count `{n}`")))?,
                m.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad triangle count `{m}`")))?,
            ),
            _ => return Err(Error::Config(format!("bad mesh header `{header}`"))),
        };
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Config("mesh file ends before all nodes were read".into()))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("line {}: bad node `{line}`", no + 1)))?;
            match v.as_slice() {
                [x, y] => nodes.push([*x, *y]),
                _ => return Err(Error::Config(format!("line {}: expected `x y`", no + 1))),
            }
        }
        let mut triangles = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Config("mesh file ends before all triangles were read".into()))?;
            let v: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("line {}: bad triangle `{line}`", no + 1)))?;
            match v.as_slice() {
                [i, j, k] => triangles.push([*i, *j, *k]),
                _ => return Err(Error::Config(format!("line {}: expected `i j k`", no + 1))),
            }
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::Config(format!("line {}: trailing data after the last triangle", no + 1)));
        }
        Ok(Self { nodes, triangles })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {} triangles {}\n", self.nodes.len(), self.triangles.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Split every triangle into four through its edge midpoints. The
    /// children are similar to the parent, so acute meshes stay acute.
    pub fn refine(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (mid(a, b, &mut nodes), mid(b, c, &mut nodes), mid(c, a, &mut nodes));
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        Self { nodes, triangles }
    }

    pub fn to_mesh(&self, dirichlet: &BoundaryPredicate) -> Result<Mesh> {
        load_triangle_mesh(&self.nodes, &self.triangles, dirichlet)
    }
}

pub fn read_triangle_file(path: &Path) -> Result<TriangleMeshData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TriangleMeshData::parse(&text)
}

pub fn write_triangle_file(path: &Path, data: &TriangleMeshData) -> Result<()> {
    std::fs::write(path, data.to_text()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let text = "# two triangles\nnodes 4 triangles 2\n0 0\n1 0\n0.5 0.8\n0.5 -0.8\n\n0 1 2\n0 3 1\n";
        let data = TriangleMeshData::parse(text).unwrap();
        assert_eq!(data.nodes.len(), 4);
        assert_eq!(data.triangles, vec![[0, 1, 2], [0, 3, 1]]);
        assert_eq!(TriangleMeshData::parse(&data.to_text()).unwrap(), data);
    }

    #[test]
    fn refinement_quadruples_and_preserves_area() {
        let text = "nodes 4 triangles 2\n0 0\n1 0\n0.5 0.8\n0.5 -0.8\n0 1 2\n0 3 1\n";
        let data = TriangleMeshData::parse(text).unwrap();
        let fine = data.refine();
        assert_eq!(fine.triangles.len(), 8);
        assert_eq!(fine.nodes.len(), 9);
        let all = BoundaryPredicate::all();
        let (a, b) = (data.to_mesh(&all).unwrap(), fine.to_mesh(&all).unwrap());
        assert!((a.total_measure() - b.total_measure()).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_and_long_files() {
        assert!(TriangleMeshData::parse("nodes 3 triangles 1\n0 0\n1 0\n").is_err());
        assert!(TriangleMeshData::parse("nodes 1 triangles 0\n0 0\n1 1\n").is_err());
        assert!(TriangleMeshData::parse("points 1 triangles 0\n0 0\n").is_err());
        assert!(TriangleMeshData::parse("nodes 1 triangles 0\n0 zero\n").is_err());
    }
}
