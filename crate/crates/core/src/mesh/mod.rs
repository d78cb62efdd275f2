//! Admissible finite-volume meshes with two-point flux geometry.
//!
//! A [`Mesh`] stores cells with their centers, and an oriented edge list in
//! which every edge remembers its owning cell `K_σ`, the transmissibility
//! `τ_σ = m(σ)/d_σ`, the outward unit normal from the owner and the measure of
//! the dual cell `T_{K,σ}`. Meshes are immutable once built.

mod generators;
mod io;
mod predicate;
mod triangle;

pub use generators::{build_interval_mesh, build_rectangle_mesh, DirichletSide};
pub use io::{read_triangle_file, write_triangle_file, TriangleMeshData};
pub use predicate::BoundaryPredicate;
pub use triangle::load_triangle_mesh;

use crate::error::{Error, Result};
use crate::linalg::reverse_cuthill_mckee;

pub type Point = [f64; 2];

/// Relative tolerance for `|⟨x_L − x_K, t_σ⟩| ≤ tol · d(x_K, x_L)`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub center: Point,
    pub measure: f64,
    pub edge_ids: Vec<usize>,
    /// Polygon vertices in counter-clockwise order (empty in 1D).
    pub vertex_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior { cell: usize, neighbor: usize },
    Dirichlet { cell: usize },
    Neumann { cell: usize },
}

impl EdgeKind {
    /// The canonical cell `K_σ` the edge is oriented from.
    pub fn owner(&self) -> usize {
        match *self {
            EdgeKind::Interior { cell, .. } | EdgeKind::Dirichlet { cell } | EdgeKind::Neumann { cell } => cell,
        }
    }

    pub fn neighbor(&self) -> Option<usize> {
        match *self {
            EdgeKind::Interior { neighbor, .. } => Some(neighbor),
            _ => None,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, EdgeKind::Dirichlet { .. })
    }

    pub fn is_boundary(&self) -> bool {
        !matches!(self, EdgeKind::Interior { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub kind: EdgeKind,
    /// `m(σ)`; 1 in one dimension.
    pub measure: f64,
    /// `d_σ`: center-to-center distance for interior edges, center-to-edge
    /// distance for boundary edges.
    pub distance: f64,
    pub transmissibility: f64,
    /// Unit normal pointing out of the owner cell.
    pub normal: Point,
    /// `m(T_{K,σ})`: diamond for interior edges, triangle (segment in 1D) for
    /// boundary edges.
    pub dual_measure: f64,
    pub midpoint: Point,
    /// `d(x_K, σ)` for the owner.
    pub owner_distance: f64,
    /// `d(x_L, σ)` for the neighbor of an interior edge.
    pub neighbor_distance: Option<f64>,
    pub vertex_ids: Option<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    regularity_xi: f64,
    total_measure: f64,
    // position of each cell in a bandwidth-reducing numbering
    cell_rank: Vec<usize>,
}

impl Mesh {
    /// Assemble a mesh from prebuilt cells and edges and validate it.
    pub(crate) fn assemble(
        dimension: usize,
        vertices: Vec<Point>,
        mut cells: Vec<Cell>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidArgument(format!("unsupported dimension {dimension}")));
        }
        for cell in &mut cells {
            cell.edge_ids.clear();
        }
        for edge in &edges {
            cells[edge.kind.owner()].edge_ids.push(edge.id);
            if let Some(l) = edge.kind.neighbor() {
                cells[l].edge_ids.push(edge.id);
            }
        }
        let total_measure = cells.iter().map(|c| c.measure).sum();
        let mut adjacency = vec![Vec::new(); cells.len()];
        for edge in &edges {
            if let EdgeKind::Interior { cell, neighbor } = edge.kind {
                adjacency[cell].push(neighbor);
                adjacency[neighbor].push(cell);
            }
        }
        let order = reverse_cuthill_mckee(&adjacency);
        let mut cell_rank = vec![0; cells.len()];
        for (new, &old) in order.iter().enumerate() {
            cell_rank[old] = new;
        }
        let mut mesh = Self {
            dimension,
            vertices,
            cells,
            edges,
            regularity_xi: 0.0,
            total_measure,
            cell_rank,
        };
        mesh.check_consistency()?;
        mesh.regularity_xi = validate_regularity(&mesh)?;
        Ok(mesh)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Measured regularity constant `ξ` (min of `d(x_K,σ)/d_σ`).
    pub fn regularity_xi(&self) -> f64 {
        self.regularity_xi
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Bandwidth-reducing position of every cell (`rank[cell]`).
    pub fn cell_rank(&self) -> &[usize] {
        &self.cell_rank
    }

    pub fn dirichlet_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind.is_dirichlet())
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.kind.is_boundary())
    }

    fn check_consistency(&self) -> Result<()> {
        for (k, cell) in self.cells.iter().enumerate() {
            if cell.id != k {
                return Err(Error::Topology(format!("cell {k} carries id {}", cell.id)));
            }
            if !(cell.measure > 0.0) {
                return Err(Error::DegenerateMesh(format!("cell {k} has measure {}", cell.measure)));
            }
        }
        for (s, edge) in self.edges.iter().enumerate() {
            if edge.id != s {
                return Err(Error::Topology(format!("edge {s} carries id {}", edge.id)));
            }
            let owner = edge.kind.owner();
            if owner >= self.cells.len() || edge.kind.neighbor().is_some_and(|l| l >= self.cells.len() || l == owner) {
                return Err(Error::Topology(format!("edge {s} references an invalid cell")));
            }
            if !(edge.distance > 0.0) || !(edge.measure > 0.0) {
                return Err(Error::DegenerateMesh(format!(
                    "edge {s} has measure {} and distance {}",
                    edge.measure, edge.distance
                )));
            }
            let tau = edge.measure / edge.distance;
            if (edge.transmissibility - tau).abs() > 1e-14 * tau {
                return Err(Error::Topology(format!("edge {s}: transmissibility differs from m/d")));
            }
            if let EdgeKind::Interior { cell, neighbor } = edge.kind {
                let (xk, xl) = (self.cells[cell].center, self.cells[neighbor].center);
                let dkl = dist(xk, xl);
                let tangent = [-edge.normal[1], edge.normal[0]];
                let along = dot(sub(xl, xk), tangent).abs();
                if along > ORTHOGONALITY_TOL * dkl {
                    return Err(Error::Admissibility {
                        message: format!("edge {s}: center segment not orthogonal to the edge"),
                        triangles: vec![cell, neighbor],
                    });
                }
                if dot(sub(xl, xk), edge.normal) <= 0.0 {
                    return Err(Error::Admissibility {
                        message: format!("edge {s}: cell centers on the same side"),
                        triangles: vec![cell, neighbor],
                    });
                }
            }
        }
        if self.dirichlet_edges().next().is_none() {
            return Err(Error::Config("the Dirichlet boundary must contain at least one edge".into()));
        }
        Ok(())
    }
}

/// Measure the regularity constant `ξ = min d(x_K,σ)/d_σ` over all
/// cell/edge incidences. In two dimensions also checks
/// `Σ_K Σ_σ m(σ) d(x_K,σ) ≤ 2 m(Ω)`.
pub fn validate_regularity(mesh: &Mesh) -> Result<f64> {
    let mut xi = f64::INFINITY;
    let mut weighted = 0.0;
    for edge in &mesh.edges {
        xi = xi.min(edge.owner_distance / edge.distance);
        weighted += edge.measure * edge.owner_distance;
        if let Some(dl) = edge.neighbor_distance {
            xi = xi.min(dl / edge.distance);
            weighted += edge.measure * dl;
        }
    }
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::DegenerateMesh(format!("regularity estimate ξ = {xi} is not positive")));
    }
    if mesh.dimension == 2 && weighted > 2.0 * mesh.total_measure * (1.0 + 1e-12) {
        return Err(Error::DegenerateMesh(format!(
            "Σ m(σ) d(x_K,σ) = {weighted} exceeds 2 m(Ω) = {}",
            2.0 * mesh.total_measure
        )));
    }
    Ok(xi)
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

/// Signed area of a simple polygon (positive when counter-clockwise).
pub(crate) fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|k| {
            let (p, q) = (points[k], points[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_unit_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(polygon_area(&sq), 1.0);
        let rev: Vec<Point> = sq.iter().rev().copied().collect();
        assert_eq!(polygon_area(&rev), -1.0);
    }

    #[test]
    fn estmesh_and_partition_on_rectangles() {
        let mesh = build_rectangle_mesh(5, 7, &BoundaryPredicate::parse("y == 1").unwrap()).unwrap();
        let weighted: f64 = mesh
            .edges()
            .iter()
            .map(|e| e.measure * (e.owner_distance + e.neighbor_distance.unwrap_or(0.0)))
            .sum();
        assert!(weighted <= 2.0 * mesh.total_measure() * (1.0 + 1e-12));
        let dual: f64 = mesh.edges().iter().map(|e| e.dual_measure).sum();
        assert!((dual - 1.0).abs() < 1e-12);
        assert!(dual <= 2.0 * mesh.total_measure());
    }

    #[test]
    fn edges_listed_by_their_cells() {
        let mesh = build_interval_mesh(4, DirichletSide::Left).unwrap();
        for cell in mesh.cells() {
            for &e in &cell.edge_ids {
                let kind = mesh.edges()[e].kind;
                assert!(kind.owner() == cell.id || kind.neighbor() == Some(cell.id));
            }
        }
        assert_eq!(mesh.cells()[0].edge_ids.len(), 2);
    }
}
