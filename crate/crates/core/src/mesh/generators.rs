use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{dist, polygon_area, BoundaryPredicate, Cell, Edge, EdgeKind, Mesh, Point};

/// Which endpoints of the unit interval carry the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletSide {
    Left,
    Right,
    Both,
}

impl FromStr for DirichletSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown Dirichlet side `{other}`"))),
        }
    }
}

impl DirichletSide {
    /// Interpret a midpoint predicate on the two endpoints of `(0, 1)`.
    pub fn from_predicate(pred: &BoundaryPredicate) -> Result<Self> {
        match (pred.matches([0.0, 0.0]), pred.matches([1.0, 0.0])) {
            (true, true) => Ok(Self::Both),
            (true, false) => Ok(Self::Left),
            (false, true) => Ok(Self::Right),
            (false, false) => Err(Error::Config(format!(
                "boundary predicate `{pred}` selects neither end of the interval"
            ))),
        }
    }

    fn left(self) -> bool {
        matches!(self, Self::Left | Self::Both)
    }

    fn right(self) -> bool {
        matches!(self, Self::Right | Self::Both)
    }
}

/// Uniform mesh of `(0, 1)` with `n_cells` cells. Edge measures are 1, so
/// `τ_σ = 1/d_σ`.
pub fn build_interval_mesh(n_cells: usize, dirichlet_side: DirichletSide) -> Result<Mesh> {
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!("interval mesh needs at least 2 cells, got {n_cells}")));
    }
    let h = 1.0 / n_cells as f64;
    let cells: Vec<Cell> = (0..n_cells)
        .map(|k| Cell {
            id: k,
            center: [(k as f64 + 0.5) * h, 0.0],
            measure: h,
            edge_ids: Vec::new(),
            vertex_ids: Vec::new(),
        })
        .collect();
    let boundary = |id: usize, cell: usize, x: f64, outward: f64, dirichlet: bool| {
        let half = 0.5 * h;
        Edge {
            id,
            kind: if dirichlet {
                EdgeKind::Dirichlet { cell }
            } else {
                EdgeKind::Neumann { cell }
            },
            measure: 1.0,
            distance: half,
            transmissibility: 1.0 / half,
            normal: [outward, 0.0],
            dual_measure: half,
            midpoint: [x, 0.0],
            owner_distance: half,
            neighbor_distance: None,
            vertex_ids: None,
        }
    };
    let mut edges = vec![boundary(0, 0, 0.0, -1.0, dirichlet_side.left())];
    for k in 1..n_cells {
        let face = k as f64 * h;
        let d = h;
        edges.push(Edge {
            id: k,
            kind: EdgeKind::Interior {
                cell: k - 1,
                neighbor: k,
            },
            measure: 1.0,
            distance: d,
            transmissibility: 1.0 / d,
            normal: [1.0, 0.0],
            dual_measure: d,
            midpoint: [face, 0.0],
            owner_distance: 0.5 * h,
            neighbor_distance: Some(0.5 * h),
            vertex_ids: None,
        });
    }
    edges.push(boundary(n_cells, n_cells - 1, 1.0, 1.0, dirichlet_side.right()));
    Mesh::assemble(1, Vec::new(), cells, edges)
}

/// Uniform `nx × ny` rectangle mesh of the unit square with cell centers at
/// the rectangle centers (an admissible Voronoi lattice).
pub fn build_rectangle_mesh(nx: usize, ny: usize, dirichlet: &BoundaryPredicate) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!("rectangle mesh needs nx, ny >= 2, got {nx} x {ny}")));
    }
    let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let cid = |i: usize, j: usize| j * nx + i;
    let vertices: Vec<Point> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| [i as f64 * hx, j as f64 * hy]))
        .collect();
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(Cell {
                id: cid(i, j),
                center: [(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy],
                measure: hx * hy,
                edge_ids: Vec::new(),
                vertex_ids: vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
            });
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    // `a`, `b` are the edge endpoints; `inner` / `outer` the adjacent cells
    // on the side opposite / along `normal`.
    let mut push = |a: usize, b: usize, inner: Option<usize>, outer: Option<usize>, normal: Point| {
        let (pa, pb) = (vertices[a], vertices[b]);
        let midpoint = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let measure = dist(pa, pb);
        let id = edges.len();
        // center spacing across the edge, exact on a uniform grid
        let spacing = if normal[0] != 0.0 { hx } else { hy };
        let edge = match (inner, outer) {
            (Some(k), Some(l)) => {
                let (xk, xl) = (cells[k].center, cells[l].center);
                let d = spacing;
                Edge {
                    id,
                    kind: EdgeKind::Interior { cell: k, neighbor: l },
                    measure,
                    distance: d,
                    transmissibility: measure / d,
                    normal,
                    dual_measure: polygon_area(&[xk, pa, xl, pb]).abs(),
                    midpoint,
                    owner_distance: 0.5 * d,
                    neighbor_distance: Some(0.5 * d),
                    vertex_ids: Some([a, b]),
                }
            }
            (Some(k), None) | (None, Some(k)) => {
                let xk = cells[k].center;
                let outward = if inner.is_some() { normal } else { [-normal[0], -normal[1]] };
                let d = 0.5 * spacing;
                Edge {
                    id,
                    kind: if dirichlet.matches(midpoint) {
                        EdgeKind::Dirichlet { cell: k }
                    } else {
                        EdgeKind::Neumann { cell: k }
                    },
                    measure,
                    distance: d,
                    transmissibility: measure / d,
                    normal: outward,
                    dual_measure: polygon_area(&[xk, pa, pb]).abs(),
                    midpoint,
                    owner_distance: d,
                    neighbor_distance: None,
                    vertex_ids: Some([a, b]),
                }
            }
            (None, None) => unreachable!(),
        };
        edges.push(edge);
    };
    for j in 0..ny {
        for i in 0..=nx {
            let left = (i > 0).then(|| cid(i - 1, j));
            let right = (i < nx).then(|| cid(i, j));
            push(vid(i, j), vid(i, j + 1), left, right, [1.0, 0.0]);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let below = (j > 0).then(|| cid(i, j - 1));
            let above = (j < ny).then(|| cid(i, j));
            push(vid(i, j), vid(i + 1, j), below, above, [0.0, 1.0]);
        }
    }
    Mesh::assemble(2, vertices, cells, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_regularity;

    #[test]
    fn interval_transmissibilities() {
        let mesh = build_interval_mesh(10, DirichletSide::Left).unwrap();
        let interior: Vec<&Edge> = mesh.interior_edges().collect();
        assert_eq!(interior.len(), 9);
        for e in interior {
            assert!((e.transmissibility - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cell_interval_edges() {
        let mesh = build_interval_mesh(2, DirichletSide::Left).unwrap();
        assert_eq!(mesh.interior_edges().count(), 1);
        let dir: Vec<&Edge> = mesh.dirichlet_edges().collect();
        assert_eq!(dir.len(), 1);
        assert_eq!(dir[0].midpoint[0], 0.0);
        let neu: Vec<&Edge> = mesh
            .edges()
            .iter()
            .filter(|e| matches!(e.kind, EdgeKind::Neumann { .. }))
            .collect();
        assert_eq!(neu.len(), 1);
        assert_eq!(neu[0].midpoint[0], 1.0);
    }

    #[test]
    fn interval_too_small() {
        assert!(matches!(
            build_interval_mesh(1, DirichletSide::Left),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn paper_reference_interval_size() {
        let mesh = build_interval_mesh(5120, DirichletSide::Left).unwrap();
        assert_eq!(mesh.n_cells(), 5120);
    }

    #[test]
    fn interval_regularity_is_one_half() {
        let mesh = build_interval_mesh(7, DirichletSide::Both).unwrap();
        assert!((validate_regularity(&mesh).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rectangle_two_by_two() {
        let top = BoundaryPredicate::parse("y == 1").unwrap();
        let mesh = build_rectangle_mesh(2, 2, &top).unwrap();
        assert_eq!(mesh.n_cells(), 4);
        let interior: Vec<&Edge> = mesh.interior_edges().collect();
        assert_eq!(interior.len(), 4);
        for e in interior {
            assert!((e.transmissibility - 1.0).abs() < 1e-14);
        }
        let dir: Vec<&Edge> = mesh.dirichlet_edges().collect();
        assert_eq!(dir.len(), 2);
        for e in dir {
            assert!((e.transmissibility - 2.0).abs() < 1e-14);
            assert_eq!(e.normal, [0.0, 1.0]);
        }
    }

    #[test]
    fn rectangle_partition_and_xi() {
        let top = BoundaryPredicate::parse("y == 1").unwrap();
        for (nx, ny) in [(2, 2), (3, 3), (4, 9), (32, 32)] {
            let mesh = build_rectangle_mesh(nx, ny, &top).unwrap();
            assert!((mesh.total_measure() - 1.0).abs() < 1e-12);
            assert_eq!(mesh.regularity_xi(), 0.5);
        }
    }

    #[test]
    fn rectangle_needs_dirichlet_edge() {
        let none = BoundaryPredicate::parse("none").unwrap();
        assert!(matches!(build_rectangle_mesh(3, 3, &none), Err(Error::Config(_))));
    }

    #[test]
    fn rectangle_dual_cells_satisfy_diamond_identity() {
        let top = BoundaryPredicate::parse("y == 1").unwrap();
        let mesh = build_rectangle_mesh(4, 3, &top).unwrap();
        for e in mesh.interior_edges() {
            let lhs = e.measure * e.distance;
            assert!((lhs - 2.0 * e.dual_measure).abs() <= 1e-12 * lhs);
        }
    }
}
