use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{dist, dot, polygon_area, sub, BoundaryPredicate, Cell, Edge, EdgeKind, Mesh, Point};

// cos θ must exceed this for every angle θ; rejects right and obtuse angles.
const ACUTE_COS_TOL: f64 = 1e-12;

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

fn is_acute(p: [Point; 3]) -> bool {
    (0..3).all(|k| {
        let (v, a, b) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let (e1, e2) = (sub(a, v), sub(b, v));
        dot(e1, e2) > ACUTE_COS_TOL * e1[0].hypot(e1[1]) * e2[0].hypot(e2[1])
    })
}

/// Build a mesh from a conforming triangulation using circumcenters as cell
/// centers.
///
/// Every triangle must be strictly acute so that its circumcenter lies inside
/// it; the returned mesh carries the measured regularity constant `ξ` and the
/// diamond dual cells.
pub fn load_triangle_mesh(nodes: &[Point], triangles: &[[usize; 3]], dirichlet: &BoundaryPredicate) -> Result<Mesh> {
    if triangles.is_empty() {
        return Err(Error::Topology("no triangles".into()));
    }
    let mut tris = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        if tri.iter().any(|&v| v >= nodes.len()) {
            return Err(Error::Topology(format!("triangle {t} references a missing node")));
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::Topology(format!("triangle {t} repeats a node")));
        }
        let pts = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let area = polygon_area(&pts);
        if area == 0.0 || !area.is_finite() {
            return Err(Error::Topology(format!("triangle {t} is degenerate")));
        }
        // store counter-clockwise
        tris.push(if area > 0.0 { *tri } else { [tri[0], tri[2], tri[1]] });
    }

    let obtuse: Vec<usize> = tris
        .iter()
        .enumerate()
        .filter(|(_, tri)| !is_acute([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]]))
        .map(|(t, _)| t)
        .collect();
    if !obtuse.is_empty() {
        return Err(Error::Admissibility {
            message: format!("{} triangle(s) have an angle of at least π/2", obtuse.len()),
            triangles: obtuse,
        });
    }

    let cells: Vec<Cell> = tris
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let p = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            Cell {
                id: t,
                center: circumcenter(p[0], p[1], p[2]),
                measure: polygon_area(&p),
                edge_ids: Vec::new(),
                vertex_ids: tri.to_vec(),
            }
        })
        .collect();

    // (min node, max node) -> [(triangle, opposite node)]
    let mut incidence: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b, opp) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            incidence.entry((a.min(b), a.max(b))).or_default().push((t, opp));
        }
    }

    let mut edges = Vec::with_capacity(incidence.len());
    for (&(a, b), sides) in &incidence {
        let (pa, pb) = (nodes[a], nodes[b]);
        let measure = dist(pa, pb);
        let tangent = [(pb[0] - pa[0]) / measure, (pb[1] - pa[1]) / measure];
        let (owner, opp) = sides[0];
        let mut normal = [tangent[1], -tangent[0]];
        if dot(normal, sub(nodes[opp], pa)) > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let xk = cells[owner].center;
        let owner_distance = dot(sub(pa, xk), normal);
        let midpoint = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let id = edges.len();
        match sides.len() {
            1 => {
                if let Some(hanging) = (0..nodes.len()).find(|&v| {
                    v != a && v != b && {
                        let rel = sub(nodes[v], pa);
                        let s = dot(rel, tangent);
                        let off = (rel[0] * tangent[1] - rel[1] * tangent[0]).abs();
                        s > 0.0 && s < measure && off <= 1e-12 * measure
                    }
                }) {
                    return Err(Error::Topology(format!(
                        "node {hanging} lies inside boundary edge ({a}, {b}); triangulation is not conforming"
                    )));
                }
                edges.push(Edge {
                    id,
                    kind: if dirichlet.matches(midpoint) {
                        EdgeKind::Dirichlet { cell: owner }
                    } else {
                        EdgeKind::Neumann { cell: owner }
                    },
                    measure,
                    distance: owner_distance,
                    transmissibility: measure / owner_distance,
                    normal,
                    dual_measure: polygon_area(&[xk, pa, pb]).abs(),
                    midpoint,
                    owner_distance,
                    neighbor_distance: None,
                    vertex_ids: Some([a, b]),
                });
            }
            2 => {
                let (neighbor, opp_l) = sides[1];
                if dot(normal, sub(nodes[opp_l], pa)) <= 0.0 {
                    return Err(Error::Topology(format!(
                        "triangles {owner} and {neighbor} overlap across edge ({a}, {b})"
                    )));
                }
                let xl = cells[neighbor].center;
                let d = dist(xk, xl);
                let dual = polygon_area(&[xk, pa, xl, pb]).abs();
                if (measure * d - 2.0 * dual).abs() > 1e-10 * measure * d {
                    return Err(Error::Admissibility {
                        message: format!("diamond of edge ({a}, {b}) violates m(σ)d = 2m(T)"),
                        triangles: vec![owner, neighbor],
                    });
                }
                edges.push(Edge {
                    id,
                    kind: EdgeKind::Interior { cell: owner, neighbor },
                    measure,
                    distance: d,
                    transmissibility: measure / d,
                    normal,
                    dual_measure: dual,
                    midpoint,
                    owner_distance,
                    neighbor_distance: Some(dot(sub(xl, pa), normal)),
                    vertex_ids: Some([a, b]),
                });
            }
            n => {
                return Err(Error::Topology(format!("edge ({a}, {b}) is shared by {n} triangles")));
            }
        }
    }
    Mesh::assemble(2, nodes.to_vec(), cells, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bottom() -> BoundaryPredicate {
        BoundaryPredicate::parse("y == 0").unwrap()
    }

    #[test]
    fn right_triangles_are_rejected() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = [[0, 1, 2], [0, 2, 3]];
        match load_triangle_mesh(&nodes, &tris, &bottom()) {
            Err(Error::Admissibility { triangles, .. }) => assert_eq!(triangles, vec![0, 1]),
            other => panic!("expected admissibility error, got {other:?}"),
        }
    }

    #[test]
    fn obtuse_triangle_is_named() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.8]];
        let tris = [[0, 1, 2], [0, 3, 1]];
        match load_triangle_mesh(&nodes, &tris, &BoundaryPredicate::all()) {
            Err(Error::Admissibility { triangles, .. }) => assert_eq!(triangles, vec![0]),
            other => panic!("expected admissibility error, got {other:?}"),
        }
    }

    #[test]
    fn equilateral_triangle_geometry() {
        let h = 3f64.sqrt() / 2.0;
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let mesh = load_triangle_mesh(&nodes, &[[0, 1, 2]], &bottom()).unwrap();
        let c = mesh.cells()[0].center;
        assert!((c[0] - 0.5).abs() < 1e-15);
        assert!((c[1] - h / 3.0).abs() < 1e-15);
        let expected = 1.0 / (2.0 * 3f64.sqrt());
        for e in mesh.edges() {
            assert!((e.owner_distance - expected).abs() < 1e-15);
        }
        assert_eq!(mesh.dirichlet_edges().count(), 1);
    }

    #[test]
    fn equilateral_rhombus_xi_is_one_half() {
        let h = 3f64.sqrt() / 2.0;
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.5, h], [1.5, h]];
        let mesh = load_triangle_mesh(&nodes, &[[0, 1, 2], [1, 3, 2]], &bottom()).unwrap();
        let interior: Vec<&Edge> = mesh.interior_edges().collect();
        assert_eq!(interior.len(), 1);
        let e = interior[0];
        // d(x_K,σ) = 1/(2√3), d_σ = 1/√3
        assert!((e.owner_distance / e.distance - 0.5).abs() < 1e-14);
        assert!((mesh.regularity_xi() - 0.5).abs() < 1e-14);
        assert!((e.measure * e.distance - 2.0 * e.dual_measure).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let h = 3f64.sqrt() / 2.0;
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let mesh = load_triangle_mesh(&nodes, &[[0, 2, 1]], &bottom()).unwrap();
        assert!(mesh.cells()[0].measure > 0.0);
    }

    #[test]
    fn hanging_node_is_a_topology_error() {
        // Big equilateral triangle next to two small ones splitting its edge.
        let h = 3f64.sqrt() / 2.0;
        let nodes = [
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 2.0 * h],
            [1.5, h],
            [2.5, h],
            [2.0, 2.0 * h],
        ];
        let tris = [[0, 1, 2], [1, 4, 3], [3, 4, 5]];
        let err = load_triangle_mesh(&nodes, &tris, &bottom());
        assert!(matches!(err, Err(Error::Topology(_))), "{err:?}");
    }

    #[test]
    fn edge_shared_by_three_triangles() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.8], [0.5, -0.8], [0.5, 0.9]];
        let tris = [[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        let err = load_triangle_mesh(&nodes, &tris, &BoundaryPredicate::all());
        assert!(matches!(err, Err(Error::Topology(_))), "{err:?}");
    }
}
