use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::scheme::State;

type PointFn = Arc<dyn Fn(Point, &mut [f64]) + Send + Sync>;

// 3-point Gauss-Legendre on [-1, 1]
const GAUSS_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
// uniform refinement depth for non-rectangular cells (4^depth sub-triangles)
const TRIANGLE_DEPTH: u32 = 5;

/// Initial proportions as a function of position.
///
/// `x_breaks` / `y_breaks` list coordinates where the datum may jump; cell
/// averages integrate each smooth piece separately so that indicator data are
/// projected exactly on intervals and axis-aligned rectangles.
#[derive(Clone)]
pub struct InitialDatum {
    n_species: usize,
    f: PointFn,
    x_breaks: Vec<f64>,
    y_breaks: Vec<f64>,
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDatum")
            .field("n_species", &self.n_species)
            .field("x_breaks", &self.x_breaks)
            .field("y_breaks", &self.y_breaks)
            .finish()
    }
}

impl InitialDatum {
    pub fn new(
        n_species: usize,
        f: impl Fn(Point, &mut [f64]) + Send + Sync + 'static,
        x_breaks: Vec<f64>,
        y_breaks: Vec<f64>,
    ) -> Self {
        Self {
            n_species,
            f: Arc::new(f),
            x_breaks,
            y_breaks,
        }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(n, move |_, out| out.copy_from_slice(&values), Vec::new(), Vec::new())
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.n_species];
        (self.f)(p, &mut out);
        out
    }

    fn pieces(breaks: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut a = lo;
        for c in cuts {
            out.push((a, c));
            a = c;
        }
        out.push((a, hi));
        out
    }

    fn average_interval(&self, lo: f64, hi: f64, out: &mut [f64]) {
        let mut buf = vec![0.0; self.n_species];
        out.fill(0.0);
        for (a, b) in Self::pieces(&self.x_breaks, lo, hi) {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in GAUSS_X.iter().zip(GAUSS_W) {
                (self.f)([mid + half * x, 0.0], &mut buf);
                for (o, v) in out.iter_mut().zip(&buf) {
                    *o += w * half * v;
                }
            }
        }
        let len = hi - lo;
        out.iter_mut().for_each(|o| *o /= len);
    }

    fn average_rectangle(&self, x: (f64, f64), y: (f64, f64), out: &mut [f64]) {
        let mut buf = vec![0.0; self.n_species];
        out.fill(0.0);
        let ys = Self::pieces(&self.y_breaks, y.0, y.1);
        for (xa, xb) in Self::pieces(&self.x_breaks, x.0, x.1) {
            let (xm, xh) = (0.5 * (xa + xb), 0.5 * (xb - xa));
            for &(ya, yb) in &ys {
                let (ym, yh) = (0.5 * (ya + yb), 0.5 * (yb - ya));
                for (gx, wx) in GAUSS_X.iter().zip(GAUSS_W) {
                    for (gy, wy) in GAUSS_X.iter().zip(GAUSS_W) {
                        (self.f)([xm + xh * gx, ym + yh * gy], &mut buf);
                        for (o, v) in out.iter_mut().zip(&buf) {
                            *o += wx * wy * xh * yh * v;
                        }
                    }
                }
            }
        }
        let area = (x.1 - x.0) * (y.1 - y.0);
        out.iter_mut().for_each(|o| *o /= area);
    }

    fn average_polygon(&self, poly: &[Point], out: &mut [f64]) {
        let mut buf = vec![0.0; self.n_species];
        out.fill(0.0);
        let mut total = 0.0;
        let n = 1usize << TRIANGLE_DEPTH;
        for t in 1..poly.len() - 1 {
            let (a, b, c) = (poly[0], poly[t], poly[t + 1]);
            let e1 = [(b[0] - a[0]) / n as f64, (b[1] - a[1]) / n as f64];
            let e2 = [(c[0] - a[0]) / n as f64, (c[1] - a[1]) / n as f64];
            let area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]).abs();
            let at = |s: f64, r: f64| [a[0] + s * e1[0] + r * e2[0], a[1] + s * e1[1] + r * e2[1]];
            // centroid rule on the n^2 congruent sub-triangles
            for i in 0..n {
                for j in 0..n - i {
                    let (s, r) = (i as f64, j as f64);
                    (self.f)(at(s + 1.0 / 3.0, r + 1.0 / 3.0), &mut buf);
                    out.iter_mut().zip(&buf).for_each(|(o, v)| *o += area * v);
                    total += area;
                    if i + j + 1 < n {
                        (self.f)(at(s + 2.0 / 3.0, r + 2.0 / 3.0), &mut buf);
                        out.iter_mut().zip(&buf).for_each(|(o, v)| *o += area * v);
                        total += area;
                    }
                }
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}

fn axis_aligned_box(poly: &[Point]) -> Option<((f64, f64), (f64, f64))> {
    if poly.len() != 4 {
        return None;
    }
    let xs = poly.iter().map(|p| p[0]);
    let ys = poly.iter().map(|p| p[1]);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let on_corner = |p: &Point| (p[0] == x0 || p[0] == x1) && (p[1] == y0 || p[1] == y1);
    poly.iter().all(on_corner).then_some(((x0, x1), (y0, y1)))
}

/// Cell averages of `datum`.
pub fn project_initial(datum: &InitialDatum, mesh: &Mesh) -> Result<State> {
    let n = datum.n_species();
    if n == 0 {
        return Err(Error::Data("initial datum has no species".into()));
    }
    let mut u = vec![0.0; n * mesh.n_cells()];
    for (cell, out) in mesh.cells().iter().zip(u.chunks_mut(n)) {
        if mesh.dimension() == 1 {
            let half = 0.5 * cell.measure;
            datum.average_interval(cell.center[0] - half, cell.center[0] + half, out);
        } else {
            let poly: Vec<Point> = cell.vertex_ids.iter().map(|&v| mesh.vertices()[v]).collect();
            match axis_aligned_box(&poly) {
                Some((x, y)) => datum.average_rectangle(x, y, out),
                None => datum.average_polygon(&poly, out),
            }
        }
        if let Some(bad) = out.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Data(format!("cell {}: negative initial value {bad}", cell.id)));
        }
        let m: f64 = out.iter().sum();
        if m >= 1.0 {
            return Err(Error::Data(format!("cell {}: initial biomass {m} is not below 1", cell.id)));
        }
    }
    State::new(0.0, u, n)
}
