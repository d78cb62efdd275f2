//! CSV, legacy VTK and metadata writers. Floats use Rust's shortest
//! round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{ConvergenceResult, StepRecord};
use crate::mesh::Mesh;
use crate::scheme::State;

/// Output directory of one experiment: `<root>/<name>/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn create(root: &Path, name: &str) -> Result<Self> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(Error::Config(format!("experiment name `{name}` is not a valid directory name")));
        }
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// `snapshot_<t>` with the time in shortest form.
    pub fn snapshot_stem(time: f64) -> String {
        format!("snapshot_{time}")
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_convergence_csv(path: &Path, result: &ConvergenceResult) -> Result<()> {
    let mut out = String::from("resolution,h,dt,species,l2_error\n");
    for (i, errs) in result.l2_errors.iter().enumerate() {
        for (r, e) in errs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                result.resolutions[r],
                result.h[r],
                result.dt[r],
                i + 1,
                e
            );
        }
    }
    write(path, &out)
}

pub fn write_entropy_csv(path: &Path, steps: &[StepRecord]) -> Result<()> {
    let mut out = String::from("step,time,dt,H,I_total,min_u,max_M,newton_iters\n");
    for s in steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.step, s.time, s.dt, s.entropy, s.dissipation_total, s.min_u, s.max_m, s.newton_iters
        );
    }
    write(path, &out)
}

/// `distances[k][i]` is species `i` at `times[k]`.
pub fn write_decay_csv(path: &Path, times: &[f64], distances: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from("time,species,l2_distance\n");
    for (t, d) in times.iter().zip(distances) {
        for (i, v) in d.iter().enumerate() {
            let _ = writeln!(out, "{t},{},{v}", i + 1);
        }
    }
    write(path, &out)
}

/// 1D cell values: `x_center,u_1,...,u_n,M`.
pub fn write_snapshot_csv(path: &Path, mesh: &Mesh, state: &State) -> Result<()> {
    let n = state.n_species;
    let mut out = String::from("x_center");
    for i in 1..=n {
        let _ = write!(out, ",u_{i}");
    }
    out.push_str(",M\n");
    for (cell, u) in mesh.cells().iter().zip(state.u.chunks(n)) {
        let _ = write!(out, "{}", cell.center[0]);
        for v in u {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", u.iter().sum::<f64>());
    }
    write(path, &out)
}

/// Legacy ASCII VTK unstructured grid with cell data `u_1..u_n` and `M`.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State, title: &str) -> Result<()> {
    if mesh.dimension() != 2 {
        return Err(Error::UnsupportedMesh("VTK output needs a 2D mesh".into()));
    }
    let n = state.n_species;
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.replace('\n', " "));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices().len());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    let size: usize = mesh.cells().iter().map(|c| c.vertex_ids.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {size}", mesh.n_cells());
    for c in mesh.cells() {
        let _ = write!(out, "{}", c.vertex_ids.len());
        for v in &c.vertex_ids {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_cells());
    for c in mesh.cells() {
        let ty = match c.vertex_ids.len() {
            3 => 5,
            4 => 9,
            _ => 7,
        };
        let _ = writeln!(out, "{ty}");
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.n_cells());
    let mut field = |name: &str, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{v}");
        }
    };
    for i in 0..n {
        field(&format!("u_{}", i + 1), &mut state.species(i).into_iter());
    }
    field("M", &mut state.biomass().into_iter());
    write(path, &out)
}

/// `key=value` lines in the given order.
pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k}={v}");
    }
    write(path, &out)
}
