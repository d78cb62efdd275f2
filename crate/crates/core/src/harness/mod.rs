//! Experiment descriptions and drivers for convergence, steady-state and
//! evolution runs.

mod output;
mod runs;

pub use output::{
    write_convergence_csv, write_decay_csv, write_entropy_csv, write_metadata, write_snapshot_csv, write_vtk,
    OutputPaths,
};
pub use runs::{
    block_average, fitted_order, log_log_slope, run_convergence_study, run_evolution, run_steady_state_study,
    ConvergenceResult, EvolutionResult, RunSummary, Snapshot, SteadyStateResult, StepRecord,
};

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{
    build_interval_mesh, build_rectangle_mesh, read_triangle_file, BoundaryPredicate, DirichletSide, Mesh,
    TriangleMeshData,
};
use crate::model::{model_case1, model_case2, model_generic, ModelFunctions, ModelParams, NamedP};
use crate::scheme::{InitialDatum, NewtonConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSelector {
    Case1,
    Case2,
    Generic {
        p: NamedP,
        a: f64,
        b: f64,
        kappa: Option<f64>,
    },
}

impl ModelSelector {
    pub fn build(&self, alphas: &[f64]) -> Result<ModelFunctions> {
        let model = match self {
            ModelSelector::Case1 => model_case1(),
            ModelSelector::Case2 => model_case2(),
            ModelSelector::Generic { p, a, b, kappa } => {
                let (pf, dpf) = p.functions();
                model_generic(
                    pf,
                    dpf,
                    ModelParams {
                        a: *a,
                        b: *b,
                        kappa: *kappa,
                        alphas: alphas.to_vec(),
                    },
                )?
            }
        };
        model.with_alphas(alphas.to_vec())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSelector::Case1 => "case1",
            ModelSelector::Case2 => "case2",
            ModelSelector::Generic { .. } => "generic",
        }
    }
}

/// Where the meshes of an experiment come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshFamily {
    /// Uniform meshes of `(0, 1)`; `reference` is only used by convergence
    /// studies.
    Interval {
        resolutions: Vec<usize>,
        reference: Option<usize>,
        dirichlet: DirichletSide,
    },
    Rectangle {
        nx: usize,
        ny: usize,
        dirichlet: BoundaryPredicate,
    },
    TriangleFile {
        path: PathBuf,
        /// Uniform midpoint refinements applied after loading.
        refinements: usize,
        dirichlet: BoundaryPredicate,
    },
    /// The bundled acute triangulation of the unit square, refined
    /// `refinements` times (4 refinements give 3584 triangles).
    AcuteSquare {
        refinements: usize,
        dirichlet: BoundaryPredicate,
    },
}

const ACUTE_SQUARE: &str = include_str!("../../fixtures/acute_square.tri");

/// The bundled 14-triangle acute triangulation of the unit square.
pub fn acute_square_data() -> TriangleMeshData {
    TriangleMeshData::parse(ACUTE_SQUARE).expect("bundled mesh parses")
}

impl MeshFamily {
    /// The single mesh used by evolution and steady-state runs (the finest
    /// interval resolution).
    pub fn primary_mesh(&self) -> Result<Mesh> {
        match self {
            MeshFamily::Interval {
                resolutions, dirichlet, ..
            } => {
                let n = *resolutions
                    .iter()
                    .max()
                    .ok_or_else(|| Error::Config("no mesh resolution given".into()))?;
                build_interval_mesh(n, *dirichlet)
            }
            MeshFamily::Rectangle { nx, ny, dirichlet } => build_rectangle_mesh(*nx, *ny, dirichlet),
            MeshFamily::TriangleFile {
                path,
                refinements,
                dirichlet,
            } => {
                let mut data = read_triangle_file(path)?;
                for _ in 0..*refinements {
                    data = data.refine();
                }
                data.to_mesh(dirichlet)
            }
            MeshFamily::AcuteSquare { refinements, dirichlet } => {
                let mut data = acute_square_data();
                for _ in 0..*refinements {
                    data = data.refine();
                }
                data.to_mesh(dirichlet)
            }
        }
    }
}

/// An axis-aligned box indicator added to one species: `amplitude` on
/// `[x0, x1] × [y0, y1]` (the `y` range is ignored in 1D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorBox {
    pub species: usize,
    pub amplitude: f64,
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl IndicatorBox {
    fn contains(&self, p: [f64; 2], dim: usize) -> bool {
        let inside = |r: [f64; 2], v: f64| r[0] <= v && v <= r[1];
        inside(self.x, p[0]) && (dim == 1 || inside(self.y, p[1]))
    }
}

/// Named initial datum.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// `u_i = u_D,i (1 + 1_{I_i}(x))`, `I_1 = [0.2, 0.5]`, `I_2 = [0.5, 0.8]`.
    Paper1d,
    /// As `Paper1d`, restricted to `y ∈ [0, 0.4]`.
    Paper2d,
    /// Constant values; defaults to `u_D`.
    Constant(Option<Vec<f64>>),
    /// `base` plus a sum of indicator boxes.
    CustomIndicator { base: Vec<f64>, boxes: Vec<IndicatorBox> },
}

impl InitialSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InitialSpec::Paper1d => "paper-1d",
            InitialSpec::Paper2d => "paper-2d",
            InitialSpec::Constant(_) => "constant",
            InitialSpec::CustomIndicator { .. } => "custom-indicator",
        }
    }

    pub fn build(&self, u_d: &[f64]) -> Result<InitialDatum> {
        match self {
            InitialSpec::Paper1d | InitialSpec::Paper2d => {
                if u_d.len() != 2 {
                    return Err(Error::Config(format!(
                        "{} needs exactly two species, got {}",
                        self.name(),
                        u_d.len()
                    )));
                }
                let dim = if *self == InitialSpec::Paper1d { 1 } else { 2 };
                let boxes = [[0.2, 0.5], [0.5, 0.8]]
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| IndicatorBox {
                        species: i,
                        amplitude: u_d[i],
                        x,
                        y: [0.0, 0.4],
                    })
                    .collect();
                Ok(indicator_datum(u_d.to_vec(), boxes, dim))
            }
            InitialSpec::Constant(values) => {
                let v = values.clone().unwrap_or_else(|| u_d.to_vec());
                if v.len() != u_d.len() {
                    return Err(Error::Config("constant datum has the wrong number of species".into()));
                }
                Ok(InitialDatum::constant(v))
            }
            InitialSpec::CustomIndicator { base, boxes } => {
                if base.len() != u_d.len() || boxes.iter().any(|b| b.species >= base.len()) {
                    return Err(Error::Config("indicator datum has the wrong number of species".into()));
                }
                Ok(indicator_datum(base.clone(), boxes.clone(), 2))
            }
        }
    }
}

impl FromStr for InitialSpec {
    type Err = Error;

    /// Parses the names without parameters: `paper-1d`, `paper-2d`,
    /// `constant`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper-1d" => Ok(InitialSpec::Paper1d),
            "paper-2d" => Ok(InitialSpec::Paper2d),
            "constant" => Ok(InitialSpec::Constant(None)),
            "custom-indicator" => Err(Error::Config("custom-indicator needs base values and boxes".into())),
            other => Err(Error::Config(format!(
                "unknown initial datum `{other}` (expected paper-1d, paper-2d, constant or custom-indicator)"
            ))),
        }
    }
}

// In 1D the y range of every box is ignored.
fn indicator_datum(base: Vec<f64>, boxes: Vec<IndicatorBox>, dim: usize) -> InitialDatum {
    let mut xb: Vec<f64> = boxes.iter().flat_map(|b| b.x).collect();
    let mut yb: Vec<f64> = if dim == 2 { boxes.iter().flat_map(|b| b.y).collect() } else { Vec::new() };
    xb.sort_by(f64::total_cmp);
    xb.dedup();
    yb.sort_by(f64::total_cmp);
    yb.dedup();
    let n = base.len();
    InitialDatum::new(
        n,
        move |p, out| {
            out.copy_from_slice(&base);
            for b in &boxes {
                if b.contains(p, dim) {
                    out[b.species] += b.amplitude;
                }
            }
        },
        xb,
        yb,
    )
}

/// Look up an initial datum by name.
pub fn build_named_initial_datum(name: &str, u_d: &[f64]) -> Result<InitialDatum> {
    name.parse::<InitialSpec>()?.build(u_d)
}

/// Time-step policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    Adaptive,
    /// Fixed `Δt = h²` for each mesh width `h`.
    MeshSquared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: ModelSelector,
    pub mesh: MeshFamily,
    pub alphas: Vec<f64>,
    pub u_d: Vec<f64>,
    pub initial: InitialSpec,
    pub t_end: f64,
    pub dt_policy: DtPolicy,
    /// Tolerances and step bounds; the step choice is overridden by
    /// `dt_policy`.
    pub newton: NewtonConfig,
    pub snapshot_times: Vec<f64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.alphas.len() != self.u_d.len() {
            return Err(Error::Config(format!(
                "{} diffusion coefficients for {} species",
                self.alphas.len(),
                self.u_d.len()
            )));
        }
        if let MeshFamily::Interval { resolutions, .. } = &self.mesh {
            if resolutions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("resolutions must be strictly increasing".into()));
            }
        }
        if let Some(&t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::Config(format!(
                "snapshot time {t} lies outside [0, {}]",
                self.t_end
            )));
        }
        if let DtPolicy::Fixed(dt) = self.dt_policy {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("fixed time step must be positive, got {dt}")));
            }
        }
        self.newton.validate()
    }

    /// Newton settings for a mesh of width `h`.
    pub fn newton_for(&self, h: f64) -> NewtonConfig {
        let base = self.newton.clone();
        match self.dt_policy {
            DtPolicy::Adaptive => NewtonConfig { adaptive: true, ..base },
            DtPolicy::Fixed(dt) => NewtonConfig {
                dt_init: dt,
                dt_min: dt,
                dt_max: dt,
                adaptive: false,
                ..base
            },
            DtPolicy::MeshSquared => NewtonConfig {
                dt_init: h * h,
                dt_min: h * h,
                dt_max: h * h,
                adaptive: false,
                ..base
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_1d_values() {
        let d = build_named_initial_datum("paper-1d", &[0.1, 0.1]).unwrap();
        assert_eq!(d.eval([0.3, 0.0]), vec![0.2, 0.1]);
        assert_eq!(d.eval([0.7, 0.0]), vec![0.1, 0.2]);
        assert_eq!(d.eval([0.9, 0.0]), vec![0.1, 0.1]);
    }

    #[test]
    fn paper_2d_values() {
        let d = build_named_initial_datum("paper-2d", &[0.1, 0.1]).unwrap();
        assert_eq!(d.eval([0.3, 0.2])[0], 0.2);
        assert_eq!(d.eval([0.3, 0.6])[0], 0.1);
        assert_eq!(d.eval([0.6, 0.3]), vec![0.1, 0.2]);
    }

    #[test]
    fn constant_and_unknown() {
        let d = build_named_initial_datum("constant", &[0.1, 0.3]).unwrap();
        assert_eq!(d.eval([0.5, 0.5]), vec![0.1, 0.3]);
        assert!(matches!(build_named_initial_datum("gaussian", &[0.1]), Err(Error::Config(_))));
        assert!(build_named_initial_datum("paper-1d", &[0.1]).is_err());
    }

    #[test]
    fn custom_indicator() {
        let spec = InitialSpec::CustomIndicator {
            base: vec![0.05],
            boxes: vec![IndicatorBox {
                species: 0,
                amplitude: 0.3,
                x: [0.0, 0.5],
                y: [0.5, 1.0],
            }],
        };
        let d = spec.build(&[0.1]).unwrap();
        assert_eq!(d.eval([0.25, 0.75]), vec![0.35]);
        assert_eq!(d.eval([0.25, 0.25]), vec![0.05]);
    }

    #[test]
    fn generic_selector_builds() {
        let sel = ModelSelector::Generic {
            p: NamedP::Linear,
            a: 1.0,
            b: 1.0,
            kappa: None,
        };
        let m = sel.build(&[1.0, 2.0]).unwrap();
        assert_eq!(m.alphas(), &[1.0, 2.0]);
        assert!((m.g(0.5) - 1.0).abs() < 1e-9);
    }
}
