use rayon::prelude::*;

use crate::diagnostics::discrete_norms;
use crate::error::{Error, Result};
use crate::harness::{DtPolicy, ExperimentSpec, MeshFamily};
use crate::mesh::{build_interval_mesh, Mesh};
use crate::model::ModelFunctions;
use crate::scheme::{advance, project_initial, BoundaryData, NewtonConfig, State, StepReport};

/// One row of `entropy.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub entropy: f64,
    pub dissipation_total: f64,
    pub min_u: f64,
    pub max_m: f64,
    pub newton_iters: usize,
}

/// Aggregate statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n_cells: usize,
    pub xi: f64,
    pub m_star: f64,
    pub steps: usize,
    pub newton_iters_total: usize,
    pub newton_iters_max: usize,
    pub dt_halvings_total: usize,
    pub dt_smallest: f64,
    pub dt_largest: f64,
    /// Minimum over steps of `H(u^{k-1}) - H(u^k) - Δt Σ_i I_i(u^k)`.
    pub entropy_margin_min: f64,
    pub max_m: f64,
    pub min_u: f64,
    pub max_conservation_defect: f64,
}

impl RunSummary {
    fn new(mesh: &Mesh, m_star: f64, initial: &State) -> Self {
        Self {
            n_cells: mesh.n_cells(),
            xi: mesh.regularity_xi(),
            m_star,
            steps: 0,
            newton_iters_total: 0,
            newton_iters_max: 0,
            dt_halvings_total: 0,
            dt_smallest: f64::INFINITY,
            dt_largest: 0.0,
            entropy_margin_min: f64::INFINITY,
            max_m: initial.max_biomass(),
            min_u: initial.min_u(),
            max_conservation_defect: 0.0,
        }
    }

    fn record(&mut self, r: &StepReport) {
        self.steps += 1;
        self.newton_iters_total += r.newton_iters;
        self.newton_iters_max = self.newton_iters_max.max(r.newton_iters);
        self.dt_halvings_total += r.dt_halvings;
        self.dt_smallest = self.dt_smallest.min(r.dt_used);
        self.dt_largest = self.dt_largest.max(r.dt_used);
        if !r.dissipation.is_empty() {
            self.entropy_margin_min = self.entropy_margin_min.min(r.entropy_margin());
        }
        self.max_m = self.max_m.max(r.max_m);
        self.min_u = self.min_u.min(r.min_u);
        for d in r.conservation_defect() {
            self.max_conservation_defect = self.max_conservation_defect.max(d.abs());
        }
    }
}

impl StepRecord {
    fn from_report(r: &StepReport) -> Self {
        Self {
            step: r.step,
            time: r.time,
            dt: r.dt_used,
            entropy: r.entropy,
            dissipation_total: r.dissipation.iter().sum(),
            min_u: r.min_u,
            max_m: r.max_m,
            newton_iters: r.newton_iters,
        }
    }
}

struct Setup {
    mesh: Mesh,
    model: ModelFunctions,
    bdata: BoundaryData,
    initial: State,
    m_star: f64,
    newton: NewtonConfig,
}

fn mesh_width(mesh: &Mesh) -> f64 {
    mesh.edges()
        .iter()
        .filter(|e| e.kind.neighbor().is_some())
        .map(|e| e.distance)
        .fold(0.0, f64::max)
}

fn setup(spec: &ExperimentSpec, mesh: Mesh) -> Result<Setup> {
    spec.validate()?;
    let model = spec.model.build(&spec.alphas)?;
    let bdata = BoundaryData::new(spec.u_d.clone())?;
    let initial = project_initial(&spec.initial.build(&spec.u_d)?, &mesh)?;
    let m_star = initial.max_biomass().max(bdata.m_d());
    let newton = spec.newton_for(mesh_width(&mesh));
    Ok(Setup {
        mesh,
        model,
        bdata,
        initial,
        m_star,
        newton,
    })
}

/// `Σ_K m(K) u_{i,K}` snapshot with the boundary outflow accumulated so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: State,
    pub masses: Vec<f64>,
    /// `Σ_k Δt_k Σ_{σ Dirichlet} F_{i,K,σ}` up to this time; mass at time
    /// `t` equals initial mass minus this.
    pub cumulative_outflow: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub mesh: Mesh,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
    pub final_state: State,
}

/// Run to `spec.t_end`, recording every step and the requested snapshots.
pub fn run_evolution(spec: &ExperimentSpec) -> Result<EvolutionResult> {
    let s = setup(spec, spec.mesh.primary_mesh()?)?;
    let measures = || s.mesh.cells().iter().map(|c| c.measure);
    let mut times = spec.snapshot_times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut summary = RunSummary::new(&s.mesh, s.m_star, &s.initial);
    let mut steps = Vec::new();
    let mut outflow = vec![0.0; s.bdata.n_species()];
    let mut snapshots = Vec::new();
    let mut state = s.initial.clone();
    let mut targets = times.clone();
    if targets.last().is_none_or(|&t| t < spec.t_end) {
        targets.push(spec.t_end);
    }
    for target in targets {
        state = advance(state, target, &s.mesh, &s.model, &s.bdata, &s.newton, &mut |r, _| {
            summary.record(r);
            for (o, f) in outflow.iter_mut().zip(&r.boundary_flux) {
                *o += r.dt_used * f;
            }
            let mut rec = StepRecord::from_report(r);
            rec.step = steps.len() + 1;
            steps.push(rec);
        })?;
        if times.contains(&target) {
            snapshots.push(Snapshot {
                time: target,
                masses: state.masses(measures()),
                state: state.clone(),
                cumulative_outflow: outflow.clone(),
            });
        }
    }
    Ok(EvolutionResult {
        mesh: s.mesh,
        snapshots,
        steps,
        summary,
        final_state: state,
    })
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    /// Accepted step times, starting with the initial time.
    pub times: Vec<f64>,
    /// `‖u_i - u_D,i‖_{L²}` per time and species.
    pub distances: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    /// Log-log slope of each species' distance over `[t_end/2, t_end]`.
    pub late_slope: Vec<f64>,
    pub entropy_nonincreasing: bool,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
    pub mesh: Mesh,
    pub final_state: State,
}

fn distances(state: &State, bdata: &BoundaryData, mesh: &Mesh) -> Result<Vec<f64>> {
    (0..state.n_species)
        .map(|i| {
            let diff: Vec<f64> = state.species(i).iter().map(|v| v - bdata.u_d()[i]).collect();
            Ok(discrete_norms(&diff, 0.0, mesh)?.l2)
        })
        .collect()
}

/// Run to `spec.t_end` and record the distance to the constant steady state
/// `u_D` after every step.
pub fn run_steady_state_study(spec: &ExperimentSpec) -> Result<SteadyStateResult> {
    let s = setup(spec, spec.mesh.primary_mesh()?)?;
    let newton = NewtonConfig {
        diagnostics: true,
        ..s.newton.clone()
    };
    let mut summary = RunSummary::new(&s.mesh, s.m_star, &s.initial);
    let mut times = vec![s.initial.time];
    let mut dist = vec![distances(&s.initial, &s.bdata, &s.mesh)?];
    let h0 = crate::diagnostics::discrete_entropy(&s.initial, &s.mesh, &s.model, &s.bdata)?;
    let mut entropy = vec![h0];
    let mut steps = Vec::new();
    let mut failure = None;
    let final_state = advance(s.initial.clone(), spec.t_end, &s.mesh, &s.model, &s.bdata, &newton, &mut |r, st| {
        summary.record(r);
        steps.push(StepRecord::from_report(r));
        times.push(st.time);
        entropy.push(r.entropy);
        match distances(st, &s.bdata, &s.mesh) {
            Ok(d) => dist.push(d),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let n = s.bdata.n_species();
    let window: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] > 0.0 && times[k] >= 0.5 * spec.t_end)
        .collect();
    let late_slope = (0..n)
        .map(|i| {
            let x: Vec<f64> = window.iter().map(|&k| times[k]).collect();
            let y: Vec<f64> = window.iter().map(|&k| dist[k][i]).collect();
            log_log_slope(&x, &y)
        })
        .collect();
    let entropy_nonincreasing = entropy.windows(2).all(|w| w[1] <= w[0]);
    Ok(SteadyStateResult {
        times,
        distances: dist,
        entropy,
        late_slope,
        entropy_nonincreasing,
        steps,
        summary,
        mesh: s.mesh,
        final_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub resolutions: Vec<usize>,
    pub reference: usize,
    pub h: Vec<f64>,
    pub dt: Vec<f64>,
    /// `l2_errors[i][r]`: species `i`, resolution `r`.
    pub l2_errors: Vec<Vec<f64>>,
    pub fitted_order: Vec<f64>,
}

/// Average a fine 1D state over blocks of `ratio` cells.
pub fn block_average(fine: &State, ratio: usize) -> Result<State> {
    let n = fine.n_species;
    if ratio == 0 || !fine.n_cells().is_multiple_of(ratio) {
        return Err(Error::Config(format!(
            "{} cells cannot be averaged in blocks of {ratio}",
            fine.n_cells()
        )));
    }
    let coarse_cells = fine.n_cells() / ratio;
    let mut u = vec![0.0; coarse_cells * n];
    for (c, out) in u.chunks_mut(n).enumerate() {
        // offsets from the first value keep constant blocks exact
        let first = fine.cell(c * ratio);
        for k in c * ratio + 1..(c + 1) * ratio {
            for ((o, v), f) in out.iter_mut().zip(fine.cell(k)).zip(first) {
                *o += v - f;
            }
        }
        for (o, f) in out.iter_mut().zip(first) {
            *o = f + *o / ratio as f64;
        }
    }
    State::new(fine.time, u, n)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    num / den
}

/// Convergence order: slope of `ln error` against `ln h`.
pub fn fitted_order(h: &[f64], errors: &[f64]) -> f64 {
    log_log_slope(h, errors)
}

fn with_resolution(n: usize, e: Error) -> Error {
    match e {
        Error::Solver { time, message } => Error::Solver {
            time,
            message: format!("{n} cells: {message}"),
        },
        other => other,
    }
}

/// Spatial convergence against a fine reference solution, with reference
/// values averaged onto each coarse mesh.
pub fn run_convergence_study(spec: &ExperimentSpec) -> Result<ConvergenceResult> {
    let MeshFamily::Interval {
        resolutions,
        reference,
        dirichlet,
    } = &spec.mesh
    else {
        return Err(Error::Config("convergence studies need a family of interval meshes".into()));
    };
    if resolutions.len() < 4 {
        return Err(Error::Config(format!(
            "a convergence fit needs at least 4 resolutions, got {}",
            resolutions.len()
        )));
    }
    let reference = reference.ok_or_else(|| Error::Config("convergence study needs a reference resolution".into()))?;
    if let Some(bad) = resolutions.iter().find(|&&r| r >= reference || reference % r != 0) {
        return Err(Error::Config(format!(
            "resolution {bad} does not nest in the reference resolution {reference}"
        )));
    }
    spec.validate()?;
    let mut jobs = resolutions.clone();
    jobs.push(reference);
    let finals: Vec<(State, f64)> = jobs
        .par_iter()
        .map(|&n| {
            let mesh = build_interval_mesh(n, *dirichlet)?;
            let s = setup(spec, mesh)?;
            let newton = NewtonConfig {
                diagnostics: false,
                ..s.newton.clone()
            };
            let out = advance(s.initial, spec.t_end, &s.mesh, &s.model, &s.bdata, &newton, &mut |_, _| {})
                .map_err(|e| with_resolution(n, e))?;
            Ok((out, newton.dt_init))
        })
        .collect::<Result<_>>()?;
    let (fine, _) = &finals[resolutions.len()];
    let n_species = spec.u_d.len();
    let mut l2_errors = vec![Vec::new(); n_species];
    let mut h = Vec::new();
    let mut dt = Vec::new();
    for (r, (coarse, step)) in resolutions.iter().zip(&finals) {
        let avg = block_average(fine, reference / r)?;
        let width = 1.0 / *r as f64;
        for (i, errs) in l2_errors.iter_mut().enumerate() {
            let e: f64 = (0..*r).map(|k| width * (coarse.get(i, k) - avg.get(i, k)).powi(2)).sum();
            errs.push(e.sqrt());
        }
        h.push(width);
        dt.push(*step);
    }
    let fitted_order = l2_errors.iter().map(|e| fitted_order(&h, e)).collect();
    if matches!(spec.dt_policy, DtPolicy::Adaptive) {
        dt.iter_mut().for_each(|d| *d = f64::NAN);
    }
    Ok(ConvergenceResult {
        resolutions: resolutions.clone(),
        reference,
        h,
        dt,
        l2_errors,
        fitted_order,
    })
}
