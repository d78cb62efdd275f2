use crate::diagnostics::{discrete_entropy, dissipation};
use crate::error::{Error, Result};
use crate::linalg::BandedLu;
use crate::mesh::Mesh;
use crate::model::ModelFunctions;
use crate::scheme::assembly::{check_sizes, jacobian, residual, AssemblyOptions};
use crate::scheme::{dirichlet_flux, BoundaryData, NewtonConfig, State};

const NEG_TOL: f64 = 1e-14;
const SAT_TOL: f64 = 1e-14;

/// Statistics and diagnostics for one accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based index of the accepted step within the current `advance` call.
    pub step: usize,
    /// Time at the end of the step.
    pub time: f64,
    /// Residual evaluations; the last one met the tolerance.
    pub newton_iters: usize,
    pub dt_used: f64,
    /// Time-step halvings before this step was accepted.
    pub dt_halvings: usize,
    /// Total line-search halvings over the Newton iterations.
    pub damping_halvings: usize,
    pub residual_norm: f64,
    /// `H(u^k)`; NaN when diagnostics are off.
    pub entropy: f64,
    /// `H(u^{k-1})`; NaN when diagnostics are off.
    pub entropy_prev: f64,
    /// `I_i(u^k)`; empty when diagnostics are off.
    pub dissipation: Vec<f64>,
    pub max_m: f64,
    pub min_u: f64,
    /// `Σ_K m(K)(u_{i,K}^k - u_{i,K}^{k-1})`.
    pub mass_change: Vec<f64>,
    /// `Σ_{σ Dirichlet} F_{i,K,σ}` at the new state.
    pub boundary_flux: Vec<f64>,
}

impl StepReport {
    /// `H(u^{k-1}) - H(u^k) - Δt Σ_i I_i(u^k)`, nonnegative for the exact
    /// discrete solution.
    pub fn entropy_margin(&self) -> f64 {
        self.entropy_prev - self.entropy - self.dt_used * self.dissipation.iter().sum::<f64>()
    }

    /// `Σ_K m(K) Δu_{i,K} + Δt Σ_{σ Dirichlet} F_{i,K,σ}` per species.
    pub fn conservation_defect(&self) -> Vec<f64> {
        self.mass_change
            .iter()
            .zip(&self.boundary_flux)
            .map(|(dm, f)| dm + self.dt_used * f)
            .collect()
    }
}

fn unknown_permutation(mesh: &Mesh, n: usize) -> Vec<usize> {
    let rank = mesh.cell_rank();
    (0..mesh.n_cells() * n).map(|idx| rank[idx / n] * n + idx % n).collect()
}

fn scaled_norm(r: &[f64], n: usize, dt: f64, mesh: &Mesh) -> f64 {
    r.chunks(n)
        .zip(mesh.cells())
        .flat_map(|(rk, c)| rk.iter().map(move |v| (v * dt / c.measure).abs()))
        .fold(0.0, f64::max)
}

fn admissible(u: &[f64], n: usize) -> bool {
    u.chunks(n)
        .all(|c| c.iter().all(|&v| v > -NEG_TOL) && c.iter().sum::<f64>() < 1.0 - SAT_TOL)
}

struct Solved {
    u: Vec<f64>,
    iters: usize,
    damping_halvings: usize,
    residual_norm: f64,
}

fn solve(
    prev: &State,
    dt: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    cfg: &NewtonConfig,
    perm: &[usize],
) -> Result<Solved> {
    let n = prev.n_species;
    let opts = AssemblyOptions {
        frozen_mobility: cfg.frozen_mobility,
    };
    let mut u = prev.u.clone();
    let mut damping_halvings = 0;
    let mut last_norm = f64::NAN;
    for iter in 1..=cfg.max_iters {
        let r = residual(prev, &u, dt, mesh, model, bdata)?;
        last_norm = scaled_norm(&r, n, dt, mesh);
        if !last_norm.is_finite() {
            return Err(Error::NewtonFailure(format!("non-finite residual at iteration {iter}")));
        }
        if last_norm <= cfg.tol {
            return Ok(Solved {
                u,
                iters: iter,
                damping_halvings,
                residual_norm: last_norm,
            });
        }
        if iter == cfg.max_iters {
            break;
        }
        let jac = jacobian(prev, &u, dt, mesh, model, bdata, opts)?;
        let lu = BandedLu::factor(&jac, perm)?;
        let delta = lu.solve(&r, perm);
        let mut lambda = 1.0;
        let mut halvings = 0;
        let trial = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - lambda * d).collect();
            if admissible(&trial, n) {
                break trial;
            }
            halvings += 1;
            if halvings > cfg.max_damping_halvings {
                return Err(Error::NewtonFailure(format!(
                    "damping exhausted at iteration {iter} (residual {last_norm:e})"
                )));
            }
            lambda *= cfg.damping;
        };
        damping_halvings += halvings;
        u = trial.into_iter().map(|v| v.max(0.0)).collect();
    }
    Err(Error::NewtonFailure(format!(
        "no convergence in {} iterations (residual {last_norm:e})",
        cfg.max_iters
    )))
}

#[allow(clippy::too_many_arguments)]
fn step_with(
    prev: &State,
    dt: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    cfg: &NewtonConfig,
    perm: &[usize],
    entropy_prev: Option<f64>,
) -> Result<(State, StepReport)> {
    let n = prev.n_species;
    let solved = solve(prev, dt, mesh, model, bdata, cfg, perm)?;
    let next = State {
        time: prev.time + dt,
        u: solved.u,
        n_species: n,
        dt_last: dt,
    };
    let measures = || mesh.cells().iter().map(|c| c.measure);
    let mass_change = next
        .masses(measures())
        .iter()
        .zip(prev.masses(measures()))
        .map(|(a, b)| a - b)
        .collect();
    let (entropy, entropy_prev, diss) = if cfg.diagnostics {
        let hp = match entropy_prev {
            Some(h) => h,
            None => discrete_entropy(prev, mesh, model, bdata)?,
        };
        (
            discrete_entropy(&next, mesh, model, bdata)?,
            hp,
            dissipation(&next, mesh, model, bdata)?,
        )
    } else {
        (f64::NAN, f64::NAN, Vec::new())
    };
    let report = StepReport {
        step: 0,
        time: next.time,
        newton_iters: solved.iters,
        dt_used: dt,
        dt_halvings: 0,
        damping_halvings: solved.damping_halvings,
        residual_norm: solved.residual_norm,
        entropy,
        entropy_prev,
        dissipation: diss,
        max_m: next.max_biomass(),
        min_u: next.min_u(),
        mass_change,
        boundary_flux: dirichlet_flux(&next, mesh, model, bdata)?,
    };
    Ok((next, report))
}

/// One implicit Euler step of size `dt` by damped Newton from `prev`.
pub fn newton_step(
    prev: &State,
    dt: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    cfg: &NewtonConfig,
) -> Result<(State, StepReport)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    check_sizes(&prev.u, prev.n_species, mesh, model, bdata)?;
    let perm = unknown_permutation(mesh, prev.n_species);
    let (next, mut report) = step_with(prev, dt, mesh, model, bdata, cfg, &perm, None)?;
    report.step = 1;
    Ok((next, report))
}

/// Integrate from `state.time` to `t_end`, calling `observer` after every
/// accepted step.
///
/// Adaptive mode starts from `cfg.dt_init` (or twice the previous accepted
/// step), halves on failure and doubles after success within
/// `[dt_min, dt_max]`. Fixed mode uses `cfg.dt_init` throughout and treats a
/// failed step as fatal. The final step is shortened to land on `t_end`.
pub fn advance(
    mut state: State,
    t_end: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    cfg: &NewtonConfig,
    observer: &mut dyn FnMut(&StepReport, &State),
) -> Result<State> {
    cfg.validate()?;
    check_sizes(&state.u, state.n_species, mesh, model, bdata)?;
    if t_end < state.time {
        return Err(Error::InvalidArgument(format!(
            "end time {t_end} precedes current time {}",
            state.time
        )));
    }
    let perm = unknown_permutation(mesh, state.n_species);
    let mut entropy = if cfg.diagnostics {
        Some(discrete_entropy(&state, mesh, model, bdata)?)
    } else {
        None
    };
    let mut dt = if !cfg.adaptive {
        cfg.dt_init
    } else if state.dt_last > 0.0 {
        (2.0 * state.dt_last).min(cfg.dt_max)
    } else {
        cfg.dt_init
    };
    let mut step = 0;
    while state.time < t_end {
        let remaining = t_end - state.time;
        let mut halvings = 0;
        let (mut next, mut report) = loop {
            let last = remaining <= dt * (1.0 + 1e-9);
            let dt_try = if last { remaining } else { dt };
            match step_with(&state, dt_try, mesh, model, bdata, cfg, &perm, entropy) {
                Ok((mut next, report)) => {
                    if last {
                        next.time = t_end;
                    }
                    next.dt_last = dt;
                    break (next, report);
                }
                Err(e) if !cfg.adaptive => {
                    return Err(Error::Solver {
                        time: state.time,
                        message: format!("fixed step {dt_try:e} failed: {e}"),
                    })
                }
                Err(e) => {
                    dt *= 0.5;
                    halvings += 1;
                    if dt < cfg.dt_min {
                        return Err(Error::Solver {
                            time: state.time,
                            message: format!("time step fell below {:e}: {e}", cfg.dt_min),
                        });
                    }
                }
            }
        };
        step += 1;
        report.step = step;
        report.time = next.time;
        report.dt_halvings = halvings;
        if cfg.diagnostics {
            entropy = Some(report.entropy);
        }
        next.n_species = state.n_species;
        observer(&report, &next);
        state = next;
        if cfg.adaptive {
            dt = (2.0 * dt).min(cfg.dt_max);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, DirichletSide};
    use crate::model::{model_case1, model_case2};
    use crate::scheme::{project_initial, InitialDatum};

    fn paper_1d(mesh: &Mesh) -> State {
        let datum = InitialDatum::new(
            2,
            |p, out| {
                out[0] = 0.1 + if (0.2..=0.5).contains(&p[0]) { 0.1 } else { 0.0 };
                out[1] = 0.1 + if (0.5..=0.8).contains(&p[0]) { 0.1 } else { 0.0 };
            },
            vec![0.2, 0.5, 0.8],
            Vec::new(),
        );
        project_initial(&datum, mesh).unwrap()
    }

    #[test]
    fn steady_state_converges_immediately() {
        let mesh = build_interval_mesh(10, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let s = State::uniform(0.0, bd.u_d(), 10);
        let (next, rep) = newton_step(&s, 1e-3, &mesh, &model_case1(), &bd, &NewtonConfig::default()).unwrap();
        assert_eq!(rep.newton_iters, 1);
        assert_eq!(next.u, s.u);
        assert_eq!(rep.entropy, 0.0);
    }

    #[test]
    fn first_step_from_discontinuous_data() {
        let mesh = build_interval_mesh(40, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        for model in [model_case1(), model_case2()] {
            let s = paper_1d(&mesh);
            let (next, rep) = newton_step(&s, 1e-5, &mesh, &model, &bd, &NewtonConfig::default()).unwrap();
            assert!(rep.newton_iters <= 50);
            assert!(rep.residual_norm <= 1e-10);
            assert!(rep.entropy_margin() >= -1e-9 * rep.entropy_prev.max(1.0));
            assert!(next.min_u() >= 0.0 && rep.max_m <= 0.3 + 1e-12);
            for d in rep.conservation_defect() {
                assert!(d.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn advance_to_current_time_is_identity() {
        let mesh = build_interval_mesh(10, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let s = paper_1d(&mesh);
        let mut calls = 0;
        let out = advance(s.clone(), 0.0, &mesh, &model_case1(), &bd, &NewtonConfig::default(), &mut |_, _| calls += 1).unwrap();
        assert_eq!(out, s);
        assert_eq!(calls, 0);
    }

    #[test]
    fn fixed_steps_land_on_end_time() {
        let mesh = build_interval_mesh(20, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let mut dts = Vec::new();
        let out = advance(
            paper_1d(&mesh),
            1e-3,
            &mesh,
            &model_case2(),
            &bd,
            &NewtonConfig::fixed(3e-4),
            &mut |r, _| dts.push(r.dt_used),
        )
        .unwrap();
        assert_eq!(out.time, 1e-3);
        assert_eq!(dts.len(), 4);
        assert!((dts[3] - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn adaptive_steps_double_up_to_the_cap() {
        let mesh = build_interval_mesh(20, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let cfg = NewtonConfig {
            dt_max: 4e-5,
            ..NewtonConfig::default()
        };
        let mut dts = Vec::new();
        advance(paper_1d(&mesh), 3e-4, &mesh, &model_case1(), &bd, &cfg, &mut |r, _| dts.push(r.dt_used)).unwrap();
        assert_eq!(&dts[..4], &[1e-5, 2e-5, 4e-5, 4e-5]);
        assert!(dts.iter().all(|&d| d <= 4e-5));
    }

    #[test]
    fn frozen_mobility_still_converges() {
        let mesh = build_interval_mesh(20, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let exact = newton_step(&paper_1d(&mesh), 1e-4, &mesh, &model_case1(), &bd, &NewtonConfig::default()).unwrap();
        let cfg = NewtonConfig {
            frozen_mobility: true,
            ..NewtonConfig::default()
        };
        let frozen = newton_step(&paper_1d(&mesh), 1e-4, &mesh, &model_case1(), &bd, &cfg).unwrap();
        assert!(frozen.1.newton_iters >= exact.1.newton_iters);
        for (a, b) in frozen.0.u.iter().zip(&exact.0.u) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_failure_is_a_solver_error() {
        let mesh = build_interval_mesh(10, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let cfg = NewtonConfig {
            max_iters: 1,
            ..NewtonConfig::fixed(1e-3)
        };
        let err = advance(paper_1d(&mesh), 1e-2, &mesh, &model_case1(), &bd, &cfg, &mut |_, _| {});
        assert!(matches!(err, Err(Error::Solver { time, .. }) if time == 0.0));
    }
}
