//! Randomized consistency checks run by `biofilm-fv selftest`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::diagnostics::entropy_production_beta_bound;
use crate::error::Result;
use crate::mesh::{build_interval_mesh, build_rectangle_mesh, BoundaryPredicate, DirichletSide, Mesh};
use crate::model::{model_case1, model_case2, ModelFunctions};
use crate::scheme::{advance, jacobian, residual, AssemblyOptions, BoundaryData, NewtonConfig, State};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn random_state(rng: &mut StdRng, n_cells: usize, n: usize) -> State {
    let u: Vec<f64> = (0..n_cells * n).map(|_| rng.random_range(0.01..0.9 / n as f64)).collect();
    State::new(0.0, u, n).expect("sizes match")
}

/// Largest entry of `J - J_fd`, relative to the largest entry of `J`.
pub fn jacobian_fd_error(
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    rng: &mut StdRng,
) -> Result<f64> {
    let n = model.n_species();
    let prev = random_state(rng, mesh.n_cells(), n);
    let u = random_state(rng, mesh.n_cells(), n).u;
    let dt = 1e-3;
    let jac = jacobian(&prev, &u, dt, mesh, model, bdata, AssemblyOptions::default())?;
    let scale = jac.to_dense().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for c in 0..u.len() {
        let h = 1e-7 * u[c].abs().max(1e-3);
        let (mut up, mut dn) = (u.clone(), u.clone());
        up[c] += h;
        dn[c] -= h;
        let rp = residual(&prev, &up, dt, mesh, model, bdata)?;
        let rm = residual(&prev, &dn, dt, mesh, model, bdata)?;
        for r in 0..u.len() {
            let fd = (rp[r] - rm[r]) / (2.0 * h);
            worst = worst.max((fd - jac.get(r, c)).abs() / scale);
        }
    }
    Ok(worst)
}

fn models() -> Result<Vec<ModelFunctions>> {
    Ok(vec![
        model_case1().with_alphas(vec![1.0, 10.0])?,
        model_case2().with_alphas(vec![1.0, 10.0])?,
    ])
}

pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let bd = BoundaryData::new(vec![0.1, 0.1])?;
    let line = build_interval_mesh(12, DirichletSide::Left)?;
    let square = build_rectangle_mesh(4, 4, &BoundaryPredicate::parse("y == 1")?)?;
    let mut checks = Vec::new();

    for (label, mesh) in [("1d", &line), ("2d", &square)] {
        let mut worst = 0.0f64;
        for model in models()? {
            for _ in 0..5 {
                worst = worst.max(jacobian_fd_error(mesh, &model, &bd, &mut rng)?);
            }
        }
        checks.push(Check::new(
            &format!("jacobian_fd_{label}"),
            worst < 1e-6,
            format!("max scaled error {worst:.3e}"),
        ));
    }

    let mut worst_gap = f64::INFINITY;
    for model in models()? {
        for _ in 0..100 {
            let u: Vec<f64> = (0..line.n_cells() * 2).map(|_| rng.random_range(0.0..0.49)).collect();
            let s = State::new(0.0, u, 2)?;
            let b = entropy_production_beta_bound(&s, &line, &model, &bd)?;
            worst_gap = worst_gap.min((b.lhs - b.rhs) / b.lhs.abs().max(1e-300));
        }
    }
    checks.push(Check::new(
        "beta_bound",
        worst_gap >= -1e-12,
        format!("min relative gap {worst_gap:.3e}"),
    ));

    let mut worst_g = 0.0f64;
    for model in models()? {
        for _ in 0..50 {
            let m = rng.random_range(0.02..0.9);
            let exact = model.g(m);
            worst_g = worst_g.max((exact - model.g_quadrature(m)?).abs() / exact);
        }
    }
    checks.push(Check::new(
        "g_quadrature",
        worst_g <= 1e-8,
        format!("max relative error {worst_g:.3e}"),
    ));

    let mut worst_defect = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for model in models()? {
        let s0 = random_state(&mut rng, line.n_cells(), 2);
        advance(s0, 1e-4, &line, &model, &bd, &NewtonConfig::fixed(2e-5), &mut |r, _| {
            worst_defect = r.conservation_defect().into_iter().map(f64::abs).fold(worst_defect, f64::max);
            worst_margin = worst_margin.min(r.entropy_margin());
        })?;
    }
    checks.push(Check::new(
        "conservation",
        worst_defect <= 1e-10,
        format!("max defect {worst_defect:.3e}"),
    ));
    checks.push(Check::new(
        "entropy_margin",
        worst_margin >= -1e-10,
        format!("min margin {worst_margin:.3e}"),
    ));
    Ok(checks)
}
