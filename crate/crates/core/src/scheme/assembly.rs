use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Edge, EdgeKind, Mesh};
use crate::model::ModelFunctions;
use crate::scheme::{BoundaryData, State};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Treat `p_σ²` as constant when differentiating.
    pub frozen_mobility: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Coeffs {
    pub g: f64,
    pub dg: f64,
    pub p2: f64,
    // p(M) p'(M) = d(p²/2)/dM
    pub pdp: f64,
}

impl Coeffs {
    fn at(model: &ModelFunctions, m: f64) -> Self {
        let p = model.p(m);
        Self {
            g: model.g(m),
            dg: model.g_prime(m),
            p2: p * p,
            pdp: p * model.p_prime(m),
        }
    }
}

pub(crate) fn check_sizes(u: &[f64], n: usize, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<()> {
    if model.n_species() != n || bdata.n_species() != n {
        return Err(Error::InvalidArgument(format!(
            "species count mismatch: state {n}, model {}, boundary data {}",
            model.n_species(),
            bdata.n_species()
        )));
    }
    if u.len() != n * mesh.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "state has {} values, mesh needs {}",
            u.len(),
            n * mesh.n_cells()
        )));
    }
    Ok(())
}

/// Per-cell `g`, `g'`, `p²`, `p p'`; fails on states outside `{u >= 0, M < 1}`.
pub(crate) fn cell_coeffs(u: &[f64], n: usize, model: &ModelFunctions) -> Result<Vec<Coeffs>> {
    u.chunks(n)
        .enumerate()
        .map(|(k, c)| {
            let m: f64 = c.iter().sum();
            if !(m < 1.0) || c.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InadmissibleTrial { cell: k });
            }
            let co = Coeffs::at(model, m);
            if !co.g.is_finite() || !co.dg.is_finite() {
                return Err(Error::InadmissibleTrial { cell: k });
            }
            Ok(co)
        })
        .collect()
}

pub(crate) fn dirichlet_coeffs(model: &ModelFunctions, bdata: &BoundaryData) -> Coeffs {
    Coeffs::at(model, bdata.m_d())
}

// Values on the far side of `edge`: (u of that side, its coefficients).
fn far_side<'a>(
    edge: &Edge,
    u: &'a [f64],
    n: usize,
    coeffs: &'a [Coeffs],
    u_d: &'a [f64],
    cd: &'a Coeffs,
) -> Option<(&'a [f64], &'a Coeffs)> {
    match edge.kind {
        EdgeKind::Interior { neighbor, .. } => Some((&u[neighbor * n..(neighbor + 1) * n], &coeffs[neighbor])),
        EdgeKind::Dirichlet { .. } => Some((u_d, cd)),
        EdgeKind::Neumann { .. } => None,
    }
}

// F_{i,K,σ} = -τ α_i p_σ² (v_other - v_K) with v = u_i g(M).
#[inline]
fn flux(tau: f64, alpha: f64, ck: &Coeffs, co: &Coeffs, uk: f64, uo: f64) -> f64 {
    let p2 = 0.5 * (ck.p2 + co.p2);
    -tau * alpha * p2 * (uo * co.g - uk * ck.g)
}

/// `(F_{i,K,σ}, F_{i,L,σ})` for one edge; the second entry is `None` on
/// boundary edges. Neumann edges carry zero flux.
pub fn edge_flux(
    edge: &Edge,
    species: usize,
    state: &State,
    model: &ModelFunctions,
    bdata: &BoundaryData,
) -> Result<(f64, Option<f64>)> {
    let n = state.n_species;
    let k = edge.kind.owner();
    let alpha = model.alphas()[species];
    let ck = cell_coeffs(state.cell(k), n, model)?[0];
    let uk = state.get(species, k);
    match edge.kind {
        EdgeKind::Neumann { .. } => Ok((0.0, None)),
        EdgeKind::Dirichlet { .. } => {
            let cd = dirichlet_coeffs(model, bdata);
            Ok((flux(edge.transmissibility, alpha, &ck, &cd, uk, bdata.u_d()[species]), None))
        }
        EdgeKind::Interior { neighbor, .. } => {
            let cl = cell_coeffs(state.cell(neighbor), n, model)?[0];
            let ul = state.get(species, neighbor);
            let fk = flux(edge.transmissibility, alpha, &ck, &cl, uk, ul);
            let fl = flux(edge.transmissibility, alpha, &cl, &ck, ul, uk);
            Ok((fk, Some(fl)))
        }
    }
}

/// Residual of the implicit Euler scheme at `u_trial` (cell-major layout).
pub fn residual(
    prev: &State,
    u_trial: &[f64],
    dt: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
) -> Result<Vec<f64>> {
    let n = prev.n_species;
    check_sizes(u_trial, n, mesh, model, bdata)?;
    check_sizes(&prev.u, n, mesh, model, bdata)?;
    let coeffs = cell_coeffs(u_trial, n, model)?;
    let cd = dirichlet_coeffs(model, bdata);
    let alphas = model.alphas();
    let mut r = vec![0.0; u_trial.len()];
    for (k, cell) in mesh.cells().iter().enumerate() {
        let w = cell.measure / dt;
        for i in 0..n {
            r[k * n + i] = w * (u_trial[k * n + i] - prev.u[k * n + i]);
        }
    }
    for edge in mesh.edges() {
        let k = edge.kind.owner();
        let Some((uo, co)) = far_side(edge, u_trial, n, &coeffs, bdata.u_d(), &cd) else {
            continue;
        };
        for i in 0..n {
            let f = flux(edge.transmissibility, alphas[i], &coeffs[k], co, u_trial[k * n + i], uo[i]);
            r[k * n + i] += f;
            if let Some(l) = edge.kind.neighbor() {
                let fl = flux(edge.transmissibility, alphas[i], co, &coeffs[k], uo[i], u_trial[k * n + i]);
                debug_assert_eq!(f + fl, 0.0, "flux antisymmetry on edge {}", edge.id);
                r[l * n + i] += fl;
            }
        }
    }
    Ok(r)
}

/// Jacobian of [`residual`] with respect to `u_trial`.
pub fn jacobian(
    prev: &State,
    u_trial: &[f64],
    dt: f64,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
    opts: AssemblyOptions,
) -> Result<CsrMatrix> {
    let n = prev.n_species;
    check_sizes(u_trial, n, mesh, model, bdata)?;
    let coeffs = cell_coeffs(u_trial, n, model)?;
    let cd = dirichlet_coeffs(model, bdata);
    let alphas = model.alphas();
    let n_int = mesh.interior_edges().count();
    let mut trip = Vec::with_capacity(u_trial.len() + 4 * n * n * n_int + n * n * mesh.n_edges());
    for (k, cell) in mesh.cells().iter().enumerate() {
        for i in 0..n {
            trip.push((k * n + i, k * n + i, cell.measure / dt));
        }
    }
    let mobility = if opts.frozen_mobility { 0.0 } else { 1.0 };
    for edge in mesh.edges() {
        let k = edge.kind.owner();
        let Some((uo, co)) = far_side(edge, u_trial, n, &coeffs, bdata.u_d(), &cd) else {
            continue;
        };
        let ck = &coeffs[k];
        let p2 = 0.5 * (ck.p2 + co.p2);
        let neighbor = edge.kind.neighbor();
        for i in 0..n {
            let c = -edge.transmissibility * alphas[i];
            let (uk, ul) = (u_trial[k * n + i], uo[i]);
            let diff = ul * co.g - uk * ck.g;
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                let d_k = c * (mobility * ck.pdp * diff - p2 * (delta * ck.g + uk * ck.dg));
                trip.push((k * n + i, k * n + j, d_k));
                if let Some(l) = neighbor {
                    let d_l = c * (mobility * co.pdp * diff + p2 * (delta * co.g + ul * co.dg));
                    trip.push((k * n + i, l * n + j, d_l));
                    trip.push((l * n + i, k * n + j, -d_k));
                    trip.push((l * n + i, l * n + j, -d_l));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(u_trial.len(), u_trial.len(), trip))
}

/// `Σ_{σ Dirichlet} F_{i,K,σ}` per species: the net outflow through the
/// Dirichlet boundary.
pub fn dirichlet_flux(state: &State, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<Vec<f64>> {
    let n = state.n_species;
    check_sizes(&state.u, n, mesh, model, bdata)?;
    let coeffs = cell_coeffs(&state.u, n, model)?;
    let cd = dirichlet_coeffs(model, bdata);
    let mut out = vec![0.0; n];
    for edge in mesh.dirichlet_edges() {
        let k = edge.kind.owner();
        for (i, o) in out.iter_mut().enumerate() {
            *o += flux(
                edge.transmissibility,
                model.alphas()[i],
                &coeffs[k],
                &cd,
                state.get(i, k),
                bdata.u_d()[i],
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh, BoundaryPredicate, DirichletSide};
    use crate::model::{model_case1, model_case2};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut StdRng, n_cells: usize, n: usize) -> State {
        let u: Vec<f64> = (0..n_cells * n).map(|_| rng.random_range(0.01..0.9 / n as f64)).collect();
        State::new(0.0, u, n).unwrap()
    }

    #[test]
    fn uniform_dirichlet_state_has_zero_residual() {
        let mesh = build_interval_mesh(12, DirichletSide::Both).unwrap();
        let model = model_case1();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let s = State::uniform(0.0, bd.u_d(), 12);
        let r = residual(&s, &s.u, 1e-3, &mesh, &model, &bd).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interior_flux_is_antisymmetric() {
        let mesh = build_interval_mesh(2, DirichletSide::Left).unwrap();
        let model = model_case2().with_alphas(vec![1.0]).unwrap();
        let bd = BoundaryData::new(vec![0.1]).unwrap();
        let (x, y) = (0.3, 0.6);
        let s = State::new(0.0, vec![x, y], 1).unwrap();
        let edge = mesh.interior_edges().next().unwrap();
        let (fk, fl) = edge_flux(edge, 0, &s, &model, &bd).unwrap();
        assert_eq!(fk + fl.unwrap(), 0.0);
        let p2 = 0.5 * ((1.0 - x).powi(2) + (1.0 - y).powi(2));
        let expected = -edge.transmissibility * p2 * (y * model.g(y) - x * model.g(x));
        assert!((fk - expected).abs() < 1e-15);
        let swapped = State::new(0.0, vec![y, x], 1).unwrap();
        let (gk, _) = edge_flux(edge, 0, &swapped, &model, &bd).unwrap();
        assert!((gk + fk).abs() < 1e-15);
    }

    #[test]
    fn three_cell_residual_by_hand() {
        // Dirichlet at x = 0, Neumann at x = 1, h = 1/3, τ_int = 3, τ_D = 6.
        let mesh = build_interval_mesh(3, DirichletSide::Left).unwrap();
        let model = model_case2().with_alphas(vec![2.0]).unwrap();
        let bd = BoundaryData::new(vec![0.1]).unwrap();
        let prev = State::new(0.0, vec![0.2, 0.3, 0.4], 1).unwrap();
        let u = [0.25, 0.35, 0.3];
        let dt = 0.01;
        let g = |m: f64| m / (2.0 * (1.0 - m) * (1.0 - m));
        let p2 = |m: f64| (1.0 - m) * (1.0 - m);
        let v = |m: f64| m * g(m);
        let ps = |a: f64, b: f64| 0.5 * (p2(a) + p2(b));
        let f_d = -6.0 * 2.0 * ps(u[0], 0.1) * (v(0.1) - v(u[0]));
        let f01 = -3.0 * 2.0 * ps(u[0], u[1]) * (v(u[1]) - v(u[0]));
        let f12 = -3.0 * 2.0 * ps(u[1], u[2]) * (v(u[2]) - v(u[1]));
        let h = 1.0 / 3.0;
        let expected = [
            h / dt * (u[0] - 0.2) + f_d + f01,
            h / dt * (u[1] - 0.3) - f01 + f12,
            h / dt * (u[2] - 0.4) - f12,
        ];
        let r = residual(&prev, &u, dt, &mesh, &model, &bd).unwrap();
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    fn fd_check(mesh: &Mesh, model: &ModelFunctions, bd: &BoundaryData, seed: u64) -> f64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = model.n_species();
        let prev = random_state(&mut rng, mesh.n_cells(), n);
        let u = random_state(&mut rng, mesh.n_cells(), n).u;
        let dt = 1e-3;
        let jac = jacobian(&prev, &u, dt, mesh, model, bd, AssemblyOptions::default()).unwrap();
        let scale = jac.to_dense().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0f64;
        for c in 0..u.len() {
            let h = 1e-7 * u[c].abs().max(1e-3);
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[c] += h;
            dn[c] -= h;
            let rp = residual(&prev, &up, dt, mesh, model, bd).unwrap();
            let rm = residual(&prev, &dn, dt, mesh, model, bd).unwrap();
            for r in 0..u.len() {
                let fd = (rp[r] - rm[r]) / (2.0 * h);
                worst = worst.max((fd - jac.get(r, c)).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn jacobian_matches_finite_differences_1d() {
        let mesh = build_interval_mesh(8, DirichletSide::Left).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        for model in [model_case1(), model_case2().with_alphas(vec![1.0, 10.0]).unwrap()] {
            let err = fd_check(&mesh, &model, &bd, 7);
            assert!(err < 1e-6, "{}: {err}", model.name());
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_2d() {
        let mesh = build_rectangle_mesh(3, 3, &BoundaryPredicate::parse("y == 1").unwrap()).unwrap();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let model = model_case1().with_alphas(vec![1.0, 5.0]).unwrap();
        assert!(fd_check(&mesh, &model, &bd, 9) < 1e-6);
    }

    #[test]
    fn uniform_state_jacobian_is_scaled_laplacian() {
        let mesh = build_interval_mesh(5, DirichletSide::Left).unwrap();
        let model = model_case2().with_alphas(vec![1.0]).unwrap();
        let bd = BoundaryData::new(vec![0.3]).unwrap();
        let s = State::uniform(0.0, &[0.3], 5);
        let dt = 1.0;
        let jac = jacobian(&s, &s.u, dt, &mesh, &model, &bd, AssemblyOptions::default()).unwrap();
        let m = 0.3;
        let coef = (1.0 - m) * (1.0 - m) * (model.g(m) + m * model.g_prime(m));
        // interior row: 0.2 + τ coef (2) ; off-diagonals -τ coef with τ = 5
        assert!((jac.get(2, 2) - (0.2 + 10.0 * coef)).abs() < 1e-12);
        assert!((jac.get(2, 1) + 5.0 * coef).abs() < 1e-12);
        assert!((jac.get(2, 3) + 5.0 * coef).abs() < 1e-12);
        // Dirichlet cell: τ_D = 10
        assert!((jac.get(0, 0) - (0.2 + 15.0 * coef)).abs() < 1e-12);
    }

    #[test]
    fn column_sums_match_boundary_flux_derivative() {
        // Summing rows (i, K) over K leaves only the boundary term.
        let mesh = build_interval_mesh(6, DirichletSide::Left).unwrap();
        let model = model_case1();
        let bd = BoundaryData::new(vec![0.1, 0.05]).unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        let prev = random_state(&mut rng, 6, 2);
        let u = random_state(&mut rng, 6, 2).u;
        let dt = 0.1;
        let jac = jacobian(&prev, &u, dt, &mesh, &model, &bd, AssemblyOptions::default()).unwrap();
        let state = State::new(0.0, u.clone(), 2).unwrap();
        let h = 1e-7;
        for c in 0..u.len() {
            let mut up = state.clone();
            let mut dn = state.clone();
            up.u[c] += h;
            dn.u[c] -= h;
            let fp = dirichlet_flux(&up, &mesh, &model, &bd).unwrap();
            let fm = dirichlet_flux(&dn, &mesh, &model, &bd).unwrap();
            for i in 0..2 {
                let sum: f64 = (0..6).map(|k| jac.get(k * 2 + i, c)).sum();
                let storage = if c % 2 == i { mesh.cells()[c / 2].measure / dt } else { 0.0 };
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((sum - storage - fd).abs() < 1e-6 * fd.abs().max(1.0), "{c} {i}");
            }
        }
    }

    #[test]
    fn inadmissible_trial_is_signalled() {
        let mesh = build_interval_mesh(3, DirichletSide::Left).unwrap();
        let model = model_case2();
        let bd = BoundaryData::new(vec![0.1, 0.1]).unwrap();
        let prev = State::uniform(0.0, &[0.1, 0.1], 3);
        let u = vec![0.1, 0.1, 0.6, 0.5, 0.1, 0.1];
        assert_eq!(
            residual(&prev, &u, 1.0, &mesh, &model, &bd),
            Err(Error::InadmissibleTrial { cell: 1 })
        );
    }
}
