//! Discrete entropy, dissipation, norms and gradient reconstruction.

use crate::error::{Error, Result};
use crate::mesh::{EdgeKind, Mesh, Point};
use crate::model::ModelFunctions;
use crate::scheme::{BoundaryData, State};

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub entropy: f64,
    pub dissipation: Vec<f64>,
    pub lower_bound_beta_term: f64,
    pub max_m: f64,
    pub min_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
}

/// Both sides of the entropy-production lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBound {
    /// `Σ_i I_i`
    pub lhs: f64,
    /// `(1/2) Σ_i Σ_σ τ_σ β_{K,σ} (D_σ √u_i)²`
    pub rhs: f64,
    /// `Σ_σ τ_σ M_σ^{a-1} (D_σ M)² / (1 - M_σ)^{1+b+κ}` with `M_σ` the edge
    /// midpoint value; `None` without a growth exponent `κ`.
    pub growth_term: Option<f64>,
}

fn check(state: &State, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<()> {
    let n = state.n_species;
    if model.n_species() != n || bdata.n_species() != n || state.u.len() != n * mesh.n_cells() {
        return Err(Error::InvalidArgument("state, model, boundary data and mesh do not match".into()));
    }
    Ok(())
}

// Calls `f(tau, u_K, M_K, u_other, M_other)` for every non-Neumann edge.
fn for_each_edge(state: &State, mesh: &Mesh, bdata: &BoundaryData, mut f: impl FnMut(f64, &[f64], f64, &[f64], f64)) {
    let biomass = state.biomass();
    for edge in mesh.edges() {
        let k = edge.kind.owner();
        match edge.kind {
            EdgeKind::Neumann { .. } => {}
            EdgeKind::Dirichlet { .. } => f(edge.transmissibility, state.cell(k), biomass[k], bdata.u_d(), bdata.m_d()),
            EdgeKind::Interior { neighbor, .. } => f(
                edge.transmissibility,
                state.cell(k),
                biomass[k],
                state.cell(neighbor),
                biomass[neighbor],
            ),
        }
    }
}

fn check_admissible(state: &State) -> Result<()> {
    for (k, c) in state.u.chunks(state.n_species).enumerate() {
        if let Some(&bad) = c.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::domain(bad, format!("negative proportion in cell {k}")));
        }
        let m: f64 = c.iter().sum();
        if !(m < 1.0) {
            return Err(Error::domain(m, format!("biomass not below 1 in cell {k}")));
        }
    }
    Ok(())
}

/// `H = Σ_K m(K) h*(u_K | u_D)`.
pub fn discrete_entropy(state: &State, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<f64> {
    check(state, mesh, model, bdata)?;
    mesh.cells()
        .iter()
        .zip(state.u.chunks(state.n_species))
        .map(|(c, u)| Ok(c.measure * model.relative_entropy(u, bdata.u_d())?))
        .sum()
}

/// `I_i = Σ_σ τ_σ p_σ² (D_σ √(u_i g(M)))²` per species.
pub fn dissipation(state: &State, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<Vec<f64>> {
    check(state, mesh, model, bdata)?;
    check_admissible(state)?;
    let mut out = vec![0.0; state.n_species];
    for_each_edge(state, mesh, bdata, |tau, uk, mk, uo, mo| {
        let p2 = 0.5 * (model.p(mk).powi(2) + model.p(mo).powi(2));
        let (gk, go) = (model.g(mk), model.g(mo));
        for (i, o) in out.iter_mut().enumerate() {
            let d = (uo[i] * go).sqrt() - (uk[i] * gk).sqrt();
            *o += tau * p2 * d * d;
        }
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(state.max_biomass(), "dissipation is not finite"));
    }
    Ok(out)
}

/// Entropy production and the explicit part of its lower bound, with
/// `β_{K,σ} = min(p q (M_K), p q (M_{K,σ}))` and `p q = p² g`.
pub fn entropy_production_beta_bound(
    state: &State,
    mesh: &Mesh,
    model: &ModelFunctions,
    bdata: &BoundaryData,
) -> Result<BetaBound> {
    let lhs = dissipation(state, mesh, model, bdata)?.iter().sum();
    let (a, b) = (model.params().a, model.params().b);
    let kappa = model.params().kappa;
    let mut rhs = 0.0;
    let mut growth = 0.0;
    for_each_edge(state, mesh, bdata, |tau, uk, mk, uo, mo| {
        let beta = model.pq(mk).min(model.pq(mo));
        for i in 0..uk.len() {
            let d = uo[i].sqrt() - uk[i].sqrt();
            rhs += 0.5 * tau * beta * d * d;
        }
        if let Some(kappa) = kappa {
            let ms = 0.5 * (mk + mo);
            let dm = mo - mk;
            if dm != 0.0 {
                growth += tau * ms.powf(a - 1.0) * dm * dm / (1.0 - ms).powf(1.0 + b + kappa);
            }
        }
    });
    Ok(BetaBound {
        lhs,
        rhs,
        growth_term: kappa.map(|_| growth),
    })
}

pub fn entropy_report(state: &State, mesh: &Mesh, model: &ModelFunctions, bdata: &BoundaryData) -> Result<EntropyReport> {
    let bound = entropy_production_beta_bound(state, mesh, model, bdata)?;
    Ok(EntropyReport {
        entropy: discrete_entropy(state, mesh, model, bdata)?,
        dissipation: dissipation(state, mesh, model, bdata)?,
        lower_bound_beta_term: bound.rhs,
        max_m: state.max_biomass(),
        min_u: state.min_u(),
    })
}

/// Discrete `L²`, `H¹` seminorm and `L^∞` norm of a cell field whose value
/// on Dirichlet edges is `dirichlet_value`.
pub fn discrete_norms(field: &[f64], dirichlet_value: f64, mesh: &Mesh) -> Result<NormReport> {
    if field.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} cells",
            field.len(),
            mesh.n_cells()
        )));
    }
    let l2 = mesh.cells().iter().zip(field).map(|(c, v)| c.measure * v * v).sum::<f64>().sqrt();
    let mut h1 = 0.0;
    for edge in mesh.edges() {
        let k = edge.kind.owner();
        let other = match edge.kind {
            EdgeKind::Interior { neighbor, .. } => field[neighbor],
            EdgeKind::Dirichlet { .. } => dirichlet_value,
            EdgeKind::Neumann { .. } => continue,
        };
        let d = other - field[k];
        h1 += edge.transmissibility * d * d;
    }
    Ok(NormReport {
        l2,
        h1_semi: h1.sqrt(),
        linf: field.iter().fold(0.0, |a, v| a.max(v.abs())),
    })
}

/// Constant gradient on one dual cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualGradient {
    pub edge: usize,
    pub measure: f64,
    pub gradient: Point,
}

/// `∇ v = (m(σ) / m(T_{K,σ})) D_{K,σ} v ν_{K,σ}` on every dual cell.
/// Dual cells of Neumann edges carry a zero gradient.
pub fn reconstruct_gradient(field: &[f64], dirichlet_value: f64, mesh: &Mesh) -> Result<Vec<DualGradient>> {
    if field.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument("field does not match the mesh".into()));
    }
    mesh.edges()
        .iter()
        .map(|edge| {
            if !(edge.dual_measure > 0.0) {
                return Err(Error::UnsupportedMesh(format!("edge {} has no dual cell", edge.id)));
            }
            let k = edge.kind.owner();
            let d = match edge.kind {
                EdgeKind::Interior { neighbor, .. } => field[neighbor] - field[k],
                EdgeKind::Dirichlet { .. } => dirichlet_value - field[k],
                EdgeKind::Neumann { .. } => 0.0,
            };
            let s = edge.measure / edge.dual_measure * d;
            Ok(DualGradient {
                edge: edge.id,
                measure: edge.dual_measure,
                gradient: [s * edge.normal[0], s * edge.normal[1]],
            })
        })
        .collect()
}

/// `‖∇ v‖_{L²}` of a reconstructed gradient.
pub fn gradient_l2(grad: &[DualGradient]) -> f64 {
    grad.iter()
        .map(|g| g.measure * (g.gradient[0].powi(2) + g.gradient[1].powi(2)))
        .sum::<f64>()
        .sqrt()
}
