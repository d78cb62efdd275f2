//! Implicit Euler two-point flux scheme, Newton solver and time stepping.

mod assembly;
mod initial;
mod newton;

pub use assembly::{dirichlet_flux, edge_flux, jacobian, residual, AssemblyOptions};
pub use initial::{project_initial, InitialDatum};
pub use newton::{advance, newton_step, StepReport};

use crate::error::{Error, Result};

/// Species proportions at one time level, stored cell-major: the value of
/// species `i` in cell `K` is `u[K * n_species + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub u: Vec<f64>,
    pub n_species: usize,
    /// Last accepted (unclamped) time step, 0 before the first step.
    pub dt_last: f64,
}

impl State {
    pub fn new(time: f64, u: Vec<f64>, n_species: usize) -> Result<Self> {
        if n_species == 0 || !u.len().is_multiple_of(n_species) {
            return Err(Error::InvalidArgument(format!(
                "state of length {} does not split into {n_species} species",
                u.len()
            )));
        }
        Ok(Self {
            time,
            u,
            n_species,
            dt_last: 0.0,
        })
    }

    /// Build from one row per species.
    pub fn from_species(time: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no species".into()));
        }
        let n_cells = rows[0].len();
        if rows.iter().any(|r| r.len() != n_cells) {
            return Err(Error::InvalidArgument("species rows differ in length".into()));
        }
        let mut u = vec![0.0; n * n_cells];
        for (i, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                u[k * n + i] = v;
            }
        }
        Self::new(time, u, n)
    }

    /// Every cell set to `values`.
    pub fn uniform(time: f64, values: &[f64], n_cells: usize) -> Self {
        Self {
            time,
            u: values.repeat(n_cells),
            n_species: values.len(),
            dt_last: 0.0,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.u.len() / self.n_species
    }

    #[inline]
    pub fn get(&self, species: usize, cell: usize) -> f64 {
        self.u[cell * self.n_species + species]
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.u[cell * self.n_species..(cell + 1) * self.n_species]
    }

    pub fn species(&self, species: usize) -> Vec<f64> {
        self.u.iter().skip(species).step_by(self.n_species).copied().collect()
    }

    pub fn biomass(&self) -> Vec<f64> {
        self.u.chunks(self.n_species).map(|c| c.iter().sum()).collect()
    }

    pub fn max_biomass(&self) -> f64 {
        self.biomass().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ_K m(K) u_{i,K}` for each species.
    pub fn masses(&self, cell_measures: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_species];
        for (c, m) in self.u.chunks(self.n_species).zip(cell_measures) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += m * v;
            }
        }
        out
    }
}

/// Constant Dirichlet datum on the Dirichlet boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    u_d: Vec<f64>,
    m_d: f64,
}

impl BoundaryData {
    pub fn new(u_d: Vec<f64>) -> Result<Self> {
        if u_d.is_empty() {
            return Err(Error::Config("Dirichlet datum needs at least one species".into()));
        }
        if let Some(bad) = u_d.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("Dirichlet datum must be positive, got {bad}")));
        }
        let m_d: f64 = u_d.iter().sum();
        if m_d >= 1.0 {
            return Err(Error::Config(format!(
                "Dirichlet datum must satisfy sum of u_D < 1, got {m_d}"
            )));
        }
        Ok(Self { u_d, m_d })
    }

    pub fn u_d(&self) -> &[f64] {
        &self.u_d
    }

    pub fn m_d(&self) -> f64 {
        self.m_d
    }

    pub fn n_species(&self) -> usize {
        self.u_d.len()
    }
}

/// Newton and time-step controls.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// First step, and the fixed step when `adaptive` is false.
    pub dt_init: f64,
    /// Line-search shrink factor.
    pub damping: f64,
    pub max_damping_halvings: usize,
    pub adaptive: bool,
    /// Drop the derivative of the edge mobility from the Jacobian.
    pub frozen_mobility: bool,
    /// Compute entropy and dissipation for every accepted step.
    pub diagnostics: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 50,
            dt_min: 1e-8,
            dt_max: 1e-2,
            dt_init: 1e-5,
            damping: 0.5,
            max_damping_halvings: 30,
            adaptive: true,
            frozen_mobility: false,
            diagnostics: true,
        }
    }
}

impl NewtonConfig {
    /// Fixed step `dt` for every step (the last one clamped to the end time).
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            adaptive: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("Newton tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "time steps must satisfy 0 < dt_min <= dt_init <= dt_max (got {}, {}, {})",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_layout() {
        let s = State::from_species(0.0, &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(s.u, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(s.species(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(s.biomass(), vec![5.0, 7.0, 9.0]);
        assert_eq!(s.cell(2), &[3.0, 6.0]);
        assert_eq!(s.n_cells(), 3);
        assert_eq!(s.masses([0.5, 0.5, 1.0].into_iter()), vec![4.5, 10.5]);
        assert!(State::new(0.0, vec![1.0; 5], 2).is_err());
    }

    #[test]
    fn boundary_data_validation() {
        assert!(BoundaryData::new(vec![0.1, 0.1]).is_ok());
        assert!(matches!(BoundaryData::new(vec![0.6, 0.5]), Err(Error::Config(_))));
        assert!(BoundaryData::new(vec![0.0, 0.1]).is_err());
        assert!((BoundaryData::new(vec![0.1, 0.2]).unwrap().m_d() - 0.3).abs() < 1e-16);
    }

    #[test]
    fn config_validation() {
        assert!(NewtonConfig::default().validate().is_ok());
        assert!(NewtonConfig::fixed(1e-5).validate().is_ok());
        let bad = NewtonConfig {
            dt_init: 1.0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
