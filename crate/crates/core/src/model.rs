//! Model nonlinearities `p`, `g = q/p` and the entropy density.
//!
//! With `G(M) = ∫_0^M s^a / ((1-s)^b p(s)^2) ds` the ratio entering the fluxes
//! is `g(M) = q(M)/p(M) = G(M)/M`, and `G'(M)` is the integrand itself. The
//! scheme only needs `u_i g(M)` and its derivatives, so `g` is the primary
//! object here; `q` is never formed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, kronrod15, TabulatedPrimitive, Tolerance};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Below this `M`, `g` and `g'` use the leading term `C M^a`.
const SERIES_CUTOFF: f64 = 1e-12;
/// Split point for `∫_0^M log g`; the first piece is integrated analytically.
const LOG_SPLIT: f64 = 1e-6;
const TABLE_TOP: f64 = 1.0 - 1e-6;
/// Case 1 closed form loses digits to cancellation below this `M`.
const CASE1_CLOSED_FORM_MIN: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    /// Exponent of the growth condition on `p` near 1; informational only.
    pub kappa: Option<f64>,
    pub alphas: Vec<f64>,
}

impl ModelParams {
    pub fn n_species(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 1.0) || !(self.b >= 1.0) {
            return Err(Error::Model(format!("exponents must satisfy a, b >= 1 (a = {}, b = {})", self.a, self.b)));
        }
        if self.alphas.is_empty() {
            return Err(Error::Model("at least one species is required".into()));
        }
        if let Some(bad) = self.alphas.iter().find(|&&al| !(al > 0.0) || !al.is_finite()) {
            return Err(Error::Model(format!("diffusion coefficients must be positive, got {bad}")));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(Error::Model(format!("kappa must be positive, got {k}")));
            }
        }
        Ok(())
    }

    /// Equal unit diffusivities, required for the theoretical guarantees.
    pub fn check_unit_alphas(&self) -> Result<()> {
        if self.alphas.iter().all(|&a| a == 1.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "strict theory mode requires all diffusion coefficients equal to 1, got {:?}",
                self.alphas
            )))
        }
    }
}

/// Named choices of `p` for generic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedP {
    /// `1 - x`
    Linear,
    /// `exp(-1/(1-x))`
    Exponential,
    /// `(1 - x)^k`, `k >= 1`
    Power(f64),
}

impl NamedP {
    pub fn functions(self) -> (ScalarFn, ScalarFn) {
        match self {
            NamedP::Linear => (Arc::new(|x| 1.0 - x), Arc::new(|_| -1.0)),
            NamedP::Exponential => (Arc::new(exp_p), Arc::new(exp_p_prime)),
            NamedP::Power(k) => (
                Arc::new(move |x: f64| (1.0 - x).max(0.0).powf(k)),
                Arc::new(move |x: f64| -k * (1.0 - x).max(0.0).powf(k - 1.0)),
            ),
        }
    }
}

impl FromStr for NamedP {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "linear" => Ok(NamedP::Linear),
            "exponential" => Ok(NamedP::Exponential),
            _ => {
                if let Some(k) = s.strip_prefix("power:") {
                    let k: f64 = k
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad exponent in `{s}`")))?;
                    if k < 1.0 {
                        return Err(Error::Config(format!("power exponent must be >= 1, got {k}")));
                    }
                    Ok(NamedP::Power(k))
                } else {
                    Err(Error::Config(format!(
                        "unknown p `{s}` (expected linear, exponential or power:<k>)"
                    )))
                }
            }
        }
    }
}

fn exp_p(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x)).exp()
    }
}

fn exp_p_prime(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        let r = 1.0 - x;
        -exp_p(x) / (r * r)
    }
}

#[derive(Clone)]
enum Kind {
    Case1,
    Case2,
    Generic {
        p: ScalarFn,
        p_prime: ScalarFn,
        primitive: Arc<TabulatedPrimitive>,
    },
}

/// The pair `(p, g)` together with cached primitives.
///
/// Immutable after construction; all caches are built eagerly.
#[derive(Clone)]
pub struct ModelFunctions {
    name: String,
    params: ModelParams,
    kind: Kind,
    satisfies_h4: bool,
    // lim_{M→0} g(M) / M^a
    leading_coeff: f64,
    // slope of ln(g / (C M^a)) at 0
    log_correction: f64,
    log_g_primitive: Option<Arc<TabulatedPrimitive>>,
}

impl fmt::Debug for ModelFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFunctions")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("satisfies_h4", &self.satisfies_h4)
            .finish()
    }
}

fn table_nodes() -> Vec<f64> {
    let mut nodes = vec![0.0];
    // geometric in M near 0, uniform in the middle, geometric in 1 - M near 1
    let n_low = 160;
    for k in 0..n_low {
        nodes.push(LOG_SPLIT * (1e-2f64 / LOG_SPLIT).powf(k as f64 / n_low as f64));
    }
    let n_mid = 3040;
    for k in 0..n_mid {
        nodes.push(1e-2 + (0.9 - 1e-2) * k as f64 / n_mid as f64);
    }
    let n_high = 895;
    for k in 0..=n_high {
        nodes.push(1.0 - 0.1 * ((1.0 - TABLE_TOP) / 0.1).powf(k as f64 / n_high as f64));
    }
    nodes
}

fn table_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 200,
    }
}

/// `p(x) = exp(-1/(1-x))`, `a = b = 2`, `κ = 1`.
pub fn model_case1() -> ModelFunctions {
    ModelFunctions::finish(
        "case1",
        ModelParams {
            a: 2.0,
            b: 2.0,
            kappa: Some(1.0),
            alphas: vec![1.0, 1.0],
        },
        Kind::Case1,
        true,
    )
    .expect("built-in model is valid")
}

/// `p(x) = 1 - x`, `a = b = 1`; does not satisfy the growth condition near 1.
pub fn model_case2() -> ModelFunctions {
    ModelFunctions::finish(
        "case2",
        ModelParams {
            a: 1.0,
            b: 1.0,
            kappa: None,
            alphas: vec![1.0, 1.0],
        },
        Kind::Case2,
        false,
    )
    .expect("built-in model is valid")
}

/// A model with user supplied `p`. `G` is tabulated by adaptive quadrature.
pub fn model_generic(p: ScalarFn, p_prime: ScalarFn, params: ModelParams) -> Result<ModelFunctions> {
    params.validate()?;
    let p0 = p(0.0);
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::Model(format!("p(0) must be positive and finite, got {p0}")));
    }
    let p1 = p(1.0);
    if p1.abs() > 1e-12 {
        return Err(Error::Model(format!("p(1) must vanish, got {p1}")));
    }
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    for w in grid.windows(2) {
        let (pa, pb) = (p(w[0]), p(w[1]));
        if pb > pa * (1.0 + 1e-14) {
            return Err(Error::Model(format!("p increases on [{}, {}]", w[0], w[1])));
        }
    }
    for k in 1..10 {
        let x = k as f64 / 10.0;
        let h = 1e-6;
        let fd = (p(x + h) - p(x - h)) / (2.0 * h);
        let exact = p_prime(x);
        if (fd - exact).abs() > 1e-5 * fd.abs().max(1e-8) {
            return Err(Error::Model(format!(
                "p' is inconsistent with p at x = {x}: analytic {exact}, finite difference {fd}"
            )));
        }
    }
    let (a, b) = (params.a, params.b);
    let integrand = {
        let p = p.clone();
        move |s: f64| {
            let ps = p(s);
            s.powf(a) / ((1.0 - s).powf(b) * ps * ps)
        }
    };
    let primitive = TabulatedPrimitive::build(&integrand, table_nodes(), 0.0, table_tolerance())?;
    let h4 = params.kappa.is_some();
    ModelFunctions::finish(
        "generic",
        params,
        Kind::Generic {
            p,
            p_prime,
            primitive: Arc::new(primitive),
        },
        h4,
    )
}

impl ModelFunctions {
    fn finish(name: &str, params: ModelParams, kind: Kind, satisfies_h4: bool) -> Result<Self> {
        params.validate()?;
        let mut model = Self {
            name: name.to_string(),
            params,
            kind,
            satisfies_h4,
            leading_coeff: 0.0,
            log_correction: 0.0,
            log_g_primitive: None,
        };
        let p0 = model.p(0.0);
        model.leading_coeff = 1.0 / ((model.params.a + 1.0) * p0 * p0);
        model.log_correction =
            (model.log_g(LOG_SPLIT) - model.leading_coeff.ln() - model.params.a * LOG_SPLIT.ln()) / LOG_SPLIT;
        if !matches!(model.kind, Kind::Case2) {
            let offset = model.log_g_head(LOG_SPLIT);
            let nodes: Vec<f64> = table_nodes().into_iter().filter(|&x| x >= LOG_SPLIT).collect();
            let m = model.clone();
            let table = TabulatedPrimitive::build(
                &move |s: f64| m.log_g(s),
                nodes,
                offset,
                Tolerance {
                    abs: 1e-15,
                    rel: 1e-13,
                    max_intervals: 200,
                },
            )?;
            model.log_g_primitive = Some(Arc::new(table));
        }
        Ok(model)
    }

    /// Replace the diffusion coefficients (and with them the species count).
    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Result<Self> {
        self.params.alphas = alphas;
        self.params.validate()?;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn alphas(&self) -> &[f64] {
        &self.params.alphas
    }

    pub fn n_species(&self) -> usize {
        self.params.n_species()
    }

    pub fn satisfies_h4(&self) -> bool {
        self.satisfies_h4
    }

    pub fn p(&self, m: f64) -> f64 {
        match &self.kind {
            Kind::Case1 => exp_p(m),
            Kind::Case2 => (1.0 - m).max(0.0),
            Kind::Generic { p, .. } => p(m),
        }
    }

    pub fn p_prime(&self, m: f64) -> f64 {
        match &self.kind {
            Kind::Case1 => exp_p_prime(m),
            Kind::Case2 => -1.0,
            Kind::Generic { p_prime, .. } => p_prime(m),
        }
    }

    /// `G'(s) = s^a / ((1-s)^b p(s)^2)`.
    pub fn integrand(&self, s: f64) -> f64 {
        match self.kind {
            Kind::Case1 => {
                let r = 1.0 - s;
                s * s / (r * r) * (2.0 / r).exp()
            }
            Kind::Case2 => {
                let r = 1.0 - s;
                s / (r * r * r)
            }
            Kind::Generic { .. } => {
                let ps = self.p(s);
                s.powf(self.params.a) / ((1.0 - s).powf(self.params.b) * ps * ps)
            }
        }
    }

    /// `G(M) = ∫_0^M G'(s) ds`.
    pub fn primitive(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        if m >= 1.0 {
            return f64::INFINITY;
        }
        match &self.kind {
            Kind::Case1 => {
                if m < CASE1_CLOSED_FORM_MIN {
                    kronrod15(&|s| self.integrand(s), 0.0, m).0
                } else {
                    let e2 = std::f64::consts::E * std::f64::consts::E;
                    (2.0 / (1.0 - m)).exp() * (m - 0.5) + 0.5 * e2
                }
            }
            Kind::Case2 => {
                let r = 1.0 - m;
                m * m / (2.0 * r * r)
            }
            Kind::Generic { primitive, .. } => primitive.eval(&|s| self.integrand(s), m),
        }
    }

    /// `g(M) = q(M)/p(M)`, extended by `g(0) = 0`.
    pub fn g(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        if m >= 1.0 {
            return f64::INFINITY;
        }
        if let Kind::Case2 = self.kind {
            let r = 1.0 - m;
            return m / (2.0 * r * r);
        }
        if m < SERIES_CUTOFF {
            return self.leading_coeff * m.powf(self.params.a);
        }
        self.primitive(m) / m
    }

    pub fn g_prime(&self, m: f64) -> f64 {
        if m >= 1.0 {
            return f64::INFINITY;
        }
        if let Kind::Case2 = self.kind {
            let r = 1.0 - m.max(0.0);
            return (1.0 + m.max(0.0)) / (2.0 * r * r * r);
        }
        let a = self.params.a;
        if m <= 0.0 {
            return if a == 1.0 { self.leading_coeff } else { 0.0 };
        }
        if m < SERIES_CUTOFF {
            return a * self.leading_coeff * m.powf(a - 1.0);
        }
        (self.integrand(m) * m - self.primitive(m)) / (m * m)
    }

    /// `g` by direct adaptive quadrature of the defining integral; used to
    /// verify the closed forms and tabulations.
    pub fn g_quadrature(&self, m: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&m) {
            return Err(Error::domain(m, "g is defined on [0, 1)"));
        }
        if m == 0.0 {
            return Ok(0.0);
        }
        let big_g = integrate(|s| self.integrand(s), 0.0, m, Tolerance { abs: 1e-300, ..Default::default() })?;
        Ok(big_g / m)
    }

    /// `g(M)`, reporting overflow near `M = 1` as a domain error.
    pub fn checked_g(&self, m: f64) -> Result<f64> {
        let v = self.g(m);
        if v.is_finite() && m >= 0.0 {
            Ok(v)
        } else {
            Err(Error::domain(m, "g is not finite"))
        }
    }

    /// `ln g(M)` for `M > 0`, avoiding overflow of the case 1 exponential.
    pub fn log_g(&self, m: f64) -> f64 {
        if let Kind::Case1 = self.kind {
            if m > 0.5 && m < 1.0 {
                let e2 = std::f64::consts::E * std::f64::consts::E;
                let r = 1.0 - m;
                return 2.0 / r + (m - 0.5 + 0.5 * e2 * (-2.0 / r).exp()).ln() - m.ln();
            }
        }
        self.g(m).ln()
    }

    /// `p(M)^2 g(M) = p(M) q(M)`.
    pub fn pq(&self, m: f64) -> f64 {
        let p = self.p(m);
        if p == 0.0 {
            return 0.0;
        }
        p * p * self.g(m)
    }

    // ∫_0^m (ln C + a ln s + c s) ds, the small-M expansion of ∫ ln g.
    fn log_g_head(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        m * self.leading_coeff.ln() + self.params.a * (m * m.ln() - m) + 0.5 * self.log_correction * m * m
    }

    /// `Φ(M) = ∫_0^M ln g(s) ds`.
    pub fn log_g_integral(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        if m >= 1.0 {
            return f64::INFINITY;
        }
        match &self.log_g_primitive {
            None => {
                // case 2: ln g = ln s - ln 2 - 2 ln(1-s)
                let r = 1.0 - m;
                let rl = if r > 0.0 { r * r.ln() } else { 0.0 };
                m * m.ln() + m - m * std::f64::consts::LN_2 + 2.0 * rl
            }
            Some(table) => {
                if m < LOG_SPLIT {
                    self.log_g_head(m)
                } else if m > table.upper() {
                    f64::INFINITY
                } else {
                    table.eval(&|s| self.log_g(s), m)
                }
            }
        }
    }

    /// `(p_σ)^2 = (p(M_K)^2 + p(M_{K,σ})^2) / 2`.
    pub fn flux_coefficient_edge(&self, m_k: f64, m_ks: f64) -> Result<f64> {
        for m in [m_k, m_ks] {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::domain(m, "edge mobility needs M in [0, 1]"));
            }
        }
        let (pk, pl) = (self.p(m_k), self.p(m_ks));
        Ok(0.5 * (pk * pk + pl * pl))
    }

    /// Relative entropy density `h*(u | u_D)`.
    pub fn relative_entropy(&self, u: &[f64], u_d: &[f64]) -> Result<f64> {
        if u.len() != u_d.len() {
            return Err(Error::InvalidArgument("species vectors differ in length".into()));
        }
        if let Some(&bad) = u.iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::domain(bad, "species proportions must be nonnegative"));
        }
        if let Some(&bad) = u_d.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::domain(bad, "reference state must be positive"));
        }
        let m: f64 = u.iter().sum();
        let m_d: f64 = u_d.iter().sum();
        if m >= 1.0 || m_d >= 1.0 {
            return Err(Error::domain(m.max(m_d), "total biomass must stay below 1"));
        }
        let species: f64 = u
            .iter()
            .zip(u_d)
            .map(|(&ui, &di)| {
                let log_term = if ui > 0.0 { ui * (ui / di).ln() } else { 0.0 };
                log_term - ui + di
            })
            .sum();
        let biomass = self.log_g_integral(m) - self.log_g_integral(m_d) - self.log_g(m_d) * (m - m_d);
        let h = species + biomass;
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::domain(m, "entropy density is not finite"))
        }
    }
}

/// `h*(u | u_D)` for `model`.
pub fn entropy_density(u: &[f64], model: &ModelFunctions, u_d: &[f64]) -> Result<f64> {
    model.relative_entropy(u, u_d)
}
