//! Adaptive Gauss–Kronrod integration and tabulated primitives.
//!
//! The 7/15-point pair below is the QUADPACK `qk15` rule. [`integrate`] is a
//! globally adaptive bisection driver in the spirit of `qags` (without the
//! epsilon extrapolation); [`TabulatedPrimitive`] caches cumulative integrals
//! on a fixed grid so repeated evaluations of `∫_0^x f` cost one 15-point
//! panel.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Single 15-point Kronrod panel on `[a, b]`; returns `(kronrod, |kronrod - gauss|)`.
pub fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        resk += WGK[j] * pair;
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (i0, e0) = kronrod15(&f, a, b);
    let mut panels = vec![(a, b, i0, e0)];
    loop {
        let (total, err) = panels
            .iter()
            .fold((0.0, 0.0), |(s, e), p| (s + p.2, e + p.3));
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::domain(
                b,
                format!("non-finite integrand on [{a}, {b}]"),
            ));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::domain(
                b,
                format!("quadrature did not converge on [{a}, {b}] (error estimate {err:e})"),
            ));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Panel cannot be split further in floating point; accept it.
            let (v, _) = kronrod15(&f, lo, hi);
            panels.push((lo, hi, v, 0.0));
            continue;
        }
        let (il, el) = kronrod15(&f, lo, mid);
        let (ir, er) = kronrod15(&f, mid, hi);
        panels.push((lo, mid, il, el));
        panels.push((mid, hi, ir, er));
    }
}

/// Cumulative integral `x ↦ offset + ∫_{x_0}^x f` cached on a monotone grid.
///
/// Nodes store exact (adaptively integrated) cumulative values; a query adds a
/// single Kronrod panel from the nearest node below. Once the cumulative value
/// overflows, every query beyond that node returns `+∞`.
#[derive(Debug, Clone)]
pub struct TabulatedPrimitive {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedPrimitive {
    pub fn build<F: Fn(f64) -> f64>(f: &F, nodes: Vec<f64>, offset: f64, tol: Tolerance) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulation grid must be strictly increasing with at least two nodes".into(),
            ));
        }
        let mut values = Vec::with_capacity(nodes.len());
        let mut acc = offset;
        values.push(acc);
        for w in nodes.windows(2) {
            if acc.is_finite() {
                acc = match integrate(f, w[0], w[1], tol) {
                    Ok(piece) => acc + piece,
                    Err(_) => f64::INFINITY,
                };
            }
            values.push(acc);
        }
        Ok(Self { nodes, values })
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Evaluate the primitive at `x`; `f` must be the integrand used to build it.
    pub fn eval<F: Fn(f64) -> f64>(&self, f: &F, x: f64) -> f64 {
        let j = match self.nodes.partition_point(|&n| n <= x) {
            0 => 0,
            k => k - 1,
        };
        let base = self.values[j];
        if !base.is_finite() {
            return f64::INFINITY;
        }
        let left = self.nodes[j];
        if x == left {
            return base;
        }
        base + kronrod15(f, left, x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_polynomials() {
        // K15 integrates degree 22 exactly.
        let f = |x: f64| x.powi(20) - 3.0 * x.powi(7) + 1.0;
        let exact = 1.0 / 21.0 - 3.0 / 8.0 + 1.0;
        let (v, _) = kronrod15(&f, 0.0, 1.0);
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // ∫_0^1 ln x dx = -1
        let v = integrate(|x: f64| x.ln(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((v + 1.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn adaptive_sharp_exponential() {
        let v = integrate(|x: f64| (50.0 * x).exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        let exact = (50f64.exp() - 1.0) / 50.0;
        assert!(((v - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|x: f64| 1.0 / (1.0 - x), 0.0, 1.0, Tolerance::default()).is_err());
    }

    #[test]
    fn tabulated_primitive_matches_closed_form() {
        let f = |x: f64| x.cos();
        let nodes: Vec<f64> = (0..=64).map(|k| k as f64 / 16.0).collect();
        let tab = TabulatedPrimitive::build(&f, nodes, 0.0, Tolerance::default()).unwrap();
        for k in 0..200 {
            let x = 4.0 * k as f64 / 199.0;
            assert!((tab.eval(&f, x) - x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn tabulation_rejects_bad_grid() {
        let f = |x: f64| x;
        assert!(TabulatedPrimitive::build(&f, vec![0.0, 0.0, 1.0], 0.0, Tolerance::default()).is_err());
    }
}
