//! Piecewise-constant functions that defeat Gauss-Kronrod error estimation.
//!
//! `f_l` takes the values `1 ± ε` with jumps exactly at the `(n, 2n+1)`
//! Gauss-Kronrod abscissas of each of the `2^l` equal subintervals of
//! `[a, b]`. Gauss nodes sit on `1 − ε` plateaus and Kronrod-only nodes on
//! `1 + ε` plateaus, while the exact integral stays `b − a`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{integrate_gauss_kronrod, kronrod_extension, map_node, KronrodRule, QuadError, QuadSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FailureError {
    #[error("no Kronrod extension available for n = {0}")]
    NoKronrod(usize),
    #[error("invalid construction: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Maximum refinement level of the construction.
pub const MAX_LEVEL: u32 = 20;

/// Step function aligned to rule abscissas.
#[derive(Debug, Clone, PartialEq)]
pub struct AbscissaAlignedFn {
    pub n: usize,
    pub level: u32,
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    // Left endpoints of the plateaus, ascending, starting with `a`.
    breaks: Vec<f64>,
    high: Vec<bool>,
}

impl AbscissaAlignedFn {
    /// Plateau value; each plateau is `[left, right)`, the last one is closed.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x).saturating_sub(1);
        if self.high[idx] {
            1.0 + self.eps
        } else {
            1.0 - self.eps
        }
    }

    /// Exact integral `Σ value × length` over all plateaus.
    pub fn exact_integral(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.breaks.len() {
            let right = self.breaks.get(i + 1).copied().unwrap_or(self.b);
            let v = if self.high[i] { 1.0 + self.eps } else { 1.0 - self.eps };
            s += v * (right - self.breaks[i]);
        }
        s
    }

    /// Plateau boundaries, for plotting.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }
}

fn rule_for(n: usize) -> Result<std::sync::Arc<KronrodRule>, FailureError> {
    kronrod_extension(n).ok_or(FailureError::NoKronrod(n))
}

/// Builds `f_l` for the `(n, 2n+1)` pair on `[a, b]`.
pub fn build_failure_fn(n: usize, level: u32, eps: f64, a: f64, b: f64) -> Result<AbscissaAlignedFn, FailureError> {
    if n < 2 {
        return Err(FailureError::Invalid(format!("n = {n} must be >= 2")));
    }
    if level > MAX_LEVEL {
        return Err(FailureError::Invalid(format!("level {level} above {MAX_LEVEL}")));
    }
    if !(eps.is_finite() && eps >= 0.0) || !(a.is_finite() && b.is_finite() && a < b) {
        return Err(FailureError::Invalid(format!("need eps >= 0 and a < b, got eps {eps}, [{a}, {b}]")));
    }
    let rule = rule_for(n)?;
    let parts = 1usize << level;
    let edge = |i: usize| if i == parts { b } else { a + (b - a) * (i as f64 / parts as f64) };
    let mut breaks = Vec::with_capacity(parts * (2 * n + 2));
    let mut high = Vec::with_capacity(breaks.capacity());
    for i in 0..parts {
        let (lo, hi) = (edge(i), edge(i + 1));
        breaks.push(lo);
        high.push(false);
        for (j, &t) in rule.kronrod.nodes.iter().enumerate() {
            // Kronrod-only nodes are at even 0-based positions.
            breaks.push(map_node(lo, hi, t));
            high.push(j % 2 == 0);
        }
    }
    Ok(AbscissaAlignedFn { n, level, eps, a, b, breaks, high })
}

/// `C_n` from the rule weights: `(Σ w_kronrod-only − Σ w_gauss-positions) / 2` on `[−1, 1]`.
pub fn kronrod_offset(n: usize) -> Result<f64, FailureError> {
    let rule = rule_for(n)?;
    let (mut odd, mut even) = (0.0, 0.0);
    for (j, w) in rule.kronrod.weights.iter().enumerate() {
        if j % 2 == 0 {
            odd += w;
        } else {
            even += w;
        }
    }
    Ok(0.5 * (odd - even))
}

/// `E₀ = ε (b − a) |1 + C_n|`, the initial `|G_n − K_{2n+1}|` on `f₀`.
///
/// ```
/// let e0 = quadprice::failure::analytic_e0(7, 1e-4, -1.0, 1.0).unwrap();
/// assert!((e0 - 2.004652e-4).abs() < 1e-9);
/// ```
pub fn analytic_e0(n: usize, eps: f64, a: f64, b: f64) -> Result<f64, FailureError> {
    Ok(eps * (b - a) * (1.0 + kronrod_offset(n)?).abs())
}

/// One row of a refinement blow-up trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub level: u32,
    pub eps: f64,
    pub leaves: u64,
    pub fevals: u64,
    pub value: f64,
    pub exact: f64,
    pub true_error: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

impl BlowupRow {
    /// The estimate claims more accuracy than was achieved.
    pub fn deceived(&self) -> bool {
        self.true_error > self.error_estimate
    }
}

/// Runs the adaptive `(n, 2n+1)` integrator on `f_l` over `[−1, 1]`.
pub fn blowup_profile(n: usize, level: u32, eps: f64, spec: &QuadSpec) -> Result<BlowupRow, FailureError> {
    let (a, b) = (-1.0, 1.0);
    let f = build_failure_fn(n, level, eps, a, b)?;
    let rule = rule_for(n)?;
    let r = integrate_gauss_kronrod(|x| f.eval(x), &rule, a, b, spec)?;
    let exact = b - a;
    Ok(BlowupRow {
        level,
        eps,
        leaves: r.subintervals,
        fevals: r.fevals,
        value: r.value,
        exact,
        true_error: (r.value - exact).abs(),
        error_estimate: r.error_estimate,
        converged: r.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gk15, Method};

    #[test]
    fn e0_matches_hand_value() {
        let e0 = analytic_e0(7, 1e-4, -1.0, 1.0).unwrap();
        assert!((e0 - 2.004652e-4).abs() < 1e-9);
        assert_eq!(analytic_e0(7, 0.0, -1.0, 1.0).unwrap(), 0.0);
        let e1 = analytic_e0(7, 2e-4, -1.0, 1.0).unwrap();
        assert!((e1 - 2.0 * e0).abs() < 1e-18);
        let e2 = analytic_e0(7, 1e-4, 0.0, 4.0).unwrap();
        assert!((e2 - 2.0 * e0).abs() < 1e-18);
    }

    #[test]
    fn level_zero_gauss_and_kronrod_sums() {
        let rule = gk15();
        for eps in [1e-3, 1e-4, 1e-5] {
            let f = build_failure_fn(7, 0, eps, -1.0, 1.0).unwrap();
            let g: f64 = rule.gauss.nodes.iter().zip(&rule.gauss.weights).map(|(&x, w)| w * f.eval(x)).sum();
            let k: f64 = rule.kronrod.nodes.iter().zip(&rule.kronrod.weights).map(|(&x, w)| w * f.eval(x)).sum();
            assert!((g - (1.0 - eps) * 2.0).abs() < 1e-14);
            let e0 = analytic_e0(7, eps, -1.0, 1.0).unwrap();
            assert!(((g - k).abs() - e0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_integral_is_length() {
        for l in [0, 2, 5, 8] {
            let f = build_failure_fn(7, l, 1e-4, -1.0, 1.0).unwrap();
            assert!((f.exact_integral() - 2.0).abs() < 1e-12, "level {l}");
        }
        let f = build_failure_fn(3, 2, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(f.breakpoints().len(), 4 * 8);
        assert!((f.exact_integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn node_values() {
        let f = build_failure_fn(7, 3, 1e-4, -1.0, 1.0).unwrap();
        let rule = gk15();
        let (lo, hi) = (-0.75, -0.5);
        for (j, &t) in rule.kronrod.nodes.iter().enumerate() {
            let v = f.eval(map_node(lo, hi, t));
            assert_eq!(v, if j % 2 == 0 { 1.0 + 1e-4 } else { 1.0 - 1e-4 });
        }
    }

    #[test]
    fn constant_when_eps_zero() {
        let f = build_failure_fn(7, 4, 0.0, -1.0, 1.0).unwrap();
        let r = crate::quadrature::integrate(|x| f.eval(x), -1.0, 1.0, &QuadSpec::with_method(Method::GaussKronrod715)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-14);
        let row = blowup_profile(7, 4, 1e-12, &QuadSpec::default()).unwrap();
        assert_eq!(row.leaves, 10);
    }

    #[test]
    fn refinement_doubles_per_level() {
        let spec = QuadSpec { initial_panels: 1, ..QuadSpec::default() };
        let row = blowup_profile(7, 0, 1e-4, &spec).unwrap();
        assert!(row.leaves > 1);
        let leaves: Vec<u64> = (2..=5).map(|l| blowup_profile(7, l, 1e-4, &QuadSpec::default()).unwrap().leaves).collect();
        assert!(leaves.windows(2).all(|w| w[1] >= 2 * w[0]), "{leaves:?}");
    }

    #[test]
    fn estimate_can_be_deceived() {
        let deceived = [2, 4, 6]
            .iter()
            .flat_map(|&l| [1e-4, 1e-5].map(|eps| blowup_profile(7, l, eps, &QuadSpec::default()).unwrap()))
            .filter(BlowupRow::deceived)
            .count();
        assert!(deceived > 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_failure_fn(1, 0, 1e-4, -1.0, 1.0).is_err());
        assert!(build_failure_fn(7, 21, 1e-4, -1.0, 1.0).is_err());
        assert!(build_failure_fn(7, 0, 1e-4, 1.0, -1.0).is_err());
    }
}
