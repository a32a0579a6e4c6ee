//! European call prices from the semi-closed integral.
//!
//! `V = S − K e^{−rτ} (1/π) ∫₀^∞ Re f(x + i/2) dx`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{JumpSpec, MarketQuote, ModelError, ModelParams};
use crate::quadrature::{integrate_semi_infinite, QuadError, QuadSpec, QuadratureResult};
use crate::switch::{EvalStrategy, Evaluator, SwitchDecision};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Price with its integral and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub price: f64,
    pub integral: f64,
    pub quad: QuadratureResult,
    pub decision: SwitchDecision,
    pub strategy_requested: EvalStrategy,
    pub strategy_used: EvalStrategy,
}

impl PriceResult {
    /// `max(0, S − K e^{−rτ}) − tol ≤ V ≤ S + tol` with `tol = 10·abs_tol·K`.
    pub fn within_no_arbitrage(&self, quote: &MarketQuote, abs_tol: f64) -> bool {
        let tol = 10.0 * abs_tol * quote.strike;
        let lower = (quote.spot - quote.strike * (-quote.rate * quote.tau).exp()).max(0.0);
        self.price >= lower - tol && self.price <= quote.spot + tol
    }
}

/// `S − K e^{−rτ} · integral / π`.
pub fn price_from_integral(quote: &MarketQuote, integral: f64) -> f64 {
    quote.spot - quote.strike * (-quote.rate * quote.tau).exp() * integral / PI
}

/// Prices a call with the given quadrature and evaluation strategy.
///
/// Non-convergence of the quadrature is reported through `quad.converged`.
pub fn price_call(
    params: &ModelParams,
    quote: &MarketQuote,
    spec: &QuadSpec,
    strategy: EvalStrategy,
) -> Result<PriceResult, PricingError> {
    quote.validate()?;
    let ev = Evaluator::new(params, quote, strategy)?;
    let mut model_err = None;
    let quad = integrate_semi_infinite(
        |x| match ev.eval(x) {
            Ok(z) => z.re,
            Err(e) => {
                model_err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        spec,
    );
    if let Some(e) = model_err {
        return Err(e.into());
    }
    let quad = quad?;
    Ok(PriceResult {
        price: price_from_integral(quote, quad.value),
        integral: quad.value,
        decision: *ev.decision(),
        strategy_requested: strategy,
        strategy_used: ev.strategy_used(),
        quad,
    })
}

/// Model family used for pricing and calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `(v0, κ, θ, σ, ρ)`
    Heston,
    /// Heston plus `(λ, μ_J, σ_J)`
    Bates,
    /// Bates plus `H`
    Afsvjd,
}

impl ModelKind {
    pub fn dimension(&self) -> usize {
        match self {
            ModelKind::Heston => 5,
            ModelKind::Bates => 8,
            ModelKind::Afsvjd => 9,
        }
    }

    /// Full parameters from a vector of length [`dimension`](Self::dimension).
    pub fn params(&self, v: &[f64], epsilon: f64) -> Result<ModelParams, ModelError> {
        if v.len() != self.dimension() {
            return Err(ModelError::InvalidParams(format!(
                "{self} takes {} parameters, got {}",
                self.dimension(),
                v.len()
            )));
        }
        let mut chi = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
        chi[..v.len()].copy_from_slice(v);
        let mut p = ModelParams::from_vector(&chi, epsilon);
        if *self == ModelKind::Heston {
            p.jump = JumpSpec::None;
        }
        Ok(p)
    }

    /// The free components of a full parameter set.
    pub fn project(&self, p: &ModelParams) -> Vec<f64> {
        p.to_vector()[..self.dimension()].to_vec()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Heston => "heston",
            ModelKind::Bates => "bates",
            ModelKind::Afsvjd => "afsvjd",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "heston" => Ok(ModelKind::Heston),
            "bates" => Ok(ModelKind::Bates),
            "afsvjd" => Ok(ModelKind::Afsvjd),
            _ => Err(format!("unknown model '{s}'")),
        }
    }
}

/// Prices under a reduced model; missing components are `λ = 0` and/or `H = 1/2`.
pub fn price_call_reduced(
    model: ModelKind,
    params: &[f64],
    epsilon: f64,
    quote: &MarketQuote,
    spec: &QuadSpec,
    strategy: EvalStrategy,
) -> Result<PriceResult, PricingError> {
    let p = model.params(params, epsilon)?;
    price_call(&p, quote, spec, strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcases::{hundred_dollar, test_case_1};

    #[test]
    fn test_case_1_reference_integral() {
        let s = test_case_1(0.1);
        let r = price_call(&s.params, &s.quote, &QuadSpec::default(), EvalStrategy::ExtendedFull(32)).unwrap();
        assert!((r.integral - 0.77681477572).abs() < 1e-9, "{}", r.integral);
        assert!(r.quad.converged);
        assert!(r.within_no_arbitrage(&s.quote, 1e-10));
        assert_eq!(r.price, price_from_integral(&s.quote, r.integral));
    }

    #[test]
    fn hundred_dollar_auto() {
        let s = hundred_dollar();
        let r = price_call(&s.params, &s.quote, &QuadSpec::default(), EvalStrategy::Auto(32)).unwrap();
        assert!(r.decision.par);
        assert!((r.integral - 1.51691623).abs() < 1e-7, "{}", r.integral);
        assert!((r.price - 3999.167).abs() < 0.01, "{}", r.price);
    }

    #[test]
    fn dimension_checks() {
        assert!(ModelKind::Heston.params(&[0.1; 4], 1e-3).is_err());
        let p = ModelKind::Bates.params(&[0.1, 1.0, 0.1, 0.2, -0.5, 1.0, -0.1, 0.2], 1e-3).unwrap();
        assert_eq!(p.hurst, 0.5);
        let p = ModelKind::Heston.params(&[0.1, 1.0, 0.1, 0.2, -0.5], 1e-3).unwrap();
        assert_eq!((p.lambda, p.jump), (0.0, JumpSpec::None));
        assert_eq!("Bates".parse::<ModelKind>().unwrap(), ModelKind::Bates);
    }
}
