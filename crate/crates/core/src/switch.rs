//! The fast regime-switching decision and the integrand evaluation strategies.
//!
//! The decision compares the decimal orders of the two summands of `C`
//! (`C₁ = 2/B²` and `C₂`) at `k = i/2`. A large order difference means the
//! subtraction `Yτ − C₁C₂` cancels catastrophically in binary64, so the
//! integrand is then evaluated with `C` computed in extended precision.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::model::{MarketQuote, ModelError, ModelParams, Prepared};
use crate::precision::{Complex, Extended, PrecisionMode, Working, DEFAULT_DIGITS};

/// Empirical order-difference threshold.
pub const OMEGA0: f64 = 22.0;
/// Integrands with `f₀` at or below this value never switch.
pub const F0_GATE: f64 = 1e-3;

/// Output of the switching decision for one `(params, quote)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecision {
    #[serde(with = "crate::serde_float")]
    pub o1: f64,
    #[serde(with = "crate::serde_float")]
    pub o2: f64,
    #[serde(with = "crate::serde_float")]
    pub o: f64,
    #[serde(with = "crate::serde_float")]
    pub f0: f64,
    #[serde(with = "crate::serde_float")]
    pub omega1: f64,
    #[serde(with = "crate::serde_float")]
    pub omega2: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub par: bool,
}

/// How the integrand is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalStrategy {
    /// Everything in binary64.
    WorkingOnly,
    /// The whole integrand at the given digits, lowered to binary64.
    ExtendedFull(u32),
    /// Only `C` at the given digits; the rest in binary64.
    Optimized(u32),
    /// Decide once, then `Optimized` if switching is needed, else `WorkingOnly`.
    Auto(u32),
    /// Decide once, then `ExtendedFull` if switching is needed, else `WorkingOnly`.
    AutoFull(u32),
}

impl EvalStrategy {
    pub fn digits(&self) -> Option<u32> {
        match *self {
            EvalStrategy::WorkingOnly => None,
            EvalStrategy::ExtendedFull(d)
            | EvalStrategy::Optimized(d)
            | EvalStrategy::Auto(d)
            | EvalStrategy::AutoFull(d) => Some(d),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EvalStrategy::WorkingOnly => "working",
            EvalStrategy::ExtendedFull(_) => "extended",
            EvalStrategy::Optimized(_) => "opt",
            EvalStrategy::Auto(_) => "auto",
            EvalStrategy::AutoFull(_) => "auto-full",
        }
    }
}

impl fmt::Display for EvalStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.digits() {
            Some(d) => write!(f, "{}:{}", self.label(), d),
            None => f.write_str(self.label()),
        }
    }
}

impl FromStr for EvalStrategy {
    type Err = String;

    /// Parses `working`, `extended`, `opt`, `auto`, `auto-full`, optionally suffixed `:<digits>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, digits) = match s.split_once(':') {
            Some((n, d)) => (n, d.parse::<u32>().map_err(|_| format!("bad digit count in '{s}'"))?),
            None => (s, DEFAULT_DIGITS),
        };
        match name {
            "working" | "off" => Ok(EvalStrategy::WorkingOnly),
            "extended" | "on" => Ok(EvalStrategy::ExtendedFull(digits)),
            "opt" => Ok(EvalStrategy::Optimized(digits)),
            "auto" => Ok(EvalStrategy::Auto(digits)),
            "auto-full" => Ok(EvalStrategy::AutoFull(digits)),
            _ => Err(format!("unknown strategy '{name}'")),
        }
    }
}

fn log10_abs(x: f64) -> f64 {
    x.abs().log10()
}

/// `(o₁, o₂, o)` from `Re C₁` and `Re C₂` at `k = i/2` in binary64.
pub fn order_difference(params: &ModelParams, quote: &MarketQuote) -> Result<(f64, f64, f64), ModelError> {
    let prep = Prepared::new(Working, params, quote);
    let terms = prep.terms(&prep.contour(0.0))?;
    Ok(orders(terms.log_prefactor.re, terms.log_term.re))
}

fn orders(c1: f64, c2: f64) -> (f64, f64, f64) {
    let o1 = log10_abs(c1);
    let o2 = log10_abs(c2);
    (o1, o2, o1 - o2)
}

/// Strike correction `ω₁ = min(5, max(4 − log₁₀(K/3), 0))`.
pub fn omega1(strike: f64) -> Result<f64, ModelError> {
    if !(strike.is_finite() && strike > 0.0) {
        return Err(ModelError::InvalidQuote(format!("strike = {strike} must be > 0")));
    }
    Ok((4.0 - (strike / 3.0).log10()).max(0.0).min(5.0))
}

/// Magnitude correction `ω₂ = min(log₁₀ f₀, 0)`; `f₀ = 0` gives `−∞`.
pub fn omega2(f0: f64) -> f64 {
    f0.abs().log10().min(0.0)
}

/// Runs the decision with the default threshold `ω₀ = 22`.
pub fn decide(params: &ModelParams, quote: &MarketQuote) -> Result<SwitchDecision, ModelError> {
    decide_with(params, quote, OMEGA0)
}

/// Runs the decision with a custom `ω₀`. Costs one binary64 integrand evaluation.
pub fn decide_with(params: &ModelParams, quote: &MarketQuote, omega0: f64) -> Result<SwitchDecision, ModelError> {
    let prep = Prepared::new(Working, params, quote);
    let (f, terms) = prep.integrand_with_terms(&prep.contour(0.0))?;
    let (o1, o2, o) = orders(terms.log_prefactor.re, terms.log_term.re);
    let f0 = f.re.abs();
    let omega1 = omega1(quote.strike)?;
    let omega2 = omega2(f0);
    let threshold = omega0 + omega1 - omega2;
    let par = f0 > F0_GATE && o > omega0 && o > threshold;
    Ok(SwitchDecision { o1, o2, o, f0, omega1, omega2, threshold, par })
}

/// Aggregated switch counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchStats {
    pub decisions_total: u64,
    pub switched_to_extended: u64,
}

/// Thread-safe switch counters owned by the caller.
#[derive(Debug, Default)]
pub struct SwitchTelemetry {
    decisions: AtomicU64,
    switched: AtomicU64,
}

impl SwitchTelemetry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, switched: bool) {
        self.decisions.fetch_add(1, Ordering::Relaxed);
        if switched {
            self.switched.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> SwitchStats {
        SwitchStats {
            decisions_total: self.decisions.load(Ordering::Relaxed),
            switched_to_extended: self.switched.load(Ordering::Relaxed),
        }
    }
}

/// Integrand evaluator with its strategy frozen for a whole integral.
#[derive(Debug)]
pub struct Evaluator {
    requested: EvalStrategy,
    used: EvalStrategy,
    decision: SwitchDecision,
    working: Prepared<Working>,
    extended: Option<Prepared<Extended>>,
    evals: AtomicU64,
}

impl Evaluator {
    /// Builds the evaluator. The decision is always computed and recorded;
    /// only the `Auto` variants act on it.
    pub fn new(params: &ModelParams, quote: &MarketQuote, strategy: EvalStrategy) -> Result<Self, ModelError> {
        let decision = decide(params, quote)?;
        let used = match strategy {
            EvalStrategy::Auto(d) if decision.par => EvalStrategy::Optimized(d),
            EvalStrategy::AutoFull(d) if decision.par => EvalStrategy::ExtendedFull(d),
            EvalStrategy::Auto(_) | EvalStrategy::AutoFull(_) => EvalStrategy::WorkingOnly,
            s => s,
        };
        let extended = match used.digits() {
            Some(d) => {
                PrecisionMode::Extended(d).validate()?;
                Some(Prepared::new(Extended::new(d)?, params, quote))
            }
            None => None,
        };
        Ok(Evaluator {
            requested: strategy,
            used,
            decision,
            working: Prepared::new(Working, params, quote),
            extended,
            evals: AtomicU64::new(0),
        })
    }

    pub fn decision(&self) -> &SwitchDecision {
        &self.decision
    }

    pub fn requested(&self) -> EvalStrategy {
        self.requested
    }

    /// The strategy actually applied (`Auto` resolved).
    pub fn strategy_used(&self) -> EvalStrategy {
        self.used
    }

    /// Whether any factor is computed in extended precision.
    pub fn uses_extended(&self) -> bool {
        self.extended.is_some()
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// `f(x + i/2)` lowered to binary64.
    pub fn eval(&self, x: f64) -> Result<Complex<f64>, ModelError> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let k = self.working.contour(x);
        match (self.used, &self.extended) {
            (EvalStrategy::ExtendedFull(_), Some(ext)) => Ok(ext.integrand(&ext.contour(x), None)?.lower()),
            (EvalStrategy::Optimized(_), Some(ext)) => {
                let c = ext.terms(&ext.contour(x))?.c_term.lower();
                self.working.integrand(&k, Some(c))
            }
            _ => self.working.integrand(&k, None),
        }
    }

    /// `Re f(x + i/2)`, NaN when the model cannot be evaluated.
    pub fn eval_re(&self, x: f64) -> f64 {
        self.eval(x).map(|z| z.re).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcases::{test_case_1, test_case_2};

    #[test]
    fn omega_corrections() {
        assert!((omega1(6250.0).unwrap() - 0.681).abs() < 1e-3);
        assert_eq!(omega1(3.0).unwrap(), 4.0);
        assert_eq!(omega1(3e10).unwrap(), 0.0);
        assert_eq!(omega1(1e-9).unwrap(), 5.0);
        assert!(omega1(0.0).is_err());
        assert_eq!(omega2(2.137), 0.0);
        assert!((omega2(0.12193) + 0.914).abs() < 1e-3);
        assert_eq!(omega2(1.0), 0.0);
        assert_eq!(omega2(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn orders_of_test_case_1() {
        let s = test_case_1(0.001);
        let (o1, o2, o) = order_difference(&s.params, &s.quote).unwrap();
        assert!((o1 - 9.061).abs() < 1e-2 && (o2 + 12.510).abs() < 1e-2 && (o - 21.571).abs() < 1e-2);
        let s = test_case_1(0.00001);
        let (o1, o2, o) = order_difference(&s.params, &s.quote).unwrap();
        assert!((o1 - 13.061).abs() < 1e-2);
        assert_eq!((o2, o), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn decision_table() {
        let rows = [
            (test_case_1(0.001), false),
            (test_case_1(0.0005), true),
            (test_case_1(0.0001), true),
            (test_case_1(0.00005), true),
            (test_case_1(0.00001), true),
            (test_case_1(0.000001), true),
            (test_case_2(0.0001), false),
            (test_case_2(0.00005), false),
            (test_case_2(0.00001), true),
            (test_case_2(0.000001), true),
        ];
        for (s, par) in rows {
            let d = decide(&s.params, &s.quote).unwrap();
            assert_eq!(d.par, par, "{} sigma={}", s.name, s.params.sigma);
            assert!(d.threshold >= OMEGA0);
        }
        let d = decide(&test_case_2(0.00001).params, &test_case_2(0.00001).quote).unwrap();
        assert!((d.threshold - 23.595).abs() < 2e-3);
    }

    #[test]
    fn omega0_override() {
        let s = test_case_1(0.001);
        assert!(decide_with(&s.params, &s.quote, 20.0).unwrap().par);
    }

    #[test]
    fn gate_monotone_in_sigma() {
        let mut seen = false;
        for sigma in [1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 1e-6] {
            let s = test_case_1(sigma);
            let par = decide(&s.params, &s.quote).unwrap().par;
            assert!(!seen || par);
            seen |= par;
        }
    }

    #[test]
    fn auto_resolution() {
        let s = test_case_1(0.0005);
        let ev = Evaluator::new(&s.params, &s.quote, EvalStrategy::Auto(32)).unwrap();
        assert_eq!(ev.strategy_used(), EvalStrategy::Optimized(32));
        let s = test_case_1(0.1);
        let ev = Evaluator::new(&s.params, &s.quote, EvalStrategy::Auto(32)).unwrap();
        assert_eq!(ev.strategy_used(), EvalStrategy::WorkingOnly);
        assert!(!ev.uses_extended());
    }

    #[test]
    fn optimized_matches_full() {
        let s = test_case_1(0.0005);
        let opt = Evaluator::new(&s.params, &s.quote, EvalStrategy::Optimized(32)).unwrap();
        let full = Evaluator::new(&s.params, &s.quote, EvalStrategy::ExtendedFull(32)).unwrap();
        for x in [0.0, 0.5, 1.0, 5.0] {
            assert!((opt.eval(x).unwrap() - full.eval(x).unwrap()).norm() < 1e-9, "{x}");
        }
        assert_eq!(opt.evals(), 4);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("auto".parse::<EvalStrategy>().unwrap(), EvalStrategy::Auto(32));
        assert_eq!("opt:40".parse::<EvalStrategy>().unwrap(), EvalStrategy::Optimized(40));
        assert_eq!("off".parse::<EvalStrategy>().unwrap(), EvalStrategy::WorkingOnly);
        assert!("fast".parse::<EvalStrategy>().is_err());
        assert_eq!(EvalStrategy::ExtendedFull(32).to_string(), "extended:32");
    }

    #[test]
    fn telemetry_counts() {
        let t = SwitchTelemetry::new();
        t.record(true);
        t.record(false);
        assert_eq!(t.snapshot(), SwitchStats { decisions_total: 2, switched_to_extended: 1 });
    }

    #[test]
    fn decision_json_keeps_infinities() {
        let s = test_case_1(0.00001);
        let d = decide(&s.params, &s.quote).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"o\":\"inf\""));
        let back: SwitchDecision = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
