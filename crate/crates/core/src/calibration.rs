//! Weighted least-squares calibration: genetic search, then bounded
//! Levenberg-Marquardt.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MarketQuote, ModelError, ModelParams, PARAM_LOWER, PARAM_UPPER};
use crate::precision::DEFAULT_DIGITS;
use crate::pricing::{price_call_reduced, ModelKind};
use crate::quadrature::QuadSpec;
use crate::switch::{EvalStrategy, SwitchStats, SwitchTelemetry};

pub const SCHEMA_VERSION: u32 = 1;
/// Objective contribution of one option whose price could not be computed.
pub const PENALTY: f64 = 1e6;
pub const SIGMA_LOWER_BOUND: f64 = 1e-4;
pub const CALIBRATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("option chain is empty")]
    EmptyChain,
    #[error("option {index}: spread {spread} must be > 0")]
    BadSpread { index: usize, spread: f64 },
    #[error("option {index}: market price {price} must be > 0")]
    BadPrice { index: usize, price: f64 },
    #[error("option {index}: {source}")]
    Quote { index: usize, source: ModelError },
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One quoted call: market data with bid/ask and the mid price `C*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOption {
    pub quote: MarketQuote,
    pub mid: f64,
}

impl ChainOption {
    pub fn spread(&self) -> f64 {
        match (self.quote.bid, self.quote.ask) {
            (Some(b), Some(a)) => a - b,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    options: Vec<ChainOption>,
}

impl OptionChain {
    pub fn new(options: Vec<ChainOption>) -> Result<Self, CalibrationError> {
        if options.is_empty() {
            return Err(CalibrationError::EmptyChain);
        }
        for (index, o) in options.iter().enumerate() {
            o.quote.validate().map_err(|source| CalibrationError::Quote { index, source })?;
            if !(o.mid.is_finite() && o.mid > 0.0) {
                return Err(CalibrationError::BadPrice { index, price: o.mid });
            }
            let spread = o.spread();
            if !(spread > 0.0) {
                return Err(CalibrationError::BadSpread { index, spread });
            }
        }
        Ok(OptionChain { options })
    }

    pub fn options(&self) -> &[ChainOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn mids(&self) -> Vec<f64> {
        self.options.iter().map(|o| o.mid).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        let spreads: Vec<f64> = self.options.iter().map(ChainOption::spread).collect();
        weights(&spreads).expect("spreads validated on construction")
    }
}

/// `wᵢ = δᵢ⁻² / Σ δⱼ⁻²`.
pub fn weights(spreads: &[f64]) -> Result<Vec<f64>, CalibrationError> {
    if spreads.is_empty() {
        return Err(CalibrationError::EmptyChain);
    }
    if let Some((index, &spread)) = spreads.iter().enumerate().find(|(_, d)| !(**d > 0.0 && d.is_finite())) {
        return Err(CalibrationError::BadSpread { index, spread });
    }
    let inv: Vec<f64> = spreads.iter().map(|d| d.powi(-2)).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.iter().map(|v| v / total).collect())
}

/// `(AARE, MARE)` of model prices against market prices.
///
/// A missing model price counts as an infinite relative error.
pub fn relative_errors(model: &[Option<f64>], market: &[f64]) -> Result<(f64, f64), CalibrationError> {
    if market.is_empty() || model.len() != market.len() {
        return Err(CalibrationError::EmptyChain);
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (index, (m, &c)) in model.iter().zip(market).enumerate() {
        if !(c > 0.0) {
            return Err(CalibrationError::BadPrice { index, price: c });
        }
        let e = m.map_or(f64::INFINITY, |m| ((m - c) / c).abs());
        sum += e;
        max = max.max(e);
    }
    Ok((sum / market.len() as f64, max))
}

/// How integrands are evaluated while calibrating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchMode {
    /// Switch the whole integrand to extended precision when needed.
    On,
    /// Never switch.
    Off,
    /// Switch only `C` when needed.
    Opt,
}

impl SwitchMode {
    pub fn strategy(&self, digits: u32) -> EvalStrategy {
        match self {
            SwitchMode::On => EvalStrategy::AutoFull(digits),
            SwitchMode::Off => EvalStrategy::WorkingOnly,
            SwitchMode::Opt => EvalStrategy::Auto(digits),
        }
    }
}

impl fmt::Display for SwitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchMode::On => "on",
            SwitchMode::Off => "off",
            SwitchMode::Opt => "opt",
        })
    }
}

impl FromStr for SwitchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "on" | "auto" => Ok(SwitchMode::On),
            "off" => Ok(SwitchMode::Off),
            "opt" => Ok(SwitchMode::Opt),
            _ => Err(format!("unknown switch mode '{s}' (expected on, off or opt)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub elite_fraction: f64,
    pub crossover_fraction: f64,
    /// Initial mutation standard deviation as a fraction of the box width.
    pub mutation_scale: f64,
    /// Range of the per-coordinate blend factor of intermediate crossover.
    pub blend_range: (f64, f64),
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 200,
            generations: 20,
            elite_fraction: 0.05,
            crossover_fraction: 0.8,
            mutation_scale: 0.1,
            blend_range: (-0.25, 1.25),
        }
    }
}

impl GaSettings {
    fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: &str| Err(CalibrationError::Settings(m.into()));
        if self.population < 2 || self.population % 2 != 0 {
            return bad("population must be even and at least 2");
        }
        if !(0.0..1.0).contains(&self.elite_fraction) || !(0.0..=1.0).contains(&self.crossover_fraction) {
            return bad("elite fraction must be in [0, 1) and crossover fraction in [0, 1]");
        }
        if !(self.mutation_scale >= 0.0) || !(self.blend_range.0 <= self.blend_range.1) {
            return bad("mutation scale must be >= 0 and blend range ordered");
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqSettings {
    /// Stop when the step or the relative objective change falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step.
    pub jacobian_step: f64,
    pub initial_damping: f64,
}

impl Default for LsqSettings {
    fn default() -> Self {
        LsqSettings { tolerance: 1e-9, max_iterations: 200, jacobian_step: 1e-6, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub model: ModelKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub epsilon: f64,
    pub ga: GaSettings,
    pub lsq: LsqSettings,
    pub seed: u64,
    pub switch_mode: SwitchMode,
    pub digits: u32,
    pub quad: QuadSpec,
}

impl CalibrationSettings {
    /// Default box with `σ ≥ 10⁻⁴`, `ε = 10⁻⁶` and a tight evaluation budget per price.
    pub fn new(model: ModelKind) -> Self {
        let n = model.dimension();
        let mut lower = PARAM_LOWER[..n].to_vec();
        lower[3] = SIGMA_LOWER_BOUND;
        CalibrationSettings {
            model,
            lower,
            upper: PARAM_UPPER[..n].to_vec(),
            epsilon: CALIBRATION_EPSILON,
            ga: GaSettings::default(),
            lsq: LsqSettings::default(),
            seed: 0,
            switch_mode: SwitchMode::Opt,
            digits: DEFAULT_DIGITS,
            quad: QuadSpec { max_fevals: 20_000, ..QuadSpec::default() },
        }
    }

    pub fn with_sigma_lower_bound(mut self, lb: f64) -> Self {
        self.lower[3] = lb;
        self
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let n = self.model.dimension();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(CalibrationError::Settings(format!("{} needs {n} bounds", self.model)));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !(lo >= PARAM_LOWER[j] && hi <= PARAM_UPPER[j] && lo <= hi) {
                return Err(CalibrationError::Settings(format!(
                    "bounds [{lo}, {hi}] for {} outside [{}, {}]",
                    crate::model::PARAM_NAMES[j],
                    PARAM_LOWER[j],
                    PARAM_UPPER[j]
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(CalibrationError::Settings("epsilon must be > 0".into()));
        }
        self.ga.validate()?;
        self.quad.validate().map_err(|e| CalibrationError::Settings(e.to_string()))
    }

    fn strategy(&self) -> EvalStrategy {
        self.switch_mode.strategy(self.digits)
    }
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = if v.is_nan() { *lo } else { v.clamp(*lo, *hi) };
    }
}

/// Model prices for every option; `None` where the integral failed or did not converge.
pub fn model_prices(
    chi: &[f64],
    chain: &OptionChain,
    settings: &CalibrationSettings,
    telemetry: Option<&SwitchTelemetry>,
) -> Vec<Option<f64>> {
    let strategy = settings.strategy();
    chain
        .options()
        .iter()
        .map(|o| {
            let r = price_call_reduced(settings.model, chi, settings.epsilon, &o.quote, &settings.quad, strategy);
            if let Some(t) = telemetry {
                t.record(r.as_ref().is_ok_and(|r| r.strategy_used != EvalStrategy::WorkingOnly));
            }
            r.ok().filter(|r| r.quad.converged && r.price.is_finite()).map(|r| r.price)
        })
        .collect()
}

/// `rᵢ = √wᵢ (Cᵢ − C*ᵢ)`, or `√PENALTY` where no price is available.
pub fn residuals(prices: &[Option<f64>], chain: &OptionChain, weights: &[f64]) -> Vec<f64> {
    prices
        .iter()
        .zip(chain.options())
        .zip(weights)
        .map(|((p, o), w)| match p {
            Some(p) => w.sqrt() * (p - o.mid),
            None => PENALTY.sqrt(),
        })
        .collect()
}

/// `G(χ) = Σ wᵢ (Cᵢ − C*ᵢ)²` with penalties.
pub fn objective(chi: &[f64], chain: &OptionChain, settings: &CalibrationSettings) -> f64 {
    let prices = model_prices(chi, chain, settings, None);
    residuals(&prices, chain, &chain.weights()).iter().map(|r| r * r).sum()
}

pub fn error_metrics(
    chi: &[f64],
    chain: &OptionChain,
    settings: &CalibrationSettings,
) -> Result<(f64, f64), CalibrationError> {
    relative_errors(&model_prices(chi, chain, settings, None), &chain.mids())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best value after the initial population and after each generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn rank(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    idx.sort_by(|&a, &b| key(values[a]).total_cmp(&key(values[b])).then(a.cmp(&b)));
    idx
}

/// Minimizes `f` over a box with an elitist genetic algorithm.
///
/// Deterministic for a fixed seed regardless of thread count: all random
/// numbers are drawn sequentially, only the evaluations run in parallel.
pub fn genetic_minimize<F>(f: F, lower: &[f64], upper: &[f64], ga: &GaSettings, seed: u64) -> GaOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = lower.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop: Vec<Vec<f64>> = (0..ga.population)
        .map(|_| (0..dim).map(|j| rng.random_range(lower[j]..=upper[j])).collect())
        .collect();
    let mut fit: Vec<f64> = pop.par_iter().map(|x| f(x)).collect();
    let mut evaluations = pop.len();
    let mut order = rank(&fit);
    let mut trace = vec![fit[order[0]]];
    let elites = ga.elite_count();
    let n_cross = (ga.crossover_fraction * (ga.population - elites) as f64).round() as usize;
    for g in 0..ga.generations {
        let decay = 1.0 - g as f64 / ga.generations as f64;
        let mut next: Vec<Vec<f64>> = order[..elites].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < ga.population {
            let a = &pop[rng.random_range(0..pop.len())];
            let mut child = if next.len() < elites + n_cross {
                let b = &pop[rng.random_range(0..pop.len())];
                (0..dim)
                    .map(|j| a[j] + rng.random_range(ga.blend_range.0..=ga.blend_range.1) * (b[j] - a[j]))
                    .collect::<Vec<f64>>()
            } else {
                (0..dim)
                    .map(|j| {
                        let sd = ga.mutation_scale * (upper[j] - lower[j]) * decay;
                        a[j] + Normal::new(0.0, sd).map_or(0.0, |n| n.sample(&mut rng))
                    })
                    .collect()
            };
            clamp_into(&mut child, lower, upper);
            next.push(child);
        }
        let mut next_fit: Vec<f64> = order[..elites].iter().map(|&i| fit[i]).collect();
        next_fit.extend(next[elites..].par_iter().map(|x| f(x)).collect::<Vec<_>>());
        evaluations += ga.population - elites;
        pop = next;
        fit = next_fit;
        order = rank(&fit);
        trace.push(fit[order[0]]);
    }
    GaOutcome { best: pop[order[0]].clone(), best_value: fit[order[0]], trace, evaluations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after every iteration, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Bounded Levenberg-Marquardt on `½‖r(x)‖²`, steps projected onto the box.
pub fn levenberg_marquardt<F>(r: F, x0: &[f64], lower: &[f64], upper: &[f64], lsq: &LsqSettings) -> LmOutcome
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);
    let mut res = r(&x);
    let mut value = sum_sq(&res);
    let mut trace = vec![value];
    let mut mu = lsq.initial_damping;
    let mut normal: Option<(DMatrix<f64>, DVector<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let tol = lsq.tolerance;
    while iterations < lsq.max_iterations {
        if value == 0.0 {
            converged = true;
            break;
        }
        if normal.is_none() {
            let cols: Vec<Option<Vec<f64>>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut h = lsq.jacobian_step * x[j].abs().max(1.0);
                    if x[j] + h > upper[j] {
                        h = -h;
                    }
                    let mut xh = x.clone();
                    xh[j] += h;
                    let rh = r(&xh);
                    let col: Vec<f64> = rh.iter().zip(&res).map(|(a, b)| (a - b) / h).collect();
                    col.iter().all(|v| v.is_finite()).then_some(col)
                })
                .collect();
            if cols.iter().any(Option::is_none) {
                iterations += 1;
                mu *= 10.0;
                trace.push(value);
                continue;
            }
            let jac = DMatrix::from_fn(res.len(), n, |i, j| cols[j].as_ref().unwrap()[i]);
            let rv = DVector::from_column_slice(&res);
            normal = Some((jac.transpose() * &jac, jac.transpose() * rv));
        }
        let (a, g) = normal.as_ref().unwrap();
        iterations += 1;
        let mut damped = a.clone();
        let mut rhs = -g.clone();
        for j in 0..n {
            damped[(j, j)] += mu * a[(j, j)].max(1e-12);
        }
        // Coordinates pinned at a bound with descent pointing outward stay put.
        for j in 0..n {
            if (x[j] <= lower[j] && g[j] > 0.0) || (x[j] >= upper[j] && g[j] < 0.0) {
                damped.row_mut(j).fill(0.0);
                damped.column_mut(j).fill(0.0);
                damped[(j, j)] = 1.0;
                rhs[j] = 0.0;
            }
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&rhs)) else {
            mu *= 10.0;
            trace.push(value);
            continue;
        };
        let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        clamp_into(&mut xn, lower, upper);
        let moved = xn.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let small_step = moved <= tol * (scale + tol);
        let rn = r(&xn);
        let vn = sum_sq(&rn);
        if vn < value {
            let drop = value - vn;
            x = xn;
            res = rn;
            value = vn;
            mu = (mu / 10.0).max(1e-15);
            normal = None;
            trace.push(value);
            if small_step || drop <= tol * value {
                converged = true;
                break;
            }
        } else {
            mu *= 10.0;
            trace.push(value);
            if small_step || mu > 1e20 {
                converged = true;
                break;
            }
        }
    }
    LmOutcome { x, value, trace, iterations, converged }
}

/// Global stage: the genetic algorithm on `G`.
pub fn global_stage(
    chain: &OptionChain,
    settings: &CalibrationSettings,
    telemetry: Option<&SwitchTelemetry>,
) -> Result<GaOutcome, CalibrationError> {
    settings.validate()?;
    let w = chain.weights();
    let f = |chi: &[f64]| sum_sq(&residuals(&model_prices(chi, chain, settings, telemetry), chain, &w));
    Ok(genetic_minimize(f, &settings.lower, &settings.upper, &settings.ga, settings.seed))
}

/// Per-option fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionResidual {
    pub tau: f64,
    pub strike: f64,
    pub market: f64,
    pub model: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub model: ModelKind,
    pub switch_mode: SwitchMode,
    pub seed: u64,
    pub params: Vec<f64>,
    pub chi_star: ModelParams,
    pub objective: f64,
    #[serde(with = "crate::serde_float")]
    pub aare: f64,
    #[serde(with = "crate::serde_float")]
    pub mare: f64,
    pub ga_trace: Vec<f64>,
    pub trace: Vec<f64>,
    pub lsq_iterations: usize,
    pub lsq_converged: bool,
    pub penalized: usize,
    pub switch_stats: SwitchStats,
    pub residuals: Vec<OptionResidual>,
    /// Method details chosen here rather than taken from a reference description.
    pub assumptions: Vec<String>,
}

fn assumptions() -> Vec<String> {
    vec![
        "ga: intermediate crossover blend factor uniform in [-0.25, 1.25]".into(),
        "ga: gaussian mutation sd 10% of box width, decaying linearly to 0".into(),
        "bounds: projection onto the box in both stages".into(),
        "lsq: levenberg-marquardt, diagonal-scaled damping".into(),
    ]
}

/// Local stage from `chi0`; `ga_trace` is carried into the report.
pub fn local_stage(
    chi0: &[f64],
    chain: &OptionChain,
    settings: &CalibrationSettings,
    telemetry: &SwitchTelemetry,
    ga_trace: Vec<f64>,
) -> Result<CalibrationReport, CalibrationError> {
    settings.validate()?;
    if chi0.len() != settings.model.dimension() {
        return Err(CalibrationError::Settings(format!("start point needs {} values", settings.model.dimension())));
    }
    let w = chain.weights();
    let r = |chi: &[f64]| residuals(&model_prices(chi, chain, settings, Some(telemetry)), chain, &w);
    let lm = levenberg_marquardt(r, chi0, &settings.lower, &settings.upper, &settings.lsq);
    let prices = model_prices(&lm.x, chain, settings, Some(telemetry));
    let (aare, mare) = relative_errors(&prices, &chain.mids())?;
    let residuals = chain
        .options()
        .iter()
        .zip(&prices)
        .zip(&w)
        .map(|((o, p), w)| OptionResidual { tau: o.quote.tau, strike: o.quote.strike, market: o.mid, model: *p, weight: *w })
        .collect();
    Ok(CalibrationReport {
        schema_version: SCHEMA_VERSION,
        model: settings.model,
        switch_mode: settings.switch_mode,
        seed: settings.seed,
        chi_star: settings.model.params(&lm.x, settings.epsilon)?,
        params: lm.x,
        objective: lm.value,
        aare,
        mare,
        ga_trace,
        trace: lm.trace,
        lsq_iterations: lm.iterations,
        lsq_converged: lm.converged,
        penalized: prices.iter().filter(|p| p.is_none()).count(),
        switch_stats: telemetry.snapshot(),
        residuals,
        assumptions: assumptions(),
    })
}

/// Both stages with switch telemetry accumulated across them.
pub fn calibrate(chain: &OptionChain, settings: &CalibrationSettings) -> Result<CalibrationReport, CalibrationError> {
    let telemetry = SwitchTelemetry::new();
    let ga = global_stage(chain, settings, Some(&telemetry))?;
    log::info!("global stage: G = {:e} after {} evaluations", ga.best_value, ga.evaluations);
    local_stage(&ga.best, chain, settings, &telemetry, ga.trace)
}

/// 20 quotes: maturities 0.1..2 years by strikes 90..105% of spot.
pub fn synthetic_quotes(spot: f64, rate: f64) -> Vec<MarketQuote> {
    let mut q = Vec::new();
    for tau in [0.1, 0.25, 0.5, 1.0, 2.0] {
        for m in [0.9, 0.95, 1.0, 1.05] {
            q.push(MarketQuote::new(tau, m * spot, rate, spot));
        }
    }
    q
}

/// A chain priced by the model itself at `digits` over the whole integrand;
/// each spread is `spread_fraction` of the mid price.
pub fn synthetic_chain(
    model: ModelKind,
    params: &[f64],
    epsilon: f64,
    quotes: &[MarketQuote],
    spread_fraction: f64,
    digits: u32,
) -> Result<OptionChain, CalibrationError> {
    let spec = QuadSpec::default();
    let mut options = Vec::with_capacity(quotes.len());
    for (index, q) in quotes.iter().enumerate() {
        let r = price_call_reduced(model, params, epsilon, q, &spec, EvalStrategy::ExtendedFull(digits))
            .map_err(|e| CalibrationError::Settings(format!("pricing option {index}: {e}")))?;
        let half = 0.5 * spread_fraction * r.price;
        options.push(ChainOption { quote: q.with_spread(r.price - half, r.price + half), mid: r.price });
    }
    OptionChain::new(options)
}
